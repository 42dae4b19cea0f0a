//! Control-rate resampling of raw episodes into training arrays.
//!
//! Episodes are recorded at a fine sample rate; the models operate at the
//! 10 Hz control period. Each control window contributes one training row:
//! the state at the window start, the mean wrench over the window, and the
//! window-mean acceleration label `(v_end − v_start)/dt`.

use crate::features::{object_feature, robot_feature, RobotFeatureInputs};
use crate::AdaptiveError;
use pushnav_se2::{transform_wrench, SE2Pose, SE2Twist, Wrench2D};
use pushnav_sim::{Episode, RobotParams, CONTROL_DT};

/// One control-rate training row.
#[derive(Debug, Clone)]
pub struct ControlSample {
    pub t: f64,
    pub object_pose: SE2Pose,
    pub object_twist: SE2Twist,
    /// Mean world-frame wrench over the window, torque about `contact_point`.
    pub wrench_world: Wrench2D,
    pub contact_point: [f64; 2],
    pub contact_flag: bool,
    /// Object acceleration label in the window-start body frame.
    pub label_body: [f64; 3],
    /// Unnormalized object feature.
    pub feature: [f64; 10],
    /// Unnormalized robot feature.
    pub robot_feature: [f64; 28],
    /// Robot targets: body-frame acceleration (3) + robot-frame force (2).
    pub robot_target: [f64; 5],
}

/// All control-rate rows for one dynamics condition, time-contiguous.
#[derive(Debug, Clone)]
pub struct ConditionData {
    pub condition_id: u32,
    pub summary: String,
    pub half_extents: [f64; 2],
    pub dt: f64,
    pub samples: Vec<ControlSample>,
}

impl ConditionData {
    /// Diagonal label covariance, floored at 1e-4 per axis.
    pub fn sigma_diag(&self) -> [f64; 3] {
        let n = self.samples.len().max(1) as f64;
        let mut mean = [0.0; 3];
        for s in &self.samples {
            for k in 0..3 {
                mean[k] += s.label_body[k] / n;
            }
        }
        let mut var = [0.0; 3];
        for s in &self.samples {
            for k in 0..3 {
                let d = s.label_body[k] - mean[k];
                var[k] += d * d / n;
            }
        }
        [var[0].max(1e-4), var[1].max(1e-4), var[2].max(1e-4)]
    }
}

/// A resampled multi-condition training set.
#[derive(Debug, Clone, Default)]
pub struct TrainSet {
    pub conditions: Vec<ConditionData>,
}

impl TrainSet {
    pub fn total_samples(&self) -> usize {
        self.conditions.iter().map(|c| c.samples.len()).sum()
    }
}

/// Resample one episode to the control rate.
pub fn resample_episode(
    episode: &Episode,
    robot_params: &RobotParams,
) -> Result<ConditionData, AdaptiveError> {
    let stride = (CONTROL_DT / episode.dt).round() as usize;
    if stride == 0 || episode.samples.len() < 2 * stride + 1 {
        return Err(AdaptiveError::InvalidDataset(format!(
            "episode too short: {} samples at dt {}",
            episode.samples.len(),
            episode.dt
        )));
    }
    let n_windows = (episode.samples.len() - 1) / stride;
    let mut samples = Vec::with_capacity(n_windows);

    let gamma_cmd = |w: isize| -> f64 {
        if w < 0 {
            0.0
        } else {
            episode.samples[w as usize * stride].u[2]
                .clamp(-robot_params.gamma_max, robot_params.gamma_max)
        }
    };

    for w in 0..n_windows {
        let i0 = w * stride;
        let i1 = i0 + stride;
        let s0 = &episode.samples[i0];
        let s1 = &episode.samples[i1];

        let object_pose = SE2Pose::new(s0.q_o[0], s0.q_o[1], s0.q_o[2]);
        let object_twist = SE2Twist::new(s0.qdot_o[0], s0.qdot_o[1], s0.qdot_o[2]);
        let robot_pose = SE2Pose::new(s0.q_r[0], s0.q_r[1], s0.q_r[2]);
        let robot_twist = SE2Twist::new(s0.qdot_r[0], s0.qdot_r[1], s0.qdot_r[2]);

        // Mean wrench over the window: accumulate force moments about the
        // world origin, then shift to the force-weighted mean point.
        let mut fx = 0.0;
        let mut fy = 0.0;
        let mut tau_origin = 0.0;
        let mut pt = [0.0; 2];
        let mut pt_w = 0.0;
        let mut contact = false;
        for i in i0..i1 {
            let s = &episode.samples[i];
            fx += s.gamma_w[0];
            fy += s.gamma_w[1];
            tau_origin +=
                s.gamma_w[2] + s.contact_pt[0] * s.gamma_w[1] - s.contact_pt[1] * s.gamma_w[0];
            let fmag = s.gamma_w[0].hypot(s.gamma_w[1]);
            pt[0] += s.contact_pt[0] * fmag;
            pt[1] += s.contact_pt[1] * fmag;
            pt_w += fmag;
            contact |= s.contact_flag;
        }
        let k = stride as f64;
        fx /= k;
        fy /= k;
        tau_origin /= k;
        let contact_point = if pt_w > 0.0 {
            [pt[0] / pt_w, pt[1] / pt_w]
        } else {
            s0.contact_pt
        };
        let tau = tau_origin - (contact_point[0] * fy - contact_point[1] * fx);
        let wrench_world = Wrench2D::new(fx, fy, tau);

        // Window-mean acceleration label, rotated into the start body frame.
        let dt_w = CONTROL_DT;
        let a_world = [
            (s1.qdot_o[0] - s0.qdot_o[0]) / dt_w,
            (s1.qdot_o[1] - s0.qdot_o[1]) / dt_w,
            (s1.qdot_o[2] - s0.qdot_o[2]) / dt_w,
        ];
        let a_body = object_pose.inverse_rotate_vector([a_world[0], a_world[1]]);
        let label_body = [a_body[0], a_body[1], a_world[2]];

        let feature = object_feature(object_pose, object_twist, wrench_world, contact_point);

        // Robot side: causal rates from the previous window.
        let prev0 = if w > 0 {
            &episode.samples[(w - 1) * stride]
        } else {
            s0
        };
        let lean_rate = [
            (s0.lean[0] - prev0.lean[0]) / dt_w,
            (s0.lean[1] - prev0.lean[1]) / dt_w,
        ];
        let prev_wrench_r = if w > 0 {
            let pw = &samples[w - 1] as &ControlSample;
            let wr = transform_wrench(robot_pose, pw.wrench_world, pw.contact_point);
            [wr.fx, wr.fy, wr.tau]
        } else {
            [0.0; 3]
        };
        let rf = robot_feature(&RobotFeatureInputs {
            robot_pose,
            robot_twist,
            lean: s0.lean,
            lean_rate,
            u: s0.u,
            gamma: gamma_cmd(w as isize - 1),
            gamma_prev: gamma_cmd(w as isize - 2),
            prev_wrench_r,
            object_pose,
            object_half_extents: episode.object.half_extents,
            dt: dt_w,
            reach: robot_params.reach,
            contact_width: robot_params.contact_width,
        });

        let ra_world = [
            (s1.qdot_r[0] - s0.qdot_r[0]) / dt_w,
            (s1.qdot_r[1] - s0.qdot_r[1]) / dt_w,
            (s1.qdot_r[2] - s0.qdot_r[2]) / dt_w,
        ];
        let ra_body = robot_pose.inverse_rotate_vector([ra_world[0], ra_world[1]]);
        let wr = transform_wrench(robot_pose, wrench_world, contact_point);
        let robot_target = [ra_body[0], ra_body[1], ra_world[2], wr.fx, wr.fy];

        samples.push(ControlSample {
            t: s0.t,
            object_pose,
            object_twist,
            wrench_world,
            contact_point,
            contact_flag: contact,
            label_body,
            feature,
            robot_feature: rf,
            robot_target,
        });
    }

    Ok(ConditionData {
        condition_id: episode.object.condition_id,
        summary: episode.object.summary(),
        half_extents: episode.object.half_extents,
        dt: CONTROL_DT,
        samples,
    })
}

/// Resample a set of episodes into a training set; conditions keep the
/// episode order.
pub fn resample_episodes(
    episodes: &[Episode],
    robot_params: &RobotParams,
) -> Result<TrainSet, AdaptiveError> {
    let mut conditions = Vec::with_capacity(episodes.len());
    for ep in episodes {
        conditions.push(resample_episode(ep, robot_params)?);
    }
    Ok(TrainSet { conditions })
}
