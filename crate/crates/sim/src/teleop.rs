//! Scripted teleoperation: a waypoint-chasing push policy with
//! Ornstein-Uhlenbeck noise on the lean and steering commands.
//!
//! Replaces a human operator for dataset generation. Episodes alternate
//! pushing segments (the robot presses its end-effectors into the face
//! opposite the desired motion) with occasional rotation segments (a
//! steering-angle bias twists the object), and re-stations around the object
//! when the target face changes. Direction changes and free-decay gaps
//! excite all three degrees of freedom.

use crate::episode::{Episode, Sample};
use crate::object::ObjectParams;
use crate::robot::{RobotParams, RobotState};
use crate::world::{ObjectInstance, PushWorld};
use crate::{SimError, GRAVITY, SIM_DT};
use pushnav_se2::{wrap_angle, SE2Pose, SE2Twist};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Policy constants for [`scripted_teleop`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeleopConfig {
    /// Sample spacing in the recorded episode (s).
    pub sample_dt: f64,
    /// Segment duration range (s).
    pub segment_range: [f64; 2],
    /// Probability that a segment is a rotation segment.
    pub rotation_prob: f64,
    /// OU mean-reversion rate (1/s).
    pub ou_theta: f64,
    /// OU stationary std on the lean channels (rad).
    pub ou_sigma_lean: f64,
    /// OU stationary std on the steering channel (rad).
    pub ou_sigma_gamma: f64,
    /// Abort when contact is lost for longer than this (s).
    pub contact_loss_limit: f64,
    /// End-effector press depth while pushing (m).
    pub press_depth: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        TeleopConfig {
            sample_dt: 0.01,
            segment_range: [5.0, 10.0],
            rotation_prob: 0.25,
            ou_theta: 1.5,
            ou_sigma_lean: 0.008,
            ou_sigma_gamma: 0.08,
            contact_loss_limit: 5.0,
            press_depth: 0.04,
        }
    }
}

struct Segment {
    /// Unit direction the object should move (world frame).
    push_dir: [f64; 2],
    /// Steering bias for rotation segments.
    gamma_bias: f64,
    ends_at: f64,
}

/// The face of a rectangle to push on to move it along `push_dir`:
/// returns (face center local, outward normal local).
fn push_face(pose: SE2Pose, half_extents: [f64; 2], push_dir: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let d = pose.inverse_rotate_vector(push_dir);
    if d[0].abs() >= d[1].abs() {
        let s = d[0].signum();
        ([-s * half_extents[0], 0.0], [-s, 0.0])
    } else {
        let s = d[1].signum();
        ([0.0, -s * half_extents[1]], [0.0, -s])
    }
}

/// Generate one episode of scripted pushing against a single object.
///
/// Deterministic for a fixed seed; errors with [`SimError::ContactLost`]
/// when the policy fails to touch the object for longer than the configured
/// limit.
pub fn scripted_teleop(
    params: &ObjectParams,
    config: &TeleopConfig,
    duration: f64,
    seed: u64,
) -> Result<Episode, SimError> {
    assert!(duration > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let robot_params = RobotParams::default();

    let object = ObjectInstance {
        params: params.clone(),
        pose: SE2Pose::identity(),
        twist: SE2Twist::default(),
    };
    let start = SE2Pose::new(
        -(params.half_extents[0] + robot_params.reach + 0.25),
        rng.gen_range(-0.1..0.1),
        0.0,
    );
    let mut world = PushWorld::new(
        RobotState::at_pose(start, &robot_params),
        robot_params.clone(),
        vec![object],
    );

    let mut segment = new_segment(&mut rng, [1.0, 0.0], 0.0, config);
    let mut ou = [0.0f64; 3];
    let mut u = [0.0f64; 3];
    let mut heading_target = 0.0f64;
    let substeps_per_sample = (config.sample_dt / SIM_DT).round() as usize;
    assert!(substeps_per_sample >= 1);
    let n_samples = (duration / config.sample_dt).round() as usize;
    let control_every = (crate::CONTROL_DT / config.sample_dt).round() as usize;

    let mut samples = Vec::with_capacity(n_samples);
    let mut accel_labels = Vec::with_capacity(n_samples);
    let mut last_contact_t = 0.0f64;

    for i in 0..n_samples {
        let t = i as f64 * config.sample_dt;

        if t >= segment.ends_at {
            segment = new_segment(&mut rng, segment.push_dir, t, config);
        }

        // Command update at the control rate.
        if i % control_every == 0 {
            let obj = &world.objects[0];
            // After a long contact gap, abandon the segment face and press
            // the nearest face to reacquire the object.
            let reacquire = t - last_contact_t > 0.5 * config.contact_loss_limit;
            let dir = if reacquire {
                let d = [obj.pose.x - world.robot.pose.x, obj.pose.y - world.robot.pose.y];
                let n = d[0].hypot(d[1]).max(1e-9);
                [d[0] / n, d[1] / n]
            } else {
                segment.push_dir
            };
            let (face_local, n_local) = push_face(obj.pose, params.half_extents, dir);
            let face_world = obj.pose.transform_point(face_local);
            let n_world = obj.pose.rotate_vector(n_local);
            let rp = [world.robot.pose.x, world.robot.pose.y];

            // Desired station: pressed slightly through the face.
            let depth = config.press_depth;
            let mut p_des = [
                face_world[0] + n_world[0] * (robot_params.reach - depth),
                face_world[1] + n_world[1] * (robot_params.reach - depth),
            ];

            // If the robot sits on the wrong side, orbit outside the
            // footprint instead of driving through it.
            let to_robot = [rp[0] - obj.pose.x, rp[1] - obj.pose.y];
            let to_station = [p_des[0] - obj.pose.x, p_des[1] - obj.pose.y];
            let dot = to_robot[0] * to_station[0] + to_robot[1] * to_station[1];
            let nr = to_robot[0].hypot(to_robot[1]).max(1e-9);
            let ns = to_station[0].hypot(to_station[1]).max(1e-9);
            if !reacquire && dot / (nr * ns) < 0.5 {
                // Rotate the robot's bearing ~55 deg toward the station.
                let cross = to_robot[0] * to_station[1] - to_robot[1] * to_station[0];
                let ang = 0.96f64.copysign(cross);
                let (s, c) = ang.sin_cos();
                let orbit_r = params.half_extents[0].max(params.half_extents[1])
                    + robot_params.reach
                    + 0.15;
                p_des = [
                    obj.pose.x + (c * to_robot[0] - s * to_robot[1]) / nr * orbit_r,
                    obj.pose.y + (s * to_robot[0] + c * to_robot[1]) / nr * orbit_r,
                ];
            }

            // Track the station point, which rides on the (possibly moving)
            // object: damp relative to the station velocity.
            let v_station = [
                obj.twist.vx - obj.twist.omega * (p_des[1] - obj.pose.y),
                obj.twist.vy + obj.twist.omega * (p_des[0] - obj.pose.x),
            ];
            let kp = 3.5;
            let kd = 1.8;
            let a_des = [
                kp * (p_des[0] - rp[0]) + kd * (v_station[0] - world.robot.twist.vx),
                kp * (p_des[1] - rp[1]) + kd * (v_station[1] - world.robot.twist.vy),
            ];
            let a_body = world.robot.pose.inverse_rotate_vector(a_des);
            u[0] = a_body[0] / GRAVITY + ou[0];
            u[1] = a_body[1] / GRAVITY + ou[1];
            u[2] = segment.gamma_bias + ou[2];
            heading_target = (face_world[1] - rp[1]).atan2(face_world[0] - rp[0]);
            // While pressed in, face the contact point steadily.
            if (nr - ns).abs() < 0.3 {
                heading_target = (-n_world[1]).atan2(-n_world[0]);
            }
        }

        // OU noise evolves at the sample rate.
        for (k, sigma) in [
            config.ou_sigma_lean,
            config.ou_sigma_lean,
            config.ou_sigma_gamma,
        ]
        .iter()
        .enumerate()
        {
            let noise: f64 = rng.gen_range(-1.0..1.0);
            ou[k] += -config.ou_theta * ou[k] * config.sample_dt
                + sigma * (2.0 * config.ou_theta * config.sample_dt).sqrt() * noise * 1.732;
        }

        // Record the pre-step state.
        let rs = &world.robot;
        let os = &world.objects[0];
        let mut sample = Sample {
            t,
            q_r: [rs.pose.x, rs.pose.y, rs.pose.yaw],
            qdot_r: [rs.twist.vx, rs.twist.vy, rs.twist.omega],
            lean: rs.lean,
            q_o: [os.pose.x, os.pose.y, os.pose.yaw],
            qdot_o: [os.twist.vx, os.twist.vy, os.twist.omega],
            u,
            gamma_w: [0.0; 3],
            contact_pt: [0.0; 2],
            contact_flag: false,
        };

        let tick = world.control_tick(u, heading_target, substeps_per_sample)?;
        sample.gamma_w = [
            tick.wrench_world.fx,
            tick.wrench_world.fy,
            tick.wrench_world.tau,
        ];
        sample.contact_pt = tick.contact_point;
        sample.contact_flag = tick.contact_fraction > 0.0;
        if sample.contact_flag {
            last_contact_t = t;
        } else if t - last_contact_t > config.contact_loss_limit {
            return Err(SimError::ContactLost {
                limit: config.contact_loss_limit,
                t,
            });
        }
        samples.push(sample);
        accel_labels.push(tick.object_accel);
    }

    Ok(Episode {
        dt: config.sample_dt,
        object: params.clone(),
        samples,
        accel_labels,
    })
}

fn new_segment(rng: &mut ChaCha8Rng, prev_dir: [f64; 2], now: f64, config: &TeleopConfig) -> Segment {
    let rotate = rng.gen_bool(config.rotation_prob);
    let turn: f64 = {
        let mag = rng.gen_range(0.7..2.1);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let heading = wrap_angle(prev_dir[1].atan2(prev_dir[0]) + turn);
    let push_dir = [heading.cos(), heading.sin()];
    let gamma_bias = if rotate {
        let mag = rng.gen_range(0.25..0.5);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    } else {
        0.0
    };
    Segment {
        push_dir: if rotate { prev_dir } else { push_dir },
        gamma_bias,
        ends_at: now + rng.gen_range(config.segment_range[0]..config.segment_range[1]),
    }
}
