//! The composite transition model: the robot network supplies robot
//! acceleration and the interaction force, the force is re-expressed in the
//! object frame and fed with the object state through the basis network and
//! the adapted coefficients, and both bodies are integrated one control
//! period forward.
//!
//! The hot path is `step_batch`, which evaluates the two networks once per
//! call over a whole column-batch of states; `step` delegates to it so the
//! single-state and batched routes are identical by construction.

use crate::basis::BasisOutput;
use crate::features::{object_feature, robot_feature, Normalizer, RobotFeatureInputs};
use nalgebra::DMatrix;
use pushnav_neural::Mlp;
use pushnav_se2::{integrate, transform_wrench, wrap_angle, SE2Accel, SE2Pose, SE2Twist, Wrench2D};
use pushnav_sim::{ee_placement, RobotParams};
use serde::{Deserialize, Serialize};

/// Predicted interaction forces below this magnitude are treated as no
/// contact (N).
pub const FORCE_GATE: f64 = 0.5;

/// Everything the learned model propagates from one control period to the
/// next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub robot_pose: SE2Pose,
    pub robot_twist: SE2Twist,
    pub lean: [f64; 2],
    pub lean_rate: [f64; 2],
    /// Steering angle currently realized.
    pub gamma: f64,
    /// Steering angle one control period earlier.
    pub gamma_prev: f64,
    /// Previous interaction wrench in the robot frame.
    pub prev_wrench_r: [f64; 3],
    pub object_pose: SE2Pose,
    pub object_twist: SE2Twist,
    /// Heading-servo target, held fixed over a rollout.
    pub heading_target: f64,
}

impl ModelState {
    /// A state at rest with the robot and object at the given poses.
    pub fn at_rest(robot_pose: SE2Pose, object_pose: SE2Pose) -> Self {
        ModelState {
            robot_pose,
            robot_twist: SE2Twist::default(),
            lean: [0.0; 2],
            lean_rate: [0.0; 2],
            gamma: 0.0,
            gamma_prev: 0.0,
            prev_wrench_r: [0.0; 3],
            object_pose,
            object_twist: SE2Twist::default(),
            heading_target: robot_pose.yaw,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.robot_pose.is_finite()
            && self.robot_twist.is_finite()
            && self.object_pose.is_finite()
            && self.object_twist.is_finite()
            && self.lean.iter().all(|v| v.is_finite())
    }
}

/// A one-control-period transition model the sampling controller can roll
/// out. Implementations must be thread-safe; rollouts run in parallel.
pub trait Dynamics: Sync {
    /// Advance one state by one control period under command `u`.
    fn step(&self, state: &ModelState, u: [f64; 3]) -> ModelState {
        let mut s = [*state];
        self.step_batch(&mut s, &[u]);
        s[0]
    }

    /// Advance many states in lockstep; `controls[i]` applies to
    /// `states[i]`.
    fn step_batch(&self, states: &mut [ModelState], controls: &[[f64; 3]]);

    /// Control period (s).
    fn dt(&self) -> f64;
}

/// The learned composite model.
#[derive(Clone)]
pub struct LearnedDynamics<'a> {
    pub psi: &'a Mlp,
    pub robot_net: &'a Mlp,
    pub feat_norm: &'a Normalizer,
    pub robot_norm: &'a Normalizer,
    /// Adapted object coefficients.
    pub a_hat: [f64; 2],
    pub robot_params: &'a RobotParams,
    pub object_half_extents: [f64; 2],
    pub control_dt: f64,
}

impl<'a> LearnedDynamics<'a> {
    /// Robot-side features for one state (unnormalized).
    fn robot_inputs(&self, s: &ModelState, u: [f64; 3]) -> RobotFeatureInputs {
        RobotFeatureInputs {
            robot_pose: s.robot_pose,
            robot_twist: s.robot_twist,
            lean: s.lean,
            lean_rate: s.lean_rate,
            u,
            gamma: s.gamma,
            gamma_prev: s.gamma_prev,
            prev_wrench_r: s.prev_wrench_r,
            object_pose: s.object_pose,
            object_half_extents: self.object_half_extents,
            dt: self.control_dt,
            reach: self.robot_params.reach,
            contact_width: self.robot_params.contact_width,
        }
    }
}

impl<'a> Dynamics for LearnedDynamics<'a> {
    fn dt(&self) -> f64 {
        self.control_dt
    }

    fn step_batch(&self, states: &mut [ModelState], controls: &[[f64; 3]]) {
        let n = states.len();
        assert_eq!(n, controls.len());
        if n == 0 {
            return;
        }
        let dt = self.control_dt;
        let rp = self.robot_params;

        // Robot network over the whole batch.
        let mut robot_in = DMatrix::<f64>::zeros(28, n);
        for (i, s) in states.iter().enumerate() {
            let raw = robot_feature(&self.robot_inputs(s, controls[i]));
            let mut col = robot_in.column_mut(i);
            for k in 0..28 {
                col[k] = (raw[k] - self.robot_norm.mean[k]) / self.robot_norm.std[k];
            }
        }
        let robot_out = self.robot_net.forward_batch(&robot_in);

        // Interaction force per state, gated; object features from it.
        let mut obj_in = DMatrix::<f64>::zeros(10, n);
        let mut wrenches = vec![(Wrench2D::zero(), [0.0; 2]); n];
        for (i, s) in states.iter().enumerate() {
            let mut f_r = [robot_out[(3, i)], robot_out[(4, i)]];
            if f_r[0].hypot(f_r[1]) < FORCE_GATE {
                f_r = [0.0, 0.0];
            }
            let f_w = s.robot_pose.rotate_vector(f_r);
            let (ee_l, ee_r) = ee_placement(
                [rp.reach, 0.0],
                s.gamma,
                rp.contact_width,
            );
            let mid_local = [
                (ee_l[0] + ee_r[0]) / 2.0,
                (ee_l[1] + ee_r[1]) / 2.0,
            ];
            let point = s.robot_pose.transform_point(mid_local);
            let w = Wrench2D::new(f_w[0], f_w[1], 0.0);
            wrenches[i] = (w, point);
            let raw = object_feature(s.object_pose, s.object_twist, w, point);
            let mut col = obj_in.column_mut(i);
            for k in 0..10 {
                col[k] = (raw[k] - self.feat_norm.mean[k]) / self.feat_norm.std[k];
            }
        }
        let obj_out = self.psi.forward_batch(&obj_in);

        for (i, s) in states.iter_mut().enumerate() {
            let u = controls[i];
            // Object: basis times coefficients, body to world, integrate.
            let psi = BasisOutput::from_raw(obj_out.column(i).as_slice());
            let a_body = psi.apply(self.a_hat);
            let a_xy = s.object_pose.rotate_vector([a_body[0], a_body[1]]);
            let (op, ot) = integrate(
                s.object_pose,
                s.object_twist,
                SE2Accel::new(a_xy[0], a_xy[1], a_body[2]),
                dt,
            );

            // Robot: predicted body acceleration for the planar part, the
            // heading servo for yaw (the servo target is not observable to
            // the network, so its yaw head is unused here).
            let ra_body = [robot_out[(0, i)], robot_out[(1, i)]];
            let ra_world = s.robot_pose.rotate_vector(ra_body);
            let yaw_err = wrap_angle(s.heading_target - s.robot_pose.yaw);
            let omega_des =
                (yaw_err / dt).clamp(-rp.heading_rate_max, rp.heading_rate_max);
            let alpha = (omega_des - s.robot_twist.omega) / dt;
            let (rpn, rtn) = integrate(
                s.robot_pose,
                s.robot_twist,
                SE2Accel::new(ra_world[0], ra_world[1], alpha),
                dt,
            );

            // Lean lag, steering, and bookkeeping.
            let decay = (-dt / rp.tau_lean).exp();
            let mut lean = [0.0; 2];
            let mut lean_rate = [0.0; 2];
            for k in 0..2 {
                let cmd = u[k].clamp(-rp.phi_max, rp.phi_max);
                lean[k] = (cmd + (s.lean[k] - cmd) * decay).clamp(-rp.phi_max, rp.phi_max);
                lean_rate[k] = (lean[k] - s.lean[k]) / dt;
            }
            let gamma_next = u[2].clamp(-rp.gamma_max, rp.gamma_max);
            let (w, point) = wrenches[i];
            let w_r = transform_wrench(s.robot_pose, w, point);

            *s = ModelState {
                robot_pose: rpn,
                robot_twist: rtn,
                lean,
                lean_rate,
                gamma: gamma_next,
                gamma_prev: s.gamma,
                prev_wrench_r: [w_r.fx, w_r.fy, w_r.tau],
                object_pose: op,
                object_twist: ot,
                heading_target: s.heading_target,
            };
        }
    }
}

/// Run `full_transition` once: one control-period step of the composite
/// model.
pub fn full_transition(model: &LearnedDynamics<'_>, state: &ModelState, u: [f64; 3]) -> ModelState {
    model.step(state, u)
}
