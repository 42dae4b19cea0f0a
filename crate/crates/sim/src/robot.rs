//! The lean-to-accelerate robot abstraction.
//!
//! Commanded body-lean angles produce proportional horizontal acceleration
//! after a first-order actuation lag; the steering angle rotates the pair of
//! end-effectors about the arm center. The balancing internals are collapsed
//! into this lag plus a linear drag.

use crate::GRAVITY;
use pushnav_se2::{integrate, wrap_angle, SE2Pose, SE2Twist, Wrench2D};
use serde::{Deserialize, Serialize};

/// Robot geometry and actuation constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotParams {
    /// Robot mass (kg).
    pub mass: f64,
    /// Lean saturation (rad).
    pub phi_max: f64,
    /// First-order lean actuation lag (s).
    pub tau_lean: f64,
    /// Linear drag coefficient on the planar velocity (1/s).
    pub drag: f64,
    /// Arm reach: end-effector center forward of the body center (m).
    pub reach: f64,
    /// Contact width between the two end-effectors (m). The hardware value
    /// is unreported; 0.4 m default, configurable.
    pub contact_width: f64,
    /// Steering angle saturation (rad).
    pub gamma_max: f64,
    /// Heading servo rate limit (rad/s).
    pub heading_rate_max: f64,
    /// Body radius used by planners for corridors and inflation (m).
    pub radius: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            mass: 35.0,
            phi_max: 0.12,
            tau_lean: 0.25,
            drag: 0.4,
            reach: 0.45,
            contact_width: 0.4,
            gamma_max: 0.6,
            heading_rate_max: 1.2,
            radius: 0.35,
        }
    }
}

/// Full robot state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: SE2Pose,
    pub twist: SE2Twist,
    /// Body lean (rad): x leans the body toward its local x-axis.
    pub lean: [f64; 2],
    /// Lean rates (rad/s).
    pub lean_rate: [f64; 2],
    /// Steering angle applied to the end-effector pair (rad).
    pub gamma: f64,
    /// Left end-effector in the robot frame (m).
    pub ee_left: [f64; 2],
    /// Right end-effector in the robot frame (m).
    pub ee_right: [f64; 2],
}

impl RobotState {
    /// A robot at rest at `pose`.
    pub fn at_pose(pose: SE2Pose, params: &RobotParams) -> Self {
        let (ee_left, ee_right) = ee_offsets(params, 0.0);
        RobotState {
            pose,
            twist: SE2Twist::default(),
            lean: [0.0, 0.0],
            lean_rate: [0.0, 0.0],
            gamma: 0.0,
            ee_left,
            ee_right,
        }
    }

    /// World-frame end-effector positions.
    pub fn ee_world(&self) -> ([f64; 2], [f64; 2]) {
        (
            self.pose.transform_point(self.ee_left),
            self.pose.transform_point(self.ee_right),
        )
    }
}

/// End-effector placement heuristic about a contact-surface center:
/// `[p_l, p_r] = center ± R_z(γ)ᵀ · (0, l/2)`.
///
/// "Left" is the +y side of the rotated split axis.
pub fn ee_placement(surface_center: [f64; 2], gamma: f64, contact_width: f64) -> ([f64; 2], [f64; 2]) {
    debug_assert!(contact_width > 0.0);
    let (s, c) = gamma.sin_cos();
    // R_z(γ)ᵀ · (0, l/2) = (l/2·sin γ, l/2·cos γ)
    let dx = contact_width / 2.0 * s;
    let dy = contact_width / 2.0 * c;
    (
        [surface_center[0] + dx, surface_center[1] + dy],
        [surface_center[0] - dx, surface_center[1] - dy],
    )
}

/// End-effector offsets in the robot frame for a steering angle.
pub fn ee_offsets(params: &RobotParams, gamma: f64) -> ([f64; 2], [f64; 2]) {
    ee_placement([params.reach, 0.0], gamma, params.contact_width)
}

/// Advance the robot by `dt` under the command `u = [phi_x, phi_y, gamma]`,
/// a heading-servo target, and the world-frame reaction wrench from contact.
pub fn step_robot(
    state: &RobotState,
    u: [f64; 3],
    heading_target: f64,
    reaction: Wrench2D,
    params: &RobotParams,
    dt: f64,
) -> RobotState {
    debug_assert!(dt > 0.0 && dt <= 0.02);
    // Lean tracks the saturated command with an exact first-order lag.
    let decay = (-dt / params.tau_lean).exp();
    let mut lean = [0.0; 2];
    let mut lean_rate = [0.0; 2];
    for i in 0..2 {
        let cmd = u[i].clamp(-params.phi_max, params.phi_max);
        let next = cmd + (state.lean[i] - cmd) * decay;
        lean[i] = next.clamp(-params.phi_max, params.phi_max);
        lean_rate[i] = (lean[i] - state.lean[i]) / dt;
    }

    // Planar acceleration: gravity projection of the lean (body frame),
    // reaction force, and linear drag.
    let a_body = [GRAVITY * lean[0], GRAVITY * lean[1]];
    let a_lean = state.pose.rotate_vector(a_body);
    let ax = a_lean[0] + reaction.fx / params.mass - params.drag * state.twist.vx;
    let ay = a_lean[1] + reaction.fy / params.mass - params.drag * state.twist.vy;

    // Heading servo: yaw slews toward the target at a capped rate.
    let yaw_err = wrap_angle(heading_target - state.pose.yaw);
    let omega = (yaw_err / dt).clamp(-params.heading_rate_max, params.heading_rate_max);
    let alpha = (omega - state.twist.omega) / dt;

    let (pose, twist) = integrate(
        state.pose,
        state.twist,
        pushnav_se2::SE2Accel::new(ax, ay, alpha),
        dt,
    );

    let gamma = u[2].clamp(-params.gamma_max, params.gamma_max);
    let (ee_left, ee_right) = ee_offsets(params, gamma);
    RobotState {
        pose,
        twist,
        lean,
        lean_rate,
        gamma,
        ee_left,
        ee_right,
    }
}
