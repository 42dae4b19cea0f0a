//! Feature composition for the object basis network and the robot model.
//!
//! Every object-feature entry is a body-frame quantity, so features are
//! invariant under translating and rotating the world frame. The robot
//! features are likewise built in the robot body frame.

use pushnav_se2::{transform_wrench, wrap_angle, SE2Pose, SE2Twist, Wrench2D};
use serde::{Deserialize, Serialize};

/// Input width of the object basis network.
pub const OBJECT_FEATURE_DIM: usize = 10;
/// Input width of the robot model.
pub const ROBOT_FEATURE_DIM: usize = 28;

/// Force magnitude below which the push direction is reported as zero.
const PUSH_DIR_EPS: f64 = 1e-6;

/// Object feature vector, all entries in the object body frame:
/// `[vx, vy, omega, fx, fy, tau, cpx, cpy, sin(push), cos(push)]`.
pub fn object_feature(
    pose: SE2Pose,
    twist: SE2Twist,
    wrench_world: Wrench2D,
    contact_point_world: [f64; 2],
) -> [f64; OBJECT_FEATURE_DIM] {
    let v_body = pose.inverse_rotate_vector([twist.vx, twist.vy]);
    let w_body = transform_wrench(pose, wrench_world, contact_point_world);
    let cp_body = pose.inverse_transform_point(contact_point_world);
    let f_norm = w_body.force_norm();
    let (s, c) = if f_norm > PUSH_DIR_EPS {
        (w_body.fy / f_norm, w_body.fx / f_norm)
    } else {
        (0.0, 0.0)
    };
    [
        v_body[0], v_body[1], twist.omega, w_body.fx, w_body.fy, w_body.tau, cp_body[0],
        cp_body[1], s, c,
    ]
}

/// Everything the robot-feature builder needs about the instantaneous state.
#[derive(Debug, Clone, Copy)]
pub struct RobotFeatureInputs {
    pub robot_pose: SE2Pose,
    pub robot_twist: SE2Twist,
    pub lean: [f64; 2],
    pub lean_rate: [f64; 2],
    pub u: [f64; 3],
    /// Steering angle currently realized (last applied command).
    pub gamma: f64,
    /// Steering angle one control period earlier.
    pub gamma_prev: f64,
    /// Previous interaction wrench in the robot frame [fx, fy, tau].
    pub prev_wrench_r: [f64; 3],
    pub object_pose: SE2Pose,
    pub object_half_extents: [f64; 2],
    /// Control period used for rate features (s).
    pub dt: f64,
    /// Arm geometry.
    pub reach: f64,
    pub contact_width: f64,
}

/// Robot feature vector (28 entries), robot body frame throughout:
/// body twist (3), lean (2), lean rates (2), u (3), end-effector positions
/// (4), end-effector velocities (4), contact flags (2), object contact
/// surface relative to the robot (3), previous interaction wrench (3),
/// steering history (2).
pub fn robot_feature(inp: &RobotFeatureInputs) -> [f64; ROBOT_FEATURE_DIM] {
    let mut f = [0.0; ROBOT_FEATURE_DIM];
    let v_body = inp
        .robot_pose
        .inverse_rotate_vector([inp.robot_twist.vx, inp.robot_twist.vy]);
    f[0] = v_body[0];
    f[1] = v_body[1];
    f[2] = inp.robot_twist.omega;
    f[3] = inp.lean[0];
    f[4] = inp.lean[1];
    f[5] = inp.lean_rate[0];
    f[6] = inp.lean_rate[1];
    f[7] = inp.u[0];
    f[8] = inp.u[1];
    f[9] = inp.u[2];

    let (ee_l, ee_r) = pushnav_sim::ee_placement([inp.reach, 0.0], inp.gamma, inp.contact_width);
    f[10] = ee_l[0];
    f[11] = ee_l[1];
    f[12] = ee_r[0];
    f[13] = ee_r[1];

    // End-effector velocities in the robot frame: body motion at the point
    // plus the steering slew.
    let (pl, pr) = pushnav_sim::ee_placement([inp.reach, 0.0], inp.gamma_prev, inp.contact_width);
    let om = inp.robot_twist.omega;
    f[14] = v_body[0] - om * ee_l[1] + (ee_l[0] - pl[0]) / inp.dt;
    f[15] = v_body[1] + om * ee_l[0] + (ee_l[1] - pl[1]) / inp.dt;
    f[16] = v_body[0] - om * ee_r[1] + (ee_r[0] - pr[0]) / inp.dt;
    f[17] = v_body[1] + om * ee_r[0] + (ee_r[1] - pr[1]) / inp.dt;

    // Geometric contact flags: an end-effector inside the footprint.
    for (k, ee) in [ee_l, ee_r].iter().enumerate() {
        let world = inp.robot_pose.transform_point(*ee);
        let local = inp.object_pose.inverse_transform_point(world);
        let inside = local[0].abs() < inp.object_half_extents[0]
            && local[1].abs() < inp.object_half_extents[1];
        f[18 + k] = if inside { 1.0 } else { 0.0 };
    }

    // The object face the robot is facing: center and outward normal angle,
    // both in the robot frame.
    let (face_center, face_angle) = facing_surface(
        inp.robot_pose,
        inp.object_pose,
        inp.object_half_extents,
    );
    f[20] = face_center[0];
    f[21] = face_center[1];
    f[22] = face_angle;

    f[23] = inp.prev_wrench_r[0];
    f[24] = inp.prev_wrench_r[1];
    f[25] = inp.prev_wrench_r[2];
    f[26] = inp.gamma;
    f[27] = inp.gamma_prev;
    f
}

/// The face of the object nearest the robot: its center in the robot frame
/// and the outward-normal angle relative to the robot heading.
pub fn facing_surface(
    robot_pose: SE2Pose,
    object_pose: SE2Pose,
    half_extents: [f64; 2],
) -> ([f64; 2], f64) {
    let faces = [
        ([half_extents[0], 0.0], 0.0),
        ([-half_extents[0], 0.0], std::f64::consts::PI),
        ([0.0, half_extents[1]], std::f64::consts::FRAC_PI_2),
        ([0.0, -half_extents[1]], -std::f64::consts::FRAC_PI_2),
    ];
    let mut best = ([0.0; 2], 0.0, f64::INFINITY);
    for (local, angle) in faces {
        let world = object_pose.transform_point(local);
        let d2 = (world[0] - robot_pose.x).powi(2) + (world[1] - robot_pose.y).powi(2);
        if d2 < best.2 {
            best = (world, angle, d2);
        }
    }
    let center_r = robot_pose.inverse_transform_point(best.0);
    let normal_r = wrap_angle(object_pose.yaw + best.1 - robot_pose.yaw);
    (center_r, normal_r)
}

/// Per-dimension affine normalizer fitted on the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Identity normalizer of the given width.
    pub fn identity(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Fit mean and standard deviation over rows; std floored at 1e-6.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize) -> Self {
        let mut mean = vec![0.0; dim];
        let mut count = 0usize;
        for r in rows.clone() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
            count += 1;
        }
        let n = (count.max(1)) as f64;
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(1e-6))
            .collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = (x[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_force_zero_push_direction() {
        let f = object_feature(
            SE2Pose::new(1.0, 2.0, 0.7),
            SE2Twist::new(0.3, -0.1, 0.2),
            Wrench2D::zero(),
            [1.2, 2.1],
        );
        assert_eq!(f[8], 0.0);
        assert_eq!(f[9], 0.0);
    }

    proptest! {
        /// Translating and rotating the world frame leaves the object
        /// feature unchanged: every entry is body-frame.
        #[test]
        fn object_feature_frame_invariance(
            px in -3.0..3.0f64, py in -3.0..3.0f64, pt in -3.0..3.0f64,
            vx in -2.0..2.0f64, vy in -2.0..2.0f64, om in -2.0..2.0f64,
            fx in -20.0..20.0f64, fy in -20.0..20.0f64, tau in -5.0..5.0f64,
            cx in -0.4..0.4f64, cy in -0.4..0.4f64,
            gx in -5.0..5.0f64, gy in -5.0..5.0f64, gt in -3.0..3.0f64,
        ) {
            let pose = SE2Pose::new(px, py, pt);
            let twist = SE2Twist::new(vx, vy, om);
            let cp = pose.transform_point([cx, cy]);
            let w = Wrench2D::new(fx, fy, tau);
            let base = object_feature(pose, twist, w, cp);

            // Move the whole world by g: pose' = g ∘ pose, rotate vectors.
            let g = SE2Pose::new(gx, gy, gt);
            let pose2 = pushnav_se2::compose(g, pose);
            let v2 = g.rotate_vector([vx, vy]);
            let f2v = g.rotate_vector([fx, fy]);
            let cp2 = g.transform_point(cp);
            let moved = object_feature(
                pose2,
                SE2Twist::new(v2[0], v2[1], om),
                Wrench2D::new(f2v[0], f2v[1], tau),
                cp2,
            );
            for (a, b) in base.iter().zip(moved.iter()) {
                prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn normalizer_fit_and_apply() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 10.0], vec![3.0, 30.0]];
        let n = Normalizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert!((n.mean[0] - 2.0).abs() < 1e-12);
        let out = n.apply_vec(&[3.0, 30.0]);
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!((out[1] - 1.0).abs() < 1e-12);
    }
}
