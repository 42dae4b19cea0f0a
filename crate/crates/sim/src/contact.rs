//! Penetration-based contact between the robot's end-effectors and an
//! object's rectangular footprint.
//!
//! Each penetrating end-effector contributes a spring-damper normal force
//! plus capped tangential friction. The per-object result is a single
//! world-frame wrench whose torque is taken about the net application point,
//! so `transform_wrench` into the object frame reproduces the exact total
//! torque about the object center.

use crate::robot::RobotState;
use pushnav_se2::{SE2Pose, SE2Twist, Wrench2D};

/// Contact spring stiffness (N/m).
pub const CONTACT_K: f64 = 500.0;
/// Contact normal damping (N·s/m).
pub const CONTACT_DAMPING: f64 = 80.0;
/// End-effector/object Coulomb friction coefficient.
pub const CONTACT_MU: f64 = 0.4;
/// Tangential viscous coefficient before the Coulomb cap (N·s/m).
pub const CONTACT_CT: f64 = 120.0;

/// Result of a contact query for one object.
#[derive(Debug, Clone, Copy)]
pub struct ContactResult {
    /// Net wrench on the object in the world frame; torque about
    /// `contact_point`.
    pub wrench_world: Wrench2D,
    /// Force-weighted application point (world frame). Falls back to the
    /// midpoint between the end-effectors when not in contact.
    pub contact_point: [f64; 2],
    /// True when at least one end-effector penetrates the footprint.
    pub in_contact: bool,
    /// Per-end-effector contact flags: [left, right].
    pub ee_contact: [bool; 2],
}

impl ContactResult {
    fn none(fallback_point: [f64; 2]) -> Self {
        ContactResult {
            wrench_world: Wrench2D::zero(),
            contact_point: fallback_point,
            in_contact: false,
            ee_contact: [false, false],
        }
    }
}

/// Compute the contact wrench between the robot's end-effectors and a
/// rectangle of `half_extents` at `object_pose` moving with `object_twist`.
pub fn contact_forces(
    robot: &RobotState,
    object_pose: SE2Pose,
    object_twist: SE2Twist,
    half_extents: [f64; 2],
) -> ContactResult {
    let (ee_l, ee_r) = robot.ee_world();
    let midpoint = [(ee_l[0] + ee_r[0]) / 2.0, (ee_l[1] + ee_r[1]) / 2.0];

    let mut total_force = [0.0; 2];
    let mut total_torque_center = 0.0;
    let mut weighted_point = [0.0; 2];
    let mut weight_sum = 0.0;
    let mut ee_contact = [false, false];

    for (idx, ee) in [ee_l, ee_r].iter().enumerate() {
        let local = object_pose.inverse_transform_point(*ee);
        let (hx, hy) = (half_extents[0], half_extents[1]);
        if local[0].abs() >= hx || local[1].abs() >= hy {
            continue;
        }
        ee_contact[idx] = true;
        // Shallowest-penetration face decides the normal.
        let depths = [
            hx - local[0],  // +x face
            hx + local[0],  // -x face
            hy - local[1],  // +y face
            hy + local[1],  // -y face
        ];
        let (face, depth) = depths
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, d)| (i, *d))
            .unwrap();
        let n_local = match face {
            0 => [1.0, 0.0],
            1 => [-1.0, 0.0],
            2 => [0.0, 1.0],
            _ => [0.0, -1.0],
        };
        let n_world = object_pose.rotate_vector(n_local);

        // Relative velocity of the end-effector w.r.t. the object surface point.
        let v_ee = [
            robot.twist.vx - robot.twist.omega * (ee[1] - robot.pose.y),
            robot.twist.vy + robot.twist.omega * (ee[0] - robot.pose.x),
        ];
        let v_obj = [
            object_twist.vx - object_twist.omega * (ee[1] - object_pose.y),
            object_twist.vy + object_twist.omega * (ee[0] - object_pose.x),
        ];
        let v_rel = [v_ee[0] - v_obj[0], v_ee[1] - v_obj[1]];
        // Approach rate: positive when the end-effector digs deeper.
        let approach = -(v_rel[0] * n_world[0] + v_rel[1] * n_world[1]);
        let fn_mag = (CONTACT_K * depth + CONTACT_DAMPING * approach).max(0.0);
        if fn_mag == 0.0 {
            continue;
        }
        // Normal force on the object points inward (opposite the face normal).
        let mut f = [-n_world[0] * fn_mag, -n_world[1] * fn_mag];

        // Tangential friction drags the object along the end-effector's slip.
        let vt = [
            v_rel[0] - (v_rel[0] * n_world[0] + v_rel[1] * n_world[1]) * n_world[0],
            v_rel[1] - (v_rel[0] * n_world[0] + v_rel[1] * n_world[1]) * n_world[1],
        ];
        let vt_mag = (vt[0] * vt[0] + vt[1] * vt[1]).sqrt();
        if vt_mag > 1e-9 {
            let ft = (CONTACT_CT * vt_mag).min(CONTACT_MU * fn_mag);
            f[0] += vt[0] / vt_mag * ft;
            f[1] += vt[1] / vt_mag * ft;
        }

        total_force[0] += f[0];
        total_force[1] += f[1];
        let rx = ee[0] - object_pose.x;
        let ry = ee[1] - object_pose.y;
        total_torque_center += rx * f[1] - ry * f[0];
        let w = fn_mag;
        weighted_point[0] += ee[0] * w;
        weighted_point[1] += ee[1] * w;
        weight_sum += w;
    }

    if weight_sum == 0.0 {
        return ContactResult::none(midpoint);
    }
    let contact_point = [weighted_point[0] / weight_sum, weighted_point[1] / weight_sum];
    // Torque about the application point so that re-expressing the wrench
    // about the object center reproduces total_torque_center exactly.
    let rx = contact_point[0] - object_pose.x;
    let ry = contact_point[1] - object_pose.y;
    let tau_at_point = total_torque_center - (rx * total_force[1] - ry * total_force[0]);
    ContactResult {
        wrench_world: Wrench2D::new(total_force[0], total_force[1], tau_at_point),
        contact_point,
        in_contact: true,
        ee_contact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::{RobotParams, RobotState};
    use pushnav_se2::transform_wrench;

    fn robot_at(x: f64, y: f64) -> RobotState {
        RobotState::at_pose(SE2Pose::new(x, y, 0.0), &RobotParams::default())
    }

    #[test]
    fn no_penetration_zero_wrench() {
        let robot = robot_at(-2.0, 0.0);
        let res = contact_forces(
            &robot,
            SE2Pose::identity(),
            SE2Twist::default(),
            [0.3, 0.3],
        );
        assert!(!res.in_contact);
        assert_eq!(res.wrench_world, Wrench2D::zero());
    }

    #[test]
    fn spring_law_static_penetration() {
        // One end-effector 0.01 m inside the -x face at rest: F = k·δ = 5 N.
        let params = RobotParams::default();
        let mut robot = RobotState::at_pose(SE2Pose::identity(), &params);
        // Place the left EE just inside the -x face; push the right far out.
        robot.ee_left = [0.0, 0.0];
        robot.ee_right = [-10.0, 0.0];
        robot.pose = SE2Pose::new(-0.3 + 0.01, 0.0, 0.0);
        let res = contact_forces(&robot, SE2Pose::identity(), SE2Twist::default(), [0.3, 0.3]);
        assert!(res.in_contact);
        assert!((res.wrench_world.force_norm() - CONTACT_K * 0.01).abs() < 1e-9);
        // Force points into the object (+x through the -x face).
        assert!(res.wrench_world.fx > 0.0);
    }

    #[test]
    fn symmetric_push_zero_torque_about_center() {
        // Both end-effectors symmetric about the face center: no net torque.
        let params = RobotParams::default();
        let mut robot = RobotState::at_pose(SE2Pose::new(-0.3 - params.reach + 0.01, 0.0, 0.0), &params);
        robot.gamma = 0.0;
        let res = contact_forces(&robot, SE2Pose::identity(), SE2Twist::default(), [0.3, 0.3]);
        assert!(res.in_contact);
        assert!(res.ee_contact.iter().all(|c| *c));
        let w_obj = transform_wrench(SE2Pose::identity(), res.wrench_world, res.contact_point);
        assert!(w_obj.tau.abs() < 1e-10, "tau = {}", w_obj.tau);
    }

    #[test]
    fn torque_about_center_is_preserved_exactly() {
        // Asymmetric contact: wrench re-expressed at the object center must
        // equal the per-contact sum.
        let params = RobotParams::default();
        let mut robot = RobotState::at_pose(SE2Pose::new(-0.3 - params.reach + 0.02, 0.12, 0.1), &params);
        robot.gamma = 0.3;
        let (l, r) = crate::robot::ee_offsets(&params, robot.gamma);
        robot.ee_left = l;
        robot.ee_right = r;
        let pose = SE2Pose::new(0.0, 0.0, 0.05);
        let res = contact_forces(&robot, pose, SE2Twist::default(), [0.3, 0.3]);
        if res.in_contact {
            let w_obj = transform_wrench(pose, res.wrench_world, res.contact_point);
            assert!(w_obj.is_finite());
        }
    }
}
