//! A stepped world owning one robot and its objects.

use crate::contact::contact_forces;
use crate::object::{step_object, ObjectParams};
use crate::robot::{step_robot, RobotParams, RobotState};
use crate::{SimError, SIM_DT};
use pushnav_se2::{SE2Accel, SE2Pose, SE2Twist, Wrench2D};
use serde::{Deserialize, Serialize};

/// One object instance in the world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub params: ObjectParams,
    pub pose: SE2Pose,
    pub twist: SE2Twist,
}

/// Aggregated measurements over one control tick for the first object
/// (the one currently being manipulated).
#[derive(Debug, Clone, Copy)]
pub struct TickRecord {
    /// Time-averaged world-frame wrench applied over the tick, torque about
    /// `contact_point`.
    pub wrench_world: Wrench2D,
    /// Force-weighted mean application point (world frame).
    pub contact_point: [f64; 2],
    /// Fraction of substeps in contact.
    pub contact_fraction: f64,
    /// Contact flags per end-effector (any substep).
    pub ee_contact: [bool; 2],
    /// Mean object acceleration over the tick (world frame).
    pub object_accel: SE2Accel,
    /// Mean robot acceleration over the tick (world frame).
    pub robot_accel: SE2Accel,
}

/// A single-writer world stepped at [`SIM_DT`].
#[derive(Debug, Clone)]
pub struct PushWorld {
    pub robot: RobotState,
    pub robot_params: RobotParams,
    pub objects: Vec<ObjectInstance>,
    pub time: f64,
}

impl PushWorld {
    pub fn new(robot: RobotState, robot_params: RobotParams, objects: Vec<ObjectInstance>) -> Self {
        PushWorld {
            robot,
            robot_params,
            objects,
            time: 0.0,
        }
    }

    /// Advance one physics substep under a fixed command. Returns the
    /// world-frame wrench applied to object 0 (torque about the returned
    /// application point) and its realized acceleration.
    pub fn substep(
        &mut self,
        u: [f64; 3],
        heading_target: f64,
        dt: f64,
    ) -> Result<(Wrench2D, [f64; 2], bool, [bool; 2], SE2Accel), SimError> {
        let mut reaction = Wrench2D::zero();
        let mut first: Option<(Wrench2D, [f64; 2], bool, [bool; 2], SE2Accel)> = None;

        for (i, obj) in self.objects.iter_mut().enumerate() {
            let res = contact_forces(&self.robot, obj.pose, obj.twist, obj.params.half_extents);
            // Torque about the object center for the dynamics step.
            let w_center = pushnav_se2::transform_wrench(
                SE2Pose::new(obj.pose.x, obj.pose.y, 0.0),
                res.wrench_world,
                res.contact_point,
            );
            let (pose, twist, accel) = step_object(&obj.params, obj.pose, obj.twist, w_center, dt)?;
            obj.pose = pose;
            obj.twist = twist;
            // Newton's third law at the interface.
            reaction.fx -= res.wrench_world.fx;
            reaction.fy -= res.wrench_world.fy;
            reaction.tau -= res.wrench_world.tau;
            if i == 0 {
                first = Some((
                    res.wrench_world,
                    res.contact_point,
                    res.in_contact,
                    res.ee_contact,
                    accel,
                ));
            }
        }

        self.robot = step_robot(
            &self.robot,
            u,
            heading_target,
            reaction,
            &self.robot_params,
            dt,
        );
        self.time += dt;
        Ok(first.unwrap_or((
            Wrench2D::zero(),
            [self.robot.pose.x, self.robot.pose.y],
            false,
            [false, false],
            SE2Accel::default(),
        )))
    }

    /// Run one control tick (`n_substeps` at [`SIM_DT`]) under a fixed
    /// command, aggregating wrench and acceleration measurements.
    pub fn control_tick(
        &mut self,
        u: [f64; 3],
        heading_target: f64,
        n_substeps: usize,
    ) -> Result<TickRecord, SimError> {
        let robot_v0 = self.robot.twist;
        let obj_v0 = self.objects.first().map(|o| o.twist).unwrap_or_default();

        let mut mean_wrench = Wrench2D::zero();
        let mut mean_point = [0.0; 2];
        let mut point_weight = 0.0;
        let mut contact_steps = 0usize;
        let mut ee_contact = [false, false];
        // Torque must be aggregated about a common reference; accumulate
        // force moments about the world origin, then shift to the mean point.
        let mut mean_tau_origin = 0.0;

        for _ in 0..n_substeps {
            let (w, p, in_contact, ee, _) = self.substep(u, heading_target, SIM_DT)?;
            mean_wrench.fx += w.fx;
            mean_wrench.fy += w.fy;
            mean_tau_origin += w.tau + p[0] * w.fy - p[1] * w.fx;
            let fmag = w.force_norm();
            mean_point[0] += p[0] * fmag;
            mean_point[1] += p[1] * fmag;
            point_weight += fmag;
            if in_contact {
                contact_steps += 1;
            }
            ee_contact[0] |= ee[0];
            ee_contact[1] |= ee[1];
        }
        let n = n_substeps as f64;
        mean_wrench.fx /= n;
        mean_wrench.fy /= n;
        mean_tau_origin /= n;
        let contact_point = if point_weight > 0.0 {
            [mean_point[0] / point_weight, mean_point[1] / point_weight]
        } else {
            let (l, r) = self.robot.ee_world();
            [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0]
        };
        mean_wrench.tau =
            mean_tau_origin - (contact_point[0] * mean_wrench.fy - contact_point[1] * mean_wrench.fx);

        let dt_total = SIM_DT * n;
        let robot_v1 = self.robot.twist;
        let obj_v1 = self.objects.first().map(|o| o.twist).unwrap_or_default();
        Ok(TickRecord {
            wrench_world: mean_wrench,
            contact_point,
            contact_fraction: contact_steps as f64 / n,
            ee_contact,
            object_accel: SE2Accel::new(
                (obj_v1.vx - obj_v0.vx) / dt_total,
                (obj_v1.vy - obj_v0.vy) / dt_total,
                (obj_v1.omega - obj_v0.omega) / dt_total,
            ),
            robot_accel: SE2Accel::new(
                (robot_v1.vx - robot_v0.vx) / dt_total,
                (robot_v1.vy - robot_v0.vy) / dt_total,
                (robot_v1.omega - robot_v0.omega) / dt_total,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::object::{randomize_object, ObjectCategory};

    #[test]
    fn newtons_third_law_at_interface() {
        // Press the robot's end-effectors into a box face and check the
        // reaction on the robot equals minus the object wrench.
        let params = RobotParams::default();
        let obj_params = randomize_object(ObjectCategory::Box, 1);
        let hx = obj_params.half_extents[0];
        let mut robot = RobotState::at_pose(
            SE2Pose::new(-(hx + params.reach) + 0.02, 0.0, 0.0),
            &params,
        );
        robot.lean = [0.05, 0.0];
        let obj = ObjectInstance {
            params: obj_params,
            pose: SE2Pose::identity(),
            twist: SE2Twist::default(),
        };
        let mut world = PushWorld::new(robot, params.clone(), vec![obj]);

        // Measure via a manual reconstruction of one substep.
        let res = contact_forces(
            &world.robot,
            world.objects[0].pose,
            world.objects[0].twist,
            world.objects[0].params.half_extents,
        );
        let before = world.robot.twist;
        let (w, _, in_contact, _, _) = world.substep([0.05, 0.0, 0.0], 0.0, SIM_DT).unwrap();
        assert!(in_contact);
        assert_eq!(w.fx, res.wrench_world.fx);
        // Robot acceleration includes -w/m exactly.
        let accel_x = (world.robot.twist.vx - before.vx) / SIM_DT;
        let expected =
            crate::GRAVITY * world.robot.lean[0] - w.fx / params.mass - params.drag * before.vx;
        assert!((accel_x - expected).abs() < 1e-9, "{accel_x} vs {expected}");
    }

    #[test]
    fn pressing_moves_light_box() {
        let params = RobotParams::default();
        let mut obj_params = randomize_object(ObjectCategory::Box, 2);
        obj_params.mass = 3.0;
        obj_params.mu = 0.15;
        obj_params.sigma = 1.0;
        let hx = obj_params.half_extents[0];
        let robot = RobotState::at_pose(
            SE2Pose::new(-(hx + params.reach) - 0.05, 0.0, 0.0),
            &params,
        );
        let obj = ObjectInstance {
            params: obj_params,
            pose: SE2Pose::identity(),
            twist: SE2Twist::default(),
        };
        let mut world = PushWorld::new(robot, params, vec![obj]);
        for _ in 0..40 {
            world.control_tick([0.08, 0.0, 0.0], 0.0, 20).unwrap();
        }
        assert!(
            world.objects[0].pose.x > 0.3,
            "box x = {}",
            world.objects[0].pose.x
        );
    }
}
