//! Planar rigid-body algebra: SE(2) poses, twists, accelerations and wrenches,
//! frame conversions, and the semi-implicit state integrator used by both the
//! simulator and the learned transition model.
//!
//! All operations here are pure functions on `Copy` value types and are safe
//! to call concurrently.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Normalize an angle to the half-open interval `(-PI, PI]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A planar pose `(x, y, yaw)` in meters and radians.
///
/// Yaw is measured counter-clockwise from the world x-axis and kept
/// normalized to `(-PI, PI]` by every constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SE2Pose {
    /// World-frame x position (m).
    pub x: f64,
    /// World-frame y position (m).
    pub y: f64,
    /// Heading (rad), normalized to `(-PI, PI]`.
    pub yaw: f64,
}

/// A planar twist `(vx, vy, omega)` in m/s and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SE2Twist {
    /// x velocity (m/s).
    pub vx: f64,
    /// y velocity (m/s).
    pub vy: f64,
    /// Angular velocity (rad/s).
    pub omega: f64,
}

/// A planar acceleration `(ax, ay, alpha)` in m/s² and rad/s².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SE2Accel {
    /// x acceleration (m/s²).
    pub ax: f64,
    /// y acceleration (m/s²).
    pub ay: f64,
    /// Angular acceleration (rad/s²).
    pub alpha: f64,
}

/// A planar wrench: force `(fx, fy)` in newtons plus torque `tau` in N·m.
///
/// The torque is always understood about the origin of whatever frame the
/// wrench is currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench2D {
    /// Force x component (N).
    pub fx: f64,
    /// Force y component (N).
    pub fy: f64,
    /// Torque about the frame origin (N·m).
    pub tau: f64,
}

impl SE2Pose {
    /// Construct a pose; yaw is normalized to `(-PI, PI]`.
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        SE2Pose {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    /// The identity transform.
    pub fn identity() -> Self {
        SE2Pose::default()
    }

    /// True when all components are finite.
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }

    /// Map a point from this pose's local frame into the world frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [
            self.x + c * p[0] - s * p[1],
            self.y + s * p[0] + c * p[1],
        ]
    }

    /// Map a world-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Rotate a free vector from this pose's local frame into the world frame.
    pub fn rotate_vector(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    /// Rotate a world-frame free vector into this pose's local frame.
    pub fn inverse_rotate_vector(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }
}

impl SE2Twist {
    /// Construct a twist.
    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        SE2Twist { vx, vy, omega }
    }

    /// True when all components are finite.
    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }

    /// Euclidean norm of the linear part (m/s).
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

impl SE2Accel {
    /// Construct an acceleration.
    pub fn new(ax: f64, ay: f64, alpha: f64) -> Self {
        SE2Accel { ax, ay, alpha }
    }

    /// True when all components are finite.
    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.alpha.is_finite()
    }
}

impl Wrench2D {
    /// Construct a wrench.
    pub fn new(fx: f64, fy: f64, tau: f64) -> Self {
        Wrench2D { fx, fy, tau }
    }

    /// The zero wrench.
    pub fn zero() -> Self {
        Wrench2D::default()
    }

    /// True when all components are finite.
    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fy.is_finite() && self.tau.is_finite()
    }

    /// Force magnitude (N).
    pub fn force_norm(&self) -> f64 {
        self.fx.hypot(self.fy)
    }
}

/// Compose two poses: `a ∘ b` applies `b` in the frame of `a`.
pub fn compose(a: SE2Pose, b: SE2Pose) -> SE2Pose {
    let p = a.transform_point([b.x, b.y]);
    SE2Pose::new(p[0], p[1], a.yaw + b.yaw)
}

/// Invert a pose such that `compose(p, inverse(p))` is the identity.
pub fn inverse(p: SE2Pose) -> SE2Pose {
    let (s, c) = p.yaw.sin_cos();
    SE2Pose::new(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.yaw)
}

/// Express pose `b` relative to pose `a`: `inverse(a) ∘ b`.
pub fn relative_pose(a: SE2Pose, b: SE2Pose) -> SE2Pose {
    compose(inverse(a), b)
}

/// Re-express a world-frame wrench, applied at `application_point_world`,
/// in the frame given by `frame`.
///
/// The force is rotated into the target frame and the returned torque is
/// taken about the frame's origin: it is the incoming torque (about the
/// application point) plus the moment arm contribution `r × f` of the
/// application point offset.
pub fn transform_wrench(
    frame: SE2Pose,
    w_world: Wrench2D,
    application_point_world: [f64; 2],
) -> Wrench2D {
    let f_local = frame.inverse_rotate_vector([w_world.fx, w_world.fy]);
    let r = frame.inverse_transform_point(application_point_world);
    let moment = r[0] * f_local[1] - r[1] * f_local[0];
    Wrench2D::new(f_local[0], f_local[1], w_world.tau + moment)
}

/// One semi-implicit Euler step: the twist is updated first, then the pose
/// is advanced with the *new* twist.
///
/// `dt` must be positive; this is the discrete transition used everywhere a
/// state is advanced by an acceleration.
pub fn integrate(q: SE2Pose, qdot: SE2Twist, qddot: SE2Accel, dt: f64) -> (SE2Pose, SE2Twist) {
    debug_assert!(dt > 0.0);
    let qdot_next = SE2Twist::new(
        qdot.vx + qddot.ax * dt,
        qdot.vy + qddot.ay * dt,
        qdot.omega + qddot.alpha * dt,
    );
    let q_next = SE2Pose::new(
        q.x + qdot_next.vx * dt,
        q.y + qdot_next.vy * dt,
        q.yaw + qdot_next.omega * dt,
    );
    (q_next, qdot_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn homogeneous(p: SE2Pose) -> Matrix3<f64> {
        let (s, c) = p.yaw.sin_cos();
        Matrix3::new(c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0)
    }

    fn pose_close(a: SE2Pose, b: SE2Pose, tol: f64) -> bool {
        (a.x - b.x).abs() < tol
            && (a.y - b.y).abs() < tol
            && wrap_angle(a.yaw - b.yaw).abs() < tol
    }

    #[test]
    fn wrap_angle_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn compose_identity() {
        let p = SE2Pose::new(1.3, -0.7, 0.9);
        assert_eq!(compose(SE2Pose::identity(), p), p);
        assert_eq!(compose(p, SE2Pose::identity()), p);
    }

    #[test]
    fn compose_quarter_turn() {
        // (1,0,π/2) ∘ (1,0,0) = (1,1,π/2)
        let a = SE2Pose::new(1.0, 0.0, PI / 2.0);
        let b = SE2Pose::new(1.0, 0.0, 0.0);
        let c = compose(a, b);
        assert!(pose_close(c, SE2Pose::new(1.0, 1.0, PI / 2.0), 1e-12));
    }

    #[test]
    fn compose_against_matrix_oracle() {
        // compose(A, inverse(A) ∘ B) = B, checked through 3x3 homogeneous matrices.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = SE2Pose::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-PI..PI),
            );
            let b = SE2Pose::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-PI..PI),
            );
            let rel = compose(inverse(a), b);
            let back = compose(a, rel);
            assert!(pose_close(back, b, 1e-12));

            // The matrix product must agree with compose.
            let m = homogeneous(a) * homogeneous(rel);
            assert!((m[(0, 2)] - b.x).abs() < 1e-12);
            assert!((m[(1, 2)] - b.y).abs() < 1e-12);
            assert!((m[(0, 0)] - b.yaw.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn wrench_identity_frame() {
        let w = Wrench2D::new(2.0, -1.0, 0.5);
        let out = transform_wrench(SE2Pose::identity(), w, [0.0, 0.0]);
        assert_eq!(out, w);
    }

    #[test]
    fn wrench_pure_rotation() {
        // Frame yaw π/2: world force (1,0) shows up as (0,-1) in the frame.
        let frame = SE2Pose::new(0.0, 0.0, PI / 2.0);
        let out = transform_wrench(frame, Wrench2D::new(1.0, 0.0, 0.0), [0.0, 0.0]);
        assert!((out.fx - 0.0).abs() < 1e-12);
        assert!((out.fy + 1.0).abs() < 1e-12);
        assert!(out.tau.abs() < 1e-12);
    }

    #[test]
    fn wrench_moment_arm() {
        // Force (0,1) at point (1,0) about the origin: tau = r×F = +1 N·m.
        let out = transform_wrench(SE2Pose::identity(), Wrench2D::new(0.0, 1.0, 0.0), [1.0, 0.0]);
        assert!((out.tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_at_rest() {
        let q = SE2Pose::new(0.4, 0.2, 0.1);
        let (q1, v1) = integrate(q, SE2Twist::default(), SE2Accel::default(), 0.1);
        assert_eq!(q1, q);
        assert_eq!(v1, SE2Twist::default());
    }

    #[test]
    fn integrate_constant_velocity() {
        let (q1, _) = integrate(
            SE2Pose::identity(),
            SE2Twist::new(1.0, 0.0, 0.0),
            SE2Accel::default(),
            0.1,
        );
        assert!((q1.x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn integrate_constant_accel_kinematics() {
        // 100 steps of dt=0.01 under a=1 from rest: x ≈ 0.5·a·t² within 1%.
        let mut q = SE2Pose::identity();
        let mut v = SE2Twist::default();
        let a = SE2Accel::new(1.0, 0.0, 0.0);
        for _ in 0..100 {
            let (qn, vn) = integrate(q, v, a, 0.01);
            q = qn;
            v = vn;
        }
        // The semi-implicit scheme lands at a·dt²·N(N+1)/2, i.e. +1% exactly.
        let exact = 0.5;
        assert!(
            (q.x - exact).abs() / exact <= 0.01 + 1e-12,
            "x = {} vs closed form {}",
            q.x,
            exact
        );
    }

    #[test]
    fn integrate_halving_first_order() {
        // Splitting dt in halves changes the result at O(dt²): the gap between
        // successive refinements must shrink by ~2x per halving.
        let q0 = SE2Pose::new(0.0, 0.0, 0.3);
        let v0 = SE2Twist::new(0.5, -0.2, 0.4);
        let a = SE2Accel::new(0.3, 0.1, -0.2);
        let run = |dt: f64, steps: usize| {
            let (mut q, mut v) = (q0, v0);
            for _ in 0..steps {
                let (qn, vn) = integrate(q, v, a, dt);
                q = qn;
                v = vn;
            }
            q
        };
        let total = 0.04;
        let coarse = run(0.01, (total / 0.01) as usize);
        let mid = run(0.005, (total / 0.005) as usize);
        let fine = run(0.0025, (total / 0.0025) as usize);
        let gap1 = ((coarse.x - mid.x).powi(2) + (coarse.y - mid.y).powi(2)).sqrt();
        let gap2 = ((mid.x - fine.x).powi(2) + (mid.y - fine.y).powi(2)).sqrt();
        assert!(gap2 < 0.75 * gap1, "gap1 = {gap1}, gap2 = {gap2}");
    }

    proptest! {
        #[test]
        fn compose_associative(
            ax in -3.0..3.0f64, ay in -3.0..3.0f64, at in -3.0..3.0f64,
            bx in -3.0..3.0f64, by in -3.0..3.0f64, bt in -3.0..3.0f64,
            cx in -3.0..3.0f64, cy in -3.0..3.0f64, ct in -3.0..3.0f64,
        ) {
            let a = SE2Pose::new(ax, ay, at);
            let b = SE2Pose::new(bx, by, bt);
            let c = SE2Pose::new(cx, cy, ct);
            let lhs = compose(compose(a, b), c);
            let rhs = compose(a, compose(b, c));
            prop_assert!(pose_close(lhs, rhs, 1e-12));
        }

        #[test]
        fn double_inverse_is_identity(
            x in -10.0..10.0f64, y in -10.0..10.0f64, t in -3.0..3.0f64,
        ) {
            let p = SE2Pose::new(x, y, t);
            let q = inverse(inverse(p));
            prop_assert!(pose_close(p, q, 1e-12));
        }

        #[test]
        fn wrench_force_magnitude_invariant(
            fx in -10.0..10.0f64, fy in -10.0..10.0f64, tau in -5.0..5.0f64,
            px in -2.0..2.0f64, py in -2.0..2.0f64,
            x in -3.0..3.0f64, yy in -3.0..3.0f64, t in -3.0..3.0f64,
        ) {
            let frame = SE2Pose::new(x, yy, t);
            let w = Wrench2D::new(fx, fy, tau);
            let out = transform_wrench(frame, w, [px, py]);
            prop_assert!((out.force_norm() - w.force_norm()).abs() < 1e-12);
        }
    }
}
