//! Object categories, randomized physical parameters, and per-category
//! ground-truth dynamics.
//!
//! All three models resolve ground friction as clamped impulses on a
//! candidate velocity: the friction applied over one substep can never
//! reverse the velocity it opposes, which keeps the integration stable at
//! the 5 ms substep and produces genuine stick/slip.

use crate::{SimError, GRAVITY};
use pushnav_se2::{integrate, SE2Accel, SE2Pose, SE2Twist, Wrench2D};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Regularization speed for planar Coulomb friction (m/s).
pub const EPS_V: f64 = 0.01;
/// Regularization rate for rotational Coulomb friction (rad/s).
pub const EPS_W: f64 = 0.01;
/// Static-to-dynamic friction ratio for the box model.
pub const STATIC_RATIO: f64 = 1.1;
/// Viscous coefficient of a locked cart wheel (N·s/m).
pub const CART_LOCKED_COEFF: f64 = 60.0;
/// Coulomb coefficient of a locked wheelchair wheel on its weight share.
pub const CHAIR_LOCKED_MU: f64 = 0.55;

/// The three object categories collected in the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectCategory {
    Box,
    Cart,
    Wheelchair,
}

impl ObjectCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectCategory::Box => "box",
            ObjectCategory::Cart => "cart",
            ObjectCategory::Wheelchair => "wheelchair",
        }
    }
}

/// One wheel: mount point in the body frame, lock flag, rolling friction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelSpec {
    /// Mount point in the object body frame (m).
    pub offset: [f64; 2],
    /// A locked wheel does not roll; it slides with Coulomb friction
    /// (wheelchair) or drags with a high viscous coefficient (cart).
    pub locked: bool,
    /// Rolling friction coefficient (N·s/m) when free.
    pub roll_friction: f64,
}

/// Ground-truth physical description of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub category: ObjectCategory,
    /// Mass (kg).
    pub mass: f64,
    /// Yaw inertia (kg·m²).
    pub inertia: f64,
    /// Half extents of the rectangular footprint (m).
    pub half_extents: [f64; 2],
    /// Planar Coulomb friction coefficient (box model).
    pub mu: f64,
    /// Rotational Coulomb friction magnitude (N·m), regularized.
    pub sigma: f64,
    /// Wheels; empty for boxes, 4 for carts, 2 for wheelchairs.
    pub wheels: Vec<WheelSpec>,
    /// Dynamics condition index used by the meta-learner.
    pub condition_id: u32,
}

impl ObjectParams {
    /// True when invariants hold (positive mass/inertia, category wheel
    /// layout respected).
    pub fn validate(&self) -> bool {
        let wheel_count_ok = match self.category {
            ObjectCategory::Box => self.wheels.is_empty(),
            ObjectCategory::Cart => self.wheels.len() == 4,
            ObjectCategory::Wheelchair => {
                self.wheels.len() == 2
                    && (self.wheels[0].offset[0] - self.wheels[1].offset[0]).abs() < 1e-9
            }
        };
        self.mass > 0.0 && self.inertia > 0.0 && self.mu >= 0.0 && wheel_count_ok
    }

    /// A short human-readable summary used in evaluation tables.
    pub fn summary(&self) -> String {
        let locks: Vec<&str> = self
            .wheels
            .iter()
            .map(|w| if w.locked { "L" } else { "f" })
            .collect();
        format!(
            "{} m={:.1}kg mu={:.2} sigma={:.2} wheels=[{}]",
            self.category.as_str(),
            self.mass,
            self.mu,
            self.sigma,
            locks.join("")
        )
    }
}

/// Draw a random object of the given category. Deterministic for a fixed
/// seed; `condition_id` is left at 0 for the caller to assign.
pub fn randomize_object(category: ObjectCategory, rng_seed: u64) -> ObjectParams {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mass: f64 = rng.gen_range(2.0..=40.0);
    let hx: f64 = rng.gen_range(0.2..=0.5);
    let hy: f64 = rng.gen_range(0.2..=0.5);
    // Rectangle yaw inertia with a ±20% perturbation.
    let inertia =
        mass / 12.0 * ((2.0 * hx).powi(2) + (2.0 * hy).powi(2)) * rng.gen_range(0.8..=1.2);
    let mu = rng.gen_range(0.1..=0.8);
    let sigma_scale = rng.gen_range(0.3..=0.7);
    let sigma = mu * mass * GRAVITY * 0.5 * (hx + hy) * sigma_scale;
    let wheels = match category {
        ObjectCategory::Box => Vec::new(),
        ObjectCategory::Cart => {
            let corners = [
                [0.85 * hx, 0.85 * hy],
                [0.85 * hx, -0.85 * hy],
                [-0.85 * hx, 0.85 * hy],
                [-0.85 * hx, -0.85 * hy],
            ];
            corners
                .iter()
                .map(|&offset| {
                    let locked = rng.gen_bool(0.25);
                    let roll_friction = if locked {
                        CART_LOCKED_COEFF
                    } else {
                        rng.gen_range(1.0..=5.0)
                    };
                    WheelSpec {
                        offset,
                        locked,
                        roll_friction,
                    }
                })
                .collect()
        }
        ObjectCategory::Wheelchair => {
            // Two drive wheels on a common lateral axle through the center.
            [[0.0, hy], [0.0, -hy]]
                .iter()
                .map(|&offset| WheelSpec {
                    offset,
                    locked: rng.gen_bool(0.25),
                    roll_friction: rng.gen_range(0.5..=8.0),
                })
                .collect()
        }
    };
    ObjectParams {
        category,
        mass,
        inertia,
        half_extents: [hx, hy],
        mu: if category == ObjectCategory::Box { mu } else { 0.0 },
        sigma: if category == ObjectCategory::Box { sigma } else { 0.0 },
        wheels,
        condition_id: 0,
    }
}

/// Friction impulse that opposes `v` with dynamic magnitude `f_dyn`
/// regularized below `eps`, clamped so it can never reverse `v`.
fn friction_delta(v: f64, f_dyn_dt_over_m: f64, eps: f64) -> f64 {
    let speed = v.abs();
    if speed == 0.0 {
        return 0.0;
    }
    let scale = (speed / eps).min(1.0);
    let dv = (f_dyn_dt_over_m * scale).min(speed);
    -v.signum() * dv
}

/// Advance one object by `dt` under an applied world-frame wrench whose
/// torque is taken about the object center.
///
/// Returns the new pose, twist, and the world-frame acceleration actually
/// realized over the step, which doubles as the training label.
pub fn step_object(
    params: &ObjectParams,
    pose: SE2Pose,
    twist: SE2Twist,
    w_applied: Wrench2D,
    dt: f64,
) -> Result<(SE2Pose, SE2Twist, SE2Accel), SimError> {
    if !w_applied.is_finite() {
        return Err(SimError::NonFiniteWrench);
    }
    debug_assert!(dt > 0.0 && dt <= 0.02);
    let new_twist = match params.category {
        ObjectCategory::Box => step_box(params, twist, w_applied, dt),
        ObjectCategory::Cart => step_cart(params, pose, twist, w_applied, dt),
        ObjectCategory::Wheelchair => step_wheelchair(params, pose, twist, w_applied, dt),
    };
    let accel = SE2Accel::new(
        (new_twist.vx - twist.vx) / dt,
        (new_twist.vy - twist.vy) / dt,
        (new_twist.omega - twist.omega) / dt,
    );
    let (new_pose, integrated) = integrate(pose, twist, accel, dt);
    debug_assert!((integrated.vx - new_twist.vx).abs() < 1e-12);
    Ok((new_pose, new_twist, accel))
}

fn step_box(params: &ObjectParams, twist: SE2Twist, w: Wrench2D, dt: f64) -> SE2Twist {
    let m = params.mass;
    let mu_dyn = params.mu * m * GRAVITY;
    let mu_static = STATIC_RATIO * mu_dyn;

    // Linear part: stick if slow and the push is below the static budget.
    let speed = twist.speed();
    let f_norm = w.force_norm();
    let (vx, vy) = if speed < EPS_V && f_norm <= mu_static {
        (0.0, 0.0)
    } else {
        let vsx = twist.vx + w.fx / m * dt;
        let vsy = twist.vy + w.fy / m * dt;
        let s = (vsx * vsx + vsy * vsy).sqrt();
        if s == 0.0 {
            (0.0, 0.0)
        } else {
            let scale = (s / EPS_V).min(1.0);
            let dv = (params.mu * GRAVITY * dt * scale).min(s);
            (vsx - vsx / s * dv, vsy - vsy / s * dv)
        }
    };

    // Rotational part, same structure with the sigma torque budget.
    let omega = if twist.omega.abs() < EPS_W && w.tau.abs() <= STATIC_RATIO * params.sigma {
        0.0
    } else {
        let ws = twist.omega + w.tau / params.inertia * dt;
        ws + friction_delta(ws, params.sigma / params.inertia * dt, EPS_W)
    };
    SE2Twist::new(vx, vy, omega)
}

/// Effective inverse mass at body offset `r` along direction `d` (both in
/// the world frame).
fn effective_mass(m: f64, inertia: f64, r: [f64; 2], d: [f64; 2]) -> f64 {
    let cross = r[0] * d[1] - r[1] * d[0];
    1.0 / (1.0 / m + cross * cross / inertia)
}

fn step_cart(
    params: &ObjectParams,
    pose: SE2Pose,
    twist: SE2Twist,
    w: Wrench2D,
    dt: f64,
) -> SE2Twist {
    let m = params.mass;
    let inertia = params.inertia;
    let mut vx = twist.vx + w.fx / m * dt;
    let mut vy = twist.vy + w.fy / m * dt;
    let mut omega = twist.omega + w.tau / inertia * dt;

    // Point drag at each wheel mount. Impulses are computed Jacobi-style
    // from a common state per pass, which keeps symmetric layouts exactly
    // symmetric; a few passes settle the coupling between wheels.
    for _ in 0..3 {
        let mut jx_sum = 0.0;
        let mut jy_sum = 0.0;
        let mut domega = 0.0;
        for wheel in &params.wheels {
            let r = pose.rotate_vector(wheel.offset);
            let pvx = vx - omega * r[1];
            let pvy = vy + omega * r[0];
            let speed = (pvx * pvx + pvy * pvy).sqrt();
            if speed < 1e-12 {
                continue;
            }
            let dir = [pvx / speed, pvy / speed];
            let m_eff = effective_mass(m, inertia, r, dir);
            let j = (wheel.roll_friction * speed * dt).min(m_eff * speed);
            let jx = -dir[0] * j;
            let jy = -dir[1] * j;
            jx_sum += jx;
            jy_sum += jy;
            domega += (r[0] * jy - r[1] * jx) / inertia;
        }
        vx += jx_sum / m;
        vy += jy_sum / m;
        omega += domega;
    }
    SE2Twist::new(vx, vy, omega)
}

fn step_wheelchair(
    params: &ObjectParams,
    pose: SE2Pose,
    twist: SE2Twist,
    w: Wrench2D,
    dt: f64,
) -> SE2Twist {
    let m = params.mass;
    let inertia = params.inertia;
    // The axle constraint makes (forward speed, yaw rate) the generalized
    // coordinates: project the incoming twist onto the body x-axis.
    let v_body = pose.inverse_rotate_vector([twist.vx, twist.vy]);
    let mut v = v_body[0];
    let mut omega = twist.omega;

    let f_body = pose.inverse_rotate_vector([w.fx, w.fy]);
    v += f_body[0] / m * dt;
    omega += w.tau / inertia * dt;

    let half_track = params.wheels[0].offset[1].abs().max(1e-6);
    let m_eff = 1.0 / (1.0 / m + half_track * half_track / inertia);
    let n_share = m * GRAVITY / params.wheels.len() as f64;

    for _ in 0..4 {
        let mut dv = 0.0;
        let mut domega = 0.0;
        for wheel in &params.wheels {
            let y = wheel.offset[1];
            let u = v - y * omega;
            let j = if wheel.locked {
                // A locked wheel slides with Coulomb friction on its weight
                // share; regularized and clamped like the box model.
                if u.abs() < 1e-12 {
                    0.0
                } else {
                    let scale = (u.abs() / EPS_V).min(1.0);
                    -u.signum() * (CHAIR_LOCKED_MU * n_share * dt * scale).min(m_eff * u.abs())
                }
            } else {
                let j_visc = wheel.roll_friction * u.abs() * dt;
                if u.abs() < 1e-12 {
                    0.0
                } else {
                    -u.signum() * j_visc.min(m_eff * u.abs())
                }
            };
            dv += j / m;
            domega += -y * j / inertia;
        }
        v += dv;
        omega += domega;
    }

    let v_world = pose.rotate_vector([v, 0.0]);
    SE2Twist::new(v_world[0], v_world[1], omega)
}
