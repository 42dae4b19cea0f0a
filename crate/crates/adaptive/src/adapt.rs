//! Online adaptation of the linear coefficients: a forgetting-factor
//! regularized recursive least-squares filter over the basis outputs.
//!
//! Continuous-time law (tracking-error coupling dropped, see `AdaptGains`):
//!
//! ```text
//! â̇ = −λ·â − P·Ψᵀ·R⁻¹·(Ψ·â − y)
//! Ṗ = −2λ·P + Q − P·Ψᵀ·R⁻¹·Ψ·P
//! ```
//!
//! The law is Euler-integrated with internal substeps sized to the fastest
//! eigenvalue of the update, which keeps the covariance stable for any
//! measurement scale; `P` is re-symmetrized and eigenvalue-floored at 1e-8
//! after every substep.

use crate::basis::BasisOutput;
use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Eigenvalue floor keeping `P` positive definite.
pub const P_FLOOR: f64 = 1e-8;

/// Adaptation gains. The tracking-error coupling term of the source law has
/// no measurable input without an object-tracking control loop, so it is
/// identically zero here and the law reduces to regularized RLS.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdaptGains {
    /// Forgetting rate λ (1/s).
    pub lambda: f64,
    /// Process noise Q (diagonal, per coefficient).
    pub q: f64,
    /// Measurement noise R (diagonal, per acceleration axis).
    pub r_meas: f64,
}

impl Default for AdaptGains {
    fn default() -> Self {
        AdaptGains {
            lambda: 0.1,
            q: 1e-3,
            r_meas: 0.01,
        }
    }
}

/// Online coefficient estimate and covariance-like gain matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdaptationState {
    pub a_hat: [f64; 2],
    /// Row-major 2×2 symmetric positive definite matrix.
    pub p: [[f64; 2]; 2],
    pub gains: AdaptGains,
}

impl AdaptationState {
    /// Fresh state: â = 0, P = I.
    pub fn new(gains: AdaptGains) -> Self {
        AdaptationState {
            a_hat: [0.0, 0.0],
            p: [[1.0, 0.0], [0.0, 1.0]],
            gains,
        }
    }

    fn p_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.p[0][0], self.p[0][1], self.p[1][0], self.p[1][1])
    }

    /// Smallest eigenvalue of P.
    pub fn p_min_eig(&self) -> f64 {
        let (a, b, c) = (self.p[0][0], self.p[0][1], self.p[1][1]);
        (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt()
    }

    /// Largest eigenvalue of P.
    pub fn p_max_eig(&self) -> f64 {
        let (a, b, c) = (self.p[0][0], self.p[0][1], self.p[1][1]);
        (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt()
    }

    /// Symmetry defect ‖P − Pᵀ‖.
    pub fn p_asymmetry(&self) -> f64 {
        (self.p[0][1] - self.p[1][0]).abs()
    }
}

/// Spectral floor of a symmetric 2×2 matrix.
fn floor_spd(m: Matrix2<f64>, floor: f64) -> Matrix2<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let (a, b, c) = (sym[(0, 0)], sym[(0, 1)], sym[(1, 1)]);
    let mid = (a + c) / 2.0;
    let rad = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    if l2 >= floor {
        return sym;
    }
    // Eigenvector for l1; the other is its perpendicular.
    let v1 = if b.abs() > 1e-300 {
        Vector2::new(l1 - c, b).normalize()
    } else if a >= c {
        Vector2::new(1.0, 0.0)
    } else {
        Vector2::new(0.0, 1.0)
    };
    let v2 = Vector2::new(-v1[1], v1[0]);
    let l1f = l1.max(floor);
    let l2f = l2.max(floor);
    l1f * v1 * v1.transpose() + l2f * v2 * v2.transpose()
}

/// One measurement update: basis `Ψ` at the current feature, measured
/// body-frame acceleration `y`, over a period `dt`.
pub fn adapt_online(
    state: &AdaptationState,
    psi: &BasisOutput,
    y_measured: [f64; 3],
    dt: f64,
) -> AdaptationState {
    assert!(dt > 0.0);
    let g = state.gains;
    let psi_m = Matrix3x2(psi);
    let r_inv = 1.0 / g.r_meas;
    // Information rate M = Ψᵀ R⁻¹ Ψ bounds the fastest covariance eigenvalue.
    let m = psi_m.transpose() * psi_m * r_inv;
    let m_norm = m.norm();
    let p_norm = state.p_matrix().norm();
    let rate = 2.0 * g.lambda + m_norm * p_norm.max(1.0) + m_norm;
    let n_sub = ((rate * dt / 0.2).ceil() as usize).clamp(1, 8192);
    let h = dt / n_sub as f64;

    let mut a = Vector2::new(state.a_hat[0], state.a_hat[1]);
    let mut p = state.p_matrix();
    let y = Vector3::new(y_measured[0], y_measured[1], y_measured[2]);
    let q = Matrix2::identity() * g.q;

    for _ in 0..n_sub {
        let innovation = psi_m * a - y;
        let a_dot = -g.lambda * a - p * (psi_m.transpose() * innovation) * r_inv;
        let p_dot = -2.0 * g.lambda * p + q - p * m * p;
        a += h * a_dot;
        p += h * p_dot;
        p = floor_spd(p, P_FLOOR);
    }

    AdaptationState {
        a_hat: [a[0], a[1]],
        p: [[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]],
        gains: g,
    }
}

/// 3×2 matrix view of a basis output.
#[allow(non_snake_case)]
fn Matrix3x2(psi: &BasisOutput) -> nalgebra::Matrix3x2<f64> {
    nalgebra::Matrix3x2::new(
        psi.0[0][0], psi.0[0][1], psi.0[1][0], psi.0[1][1], psi.0[2][0], psi.0[2][1],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_basis(rng: &mut ChaCha8Rng) -> BasisOutput {
        BasisOutput([
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        ])
    }

    #[test]
    fn zero_innovation_keeps_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut state = AdaptationState::new(AdaptGains {
            lambda: 0.0,
            q: 0.0,
            r_meas: 0.01,
        });
        state.a_hat = [0.8, -0.3];
        let psi = random_basis(&mut rng);
        let y = psi.apply(state.a_hat);
        let next = adapt_online(&state, &psi, y, 1.0 / 30.0);
        assert!((next.a_hat[0] - 0.8).abs() < 1e-12);
        assert!((next.a_hat[1] + 0.3).abs() < 1e-12);
    }

    #[test]
    fn converges_on_planted_system() {
        // Stationary linear ground truth with persistent excitation and
        // measurement noise σ = 0.01: relative error < 2% within 10 s at
        // 30 Hz. Forgetting and process noise are off for a stationary
        // target.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a_true = [1.5, -0.8];
        let mut state = AdaptationState::new(AdaptGains {
            lambda: 0.0,
            q: 0.0,
            r_meas: 1e-4,
        });
        let dt = 1.0 / 30.0;
        for _ in 0..300 {
            let psi = random_basis(&mut rng);
            let mut y = psi.apply(a_true);
            for v in y.iter_mut() {
                *v += 0.01 * rng.gen_range(-1.732..1.732);
            }
            state = adapt_online(&state, &psi, y, dt);
            assert!(state.p_min_eig() >= P_FLOOR * 0.999);
            assert!(state.p_asymmetry() < 1e-10);
        }
        let err = ((state.a_hat[0] - a_true[0]).powi(2) + (state.a_hat[1] - a_true[1]).powi(2))
            .sqrt()
            / (a_true[0].powi(2) + a_true[1].powi(2)).sqrt();
        assert!(err < 0.02, "relative error {err}");
    }

    #[test]
    fn riccati_monotone_without_forgetting() {
        // λ = 0, Q = 0: P is non-increasing in the Loewner order.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = AdaptationState::new(AdaptGains {
            lambda: 0.0,
            q: 0.0,
            r_meas: 0.01,
        });
        for _ in 0..200 {
            let psi = random_basis(&mut rng);
            let next = adapt_online(&state, &psi, [0.1, -0.2, 0.05], 1.0 / 30.0);
            // P_prev − P_next must be PSD: check trace and determinant of the gap.
            let gap = [
                [state.p[0][0] - next.p[0][0], state.p[0][1] - next.p[0][1]],
                [state.p[1][0] - next.p[1][0], state.p[1][1] - next.p[1][1]],
            ];
            let tr = gap[0][0] + gap[1][1];
            let det = gap[0][0] * gap[1][1] - gap[0][1] * gap[1][0];
            assert!(tr >= -1e-12, "trace {tr}");
            assert!(det >= -1e-12, "det {det}");
            state = next;
        }
    }

    #[test]
    fn default_gains_stay_spd_under_large_basis() {
        // Stress the stability substepping with large basis entries.
        let mut state = AdaptationState::new(AdaptGains::default());
        let psi = BasisOutput([[8.0, -3.0], [5.0, 9.0], [-7.0, 4.0]]);
        for _ in 0..100 {
            state = adapt_online(&state, &psi, [1.0, 2.0, -1.0], 1.0 / 30.0);
            assert!(state.p_min_eig() >= P_FLOOR * 0.999, "P lost PD");
            assert!(state.a_hat.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn forgetting_decays_estimate_without_data() {
        let mut state = AdaptationState::new(AdaptGains::default());
        state.a_hat = [1.0, 1.0];
        // Zero basis: no information, only forgetting acts on â.
        let psi = BasisOutput([[0.0; 2]; 3]);
        for _ in 0..300 {
            state = adapt_online(&state, &psi, [0.0; 3], 1.0 / 30.0);
        }
        assert!(state.a_hat[0] < 0.4, "a = {:?}", state.a_hat);
    }
}
