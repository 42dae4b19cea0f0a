//! The linear-in-coefficients object model: a 3×2 basis matrix from the
//! network's 6 outputs times a 2-vector of object-specific coefficients.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use pushnav_neural::Mlp;
use pushnav_se2::SE2Accel;
use serde::{Deserialize, Serialize};

/// Tikhonov damping used by the least-squares coefficient solve.
pub const A_SOLVE_DAMPING: f64 = 1e-6;

/// Width of the coefficient vector.
pub const COEFF_DIM: usize = 2;

/// The basis matrix: 6 network outputs reshaped row-major into 3×2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOutput(pub [[f64; COEFF_DIM]; 3]);

impl BasisOutput {
    /// Reshape a 6-vector of network outputs (row-major).
    pub fn from_raw(out: &[f64]) -> Self {
        debug_assert_eq!(out.len(), 6);
        BasisOutput([
            [out[0], out[1]],
            [out[2], out[3]],
            [out[4], out[5]],
        ])
    }

    /// Ψ·a.
    pub fn apply(&self, a: [f64; COEFF_DIM]) -> [f64; 3] {
        [
            self.0[0][0] * a[0] + self.0[0][1] * a[1],
            self.0[1][0] * a[0] + self.0[1][1] * a[1],
            self.0[2][0] * a[0] + self.0[2][1] * a[1],
        ]
    }
}

/// Per-condition linear coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoeff {
    pub a: [f64; COEFF_DIM],
    pub condition_id: u32,
}

impl LinearCoeff {
    pub fn zero(condition_id: u32) -> Self {
        LinearCoeff {
            a: [0.0; COEFF_DIM],
            condition_id,
        }
    }
}

/// Evaluate the basis network on a normalized feature vector.
pub fn basis_from_net(psi: &Mlp, normalized_feature: &[f64]) -> BasisOutput {
    let out = psi
        .forward(&DVector::from_column_slice(normalized_feature))
        .expect("feature width matches the network");
    BasisOutput::from_raw(out.as_slice())
}

/// Body-frame object acceleration `Ψ(feature)·a`; the caller rotates into
/// the world frame.
pub fn predict_object_accel(psi: &Mlp, a: &LinearCoeff, normalized_feature: &[f64]) -> SE2Accel {
    let p = basis_from_net(psi, normalized_feature).apply(a.a);
    SE2Accel::new(p[0], p[1], p[2])
}

/// Least-squares coefficients over a batch of (basis, body-accel label)
/// pairs: minimizes Σ‖y − Ψa‖² via damped normal equations.
///
/// Returns the coefficients and a degeneracy flag set when the stacked
/// design matrix is rank deficient.
pub fn solve_optimal_a(
    batch: impl Iterator<Item = (BasisOutput, [f64; 3])>,
    condition_id: u32,
) -> (LinearCoeff, bool) {
    let mut ata = Matrix2::<f64>::zeros();
    let mut atb = Vector2::<f64>::zeros();
    let mut rows = 0usize;
    for (psi, y) in batch {
        for r in 0..3 {
            let row = psi.0[r];
            ata[(0, 0)] += row[0] * row[0];
            ata[(0, 1)] += row[0] * row[1];
            ata[(1, 1)] += row[1] * row[1];
            atb[0] += row[0] * y[r];
            atb[1] += row[1] * y[r];
        }
        rows += 3;
    }
    ata[(1, 0)] = ata[(0, 1)];
    // Rank check on the undamped normal matrix.
    let tr = ata[(0, 0)] + ata[(1, 1)];
    let det = ata[(0, 0)] * ata[(1, 1)] - ata[(0, 1)] * ata[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let lambda_min = tr / 2.0 - disc;
    let degenerate = rows < 2 || lambda_min < 1e-8;

    let damped = ata + Matrix2::identity() * A_SOLVE_DAMPING;
    let a = damped
        .lu()
        .solve(&atb)
        .unwrap_or_else(Vector2::zeros);
    (
        LinearCoeff {
            a: [a[0], a[1]],
            condition_id,
        },
        degenerate,
    )
}

/// Dense-matrix least squares used as an independent check: stacks every
/// basis row into a tall matrix and solves the same damped normal equations
/// through a generic linear solve.
pub fn solve_optimal_a_dense(
    batch: &[(BasisOutput, [f64; 3])],
) -> [f64; COEFF_DIM] {
    let n = batch.len() * 3;
    let mut design = DMatrix::<f64>::zeros(n, COEFF_DIM);
    let mut rhs = DVector::<f64>::zeros(n);
    for (i, (psi, y)) in batch.iter().enumerate() {
        for r in 0..3 {
            design[(i * 3 + r, 0)] = psi.0[r][0];
            design[(i * 3 + r, 1)] = psi.0[r][1];
            rhs[i * 3 + r] = y[r];
        }
    }
    let ata = design.transpose() * &design + DMatrix::identity(2, 2) * A_SOLVE_DAMPING;
    let atb = design.transpose() * rhs;
    let sol = ata.lu().solve(&atb).unwrap();
    [sol[0], sol[1]]
}

/// Time-indexed trigonometric basis `[sin t, sin 2t, sin 3t, cos t, cos 2t,
/// cos 3t]` reshaped like the learned basis.
pub fn trig_basis(t: f64) -> BasisOutput {
    BasisOutput::from_raw(&[
        t.sin(),
        (2.0 * t).sin(),
        (3.0 * t).sin(),
        t.cos(),
        (2.0 * t).cos(),
        (3.0 * t).cos(),
    ])
}
