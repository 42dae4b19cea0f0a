//! Held-out evaluation: per-object prediction MSE before and after
//! coefficient adaptation, the two baselines, and multi-step rollout
//! position error.

use crate::basis::{solve_optimal_a, trig_basis, BasisOutput, LinearCoeff};
use crate::bundle::ModelBundle;
use crate::dataset::{ConditionData, ControlSample};
use crate::features::Normalizer;
use crate::train::{n_net_predict, solve_a_on_indices};
use nalgebra::DMatrix;
use pushnav_neural::Mlp;
use pushnav_se2::{integrate, SE2Accel};
use serde::{Deserialize, Serialize};

/// One evaluation row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectEvalRow {
    pub condition_id: u32,
    pub summary: String,
    /// MSE with â = 0 (no adaptation).
    pub mse_before: f64,
    /// MSE after the least-squares adaptation window.
    pub mse_after: f64,
    /// Trigonometric-basis baseline.
    pub mse_trig: f64,
    /// Residual baseline, when the bundle carries one.
    pub mse_residual: Option<f64>,
}

/// Full evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ObjectEvalRow>,
    pub mean_before: f64,
    pub mean_after: f64,
    pub mean_trig: f64,
    pub mean_residual: Option<f64>,
    /// Seconds of data used for the adaptation window.
    pub adaptation_window_s: f64,
}

impl EvalReport {
    /// Human-readable table; a machine-readable mirror is the serde form.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<44} {:>12} {:>12} {:>12} {:>12}\n",
            "cond", "object", "before", "after", "trig", "residual"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<6} {:<44} {:>12.4} {:>12.4} {:>12.4} {:>12}\n",
                r.condition_id,
                r.summary,
                r.mse_before,
                r.mse_after,
                r.mse_trig,
                r.mse_residual
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
            ));
        }
        out.push_str(&format!(
            "{:<6} {:<44} {:>12.4} {:>12.4} {:>12.4} {:>12}\n",
            "mean",
            "",
            self.mean_before,
            self.mean_after,
            self.mean_trig,
            self.mean_residual
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "-".into()),
        ));
        out
    }
}

fn basis_batch(psi: &Mlp, norm: &Normalizer, samples: &[ControlSample]) -> Vec<BasisOutput> {
    let n = samples.len();
    let mut x = DMatrix::<f64>::zeros(10, n);
    for (j, s) in samples.iter().enumerate() {
        for k in 0..10 {
            x[(k, j)] = (s.feature[k] - norm.mean[k]) / norm.std[k];
        }
    }
    let out = psi.forward_batch(&x);
    (0..n)
        .map(|j| BasisOutput::from_raw(out.column(j).as_slice()))
        .collect()
}

fn mse(preds: &[[f64; 3]], samples: &[ControlSample]) -> f64 {
    let mut s = 0.0;
    for (p, smp) in preds.iter().zip(samples) {
        for r in 0..3 {
            let e = smp.label_body[r] - p[r];
            s += e * e;
        }
    }
    s / (samples.len().max(1) * 3) as f64
}

/// Evaluate one held-out condition: adapt on the first `window_s` seconds,
/// report MSE on the remainder for the learned model (before/after), the
/// trigonometric baseline, and the residual baseline.
pub fn evaluate_condition(
    bundle: &ModelBundle,
    cond: &ConditionData,
    window_s: f64,
) -> ObjectEvalRow {
    let n_window = ((window_s / cond.dt).round() as usize).min(cond.samples.len() / 2);
    let window_idx: Vec<usize> = (0..n_window).collect();
    let eval = &cond.samples[n_window..];

    // Learned basis: solve coefficients on the window, predict the rest.
    let (coeff, _) = solve_a_on_indices(&bundle.psi, &bundle.feat_norm, cond, &window_idx);
    let bases = basis_batch(&bundle.psi, &bundle.feat_norm, eval);
    let preds_after: Vec<[f64; 3]> = bases.iter().map(|b| b.apply(coeff.a)).collect();
    let mse_after = mse(&preds_after, eval);
    let zeros: Vec<[f64; 3]> = vec![[0.0; 3]; eval.len()];
    let mse_before = mse(&zeros, eval);

    // Trigonometric baseline: time-indexed basis fitted on the window.
    let (trig_coeff, _) = solve_optimal_a(
        cond.samples[..n_window]
            .iter()
            .map(|s| (trig_basis(s.t), s.label_body)),
        cond.condition_id,
    );
    let preds_trig: Vec<[f64; 3]> = eval
        .iter()
        .map(|s| trig_basis(s.t).apply(trig_coeff.a))
        .collect();
    let mse_trig = mse(&preds_trig, eval);

    // Residual baseline: pooled net plus adapted residual basis.
    let mse_residual = bundle.residual.as_ref().map(|res| {
        let window = &cond.samples[..n_window];
        let res_bases_w = basis_batch(&res.psi, &res.feat_norm, window);
        let (rc, _) = solve_optimal_a(
            window.iter().zip(&res_bases_w).map(|(s, b)| {
                let base = n_net_predict(&res.n_net, &res.feat_norm, &s.feature);
                (
                    *b,
                    [
                        s.label_body[0] - base[0],
                        s.label_body[1] - base[1],
                        s.label_body[2] - base[2],
                    ],
                )
            }),
            cond.condition_id,
        );
        let res_bases = basis_batch(&res.psi, &res.feat_norm, eval);
        let preds: Vec<[f64; 3]> = eval
            .iter()
            .zip(&res_bases)
            .map(|(s, b)| {
                let base = n_net_predict(&res.n_net, &res.feat_norm, &s.feature);
                let corr = b.apply(rc.a);
                [base[0] + corr[0], base[1] + corr[1], base[2] + corr[2]]
            })
            .collect();
        mse(&preds, eval)
    });

    ObjectEvalRow {
        condition_id: cond.condition_id,
        summary: cond.summary.clone(),
        mse_before,
        mse_after,
        mse_trig,
        mse_residual,
    }
}

/// Evaluate a bundle over held-out conditions.
pub fn evaluate(bundle: &ModelBundle, held_out: &[ConditionData], window_s: f64) -> EvalReport {
    let rows: Vec<ObjectEvalRow> = held_out
        .iter()
        .map(|c| evaluate_condition(bundle, c, window_s))
        .collect();
    let n = rows.len().max(1) as f64;
    let mean_before = rows.iter().map(|r| r.mse_before).sum::<f64>() / n;
    let mean_after = rows.iter().map(|r| r.mse_after).sum::<f64>() / n;
    let mean_trig = rows.iter().map(|r| r.mse_trig).sum::<f64>() / n;
    let mean_residual = if rows.iter().all(|r| r.mse_residual.is_some()) && !rows.is_empty() {
        Some(rows.iter().map(|r| r.mse_residual.unwrap()).sum::<f64>() / n)
    } else {
        None
    };
    EvalReport {
        rows,
        mean_before,
        mean_after,
        mean_trig,
        mean_residual,
        adaptation_window_s: window_s,
    }
}

/// Roll the object model forward `steps` control periods from a segment
/// start, replaying recorded wrenches, and return the terminal position
/// error against the recording (m).
pub fn rollout_terminal_error(
    psi: &Mlp,
    norm: &Normalizer,
    coeff: &LinearCoeff,
    segment: &[ControlSample],
    steps: usize,
) -> f64 {
    assert!(segment.len() > steps);
    let mut pose = segment[0].object_pose;
    let mut twist = segment[0].object_twist;
    for rec in segment.iter().take(steps) {
        let raw = crate::features::object_feature(pose, twist, rec.wrench_world, rec.contact_point);
        let nf = norm.apply_vec(&raw);
        let out = psi
            .forward(&nalgebra::DVector::from_column_slice(&nf))
            .expect("feature width");
        let pred = BasisOutput::from_raw(out.as_slice()).apply(coeff.a);
        let a_xy = pose.rotate_vector([pred[0], pred[1]]);
        let (np, nt) = integrate(pose, twist, SE2Accel::new(a_xy[0], a_xy[1], pred[2]), 0.1);
        pose = np;
        twist = nt;
        if !pose.is_finite() {
            return f64::INFINITY;
        }
    }
    let target = segment[steps].object_pose;
    ((pose.x - target.x).powi(2) + (pose.y - target.y).powi(2)).sqrt()
}

/// Median of a slice (copied and sorted).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
