//! First-order optimizers: Adam (default) and plain SGD.

use crate::{Gradients, Mlp, NeuralError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// When false, run plain SGD (no moment accumulators used).
    pub adam: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            adam: true,
        }
    }
}

impl OptimConfig {
    /// Plain SGD at the given rate.
    pub fn sgd(learning_rate: f64) -> Self {
        OptimConfig {
            learning_rate,
            adam: false,
            ..OptimConfig::default()
        }
    }
}

/// Optimizer state: per-parameter first/second moments plus the step count.
#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimConfig,
    m_weights: Vec<DMatrix<f64>>,
    v_weights: Vec<DMatrix<f64>>,
    m_biases: Vec<DVector<f64>>,
    v_biases: Vec<DVector<f64>>,
    step: u64,
}

impl Optimizer {
    /// Fresh state shaped like `net`.
    pub fn new(config: OptimConfig, net: &Mlp) -> Self {
        let m_weights: Vec<_> = net
            .weights()
            .iter()
            .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
            .collect();
        let m_biases: Vec<_> = net.biases().iter().map(|b| DVector::zeros(b.len())).collect();
        Optimizer {
            config,
            v_weights: m_weights.clone(),
            m_weights,
            v_biases: m_biases.clone(),
            m_biases,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &OptimConfig {
        &self.config
    }

    /// Override the learning rate (used by fine-tuning).
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    /// Apply one update in place. Rejects non-finite gradients without
    /// touching the parameters or the moments.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<(), NeuralError> {
        if !grads.is_finite() {
            return Err(NeuralError::NonFiniteGradient { step: self.step });
        }
        self.step += 1;
        let c = &self.config;
        if !c.adam {
            for (w, g) in net.weights_mut().iter_mut().zip(&grads.d_weights) {
                w.zip_apply(g, |p, gv| *p -= c.learning_rate * gv);
            }
            for (b, g) in net.biases_mut().iter_mut().zip(&grads.d_biases) {
                b.zip_apply(g, |p, gv| *p -= c.learning_rate * gv);
            }
            return Ok(());
        }
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let lr_t = c.learning_rate * bc2.sqrt() / bc1;
        for l in 0..grads.d_weights.len() {
            adam_update(
                net.weights_mut()[l].as_mut_slice(),
                grads.d_weights[l].as_slice(),
                self.m_weights[l].as_mut_slice(),
                self.v_weights[l].as_mut_slice(),
                c,
                lr_t,
            );
            adam_update(
                net.biases_mut()[l].as_mut_slice(),
                grads.d_biases[l].as_slice(),
                self.m_biases[l].as_mut_slice(),
                self.v_biases[l].as_mut_slice(),
                c,
                lr_t,
            );
        }
        Ok(())
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    c: &OptimConfig,
    lr_t: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        params[i] -= lr_t * m[i] / (v[i].sqrt() + c.epsilon);
    }
}
