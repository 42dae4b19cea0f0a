//! Minimal fully-connected network with exact analytic gradients.
//!
//! Hidden layers use ReLU, the output layer is linear. Forward and backward
//! passes are batched: a batch is a `DMatrix` whose *columns* are samples,
//! which keeps the hot path on `nalgebra`'s blocked matrix product.
//!
//! Networks are plain values; `forward`/`backward` take `&self` and are safe
//! to call from multiple threads at once.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub mod io;
pub mod optim;

pub use optim::{OptimConfig, Optimizer};

/// Errors from network construction and evaluation.
#[derive(Debug, Error)]
pub enum NeuralError {
    /// Input or gradient length does not match the layer dimensions.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A gradient contained NaN or infinity; the step was rejected.
    #[error("non-finite gradient encountered at step {step}")]
    NonFiniteGradient { step: u64 },
    /// Model file malformed or truncated.
    #[error("model file error: {0}")]
    ModelFile(String),
}

/// A fully-connected network: ReLU hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// One weight matrix per layer, shaped `out_dim × in_dim`.
    weights: Vec<DMatrix<f64>>,
    /// One bias vector per layer, length `out_dim`.
    biases: Vec<DVector<f64>>,
    /// Seed recorded at initialization (for the self-describing model file).
    seed: u64,
}

/// Per-layer parameter gradients, shaped exactly like the network parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<DMatrix<f64>>,
    pub d_biases: Vec<DVector<f64>>,
}

impl Gradients {
    /// All-zero gradients shaped like `net`.
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            d_weights: net
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            d_biases: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    /// Accumulate `other` into `self`.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            *a += b;
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            *a += b;
        }
    }

    /// Scale all gradients by `s`.
    pub fn scale(&mut self, s: f64) {
        for a in self.d_weights.iter_mut() {
            *a *= s;
        }
        for a in self.d_biases.iter_mut() {
            *a *= s;
        }
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Cached pre- and post-activation values from a batched forward pass,
/// needed to run the matching backward pass.
pub struct ForwardTrace {
    /// `activations[0]` is the input batch; `activations[i]` the output of
    /// layer `i-1` after its activation. Columns are samples.
    activations: Vec<DMatrix<f64>>,
    /// Pre-activation values per hidden layer (for the ReLU mask).
    pre_activations: Vec<DMatrix<f64>>,
}

impl ForwardTrace {
    /// Network output for this trace (columns are samples).
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace has layers")
    }
}

impl Mlp {
    /// He-uniform initialization from an explicit seed.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for win in dims.windows(2) {
            let (n_in, n_out) = (win[0], win[1]);
            let limit = (6.0 / n_in as f64).sqrt();
            weights.push(DMatrix::from_fn(n_out, n_in, |_, _| {
                rng.gen_range(-limit..limit)
            }));
            biases.push(DVector::zeros(n_out));
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
            seed,
        }
    }

    /// Build directly from parameters (used by deserialization and tests).
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<DMatrix<f64>>,
        biases: Vec<DVector<f64>>,
        seed: u64,
    ) -> Self {
        assert_eq!(weights.len(), dims.len() - 1);
        assert_eq!(biases.len(), dims.len() - 1);
        for (i, win) in dims.windows(2).enumerate() {
            assert_eq!(weights[i].shape(), (win[1], win[0]));
            assert_eq!(biases[i].len(), win[1]);
        }
        Mlp {
            dims,
            weights,
            biases,
            seed,
        }
    }

    /// Layer dimensions, input first.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Output dimension.
    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Seed recorded at initialization.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total parameter count: Σ (d_i·d_{i+1} + d_{i+1}).
    pub fn param_count(&self) -> usize {
        self.dims
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [DVector<f64>] {
        &mut self.biases
    }

    /// True when every parameter is finite.
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &DVector<f64>) -> Result<DVector<f64>, NeuralError> {
        if input.len() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let batch = DMatrix::from_column_slice(input.len(), 1, input.as_slice());
        let out = self.forward_batch(&batch);
        Ok(out.column(0).into_owned())
    }

    /// Batched forward pass; columns of `inputs` are samples.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(inputs.nrows(), self.input_dim(), "input dim mismatch");
        let n_layers = self.weights.len();
        let mut x = inputs.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &x;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l + 1 < n_layers {
                z.apply(|v| *v = v.max(0.0));
            }
            x = z;
        }
        x
    }

    /// Batched forward pass that keeps the intermediate activations needed
    /// for `backward`.
    pub fn forward_trace(&self, inputs: &DMatrix<f64>) -> ForwardTrace {
        assert_eq!(inputs.nrows(), self.input_dim(), "input dim mismatch");
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre_activations = Vec::with_capacity(n_layers.saturating_sub(1));
        activations.push(inputs.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * activations.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l + 1 < n_layers {
                pre_activations.push(z.clone());
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        ForwardTrace {
            activations,
            pre_activations,
        }
    }

    /// Exact backward pass for the scalar `sum(upstream ⊙ output)`.
    ///
    /// `upstream` has the output shape (columns are samples). Returns the
    /// parameter gradients and the gradient with respect to the input batch.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        upstream: &DMatrix<f64>,
    ) -> (Gradients, DMatrix<f64>) {
        let n_layers = self.weights.len();
        assert_eq!(upstream.nrows(), self.output_dim(), "upstream dim mismatch");
        assert_eq!(
            upstream.ncols(),
            trace.activations[0].ncols(),
            "upstream batch mismatch"
        );
        let mut d_weights = Vec::with_capacity(n_layers);
        let mut d_biases = Vec::with_capacity(n_layers);
        let mut delta = upstream.clone();
        for l in (0..n_layers).rev() {
            if l + 1 < n_layers {
                // Gate by the ReLU mask of this layer's pre-activation.
                let pre = &trace.pre_activations[l];
                delta.zip_apply(pre, |d, p| {
                    if p <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let dw = &delta * trace.activations[l].transpose();
            let db = DVector::from_iterator(
                delta.nrows(),
                delta.row_iter().map(|r| r.sum()),
            );
            d_weights.push(dw);
            d_biases.push(db);
            delta = self.weights[l].transpose() * delta;
        }
        d_weights.reverse();
        d_biases.reverse();
        (
            Gradients {
                d_weights,
                d_biases,
            },
            delta,
        )
    }

    /// Flatten parameters in file order (W0 row-major, b0, W1, b1, ...).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    out.push(w[(r, c)]);
                }
            }
            out.extend(b.iter().copied());
        }
        out
    }

    /// Overwrite parameters from a flat slice in `flatten_params` order.
    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for r in 0..w.nrows() {
                for c in 0..w.ncols() {
                    w[(r, c)] = flat[k];
                    k += 1;
                }
            }
            for v in b.iter_mut() {
                *v = flat[k];
                k += 1;
            }
        }
    }
}
