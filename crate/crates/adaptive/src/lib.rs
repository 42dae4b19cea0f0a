//! The adaptive dynamics stack: a shared basis network whose 3×2 output,
//! multiplied by a low-dimensional per-object coefficient vector, predicts
//! planar object acceleration; a supervised robot model predicting robot
//! acceleration and interaction force; offline adversarial meta-training;
//! online recursive least-squares adaptation of the coefficients; and the
//! composite transition model the sampling controller rolls out.
//!
//! Trained models are immutable values; prediction is pure and safe to
//! evaluate concurrently. An [`AdaptationState`] has a single writer (the
//! control loop); readers take snapshots.

use thiserror::Error;

pub mod adapt;
pub mod basis;
pub mod bundle;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod train;
pub mod transition;

pub use adapt::{adapt_online, AdaptGains, AdaptationState};
pub use basis::{
    predict_object_accel, solve_optimal_a, trig_basis, BasisOutput, LinearCoeff,
};
pub use bundle::ModelBundle;
pub use dataset::{ConditionData, ControlSample, TrainSet};
pub use eval::{evaluate, rollout_terminal_error, EvalReport, ObjectEvalRow};
pub use features::{
    object_feature, robot_feature, Normalizer, OBJECT_FEATURE_DIM, ROBOT_FEATURE_DIM,
};
pub use train::{
    daiml_train, residual_train, train_robot_model, LossCurves, ResidualBaseline, TrainConfig,
    TrainedObjectModel,
};
pub use transition::{Dynamics, LearnedDynamics, ModelState};

/// Errors from training, adaptation, and evaluation.
#[derive(Debug, Error)]
pub enum AdaptiveError {
    /// The per-condition label covariance is not positive definite.
    #[error("Sigma_C is not positive definite")]
    NonPdSigma,
    /// Training loss exceeded the divergence threshold.
    #[error("training diverged at iteration {iter}: loss {loss}")]
    Diverged { iter: usize, loss: f64 },
    /// Dataset does not satisfy the training preconditions.
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    /// Underlying network error.
    #[error(transparent)]
    Neural(#[from] pushnav_neural::NeuralError),
    /// Bundle file I/O.
    #[error("model bundle error: {0}")]
    Bundle(String),
}
