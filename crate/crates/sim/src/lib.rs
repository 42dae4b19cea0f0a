//! Ground-truth planar physics for pushable indoor objects.
//!
//! Three object categories (box, cart, wheelchair) with randomized dynamic
//! characteristics, a lean-to-accelerate robot with two contact
//! end-effectors, scripted teleoperation for dataset generation, and
//! numerical differentiation for training labels.
//!
//! A [`PushWorld`] owns one robot and one or more objects and is stepped at a
//! fixed substep of 5 ms; distinct worlds may run in parallel, a single world
//! is single-writer. All randomness flows through explicitly seeded
//! generators.
//!
//! Objects interact with the robot's end-effectors only; object–object and
//! object–wall contact is outside this layer, the planners keep goals clear
//! of both.

use thiserror::Error;

pub mod contact;
pub mod episode;
pub mod object;
pub mod robot;
pub mod teleop;
pub mod world;

pub use contact::{contact_forces, ContactResult};
pub use episode::{finite_difference_accel, Episode, Sample};
pub use object::{randomize_object, step_object, ObjectCategory, ObjectParams, WheelSpec};
pub use robot::{ee_placement, step_robot, RobotParams, RobotState};
pub use teleop::{scripted_teleop, TeleopConfig};
pub use world::{ObjectInstance, PushWorld, TickRecord};

/// Gravitational acceleration (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Physics substep (s).
pub const SIM_DT: f64 = 0.005;

/// Control period (s): the controller runs at 10 Hz.
pub const CONTROL_DT: f64 = 0.1;

/// Errors surfaced by the simulation layer.
#[derive(Debug, Error)]
pub enum SimError {
    /// An applied wrench contained NaN or infinity.
    #[error("non-finite wrench applied to object")]
    NonFiniteWrench,
    /// Sample timestamps are not on a uniform grid.
    #[error("non-uniform sample spacing: expected {expected}, found {found} at index {index}")]
    NonUniformDt {
        expected: f64,
        found: f64,
        index: usize,
    },
    /// Fewer samples than an operation needs.
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    /// The teleoperation policy lost contact for too long.
    #[error("contact lost for more than {limit} s at t = {t}")]
    ContactLost { limit: f64, t: f64 },
    /// Dataset I/O failure.
    #[error("episode file error: {0}")]
    EpisodeFile(String),
}
