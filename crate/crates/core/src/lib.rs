//! Terrain-aware behavior learning with a self-reflective offset.
//!
//! The crate covers the whole pipeline: dense tensors ([`tensor`]), the
//! learnable model and its objective ([`model`]), the reweighted solver
//! ([`solver`]), the closed-loop [`controller`], a kinematic terrain
//! simulator ([`sim`]), evaluation [`metrics`], and planted-data generators
//! for recovery experiments ([`planted`]).

pub mod controller;
pub mod error;
pub mod metrics;
pub mod model;
pub mod planted;
pub mod sim;
pub mod solver;
pub mod tensor;

pub use controller::{generate, ControlCommand, Controller, HistoryBuffer, Limits};
pub use error::{Error, Result};
pub use metrics::{inconsistency, jerkiness, summarize, BenchmarkReport};
pub use model::{Checkpoint, Dataset, Dims, FeatureLayout, Hyperparams, ModelWeights};
pub use sim::{Outcome, Setback, TrialLog, World};
pub use solver::{solve, SolverConfig, SolverReport};
pub use tensor::{Axis, Matrix, Tensor3};
