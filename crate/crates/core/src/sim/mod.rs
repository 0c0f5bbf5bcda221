//! Deterministic 2-D kinematic terrain world.
//!
//! Tracks run straight along `+x` as consecutive segments. The robot is a
//! unicycle whose velocities follow commands through a first-order lag whose
//! gain and time constant depend on terrain and on the active [`Setback`].

mod dataset;
mod dynamics;
mod expert;
mod features;
mod terrain;
mod trial;

pub use dataset::{gen_dataset, trajectory_steps};
pub use dynamics::{step, wrap_angle, RobotState, Setback, SimParams};
pub use expert::{expert_command, ExpertGains, ExpertPolicy};
pub use features::{feature_layout, synth_features, FeatureConfig};
pub use terrain::{TerrainCatalog, TerrainKind, TerrainSegment, Track};
pub use trial::{run_trial, Observation, Outcome, Policy, PolicyAction, TrialConfig, TrialLog, World, TRIAL_LOG_FORMAT};
