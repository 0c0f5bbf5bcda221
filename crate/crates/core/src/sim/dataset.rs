use crate::controller::Limits;
use crate::error::{invalid, Result};
use crate::model::{assemble_instances, Dataset, TrajectoryStep};

use super::{feature_layout, run_trial, ExpertGains, ExpertPolicy, Setback, TrialConfig, TrialLog, Track, World};

/// Per-step training records of a logged trial.
pub fn trajectory_steps(log: &TrialLog) -> Vec<TrajectoryStep> {
    (0..log.len())
        .map(|t| TrajectoryStep {
            features: log.features[t].clone(),
            terrain: log.terrain[t],
            expected: log.expected_commands[t].to_vec(),
            actual: log.actual_behaviors[t].to_vec(),
        })
        .collect()
}

/// Rolls out the expert on every track × setback × seed and stacks the
/// windows of `c` steps into one dataset.
pub fn gen_dataset(
    tracks: &[Track],
    setbacks: &[Setback],
    seeds: &[u64],
    c: usize,
    world: &World,
    timeout: f64,
) -> Result<Dataset> {
    if tracks.is_empty() {
        return Err(invalid("tracks", "need at least one track"));
    }
    if setbacks.is_empty() || seeds.is_empty() {
        return Err(invalid("scenario", "need at least one setback and one seed"));
    }
    let layout = feature_layout(world.catalog.len(), &world.features)?;
    let mut expert = ExpertPolicy {
        catalog: world.catalog.clone(),
        gains: ExpertGains::default(),
        limits: Limits::default(),
    };
    let mut parts = Vec::new();
    for (ti, track) in tracks.iter().enumerate() {
        for setback in setbacks {
            for &seed in seeds {
                let log = run_trial(track, &mut expert, setback, world, &TrialConfig { timeout, seed })?;
                if log.len() < c {
                    log::warn!("track {ti} seed {seed}: {} steps is shorter than c = {c}, skipped", log.len());
                    continue;
                }
                parts.push(assemble_instances(&trajectory_steps(&log), c, world.catalog.len(), &layout)?);
            }
        }
    }
    Dataset::concat(&parts)
}
