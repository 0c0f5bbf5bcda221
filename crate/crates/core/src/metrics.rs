//! Trial metrics and benchmark aggregation.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::ControlCommand;
use crate::error::{invalid, Result};
use crate::sim::{step, wrap_angle, Outcome, RobotState, Setback, SimParams, TerrainSegment, TrialLog};

pub const REPORT_FORMAT: &str = "reflexnav-benchmark-report";
pub const REPORT_VERSION: u32 = 1;

/// Meters of error charged per radian of heading error.
pub const HEADING_WEIGHT: f64 = 1.0;

/// Poses reached by executing the expected commands on an ideal robot:
/// no setback, full traction, no noise, same actuation lag.
pub fn ideal_poses(log: &TrialLog) -> Vec<[f64; 3]> {
    let params = SimParams {
        dt: log.dt,
        tau0: log.tau0,
        noise_scale: 0.0,
        ..SimParams::default()
    };
    let seg = TerrainSegment {
        terrain_type: 0,
        length: f64::INFINITY,
        slope: 0.0,
        traction: 1.0,
        roughness: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s: RobotState = log.initial_state;
    log.expected_commands
        .iter()
        .map(|c| {
            s = step(&s, ControlCommand::new(c[0], c[1]), &seg, &Setback::IDENTITY, &params, &mut rng);
            [s.x, s.y, s.heading]
        })
        .collect()
}

/// `‖Δposition‖ + β |wrap(Δheading)|`.
pub fn pose_error(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    (dx * dx + dy * dy).sqrt() + HEADING_WEIGHT * wrap_angle(a[2] - b[2]).abs()
}

/// Mean pose error between two equally long trajectories.
pub fn trajectory_inconsistency(expected: &[[f64; 3]], actual: &[[f64; 3]]) -> Result<f64> {
    if expected.is_empty() || expected.len() != actual.len() {
        return Err(invalid("log", "trajectories must be non-empty and equally long"));
    }
    let total: f64 = expected.iter().zip(actual).map(|(e, a)| pose_error(e, a)).sum();
    Ok(total / expected.len() as f64)
}

/// Mean pose error between the ideal execution of the expected commands
/// and the logged poses.
pub fn inconsistency(log: &TrialLog) -> Result<f64> {
    if log.is_empty() {
        return Err(invalid("log", "empty trial log"));
    }
    trajectory_inconsistency(&ideal_poses(log), &log.poses)
}

/// Central differences inside, one-sided at both ends.
fn derivative(x: &[f64], dt: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (x[1] - x[0]) / dt
            } else if i == n - 1 {
                (x[n - 1] - x[n - 2]) / dt
            } else {
                (x[i + 1] - x[i - 1]) / (2.0 * dt)
            }
        })
        .collect()
}

/// Mean over steps of `|jerk_long| + |jerk_lat|` in the robot frame.
///
/// Longitudinal acceleration is the derivative of `v`; lateral acceleration
/// is the centripetal `v ω`.
pub fn jerkiness(log: &TrialLog) -> Result<f64> {
    let n = log.actual_behaviors.len();
    if n < 4 {
        return Err(invalid("log", format!("jerkiness needs at least 4 samples, got {n}")));
    }
    let v: Vec<f64> = log.actual_behaviors.iter().map(|b| b[0]).collect();
    let a_long = derivative(&v, log.dt);
    let a_lat: Vec<f64> = log.actual_behaviors.iter().map(|b| b[0] * b[1]).collect();
    let j_long = derivative(&a_long, log.dt);
    let j_lat = derivative(&a_lat, log.dt);
    Ok(j_long.iter().zip(&j_lat).map(|(a, b)| a.abs() + b.abs()).sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub index: usize,
    pub outcome: Outcome,
    pub steps: usize,
    /// Seconds; present for completed trials.
    pub traversal_time: Option<f64>,
    pub inconsistency: Option<f64>,
    pub jerkiness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub label: String,
    pub trials: usize,
    pub failure_count: usize,
    /// Means over completed trials; absent when every trial failed.
    pub mean_traversal_time: Option<f64>,
    pub mean_inconsistency: Option<f64>,
    pub mean_jerkiness: Option<f64>,
    pub per_trial: Vec<TrialMetrics>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

pub fn trial_metrics(index: usize, log: &TrialLog) -> TrialMetrics {
    let completed = log.outcome == Outcome::Completed;
    TrialMetrics {
        index,
        outcome: log.outcome,
        steps: log.len(),
        traversal_time: completed.then(|| log.duration()),
        inconsistency: inconsistency(log).ok(),
        jerkiness: jerkiness(log).ok(),
    }
}

/// Aggregates trials; time and metric means cover completed trials only.
pub fn summarize(logs: &[TrialLog]) -> BenchmarkReport {
    summarize_metrics(logs.iter().enumerate().map(|(i, l)| trial_metrics(i, l)).collect())
}

pub fn summarize_metrics(per_trial: Vec<TrialMetrics>) -> BenchmarkReport {
    let ok = || per_trial.iter().filter(|t| t.outcome == Outcome::Completed);
    BenchmarkReport {
        format: REPORT_FORMAT.into(),
        version: REPORT_VERSION,
        config_hash: String::new(),
        label: String::new(),
        trials: per_trial.len(),
        failure_count: per_trial.iter().filter(|t| t.outcome.is_failure()).count(),
        mean_traversal_time: mean(ok().filter_map(|t| t.traversal_time)),
        mean_inconsistency: mean(ok().filter_map(|t| t.inconsistency)),
        mean_jerkiness: mean(ok().filter_map(|t| t.jerkiness)),
        per_trial,
    }
}

impl BenchmarkReport {
    /// One row per trial.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut s = String::from("label,index,outcome,steps,traversal_time,inconsistency,jerkiness\n");
        for t in &self.per_trial {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.label,
                t.index,
                t.outcome.as_str(),
                t.steps,
                opt(t.traversal_time),
                opt(t.inconsistency),
                opt(t.jerkiness)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_from_velocity(v: &[f64], omega: &[f64], dt: f64) -> TrialLog {
        let n = v.len();
        TrialLog {
            dt,
            tau0: 0.3,
            initial_state: RobotState::default(),
            expected_commands: vec![[0.0, 0.0]; n],
            executed_commands: vec![[0.0, 0.0]; n],
            actual_behaviors: v.iter().zip(omega).map(|(&a, &b)| [a, b]).collect(),
            poses: vec![[0.0; 3]; n],
            features: vec![],
            terrain: vec![0; n],
            outcome: Outcome::Completed,
        }
    }

    #[test]
    fn derivative_of_line_is_constant() {
        let d = derivative(&[1.0, 3.0, 5.0, 7.0], 0.5);
        assert_eq!(d, vec![4.0; 4]);
    }

    #[test]
    fn jerkiness_of_sinusoid() {
        let dt = 1.0 / 15.0;
        let n = 2000;
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * dt).sin()).collect();
        let log = log_from_velocity(&v, &vec![0.0; n], dt);
        let got = jerkiness(&log).unwrap();
        let want = (0..n).map(|i| (i as f64 * dt).cos().abs()).sum::<f64>() / n as f64;
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }

    #[test]
    fn pose_error_symmetry() {
        let a = [1.0, 2.0, 3.0];
        let b = [-0.5, 0.25, -3.0];
        assert_eq!(pose_error(&a, &b), pose_error(&b, &a));
    }

    #[test]
    fn all_failed_means_absent() {
        let mut l = log_from_velocity(&[0.0; 5], &[0.0; 5], 0.1);
        l.outcome = Outcome::Stuck;
        let r = summarize(&[l.clone(), l]);
        assert_eq!(r.failure_count, 2);
        assert_eq!(r.mean_traversal_time, None);
        assert_eq!(r.mean_inconsistency, None);
        assert!(r.to_csv().lines().count() == 3);
    }
}
