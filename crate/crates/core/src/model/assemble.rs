use crate::error::{dim_err, Error, Result};
use crate::tensor::{Matrix, Tensor3};

use super::{Dataset, FeatureLayout};

/// One time step of a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Feature vector `x_t` (length `d`).
    pub features: Vec<f64>,
    /// Terrain class under the robot.
    pub terrain: usize,
    /// Expected behavior `y_t` (length `b`).
    pub expected: Vec<f64>,
    /// Actual behavior `a_t` (length `b`).
    pub actual: Vec<f64>,
}

/// Builds one instance per window of `c` consecutive steps.
///
/// The instance at time `t` stacks steps `t, t−1, …, t−c+1` as columns
/// `0..c` of both `X` and `E`; labels, `y` and `a` come from step `t`.
pub fn assemble_instances(
    steps: &[TrajectoryStep],
    c: usize,
    num_terrains: usize,
    layout: &FeatureLayout,
) -> Result<Dataset> {
    if c == 0 {
        return Err(Error::Invalid {
            field: "history_len".into(),
            reason: "must be >= 1".into(),
        });
    }
    if steps.len() < c {
        return Err(Error::InsufficientHistory {
            needed: c,
            got: steps.len(),
        });
    }
    layout.validate()?;
    let d = layout.total_dim();
    let b = steps[0].expected.len();
    for (t, s) in steps.iter().enumerate() {
        if s.features.len() != d || s.expected.len() != b || s.actual.len() != b {
            return dim_err(format!("trajectory step {t} has inconsistent vector lengths"));
        }
        if s.terrain >= num_terrains {
            return dim_err(format!(
                "trajectory step {t} has terrain {} but only {num_terrains} classes",
                s.terrain
            ));
        }
    }
    let n = steps.len() - c + 1;
    let at = |s: usize| s + c - 1;
    let features = Tensor3::from_fn(d, n, c, |j, s, k| steps[at(s) - k].features[j]);
    let behavior_diffs = Tensor3::from_fn(b, n, c, |r, s, k| {
        let st = &steps[at(s) - k];
        st.actual[r] - st.expected[r]
    });
    let terrain_labels = Matrix::from_fn(num_terrains, n, |i, s| {
        if steps[at(s)].terrain == i {
            1.0
        } else {
            0.0
        }
    });
    let expected = Matrix::from_fn(b, n, |r, s| steps[at(s)].expected[r]);
    let actual = Matrix::from_fn(b, n, |r, s| steps[at(s)].actual[r]);
    Ok(Dataset {
        features,
        terrain_labels,
        expected,
        actual,
        behavior_diffs,
        layout: layout.clone(),
    })
}
