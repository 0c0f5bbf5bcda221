//! Execution-time behavior generation with the self-reflective offset.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, invalid, Result};
use crate::model::{predict_behavior, predict_offset, ModelWeights};
use crate::sim::{Observation, Policy, PolicyAction};
use crate::tensor::Matrix;

/// Sliding window of the last `c` feature vectors and behavior differences.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    capacity: usize,
    feature_dim: usize,
    behavior_dim: usize,
    /// Front is most recent.
    features: VecDeque<Vec<f64>>,
    diffs: VecDeque<Vec<f64>>,
}

impl HistoryBuffer {
    pub fn new(capacity: usize, feature_dim: usize, behavior_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("history_len", "must be >= 1"));
        }
        Ok(Self {
            capacity,
            feature_dim,
            behavior_dim,
            features: VecDeque::with_capacity(capacity + 1),
            diffs: VecDeque::with_capacity(capacity + 1),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn clear(&mut self) {
        self.features.clear();
        self.diffs.clear();
    }

    /// Records the newest features and the difference `actual_prev − expected_prev`.
    pub fn push(&mut self, features: &[f64], expected_prev: &[f64], actual_prev: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim {
            return dim_err(format!("features have {} entries, expected {}", features.len(), self.feature_dim));
        }
        if expected_prev.len() != self.behavior_dim || actual_prev.len() != self.behavior_dim {
            return dim_err(format!("behaviors must have {} entries", self.behavior_dim));
        }
        self.features.push_front(features.to_vec());
        self.diffs
            .push_front(actual_prev.iter().zip(expected_prev).map(|(a, e)| a - e).collect());
        self.features.truncate(self.capacity);
        self.diffs.truncate(self.capacity);
        Ok(())
    }

    /// `X_t` (`d × c`), column 0 most recent, missing columns zero.
    pub fn feature_matrix(&self) -> Matrix {
        Self::materialize(&self.features, self.feature_dim, self.capacity)
    }

    /// `E_t` (`b × c`), column 0 most recent, missing columns zero.
    pub fn diff_matrix(&self) -> Matrix {
        Self::materialize(&self.diffs, self.behavior_dim, self.capacity)
    }

    fn materialize(ring: &VecDeque<Vec<f64>>, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for (k, v) in ring.iter().enumerate() {
            for (r, x) in v.iter().enumerate() {
                m.set(r, k, *x);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub linear_velocity: f64,
    pub angular_velocity: f64,
}

impl ControlCommand {
    pub fn new(linear_velocity: f64, angular_velocity: f64) -> Self {
        Self {
            linear_velocity,
            angular_velocity,
        }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.linear_velocity, self.angular_velocity]
    }

    pub fn is_finite(&self) -> bool {
        self.linear_velocity.is_finite() && self.angular_velocity.is_finite()
    }
}

/// Symmetric actuator envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_linear: f64,
    pub max_angular: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_linear: 1.5,
            max_angular: 1.5,
        }
    }
}

impl Limits {
    pub fn clamp(&self, cmd: ControlCommand) -> ControlCommand {
        ControlCommand {
            linear_velocity: cmd.linear_velocity.clamp(-self.max_linear, self.max_linear),
            angular_velocity: cmd.angular_velocity.clamp(-self.max_angular, self.max_angular),
        }
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generated {
    /// Clamped command to execute.
    pub command: ControlCommand,
    /// Terrain-aware term alone, clamped; the behavior the robot expects.
    pub plan: ControlCommand,
    /// Self-reflective offset before clamping.
    pub offset: ControlCommand,
    /// Set when the model produced a non-finite value; `command` is then zero.
    pub safety_stop: bool,
}

/// `clamp(predict_behavior(X_t) + predict_offset(E_t))`.
pub fn generate(weights: &ModelWeights, buffer: &HistoryBuffer, limits: &Limits) -> Result<Generated> {
    let dims = weights.dims();
    if dims.b != 2 {
        return dim_err(format!("controller needs b = 2 behaviors, model has {}", dims.b));
    }
    let y = predict_behavior(weights, &buffer.feature_matrix())?;
    let o = predict_offset(weights, &buffer.diff_matrix())?;
    let raw_plan = ControlCommand::new(y[0], y[1]);
    let offset = ControlCommand::new(o[0], o[1]);
    let raw = ControlCommand::new(y[0] + o[0], y[1] + o[1]);
    if !raw.is_finite() {
        log::warn!("non-finite controller output, issuing safety stop");
        return Ok(Generated {
            command: ControlCommand::default(),
            plan: ControlCommand::default(),
            offset,
            safety_stop: true,
        });
    }
    Ok(Generated {
        command: limits.clamp(raw),
        plan: limits.clamp(raw_plan),
        offset,
        safety_stop: false,
    })
}

/// Closed-loop policy driven by a trained model.
#[derive(Debug, Clone)]
pub struct Controller {
    weights: ModelWeights,
    limits: Limits,
    use_offset: bool,
    buffer: HistoryBuffer,
}

impl Controller {
    /// `use_offset = false` gives the ablation without self-reflection.
    pub fn new(weights: ModelWeights, limits: Limits, use_offset: bool) -> Result<Self> {
        weights.validate()?;
        let d = weights.dims();
        let buffer = HistoryBuffer::new(d.c, d.d, d.b)?;
        Ok(Self {
            weights,
            limits,
            use_offset,
            buffer,
        })
    }

    pub fn buffer(&self) -> &HistoryBuffer {
        &self.buffer
    }
}

impl Policy for Controller {
    fn reset(&mut self) {
        self.buffer.clear();
    }

    fn act(&mut self, obs: &Observation) -> Result<PolicyAction> {
        let (expected, actual) = obs.previous.unwrap_or(([0.0; 2], [0.0; 2]));
        self.buffer.push(obs.features, &expected, &actual)?;
        let g = generate(&self.weights, &self.buffer, &self.limits)?;
        let executed = if self.use_offset || g.safety_stop { g.command } else { g.plan };
        Ok(PolicyAction {
            expected: g.plan,
            executed,
            safety_stop: g.safety_stop,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;
    use crate::tensor::Tensor3;

    #[test]
    fn ring_keeps_most_recent() {
        let mut buf = HistoryBuffer::new(3, 2, 2).unwrap();
        for t in 0..6 {
            let x = [t as f64, 0.0];
            buf.push(&x, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        }
        assert_eq!(buf.len(), 3);
        let xm = buf.feature_matrix();
        assert_eq!((xm.get(0, 0), xm.get(0, 1), xm.get(0, 2)), (5.0, 4.0, 3.0));
        assert!(buf.diff_matrix().data.iter().all(|&e| e == 0.0));
        assert!(buf.push(&[0.0], &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn warm_start_pads_with_zeros() {
        let mut buf = HistoryBuffer::new(4, 1, 2).unwrap();
        buf.push(&[2.0], &[1.0, 0.0], &[0.5, 0.0]).unwrap();
        let e = buf.diff_matrix();
        assert_eq!(e.get(0, 0), -0.5);
        assert!((1..4).all(|k| e.get(0, k) == 0.0 && buf.feature_matrix().get(0, k) == 0.0));
    }

    #[test]
    fn offset_sign_and_composition() {
        let dims = Dims { l: 2, d: 3, b: 2, c: 2 };
        let mut m = ModelWeights::random_uniform(dims, 0.5, 17);
        let mut buf = HistoryBuffer::new(2, 3, 2).unwrap();
        buf.push(&[0.3, -0.2, 0.1], &[0.4, 0.0], &[0.1, 0.05]).unwrap();
        buf.push(&[0.2, 0.1, -0.4], &[0.5, 0.1], &[0.35, 0.0]).unwrap();
        let lim = Limits::default();
        let g = generate(&m, &buf, &lim).unwrap();
        let y = predict_behavior(&m, &buf.feature_matrix()).unwrap();
        let o = predict_offset(&m, &buf.diff_matrix()).unwrap();
        assert_eq!(g.command.to_array(), [y[0] + o[0], y[1] + o[1]]);

        m.u = Tensor3::zeros(2, 2, 2);
        let g0 = generate(&m, &buf, &lim).unwrap();
        assert_eq!(g0.command, g0.plan);

        // b = 1 style check on the first channel: U = u I, shortfall δ
        let mut m1 = ModelWeights::zeros(Dims { l: 1, d: 1, b: 2, c: 1 });
        m1.u = Tensor3::from_fn(2, 2, 1, |i, j, _| if i == j { 0.7 } else { 0.0 });
        let mut b1 = HistoryBuffer::new(1, 1, 2).unwrap();
        b1.push(&[0.0], &[1.0, 0.0], &[0.6, 0.0]).unwrap();
        let g1 = generate(&m1, &b1, &lim).unwrap();
        assert!((g1.offset.linear_velocity - (-0.7 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn clamped_and_safety_stop() {
        let dims = Dims { l: 1, d: 1, b: 2, c: 1 };
        let mut m = ModelWeights::zeros(dims);
        m.w.data[0] = 1.0;
        m.v.data[0] = 100.0;
        let mut buf = HistoryBuffer::new(1, 1, 2).unwrap();
        buf.push(&[1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let g = generate(&m, &buf, &Limits::default()).unwrap();
        assert_eq!(g.command.linear_velocity, 1.5);
        m.v.data[0] = f64::MAX;
        m.w.data[0] = f64::MAX;
        let g = generate(&m, &buf, &Limits::default()).unwrap();
        assert!(g.safety_stop);
        assert_eq!(g.command, ControlCommand::default());
    }
}
