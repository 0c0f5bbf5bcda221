use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Dims, FeatureLayout, Hyperparams, ModelWeights};

pub const CHECKPOINT_FORMAT: &str = "reflexnav-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained model plus everything needed to use it.
///
/// Tensors are stored flat with element `(i, j, k)` at `(i * width + j) * depth + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub dims: Dims,
    pub num_modalities: usize,
    pub layout: FeatureLayout,
    pub hyperparams: Hyperparams,
    pub weights: ModelWeights,
    /// Free-form run configuration the model was trained with.
    #[serde(default)]
    pub run_config: serde_json::Value,
}

impl Checkpoint {
    pub fn new(
        weights: ModelWeights,
        layout: FeatureLayout,
        hyperparams: Hyperparams,
        config_hash: String,
        run_config: serde_json::Value,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash,
            dims: weights.dims(),
            num_modalities: layout.num_modalities(),
            layout,
            hyperparams,
            weights,
            run_config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unexpected format {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        self.weights.validate()?;
        self.layout.validate()?;
        if self.weights.dims() != self.dims
            || self.layout.total_dim() != self.dims.d
            || self.layout.num_modalities() != self.num_modalities
        {
            return Err(Error::Format("dims disagree with tensors or layout".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        ck.validate()?;
        Ok(ck)
    }
}
