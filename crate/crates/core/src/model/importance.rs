use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{behavior_group_norms, history_slice_norms, FeatureLayout, ModelWeights};

/// Relative importance of feature modalities and history steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub modality_names: Vec<String>,
    /// Sums to 1.
    pub modality_weights: Vec<f64>,
    /// Sums to 1; index 0 is the most recent step.
    pub timestep_weights: Vec<f64>,
}

pub fn importance_report(weights: &ModelWeights, layout: &FeatureLayout) -> Result<ImportanceReport> {
    let groups = behavior_group_norms(weights, layout)?;
    let (m, c) = (groups.rows, groups.cols);
    let per_modality: Vec<f64> = (0..m).map(|g| (0..c).map(|k| groups.get(g, k)).sum()).collect();
    let hist = history_slice_norms(&weights.u);
    let per_step: Vec<f64> = (0..c)
        .map(|k| hist[k] + (0..m).map(|g| groups.get(g, k)).sum::<f64>())
        .collect();
    let mt: f64 = per_modality.iter().sum();
    let st: f64 = per_step.iter().sum();
    if !(mt > 0.0 && st > 0.0 && mt.is_finite() && st.is_finite()) {
        return Err(Error::UndefinedImportance);
    }
    Ok(ImportanceReport {
        modality_names: layout.modality_names.clone(),
        modality_weights: per_modality.iter().map(|x| x / mt).collect(),
        timestep_weights: per_step.iter().map(|x| x / st).collect(),
    })
}
