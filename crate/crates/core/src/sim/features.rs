use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::FeatureLayout;

use super::{RobotState, SimParams, TerrainSegment};

pub const GEOMETRY_DIM: usize = 4;
pub const PROPRIO_DIM: usize = 2;

/// Optional feature modalities beyond the three built-in blocks.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Widths of extra modalities filled with unit Gaussian noise.
    pub noise_modalities: Vec<usize>,
}

/// Signature (`l` dims), geometry, proprioception, then any noise modalities.
pub fn feature_layout(num_types: usize, cfg: &FeatureConfig) -> Result<FeatureLayout> {
    let mut dims = vec![num_types, GEOMETRY_DIM, PROPRIO_DIM];
    let mut names: Vec<String> = ["signature", "geometry", "proprioception"].map(String::from).into();
    for (i, &w) in cfg.noise_modalities.iter().enumerate() {
        dims.push(w);
        names.push(format!("noise{i}"));
    }
    FeatureLayout::new(dims, names)
}

/// Synthetic observation of the robot on `segment`.
///
/// * signature: one-hot of the terrain type plus Gaussian noise with SD = roughness
/// * geometry: slope / 45°, roughness, heading error, lateral offset
/// * proprioception: measured `v` and `ω`
pub fn synth_features<R: Rng + ?Sized>(
    num_types: usize,
    cfg: &FeatureConfig,
    params: &SimParams,
    segment: &TerrainSegment,
    state: &RobotState,
    rng: &mut R,
) -> Vec<f64> {
    let ns = params.noise_scale;
    let mut gauss = |sd: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sd * z
    };
    let mut out = Vec::with_capacity(num_types + GEOMETRY_DIM + PROPRIO_DIM);
    for i in 0..num_types {
        let mean = if i == segment.terrain_type { 1.0 } else { 0.0 };
        out.push(mean + gauss(segment.roughness * ns));
    }
    out.extend([segment.slope / 45.0, segment.roughness, state.heading, state.y]);
    let pn = params.proprio_noise * ns;
    out.push(state.v + gauss(pn));
    out.push(state.omega + gauss(pn));
    for &w in &cfg.noise_modalities {
        for _ in 0..w {
            out.push(gauss(ns));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg(t: usize, roughness: f64) -> TerrainSegment {
        TerrainSegment {
            terrain_type: t,
            length: 1.0,
            slope: 9.0,
            traction: 1.0,
            roughness,
        }
    }

    #[test]
    fn noiseless_signature_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = RobotState {
            v: 0.5,
            heading: 0.1,
            y: -0.2,
            ..Default::default()
        };
        let p = SimParams::noiseless();
        let cfg = FeatureConfig::default();
        let f = synth_features(3, &cfg, &p, &seg(1, 0.0), &st, &mut rng);
        assert_eq!(f, vec![0.0, 1.0, 0.0, 0.2, 0.0, 0.1, -0.2, 0.5, 0.0]);
        let g = synth_features(3, &cfg, &p, &seg(2, 0.0), &st, &mut rng);
        assert_ne!(f[..3], g[..3]);
        assert_eq!(feature_layout(3, &cfg).unwrap().total_dim(), f.len());
    }

    #[test]
    fn type_means_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = SimParams::default();
        let cfg = FeatureConfig::default();
        let st = RobotState::default();
        let n = 1000;
        let sd = 0.1;
        let means: Vec<Vec<f64>> = (0..3)
            .map(|t| {
                let mut m = vec![0.0; 3];
                for _ in 0..n {
                    let f = synth_features(3, &cfg, &p, &seg(t, sd), &st, &mut rng);
                    for i in 0..3 {
                        m[i] += f[i] / n as f64;
                    }
                }
                m
            })
            .collect();
        for a in 0..3 {
            for b in 0..a {
                let dist: f64 = (0..3).map(|i| (means[a][i] - means[b][i]).powi(2)).sum::<f64>().sqrt();
                assert!(dist >= 5.0 * sd, "{dist}");
            }
        }
    }

    #[test]
    fn noise_modalities_extend_layout() {
        let cfg = FeatureConfig {
            noise_modalities: vec![3],
        };
        let l = feature_layout(5, &cfg).unwrap();
        assert_eq!(l.modality_dims, vec![5, 4, 2, 3]);
        assert_eq!(l.modality_names[3], "noise0");
    }
}
