//! Run configuration: TOML on disk, fully validated before use.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use reflexnav_core::controller::Limits;
use reflexnav_core::model::{FeatureLayout, Hyperparams};
use reflexnav_core::sim::{feature_layout, FeatureConfig, Setback, SimParams, TerrainCatalog, TerrainKind, Track, World};
use reflexnav_core::solver::SolverConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Optional explicit dimensions, checked against what the world produces.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub terrain_types: Option<usize>,
    pub feature_dim: Option<usize>,
    pub behavior_dim: Option<usize>,
    pub modality_dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub terrain: String,
    pub length: f64,
    #[serde(default)]
    pub slope: f64,
    pub traction: Option<f64>,
    pub roughness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub segments: Vec<SegmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub track: String,
    pub setback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub tracks: Vec<String>,
    pub setbacks: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub scenarios: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
}

fn default_timeout() -> f64 {
    120.0
}

fn default_trials() -> usize {
    10
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub limits: Limits,
    /// Terrain types in label order; defaults to the built-in catalog.
    #[serde(default)]
    pub terrains: Option<Vec<TerrainKind>>,
    #[serde(default)]
    pub tracks: BTreeMap<String, TrackSpec>,
    /// `identity` is always available.
    #[serde(default)]
    pub setbacks: BTreeMap<String, Setback>,
    #[serde(default)]
    pub scenarios: BTreeMap<String, ScenarioSpec>,
    pub data: Option<DataSection>,
    pub benchmark: Option<BenchmarkSection>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn catalog(&self) -> TerrainCatalog {
        match &self.terrains {
            Some(kinds) => TerrainCatalog { kinds: kinds.clone() },
            None => TerrainCatalog::default(),
        }
    }

    pub fn world(&self) -> World {
        World {
            catalog: self.catalog(),
            features: self.features.clone(),
            params: self.sim,
        }
    }

    pub fn layout(&self) -> Result<FeatureLayout, ConfigError> {
        feature_layout(self.catalog().len(), &self.features).map_err(|e| invalid("features", e.to_string()))
    }

    pub fn track(&self, name: &str) -> Result<Track, ConfigError> {
        let field = format!("tracks.{name}");
        let spec = self
            .tracks
            .get(name)
            .ok_or_else(|| invalid(&field, "no such track"))?;
        let cat = self.catalog();
        let mut segments = Vec::with_capacity(spec.segments.len());
        for (i, s) in spec.segments.iter().enumerate() {
            let t = cat
                .index_of(&s.terrain)
                .ok_or_else(|| invalid(format!("{field}.segments[{i}].terrain"), format!("unknown terrain {:?}", s.terrain)))?;
            let mut seg = cat.segment(t, s.length, s.slope);
            if let Some(tr) = s.traction {
                seg.traction = tr;
            }
            if let Some(r) = s.roughness {
                seg.roughness = r;
            }
            seg.validate(cat.len())
                .map_err(|e| invalid(format!("{field}.segments[{i}]"), e.to_string()))?;
            segments.push(seg);
        }
        let track = Track { segments };
        track.validate(cat.len()).map_err(|e| invalid(&field, e.to_string()))?;
        Ok(track)
    }

    pub fn setback(&self, name: &str) -> Result<Setback, ConfigError> {
        match self.setbacks.get(name) {
            Some(s) => Ok(*s),
            None if name == "identity" => Ok(Setback::IDENTITY),
            None => Err(invalid(format!("setbacks.{name}"), "no such setback")),
        }
    }

    pub fn scenario(&self, name: &str) -> Result<(Track, Setback), ConfigError> {
        let s = self
            .scenarios
            .get(name)
            .ok_or_else(|| invalid(format!("scenarios.{name}"), "no such scenario"))?;
        Ok((self.track(&s.track)?, self.setback(&s.setback)?))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn wrap(field: &str) -> impl Fn(reflexnav_core::Error) -> ConfigError + '_ {
            move |e| invalid(field, e.to_string())
        }
        self.hyperparams.validate().map_err(|e| match e {
            reflexnav_core::Error::Invalid { field, reason } => invalid(format!("hyperparams.{field}"), reason),
            other => invalid("hyperparams", other.to_string()),
        })?;
        self.solver.validate().map_err(wrap("solver"))?;
        self.sim.validate().map_err(wrap("sim"))?;
        self.catalog().validate().map_err(wrap("terrains"))?;
        for (name, sb) in &self.setbacks {
            sb.validate().map_err(wrap(&format!("setbacks.{name}")))?;
        }
        if !(self.limits.max_linear > 0.0 && self.limits.max_angular > 0.0) {
            return Err(invalid("limits", "limits must be > 0"));
        }
        let layout = self.layout()?;
        let m = &self.model;
        if let Some(l) = m.terrain_types {
            if l != self.catalog().len() {
                return Err(invalid("model.terrain_types", format!("{l} but {} terrains are defined", self.catalog().len())));
            }
        }
        if let Some(b) = m.behavior_dim {
            if b != 2 {
                return Err(invalid("model.behavior_dim", "the robot has exactly 2 behaviors"));
            }
        }
        if let Some(dims) = &m.modality_dims {
            let d: usize = dims.iter().sum();
            if let Some(fd) = m.feature_dim {
                if d != fd {
                    return Err(invalid("model.modality_dims", format!("sum to {d}, feature_dim is {fd}")));
                }
            }
            if *dims != layout.modality_dims {
                return Err(invalid(
                    "model.modality_dims",
                    format!("{dims:?} differs from the generated layout {:?}", layout.modality_dims),
                ));
            }
        }
        if let Some(fd) = m.feature_dim {
            if fd != layout.total_dim() {
                return Err(invalid("model.feature_dim", format!("{fd} but features have {} dims", layout.total_dim())));
            }
        }
        for name in self.tracks.keys() {
            self.track(name)?;
        }
        for (name, s) in &self.scenarios {
            self.track(&s.track)
                .map_err(|e| invalid(format!("scenarios.{name}.track"), e.to_string()))?;
            self.setback(&s.setback)
                .map_err(|e| invalid(format!("scenarios.{name}.setback"), e.to_string()))?;
        }
        if let Some(data) = &self.data {
            if data.tracks.is_empty() || data.setbacks.is_empty() || data.seeds.is_empty() {
                return Err(invalid("data", "tracks, setbacks and seeds must be non-empty"));
            }
            for t in &data.tracks {
                self.track(t)?;
            }
            for s in &data.setbacks {
                self.setback(s)?;
            }
            if data.timeout.is_nan() || data.timeout <= 0.0 {
                return Err(invalid("data.timeout", "must be > 0"));
            }
        }
        if let Some(b) = &self.benchmark {
            if b.trials == 0 {
                return Err(invalid("benchmark.trials", "must be >= 1"));
            }
            for s in &b.scenarios {
                self.scenario(s)?;
            }
            if b.timeout.is_nan() || b.timeout <= 0.0 {
                return Err(invalid("benchmark.timeout", "must be > 0"));
            }
        }
        Ok(())
    }

    /// JSON form without the output directory, which does not affect results.
    pub fn portable_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        value
    }

    /// SHA-256 of the canonical (key-sorted) portable JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.portable_json().to_string().as_bytes()))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    RunConfig::from_toml_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_toml_str(s, Path::new("test.toml"))
    }

    #[test]
    fn empty_config_gets_defaults() {
        let c = parse("").unwrap();
        assert_eq!(c.hyperparams.lambda1, 1.0);
        assert_eq!(c.hyperparams.lambda2, 0.1);
        assert_eq!(c.hyperparams.history_len, 5);
        assert_eq!(c.sim.dt, 1.0 / 15.0);
    }

    #[test]
    fn field_level_errors() {
        match parse("[hyperparams]\nlambda1 = -1.0\n") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "hyperparams.lambda1"),
            other => panic!("{other:?}"),
        }
        match parse("[model]\nfeature_dim = 11\nmodality_dims = [5, 4, 3]\n") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "model.modality_dims"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("bogus = 1\n"), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse("[hyperparams]\nlambda9 = 1.0\n"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn scenario_references_are_checked() {
        let bad = "[scenarios.s]\ntrack = \"nope\"\nsetback = \"identity\"\n";
        assert!(parse(bad).is_err());
        let ok = "[tracks.t]\nsegments = [{ terrain = \"grass\", length = 3.0 }]\n[scenarios.s]\ntrack = \"t\"\nsetback = \"identity\"\n";
        let c = parse(ok).unwrap();
        let (track, sb) = c.scenario("s").unwrap();
        assert_eq!(track.segments.len(), 1);
        assert_eq!(sb, Setback::IDENTITY);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse("").unwrap();
        assert_eq!(a.hash(), parse("").unwrap().hash());
        assert_ne!(a.hash(), parse("[hyperparams]\nlambda1 = 0.5\n").unwrap().hash());
        assert_eq!(a.hash(), parse("output_dir = \"elsewhere\"\n").unwrap().hash());
    }
}
