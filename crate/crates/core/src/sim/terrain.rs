use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-type properties shared by every segment of that type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainKind {
    pub name: String,
    /// Expert cruising speed on flat ground, m/s.
    pub nominal_speed: f64,
    /// Default segment traction.
    pub traction: f64,
    /// Default segment roughness.
    pub roughness: f64,
}

/// Terrain types indexed by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TerrainCatalog {
    pub kinds: Vec<TerrainKind>,
}

impl Default for TerrainCatalog {
    fn default() -> Self {
        let k = |name: &str, nominal_speed, traction, roughness| TerrainKind {
            name: name.into(),
            nominal_speed,
            traction,
            roughness,
        };
        Self {
            kinds: vec![
                k("concrete", 1.0, 1.0, 0.02),
                k("grass", 0.9, 0.95, 0.05),
                k("gravel", 0.6, 0.9, 0.1),
                k("rocks", 0.4, 0.85, 0.2),
                k("snow", 0.7, 0.8, 0.08),
            ],
        }
    }
}

impl TerrainCatalog {
    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.kinds.iter().position(|k| k.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(invalid("terrains", "need at least one terrain type"));
        }
        for (i, k) in self.kinds.iter().enumerate() {
            if !(k.nominal_speed > 0.0 && k.nominal_speed.is_finite()) {
                return Err(invalid(&format!("terrains[{i}].nominal_speed"), "must be > 0"));
            }
            if !(k.traction > 0.0 && k.traction <= 1.0) {
                return Err(invalid(&format!("terrains[{i}].traction"), "must lie in (0, 1]"));
            }
            if !(k.roughness >= 0.0 && k.roughness.is_finite()) {
                return Err(invalid(&format!("terrains[{i}].roughness"), "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Segment of type `terrain` with the type's default traction and roughness.
    pub fn segment(&self, terrain: usize, length: f64, slope: f64) -> TerrainSegment {
        let k = &self.kinds[terrain];
        TerrainSegment {
            terrain_type: terrain,
            length,
            slope,
            traction: k.traction,
            roughness: k.roughness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainSegment {
    pub terrain_type: usize,
    /// Meters.
    pub length: f64,
    /// Degrees in `[-45, 45]`.
    pub slope: f64,
    /// In `(0, 1]`.
    pub traction: f64,
    /// Noise scale, `>= 0`.
    pub roughness: f64,
}

impl TerrainSegment {
    pub fn validate(&self, num_types: usize) -> Result<()> {
        if self.terrain_type >= num_types {
            return Err(invalid("segment.terrain_type", format!("{} >= {num_types}", self.terrain_type)));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid("segment.length", "must be > 0"));
        }
        if !(-45.0..=45.0).contains(&self.slope) {
            return Err(invalid("segment.slope", "must lie in [-45, 45] degrees"));
        }
        if !(self.traction > 0.0 && self.traction <= 1.0) {
            return Err(invalid("segment.traction", "must lie in (0, 1]"));
        }
        if !(self.roughness >= 0.0 && self.roughness.is_finite()) {
            return Err(invalid("segment.roughness", "must be >= 0"));
        }
        Ok(())
    }
}

/// Straight track along `+x` starting at `x = 0`; the reference path is `y = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Track {
    pub segments: Vec<TerrainSegment>,
}

impl Track {
    pub fn validate(&self, num_types: usize) -> Result<()> {
        if self.segments.is_empty() {
            return Err(invalid("track.segments", "track is empty"));
        }
        self.segments.iter().try_for_each(|s| s.validate(num_types))
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Index of the segment containing `x`; clamps to the first and last.
    pub fn segment_index(&self, x: f64) -> usize {
        let mut end = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            end += s.length;
            if x < end {
                return i;
            }
        }
        self.segments.len() - 1
    }

    pub fn segment_at(&self, x: f64) -> &TerrainSegment {
        &self.segments[self.segment_index(x)]
    }
}
