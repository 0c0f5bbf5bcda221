use serde::{Deserialize, Serialize};

use crate::controller::{ControlCommand, Limits};
use crate::error::Result;

use super::{Observation, Policy, PolicyAction, RobotState, TerrainCatalog, TerrainSegment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertGains {
    pub heading: f64,
    pub lateral: f64,
}

impl Default for ExpertGains {
    fn default() -> Self {
        Self {
            heading: 1.5,
            lateral: 1.0,
        }
    }
}

/// Scripted demonstrator: terrain cruising speed reduced on slopes, and a
/// proportional steering law back to the `y = 0` path.
pub fn expert_command(
    catalog: &TerrainCatalog,
    gains: &ExpertGains,
    segment: &TerrainSegment,
    state: &RobotState,
) -> ControlCommand {
    let nominal = catalog.kinds[segment.terrain_type].nominal_speed;
    ControlCommand::new(
        nominal * (1.0 - segment.slope.abs() / 90.0),
        -gains.heading * state.heading - gains.lateral * state.y,
    )
}

#[derive(Debug, Clone)]
pub struct ExpertPolicy {
    pub catalog: TerrainCatalog,
    pub gains: ExpertGains,
    pub limits: Limits,
}

impl Policy for ExpertPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, obs: &Observation) -> Result<PolicyAction> {
        let cmd = self
            .limits
            .clamp(expert_command(&self.catalog, &self.gains, obs.segment, obs.state));
        Ok(PolicyAction {
            expected: cmd,
            executed: cmd,
            safety_stop: false,
        })
    }
}
