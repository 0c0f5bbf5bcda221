use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::ControlCommand;
use crate::error::{invalid, Error, Result};

use super::{step, synth_features, FeatureConfig, RobotState, Setback, SimParams, TerrainCatalog, TerrainSegment, Track};

pub const TRIAL_LOG_FORMAT: &str = "reflexnav-trial-log";
const TRIAL_LOG_VERSION: u32 = 1;

/// What a policy sees at each step.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub time: f64,
    pub features: &'a [f64],
    pub segment: &'a TerrainSegment,
    pub state: &'a RobotState,
    /// Expected and actual behavior of the previous step.
    pub previous: Option<([f64; 2], [f64; 2])>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyAction {
    /// Behavior the policy intends; the reference for inconsistency.
    pub expected: ControlCommand,
    /// Command sent to the actuators.
    pub executed: ControlCommand,
    pub safety_stop: bool,
}

pub trait Policy {
    /// Called once before a trial starts.
    fn reset(&mut self);
    fn act(&mut self, obs: &Observation) -> Result<PolicyAction>;
}

/// Static description of the simulated world.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct World {
    pub catalog: TerrainCatalog,
    pub features: FeatureConfig,
    pub params: SimParams,
}

impl World {
    pub fn validate(&self) -> Result<()> {
        self.catalog.validate()?;
        self.params.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    /// Seconds.
    pub timeout: f64,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            timeout: 120.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Stuck,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Stuck => "stuck",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(Outcome::Completed),
            "stuck" => Ok(Outcome::Stuck),
            "timeout" => Ok(Outcome::Timeout),
            other => Err(Error::Format(format!("unknown outcome {other:?}"))),
        }
    }

    pub fn is_failure(self) -> bool {
        self != Outcome::Completed
    }
}

/// Per-step record of one trial. Row `t` holds the command issued at step
/// `t` and the velocities and pose reached after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub dt: f64,
    pub tau0: f64,
    pub initial_state: RobotState,
    pub expected_commands: Vec<[f64; 2]>,
    pub executed_commands: Vec<[f64; 2]>,
    pub actual_behaviors: Vec<[f64; 2]>,
    /// `(x, y, heading)`.
    pub poses: Vec<[f64; 3]>,
    /// Features observed before each command; empty when loaded from text.
    #[serde(default)]
    pub features: Vec<Vec<f64>>,
    /// Terrain label under the robot when each command was issued.
    pub terrain: Vec<usize>,
    pub outcome: Outcome,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.expected_commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expected_commands.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// Columnar text: `t v_cmd omega_cmd v_act omega_act x y heading v_exec omega_exec terrain`,
    /// with header comments and an outcome footer.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let i = &self.initial_state;
        let _ = writeln!(s, "# {TRIAL_LOG_FORMAT} v{TRIAL_LOG_VERSION}");
        let _ = writeln!(s, "# dt {}", self.dt);
        let _ = writeln!(s, "# tau0 {}", self.tau0);
        let _ = writeln!(s, "# initial {} {} {} {} {}", i.x, i.y, i.heading, i.v, i.omega);
        let _ = writeln!(s, "# columns t v_cmd omega_cmd v_act omega_act x y heading v_exec omega_exec terrain");
        for t in 0..self.len() {
            let (e, a, p, x) = (
                self.expected_commands[t],
                self.actual_behaviors[t],
                self.poses[t],
                self.executed_commands[t],
            );
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {} {} {} {}",
                (t + 1) as f64 * self.dt,
                e[0],
                e[1],
                a[0],
                a[1],
                p[0],
                p[1],
                p[2],
                x[0],
                x[1],
                self.terrain[t]
            );
        }
        let _ = writeln!(s, "# outcome {}", self.outcome.as_str());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("trial log: {m}"));
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad number {t:?}")));
        let mut dt = None;
        let mut tau0 = None;
        let mut initial = None;
        let mut outcome = None;
        let mut log = TrialLog {
            dt: 0.0,
            tau0: 0.0,
            initial_state: RobotState::default(),
            expected_commands: vec![],
            executed_commands: vec![],
            actual_behaviors: vec![],
            poses: vec![],
            features: vec![],
            terrain: vec![],
            outcome: Outcome::Timeout,
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.first().copied() {
                    Some("dt") => dt = Some(num(parts.get(1).ok_or_else(|| bad("dt"))?)?),
                    Some("tau0") => tau0 = Some(num(parts.get(1).ok_or_else(|| bad("tau0"))?)?),
                    Some("initial") => {
                        if parts.len() != 6 {
                            return Err(bad("initial needs 5 values"));
                        }
                        let v: Vec<f64> = parts[1..].iter().map(|t| num(t)).collect::<Result<_>>()?;
                        initial = Some(RobotState {
                            x: v[0],
                            y: v[1],
                            heading: v[2],
                            v: v[3],
                            omega: v[4],
                        });
                    }
                    Some("outcome") => outcome = Some(Outcome::parse(parts.get(1).ok_or_else(|| bad("outcome"))?)?),
                    _ => {}
                }
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 11 {
                return Err(bad(&format!("expected 11 columns, got {}", cols.len())));
            }
            let v: Vec<f64> = cols[..10].iter().map(|t| num(t)).collect::<Result<_>>()?;
            log.expected_commands.push([v[1], v[2]]);
            log.actual_behaviors.push([v[3], v[4]]);
            log.poses.push([v[5], v[6], v[7]]);
            log.executed_commands.push([v[8], v[9]]);
            log.terrain
                .push(cols[10].parse().map_err(|_| bad("bad terrain label"))?);
        }
        log.dt = dt.ok_or_else(|| bad("missing dt"))?;
        log.tau0 = tau0.ok_or_else(|| bad("missing tau0"))?;
        log.initial_state = initial.ok_or_else(|| bad("missing initial state"))?;
        log.outcome = outcome.ok_or_else(|| bad("missing outcome footer"))?;
        Ok(log)
    }
}

/// Steps the world until the track end, a stuck condition, or the timeout.
pub fn run_trial(
    track: &Track,
    policy: &mut dyn Policy,
    setback: &Setback,
    world: &World,
    cfg: &TrialConfig,
) -> Result<TrialLog> {
    world.validate()?;
    track.validate(world.catalog.len())?;
    setback.validate()?;
    if !(cfg.timeout > 0.0 && cfg.timeout.is_finite()) {
        return Err(invalid("trial.timeout", "must be > 0"));
    }
    let p = &world.params;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ns = p.noise_scale;
    let mut state = RobotState {
        y: ns * p.initial_lateral * rng.gen_range(-1.0..=1.0),
        heading: ns * p.initial_heading * rng.gen_range(-1.0..=1.0),
        ..Default::default()
    };
    let max_steps = (cfg.timeout / p.dt).ceil() as usize;
    let end = track.total_length();
    let mut log = TrialLog {
        dt: p.dt,
        tau0: p.tau0,
        initial_state: state,
        expected_commands: Vec::new(),
        executed_commands: Vec::new(),
        actual_behaviors: Vec::new(),
        poses: Vec::new(),
        features: Vec::new(),
        terrain: Vec::new(),
        outcome: Outcome::Timeout,
    };
    policy.reset();
    let mut previous = None;
    let mut slow_time = 0.0;
    for t in 0..max_steps {
        let seg = track.segment_at(state.x);
        let features = synth_features(world.catalog.len(), &world.features, p, seg, &state, &mut rng);
        let action = policy.act(&Observation {
            time: t as f64 * p.dt,
            features: &features,
            segment: seg,
            state: &state,
            previous,
        })?;
        let next = step(&state, action.executed, seg, setback, p, &mut rng);
        let actual = [next.v, next.omega];
        log.expected_commands.push(action.expected.to_array());
        log.executed_commands.push(action.executed.to_array());
        log.actual_behaviors.push(actual);
        log.poses.push([next.x, next.y, next.heading]);
        log.features.push(features);
        log.terrain.push(seg.terrain_type);
        previous = Some((action.expected.to_array(), actual));
        state = next;
        if state.x >= end {
            log.outcome = Outcome::Completed;
            break;
        }
        if state.v.abs() < p.stuck_speed && action.executed.linear_velocity > p.stuck_command {
            slow_time += p.dt;
            if slow_time >= p.stuck_time - 1e-9 {
                log.outcome = Outcome::Stuck;
                break;
            }
        } else {
            slow_time = 0.0;
        }
    }
    Ok(log)
}
