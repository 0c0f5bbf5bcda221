use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::ControlCommand;
use crate::error::{invalid, Result};

use super::TerrainSegment;

/// Degradation of the robot's ability to follow commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setback {
    /// Multiplies segment traction, in `(0, 1]`.
    pub traction_scale: f64,
    /// Actuator efficiency, in `(0, 1.5]`.
    pub actuator_gain: f64,
    /// Extra mass in kg; lengthens the actuation time constant.
    pub payload: f64,
    /// Extra velocity noise, `>= 0`.
    pub damping_loss: f64,
}

impl Setback {
    pub const IDENTITY: Setback = Setback {
        traction_scale: 1.0,
        actuator_gain: 1.0,
        payload: 0.0,
        damping_loss: 0.0,
    };

    pub fn gain(actuator_gain: f64) -> Self {
        Self {
            actuator_gain,
            ..Self::IDENTITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.traction_scale > 0.0 && self.traction_scale <= 1.0) {
            return Err(invalid("setback.traction_scale", "must lie in (0, 1]"));
        }
        if !(self.actuator_gain > 0.0 && self.actuator_gain <= 1.5) {
            return Err(invalid("setback.actuator_gain", "must lie in (0, 1.5]"));
        }
        if !(self.payload >= 0.0 && self.payload.is_finite()) {
            return Err(invalid("setback.payload", "must be >= 0"));
        }
        if !(self.damping_loss >= 0.0 && self.damping_loss.is_finite()) {
            return Err(invalid("setback.damping_loss", "must be >= 0"));
        }
        Ok(())
    }
}

impl Default for Setback {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-π, π]`.
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    /// Seconds per step.
    pub dt: f64,
    /// Actuation time constant without payload, seconds.
    pub tau0: f64,
    /// Reference mass for payload scaling, kg.
    pub m0: f64,
    /// Global multiplier on every noise source; 0 turns noise off.
    pub noise_scale: f64,
    /// Velocity noise half-width per unit of roughness plus damping loss.
    pub velocity_noise: f64,
    /// Feature noise on proprioceptive readings.
    pub proprio_noise: f64,
    /// Half-width of the random initial lateral offset, m.
    pub initial_lateral: f64,
    /// Half-width of the random initial heading, rad.
    pub initial_heading: f64,
    pub stuck_speed: f64,
    pub stuck_time: f64,
    pub stuck_command: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1.0 / 15.0,
            tau0: 0.3,
            m0: 50.0,
            noise_scale: 1.0,
            velocity_noise: 0.1,
            proprio_noise: 0.01,
            initial_lateral: 0.2,
            initial_heading: 0.1,
            stuck_speed: 0.02,
            stuck_time: 3.0,
            stuck_command: 0.1,
        }
    }
}

impl SimParams {
    pub fn noiseless() -> Self {
        Self {
            noise_scale: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be >= 0, got {v}")))
            }
        };
        pos("sim.dt", self.dt)?;
        pos("sim.tau0", self.tau0)?;
        pos("sim.m0", self.m0)?;
        if self.dt > self.tau0 {
            return Err(invalid("sim.dt", "must not exceed tau0"));
        }
        nonneg("sim.noise_scale", self.noise_scale)?;
        nonneg("sim.velocity_noise", self.velocity_noise)?;
        nonneg("sim.proprio_noise", self.proprio_noise)?;
        nonneg("sim.initial_lateral", self.initial_lateral)?;
        nonneg("sim.initial_heading", self.initial_heading)?;
        pos("sim.stuck_speed", self.stuck_speed)?;
        pos("sim.stuck_time", self.stuck_time)?;
        nonneg("sim.stuck_command", self.stuck_command)
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Advances the robot by one step.
///
/// `v ← v + (dt/τ)(g·s·v_cmd − v) + noise`, likewise for `ω`, with
/// `s = traction × traction_scale`, `g = actuator_gain` and
/// `τ = τ₀ (1 + payload / m₀)`. The pose then integrates the new velocities.
pub fn step<R: Rng + ?Sized>(
    state: &RobotState,
    command: ControlCommand,
    segment: &TerrainSegment,
    setback: &Setback,
    params: &SimParams,
    rng: &mut R,
) -> RobotState {
    let gs = setback.actuator_gain * segment.traction * setback.traction_scale;
    let tau = params.tau0 * (1.0 + setback.payload / params.m0);
    let alpha = params.dt / tau;
    let mut v = state.v + alpha * (gs * command.linear_velocity - state.v);
    let mut omega = state.omega + alpha * (gs * command.angular_velocity - state.omega);
    let amp = params.noise_scale * params.velocity_noise * (segment.roughness + setback.damping_loss);
    if amp > 0.0 {
        v += amp * rng.gen_range(-1.0..=1.0);
        omega += amp * rng.gen_range(-1.0..=1.0);
    }
    RobotState {
        x: state.x + v * state.heading.cos() * params.dt,
        y: state.y + v * state.heading.sin() * params.dt,
        heading: wrap_angle(state.heading + omega * params.dt),
        v,
        omega,
    }
}
