use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, substep_count, EnvTransition, Environment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarHillState {
    pub p: f64,
    pub v: f64,
}

/// Hill height `H(p)`.
pub fn hill(p: f64) -> f64 {
    if p < 0.0 {
        p * p + p
    } else {
        p / (1.0 + 5.0 * p * p).sqrt()
    }
}

/// `(H'(p), H''(p))`.
pub fn hill_slope(p: f64) -> (f64, f64) {
    if p < 0.0 {
        (2.0 * p + 1.0, 2.0)
    } else {
        let q = 1.0 + 5.0 * p * p;
        (q.powf(-1.5), -15.0 * p * q.powf(-2.5))
    }
}

/// Underpowered car on a hill, integrated with explicit Euler steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarHillParams {
    pub forces: Vec<f64>,
    pub control_dt: f64,
    pub euler_dt: f64,
    pub gamma: f64,
    pub mass: f64,
    pub gravity: f64,
    pub initial_position: f64,
    pub initial_velocity: f64,
}

impl Default for CarHillParams {
    fn default() -> Self {
        Self {
            forces: vec![-4.0, 4.0],
            control_dt: 0.1,
            euler_dt: 0.001,
            gamma: 0.999,
            mass: 1.0,
            gravity: 9.81,
            initial_position: -0.5,
            initial_velocity: 0.0,
        }
    }
}

impl CarHillParams {
    pub fn validate(&self) -> Result<()> {
        substep_count(self.control_dt, self.euler_dt)?;
        if self.forces.is_empty() || self.forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("forces must be non-empty and finite".into()));
        }
        if !(self.mass > 0.0) || !(self.gravity >= 0.0) {
            return Err(Error::InvalidParameter("mass must be > 0 and gravity >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn acceleration(&self, s: &CarHillState, force: f64) -> f64 {
        let (d1, d2) = hill_slope(s.p);
        let q = 1.0 + d1 * d1;
        force / (self.mass * q) - self.gravity * d1 / q - s.v * s.v * d1 * d2 / q
    }

    pub fn integrate(&self, state: &CarHillState, force: f64) -> Result<CarHillState> {
        let steps = substep_count(self.control_dt, self.euler_dt)?;
        let dt = self.control_dt / steps as f64;
        let mut s = *state;
        for _ in 0..steps {
            let acc = self.acceleration(&s, force);
            s.p += dt * s.v;
            s.v += dt * acc;
        }
        Ok(s)
    }

    /// -1 off the left edge or too fast, +1 over the summit at a safe speed.
    pub fn reward(state: &CarHillState) -> f64 {
        if state.p < -1.0 || state.v.abs() > 3.0 {
            -1.0
        } else if state.p > 1.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Deterministic control step.
    pub fn advance(&self, state: &CarHillState, action: usize) -> Result<EnvTransition<CarHillState>> {
        check_action(action, self.forces.len())?;
        let next_state = self.integrate(state, self.forces[action])?;
        let reward = Self::reward(&next_state);
        Ok(EnvTransition {
            action,
            next_state,
            reward,
            terminal: reward != 0.0,
        })
    }
}

impl Environment for CarHillParams {
    type State = CarHillState;

    fn action_count(&self) -> usize {
        self.forces.len()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> CarHillState {
        CarHillState {
            p: self.initial_position,
            v: self.initial_velocity,
        }
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &CarHillState,
        action: usize,
        _rng: &mut R,
    ) -> Result<EnvTransition<CarHillState>> {
        self.advance(state, action)
    }
}
