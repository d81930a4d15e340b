use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_action, substep_count, EnvTransition, Environment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    /// Pole angle from vertical, not wrapped.
    pub theta: f64,
    pub omega: f64,
}

impl CartPoleState {
    pub fn upright() -> Self {
        Self {
            x: 0.0,
            x_dot: 0.0,
            theta: 0.0,
            omega: 0.0,
        }
    }

    /// Mechanical energy of the cart and a uniform pole of half-length `l`
    /// (potential measured from the pivot).
    pub fn energy(&self, p: &CartPoleParams) -> f64 {
        let total = p.cart_mass + p.pole_mass;
        0.5 * total * self.x_dot * self.x_dot
            + p.pole_mass * p.pole_length * self.x_dot * self.omega * self.theta.cos()
            + 2.0 / 3.0 * p.pole_mass * p.pole_length * p.pole_length * self.omega * self.omega
            + p.pole_mass * p.gravity * p.pole_length * self.theta.cos()
    }
}

/// Cart-pole with track and joint friction, three push forces and uniform
/// force noise held for the whole control interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub gravity: f64,
    pub cart_friction: f64,
    pub pole_friction: f64,
    pub control_dt: f64,
    pub substep_dt: f64,
    pub forces: Vec<f64>,
    pub noise_halfwidth: f64,
    pub fail_angle: f64,
    pub initial_theta_halfwidth: f64,
    pub gamma: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 8.0,
            pole_mass: 2.0,
            pole_length: 0.5,
            gravity: 9.81,
            cart_friction: 0.001,
            pole_friction: 0.002,
            control_dt: 0.1,
            substep_dt: 0.01,
            forces: vec![-5.0, 0.0, 5.0],
            noise_halfwidth: 2.0,
            fail_angle: FRAC_PI_2,
            initial_theta_halfwidth: 0.05,
            gamma: 1.0,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        substep_count(self.control_dt, self.substep_dt)?;
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
            ("fail_angle", self.fail_angle),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        let non_negative = [
            ("gravity", self.gravity),
            ("cart_friction", self.cart_friction),
            ("pole_friction", self.pole_friction),
            ("noise_halfwidth", self.noise_halfwidth),
            ("initial_theta_halfwidth", self.initial_theta_halfwidth),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0")));
            }
        }
        if self.forces.is_empty() || self.forces.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("forces must be non-empty and finite".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Angular and cart acceleration for total applied force `force`,
    /// assuming the track normal force stays positive.
    pub fn accelerations(&self, s: &CartPoleState, force: f64) -> (f64, f64) {
        let (mp, l, g) = (self.pole_mass, self.pole_length, self.gravity);
        let total = self.cart_mass + mp;
        let (sin, cos) = s.theta.sin_cos();
        let w2 = s.omega * s.omega;
        // sgn(N_c * x_dot) with N_c > 0
        let slip = sign(s.x_dot);
        let mu_c = self.cart_friction;

        let num = g * sin
            + cos * ((-force - mp * l * w2 * (sin + mu_c * slip * cos)) / total + mu_c * g * slip)
            - self.pole_friction * s.omega / (mp * l);
        let den = l * (4.0 / 3.0 - mp * cos / total * (cos - mu_c * slip));
        let theta_acc = num / den;

        let normal = total * g - mp * l * (theta_acc * sin + w2 * cos);
        let x_acc = (force + mp * l * (w2 * sin - theta_acc * cos) - mu_c * normal * slip) / total;
        (theta_acc, x_acc)
    }

    /// Integrates one control interval under a constant total force.
    pub fn integrate(&self, state: &CartPoleState, force: f64) -> Result<CartPoleState> {
        let steps = substep_count(self.control_dt, self.substep_dt)?;
        let dt = self.control_dt / steps as f64;
        let mut s = *state;
        for _ in 0..steps {
            let (theta_acc, x_acc) = self.accelerations(&s, force);
            s.x += dt * s.x_dot;
            s.x_dot += dt * x_acc;
            s.theta += dt * s.omega;
            s.omega += dt * theta_acc;
        }
        Ok(s)
    }

    pub fn is_terminal(&self, state: &CartPoleState) -> bool {
        !(state.theta.abs() <= self.fail_angle)
    }

    /// Control step with an explicit total force (noise already included).
    pub fn step_with_force(
        &self,
        state: &CartPoleState,
        action: usize,
        force: f64,
    ) -> Result<EnvTransition<CartPoleState>> {
        let next_state = self.integrate(state, force)?;
        let terminal = self.is_terminal(&next_state);
        Ok(EnvTransition {
            action,
            next_state,
            reward: if terminal { 0.0 } else { 1.0 },
            terminal,
        })
    }
}

impl Environment for CartPoleParams {
    type State = CartPoleState;

    fn action_count(&self) -> usize {
        self.forces.len()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CartPoleState {
        let h = self.initial_theta_halfwidth;
        CartPoleState {
            theta: if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 },
            ..CartPoleState::upright()
        }
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &CartPoleState,
        action: usize,
        rng: &mut R,
    ) -> Result<EnvTransition<CartPoleState>> {
        check_action(action, self.forces.len())?;
        let h = self.noise_halfwidth;
        let noise = if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        self.step_with_force(state, action, self.forces[action] + noise)
    }
}
