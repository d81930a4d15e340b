//! Benchmark MDPs. Each environment is an immutable parameter set; the state
//! is passed in and returned by value so that one environment can drive many
//! independent runs.

mod carhill;
mod cartpole;
mod cashier;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use carhill::{hill, hill_slope, CarHillParams, CarHillState};
pub use cartpole::{CartPoleParams, CartPoleState};
pub use cashier::{CashierParams, CashierState, CostProfile};

/// Outcome of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvTransition<S> {
    pub action: usize,
    pub next_state: S,
    pub reward: f64,
    pub terminal: bool,
}

pub trait Environment {
    type State: Clone + std::fmt::Debug;

    fn action_count(&self) -> usize;

    /// Discount used to form learning targets.
    fn gamma(&self) -> f64;

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut R,
    ) -> Result<EnvTransition<Self::State>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    CartPole,
    Cashier,
    CarHill,
}

impl EnvKind {
    /// Action count of the default configuration of each benchmark.
    pub fn action_count(&self) -> usize {
        match self {
            EnvKind::CartPole => 3,
            EnvKind::Cashier => 100,
            EnvKind::CarHill => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnvKind::CartPole => "cart-pole",
            EnvKind::Cashier => "cashier",
            EnvKind::CarHill => "car-hill",
        }
    }
}

pub(crate) fn check_action(action: usize, count: usize) -> Result<()> {
    if action >= count {
        return Err(Error::InvalidAction { action, count });
    }
    Ok(())
}

/// Number of fixed-size integration steps covering `interval`.
pub(crate) fn substep_count(interval: f64, dt: f64) -> Result<usize> {
    let ratio = interval / dt;
    let count = ratio.round();
    if !(dt > 0.0) || count < 1.0 || (ratio - count).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "integration step {dt} does not divide control interval {interval}"
        )));
    }
    Ok(count as usize)
}
