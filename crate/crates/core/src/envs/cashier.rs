use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{check_action, EnvTransition, Environment};
use crate::error::{Error, Result};

/// Queue lengths; always sums to the job count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CashierState {
    pub x: Vec<u32>,
}

impl CashierState {
    pub fn jobs(&self) -> u64 {
        self.x.iter().map(|&v| u64::from(v)).sum()
    }
}

/// Per-queue holding cost profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostProfile {
    /// `g_i = i / d` for `i = 1..=d`.
    Linear,
    /// `g_i = 1 / d`; total cost is then constant because jobs are conserved.
    Uniform,
}

impl CostProfile {
    pub fn costs(&self, queues: usize) -> Vec<f64> {
        let d = queues as f64;
        (1..=queues)
            .map(|i| match self {
                CostProfile::Linear => i as f64 / d,
                CostProfile::Uniform => 1.0 / d,
            })
            .collect()
    }
}

/// Multi-queue routing problem: serve one queue per step, the served job
/// moves to a queue drawn from that queue's routing row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashierParams {
    pub jobs: u32,
    pub costs: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl CashierParams {
    /// Random instance: each routing row is uniform on the simplex
    /// (normalized unit exponentials) drawn from `seed`.
    pub fn generate(queues: usize, jobs: u32, costs: CostProfile, gamma: f64, seed: u64) -> Result<Self> {
        if queues == 0 {
            return Err(Error::InvalidParameter("need at least one queue".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let routing = (0..queues)
            .map(|_| {
                let raw: Vec<f64> = (0..queues).map(|_| Exp1.sample(&mut rng)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|v: f64| v / total).collect()
            })
            .collect();
        let params = Self {
            jobs,
            costs: costs.costs(queues),
            routing,
            gamma,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn queues(&self) -> usize {
        self.costs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.queues();
        if d == 0 || self.routing.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.routing.len(),
            });
        }
        if self.costs.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter("costs must be finite".into()));
        }
        for (i, row) in self.routing.iter().enumerate() {
            if row.len() != d || row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter(format!("routing row {i} is invalid")));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("routing row {i} does not sum to 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter("gamma must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Immediate reward `-g' x`.
    pub fn reward(&self, state: &CashierState) -> f64 {
        -self
            .costs
            .iter()
            .zip(&state.x)
            .map(|(g, &x)| g * f64::from(x))
            .sum::<f64>()
    }

    fn destination<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.routing[from];
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // u landed in the round-off gap above the last cumulative sum
        row.iter().rposition(|&p| p > 0.0).unwrap_or(from)
    }
}

impl Environment for CashierParams {
    type State = CashierState;

    fn action_count(&self) -> usize {
        self.queues()
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> CashierState {
        let d = self.queues();
        let mut x = vec![0u32; d];
        for _ in 0..self.jobs {
            x[rng.random_range(0..d)] += 1;
        }
        CashierState { x }
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &CashierState,
        action: usize,
        rng: &mut R,
    ) -> Result<EnvTransition<CashierState>> {
        check_action(action, self.queues())?;
        let reward = self.reward(state);
        let mut next_state = state.clone();
        if next_state.x[action] > 0 {
            next_state.x[action] -= 1;
            let j = self.destination(action, rng);
            next_state.x[j] += 1;
        }
        Ok(EnvTransition {
            action,
            next_state,
            reward,
            terminal: false,
        })
    }
}
