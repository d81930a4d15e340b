#![allow(dead_code)]

use kfql::basis::Basis;
use kfql::envs::{EnvTransition, Environment};
use kfql::model::{BasisVector, Covariance, Matrix, WeightBelief};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Three-state, two-action deterministic episodic MDP. Every episode starts
/// in state 0.
///
/// | state | action 0            | action 1            |
/// |-------|---------------------|---------------------|
/// | 0     | -> 1, r = 0         | -> 2, r = 0.5       |
/// | 1     | end, r = 1          | -> 2, r = 0         |
/// | 2     | end, r = 0          | end, r = 2          |
#[derive(Debug, Clone)]
pub struct ChainMdp {
    pub gamma: f64,
}

pub const CHAIN_STATES: usize = 3;
pub const CHAIN_ACTIONS: usize = 2;

impl ChainMdp {
    /// `(next state or None when the episode ends, reward)`.
    pub fn transition(s: usize, a: usize) -> (Option<usize>, f64) {
        match (s, a) {
            (0, 0) => (Some(1), 0.0),
            (0, 1) => (Some(2), 0.5),
            (1, 0) => (None, 1.0),
            (1, 1) => (Some(2), 0.0),
            (2, 0) => (None, 0.0),
            (2, 1) => (None, 2.0),
            _ => unreachable!(),
        }
    }
}

impl Environment for ChainMdp {
    type State = usize;

    fn action_count(&self) -> usize {
        CHAIN_ACTIONS
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        0
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &usize,
        action: usize,
        _rng: &mut R,
    ) -> kfql::Result<EnvTransition<usize>> {
        let (next, reward) = Self::transition(*state, action);
        Ok(EnvTransition {
            action,
            next_state: next.unwrap_or(*state),
            reward,
            terminal: next.is_none(),
        })
    }
}

/// One indicator per state-action pair, index `s * actions + a`.
pub struct OneHot;

impl Basis<usize> for OneHot {
    fn feature_count(&self) -> usize {
        CHAIN_STATES * CHAIN_ACTIONS
    }

    fn features(&self, state: &usize, action: usize) -> kfql::Result<BasisVector> {
        BasisVector::one_hot(self.feature_count(), state * CHAIN_ACTIONS + action)
    }
}

/// Optimal Q-values by value iteration, flattened like `OneHot`.
pub fn chain_q_star(gamma: f64) -> Vec<f64> {
    let mut q = vec![0.0f64; CHAIN_STATES * CHAIN_ACTIONS];
    for _ in 0..10_000 {
        let v: Vec<f64> = (0..CHAIN_STATES)
            .map(|s| q[s * 2].max(q[s * 2 + 1]))
            .collect();
        let next: Vec<f64> = (0..CHAIN_STATES * CHAIN_ACTIONS)
            .map(|i| {
                let (succ, r) = ChainMdp::transition(i / 2, i % 2);
                r + succ.map_or(0.0, |s| gamma * v[s])
            })
            .collect();
        let delta = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if delta < 1e-15 {
            break;
        }
    }
    q
}

/// Random symmetric positive-definite matrix `A A' + jitter I`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, jitter: f64) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let s: f64 = (0..n).map(|k| a[i][k] * a[j][k]).sum();
                    s + if i == j { jitter } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

pub fn full_belief(mean: Vec<f64>, rows: &[Vec<f64>]) -> WeightBelief {
    WeightBelief::new(mean, Covariance::Full(Matrix::from_rows(rows).unwrap())).unwrap()
}

/// Closed-form Gaussian posterior for linear observations
/// `y = phi' r + N(0, eps)` from the prior `N(mean, cov)`, computed in
/// information form.
pub fn conjugate_posterior(
    mean: &[f64],
    cov: &[Vec<f64>],
    observations: &[(Vec<f64>, f64, f64)],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mean.len();
    let prior_cov = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
    let prior_precision = prior_cov.try_inverse().expect("prior is invertible");
    let mut precision = prior_precision.clone();
    let mut info = &prior_precision * DVector::from_column_slice(mean);
    for (phi, y, eps) in observations {
        let phi = DVector::from_column_slice(phi);
        precision += &phi * phi.transpose() / *eps;
        info += &phi * (*y / *eps);
    }
    let post_cov = precision.try_inverse().expect("posterior is invertible");
    let post_mean = &post_cov * info;
    (
        post_mean.iter().copied().collect(),
        (0..n)
            .map(|i| (0..n).map(|j| post_cov[(i, j)]).collect())
            .collect(),
    )
}
