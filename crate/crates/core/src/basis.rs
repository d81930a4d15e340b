//! Basis-function generators: normalized bilinear interpolation over a 2-D
//! state slice, one grid per action, and the queue-length features for the
//! cashier problem.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::envs::{CarHillState, CartPoleState, CashierState};
use crate::error::{Error, Result};
use crate::model::BasisVector;

/// Maps a state-action pair to its feature vector.
pub trait Basis<S> {
    fn feature_count(&self) -> usize;
    fn features(&self, state: &S, action: usize) -> Result<BasisVector>;
}

/// Interpolation grid over two state coordinates, replicated per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axis1: Vec<f64>,
    pub axis2: Vec<f64>,
    pub width1: f64,
    pub width2: f64,
    pub action_count: usize,
}

impl GridSpec {
    pub fn new(
        axis1: Vec<f64>,
        axis2: Vec<f64>,
        width1: f64,
        width2: f64,
        action_count: usize,
    ) -> Result<Self> {
        let spec = Self {
            axis1,
            axis2,
            width1,
            width2,
            action_count,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `count1 x count2` evenly spaced knots with widths equal to the spacing.
    pub fn even(
        (lo1, hi1, count1): (f64, f64, usize),
        (lo2, hi2, count2): (f64, f64, usize),
        action_count: usize,
    ) -> Result<Self> {
        let knots = |lo: f64, hi: f64, count: usize| -> Vec<f64> {
            let step = (hi - lo) / (count.max(2) - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        };
        let (axis1, axis2) = (knots(lo1, hi1, count1), knots(lo2, hi2, count2));
        let width1 = (hi1 - lo1) / (count1.max(2) - 1) as f64;
        let width2 = (hi2 - lo2) / (count2.max(2) - 1) as f64;
        Self::new(axis1, axis2, width1, width2, action_count)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("axis1", &self.axis1), ("axis2", &self.axis2)] {
            if axis.len() < 2 {
                return Err(Error::InvalidParameter(format!(
                    "{name} needs at least 2 knots"
                )));
            }
            if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} knots must be finite and strictly increasing"
                )));
            }
        }
        if !(self.width1 > 0.0 && self.width2 > 0.0) {
            return Err(Error::InvalidParameter("cell widths must be > 0".into()));
        }
        if self.action_count == 0 {
            return Err(Error::InvalidParameter("action_count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn knots_per_action(&self) -> usize {
        self.axis1.len() * self.axis2.len()
    }

    pub fn feature_count(&self) -> usize {
        self.knots_per_action() * self.action_count
    }

    /// Feature index of knot `(i, j)` for `action`; action-major layout.
    pub fn index(&self, action: usize, i: usize, j: usize) -> usize {
        action * self.knots_per_action() + i * self.axis2.len() + j
    }
}

/// Lower knot of the cell containing `x` (already clamped into the axis).
fn cell(axis: &[f64], x: f64) -> usize {
    let upper = axis.partition_point(|&k| k <= x);
    upper.saturating_sub(1).min(axis.len() - 2)
}

fn kernel(x: f64, knot: f64, width: f64) -> f64 {
    (1.0 - ((x - knot) / width).abs()).max(0.0)
}

/// Normalized bilinear kernel weights on the four knots around `(x1, x2)`.
/// States outside the grid are clamped onto its bounding box first.
pub fn bilinear_features(spec: &GridSpec, x1: f64, x2: f64, action: usize) -> Result<BasisVector> {
    if action >= spec.action_count {
        return Err(Error::InvalidAction {
            action,
            count: spec.action_count,
        });
    }
    let (a1, a2) = (&spec.axis1, &spec.axis2);
    let x1 = x1.clamp(a1[0], a1[a1.len() - 1]);
    let x2 = x2.clamp(a2[0], a2[a2.len() - 1]);
    let (i, j) = (cell(a1, x1), cell(a2, x2));

    let mut entries = Vec::with_capacity(4);
    let mut total = 0.0;
    for di in 0..2 {
        let w1 = kernel(x1, a1[i + di], spec.width1);
        for dj in 0..2 {
            let w = w1 * kernel(x2, a2[j + dj], spec.width2);
            if w > 0.0 {
                entries.push((spec.index(action, i + di, j + dj), w));
                total += w;
            }
        }
    }
    if total > 0.0 {
        entries.iter_mut().for_each(|(_, w)| *w /= total);
    } else {
        // Cell wider than twice the kernel width: fall back to the nearest knot.
        let ni = if (x1 - a1[i]).abs() <= (a1[i + 1] - x1).abs() { i } else { i + 1 };
        let nj = if (x2 - a2[j]).abs() <= (a2[j + 1] - x2).abs() { j } else { j + 1 };
        entries.push((spec.index(action, ni, nj), 1.0));
    }
    BasisVector::new(spec.feature_count(), entries)
}

/// The 5 x 5 grid over pole angle and angular velocity with three actions.
pub fn cartpole_grid() -> GridSpec {
    GridSpec {
        axis1: vec![-PI, -FRAC_PI_2, 0.0, FRAC_PI_2, PI],
        axis2: vec![-0.5, -0.25, 0.0, 0.25, 0.5],
        width1: FRAC_PI_2,
        width2: 0.25,
        action_count: 3,
    }
}

/// The 8 x 8 grid over position in [-1, 1] and velocity in [-3, 3] with two
/// actions.
pub fn carhill_grid() -> GridSpec {
    GridSpec::even((-1.0, 1.0, 8), (-3.0, 3.0, 8), 2).expect("static grid is valid")
}

/// Optimistic prior that rises linearly towards the summit:
/// `max(0, 1 - 2 (1 - p) / 3)` at every knot, for every action.
pub fn carhill_prior_mean(spec: &GridSpec) -> Vec<f64> {
    let mut mean = vec![0.0; spec.feature_count()];
    for action in 0..spec.action_count {
        for (i, &p) in spec.axis1.iter().enumerate() {
            let value = (1.0 - 2.0 * (1.0 - p) / 3.0).max(0.0);
            for j in 0..spec.axis2.len() {
                mean[spec.index(action, i, j)] = value;
            }
        }
    }
    mean
}

/// Queue features `phi_i(x, a) = x_i + (1 - [x_i = 0]) (p_ai - [a = i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CashierBasisSpec {
    pub routing: Vec<Vec<f64>>,
}

impl CashierBasisSpec {
    pub fn new(routing: Vec<Vec<f64>>) -> Result<Self> {
        let d = routing.len();
        for (i, row) in routing.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "routing row {i} has a negative entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "routing row {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(Self { routing })
    }

    pub fn queue_count(&self) -> usize {
        self.routing.len()
    }
}

pub fn cashier_features(spec: &CashierBasisSpec, x: &[u32], action: usize) -> Result<BasisVector> {
    let d = spec.queue_count();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if action >= d {
        return Err(Error::InvalidAction { action, count: d });
    }
    let row = &spec.routing[action];
    let entries = x
        .iter()
        .enumerate()
        .filter(|(_, &xi)| xi > 0)
        .map(|(i, &xi)| {
            let served = if i == action { 1.0 } else { 0.0 };
            (i, f64::from(xi) + row[i] - served)
        })
        .collect();
    BasisVector::new(d, entries)
}

/// Bilinear grid over `(theta, omega)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartPoleBasis(pub GridSpec);

impl Basis<CartPoleState> for CartPoleBasis {
    fn feature_count(&self) -> usize {
        self.0.feature_count()
    }

    fn features(&self, state: &CartPoleState, action: usize) -> Result<BasisVector> {
        bilinear_features(&self.0, state.theta, state.omega, action)
    }
}

/// Bilinear grid over `(position, velocity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarHillBasis(pub GridSpec);

impl Basis<CarHillState> for CarHillBasis {
    fn feature_count(&self) -> usize {
        self.0.feature_count()
    }

    fn features(&self, state: &CarHillState, action: usize) -> Result<BasisVector> {
        bilinear_features(&self.0, state.p, state.v, action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CashierBasis(pub CashierBasisSpec);

impl Basis<CashierState> for CashierBasis {
    fn feature_count(&self) -> usize {
        self.0.queue_count()
    }

    fn features(&self, state: &CashierState, action: usize) -> Result<BasisVector> {
        cashier_features(&self.0, &state.x, action)
    }
}
