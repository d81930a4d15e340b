//! Weight learners: the Kalman filter update with full covariance (KFQL), its
//! diagonal approximation (AKFQL) and projected TD learning (PTD), plus the
//! sample-update target and the sensor-noise heuristics that feed them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    clamp_variance, dot, quadratic_form, BasisVector, Covariance, Observation, QEstimate,
    WeightBelief,
};

/// How the assessment-noise term of the sensor noise is formed from the
/// successor state's action values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum NoiseMethod {
    /// Variance of the greedy successor action.
    Policy,
    /// Mean variance over successor actions.
    Average,
    /// Largest variance over successor actions.
    Max,
    /// Softmax-weighted variance at the given temperature.
    Boltzmann { temperature: f64 },
}

impl NoiseMethod {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseMethod::Policy => "policy",
            NoiseMethod::Average => "average",
            NoiseMethod::Max => "max",
            NoiseMethod::Boltzmann { .. } => "boltzmann",
        }
    }
}

/// Sensor-noise model: constant `epsilon0` plus a heuristic assessment term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub method: NoiseMethod,
    pub epsilon0: f64,
}

impl SensorNoise {
    pub fn new(method: NoiseMethod, epsilon0: f64) -> Result<Self> {
        let noise = Self { method, epsilon0 };
        noise.validate()?;
        Ok(noise)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 >= 0.0 && self.epsilon0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon0 must be finite and >= 0, got {}",
                self.epsilon0
            )));
        }
        if let NoiseMethod::Boltzmann { temperature } = self.method {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Boltzmann temperature must be > 0, got {temperature}"
                )));
            }
        }
        Ok(())
    }
}

/// Decaying step size `alpha(t) = scale * decay / (decay + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub scale: f64,
    pub decay: f64,
}

impl LearningRateSchedule {
    pub fn new(scale: f64, decay: f64) -> Result<Self> {
        let schedule = Self { scale, decay };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite() && self.decay > 0.0 && self.decay.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "learning rate needs scale > 0 and decay > 0, got ({}, {})",
                self.scale, self.decay
            )));
        }
        Ok(())
    }

    pub fn rate(&self, t: u64) -> f64 {
        learning_rate(self, t)
    }
}

pub fn learning_rate(schedule: &LearningRateSchedule, t: u64) -> f64 {
    schedule.scale * schedule.decay / (schedule.decay + t as f64)
}

/// Everything the sample update needs to know about a transition's successor.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessorSummary {
    pub reward: f64,
    pub gamma: f64,
    pub terminal: bool,
    /// Predicted Q-values of every successor action; empty when terminal.
    pub successors: Vec<QEstimate>,
}

impl SuccessorSummary {
    pub fn terminal(reward: f64) -> Self {
        Self {
            reward,
            gamma: 0.0,
            terminal: true,
            successors: Vec::new(),
        }
    }

    pub fn continuing(reward: f64, gamma: f64, successors: Vec<QEstimate>) -> Result<Self> {
        if successors.is_empty() {
            return Err(Error::InvalidParameter(
                "non-terminal successor must offer at least one action".into(),
            ));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "discount {gamma} outside [0, 1]"
            )));
        }
        Ok(Self {
            reward,
            gamma,
            terminal: false,
            successors,
        })
    }

    fn greedy(&self) -> Option<&QEstimate> {
        let mut best: Option<&QEstimate> = None;
        for q in &self.successors {
            if best.is_none_or(|b| q.mean > b.mean) {
                best = Some(q);
            }
        }
        best
    }
}

pub fn predict(belief: &WeightBelief, phi: &BasisVector) -> Result<QEstimate> {
    Ok(QEstimate {
        mean: dot(phi, &belief.mean)?,
        variance: quadratic_form(phi, &belief.covariance)?,
    })
}

fn total_variance(predicted: f64, eps: f64) -> Result<f64> {
    let d = predicted + eps;
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(Error::DegenerateUpdate(d))
    }
}

fn full_matrix(belief: &WeightBelief) -> Result<&crate::model::Matrix> {
    match &belief.covariance {
        Covariance::Full(m) => Ok(m),
        Covariance::Diagonal(_) => Err(Error::InvalidBelief(
            "full-covariance update applied to a diagonal belief".into(),
        )),
    }
}

fn diagonal(belief: &WeightBelief) -> Result<&[f64]> {
    match &belief.covariance {
        Covariance::Diagonal(d) => Ok(d),
        Covariance::Full(_) => Err(Error::InvalidBelief(
            "diagonal update applied to a full-covariance belief".into(),
        )),
    }
}

/// Kalman gain `Sigma phi / (phi' Sigma phi + eps)`.
pub fn kalman_gain_full(belief: &WeightBelief, phi: &BasisVector, eps: f64) -> Result<Vec<f64>> {
    let sigma = full_matrix(belief)?;
    let d = total_variance(quadratic_form(phi, &belief.covariance)?, eps)?;
    let mut gain = sigma.mul_sparse(phi);
    gain.iter_mut().for_each(|g| *g /= d);
    Ok(gain)
}

/// Full-covariance observation update, returning the posterior.
pub fn observe_full(belief: &WeightBelief, obs: &Observation) -> Result<WeightBelief> {
    let mut posterior = belief.clone();
    observe_full_in_place(&mut posterior, obs)?;
    Ok(posterior)
}

/// In-place form of [`observe_full`]. On error the belief is left untouched.
pub fn observe_full_in_place(belief: &mut WeightBelief, obs: &Observation) -> Result<()> {
    let phi = &obs.phi;
    let gain = kalman_gain_full(belief, phi, obs.noise)?;
    let innovation = obs.value - dot(phi, &belief.mean)?;
    let row = full_matrix(belief)?.sparse_mul(phi);

    for (m, g) in belief.mean.iter_mut().zip(&gain) {
        *m += g * innovation;
    }
    let Covariance::Full(sigma) = &mut belief.covariance else {
        unreachable!("checked by kalman_gain_full");
    };
    let n = sigma.dim();
    for (i, &g) in gain.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for (j, &r) in row.iter().enumerate() {
            sigma[(i, j)] -= g * r;
        }
    }
    debug_assert_eq!(n, belief.mean.len());
    sigma.symmetrize();
    Ok(())
}

/// Diagonal Kalman gain `G_i = Sigma_ii phi_i / d` with
/// `d = sum_i phi_i^2 Sigma_ii + eps`.
pub fn kalman_gain_diag(belief: &WeightBelief, phi: &BasisVector, eps: f64) -> Result<Vec<f64>> {
    let sigma = diagonal(belief)?;
    let d = total_variance(quadratic_form(phi, &belief.covariance)?, eps)?;
    let mut gain = vec![0.0; sigma.len()];
    for (i, x) in phi.iter() {
        gain[i] = sigma[i] * x / d;
    }
    Ok(gain)
}

pub fn observe_diag(belief: &WeightBelief, obs: &Observation) -> Result<WeightBelief> {
    let mut posterior = belief.clone();
    observe_diag_in_place(&mut posterior, obs)?;
    Ok(posterior)
}

/// In-place form of [`observe_diag`]; touches only the stored entries of
/// `phi`. On error the belief is left untouched.
pub fn observe_diag_in_place(belief: &mut WeightBelief, obs: &Observation) -> Result<()> {
    let phi = &obs.phi;
    let d = total_variance(quadratic_form(phi, &belief.covariance)?, obs.noise)?;
    diagonal(belief)?;
    let innovation = obs.value - dot(phi, &belief.mean)?;
    let Covariance::Diagonal(sigma) = &mut belief.covariance else {
        unreachable!("checked above");
    };
    for (i, x) in phi.iter() {
        let g = sigma[i] * x / d;
        belief.mean[i] += g * innovation;
        sigma[i] *= 1.0 - g * x;
    }
    Ok(())
}

/// One-step lookahead target `R + gamma * max_a' mu' phi(s', a')`; just the
/// reward when the successor is terminal.
pub fn sample_target(summary: &SuccessorSummary) -> f64 {
    match summary.greedy() {
        Some(best) if !summary.terminal => summary.reward + summary.gamma * best.mean,
        _ => summary.reward,
    }
}

/// Sensor noise `eps0 + gamma^2 * (assessment variance)`; `eps0` alone for a
/// terminal successor.
pub fn sensor_noise(noise: &SensorNoise, summary: &SuccessorSummary) -> f64 {
    if summary.terminal || summary.successors.is_empty() {
        return noise.epsilon0;
    }
    let qs = &summary.successors;
    let assessment = match noise.method {
        NoiseMethod::Policy => summary.greedy().map_or(0.0, |q| q.variance),
        NoiseMethod::Average => qs.iter().map(|q| q.variance).sum::<f64>() / qs.len() as f64,
        NoiseMethod::Max => qs.iter().map(|q| q.variance).fold(0.0, f64::max),
        NoiseMethod::Boltzmann { temperature } => {
            let top = qs.iter().map(|q| q.mean).fold(f64::NEG_INFINITY, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for q in qs {
                let w = ((q.mean - top) / temperature).exp();
                num += w * q.variance;
                den += w;
            }
            num / den
        }
    };
    noise.epsilon0 + summary.gamma * summary.gamma * assessment
}

/// Projected TD step `r + alpha(t) phi (target - r' phi)`.
pub fn ptd_update(
    weights: &[f64],
    schedule: &LearningRateSchedule,
    t: u64,
    phi: &BasisVector,
    target: f64,
) -> Result<Vec<f64>> {
    let mut out = weights.to_vec();
    ptd_update_in_place(&mut out, schedule, t, phi, target)?;
    Ok(out)
}

pub fn ptd_update_in_place(
    weights: &mut [f64],
    schedule: &LearningRateSchedule,
    t: u64,
    phi: &BasisVector,
    target: f64,
) -> Result<()> {
    let residual = target - dot(phi, weights)?;
    let step = schedule.rate(t) * residual;
    for (i, x) in phi.iter() {
        weights[i] += step * x;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Kfql,
    Akfql,
    Ptd,
}

impl LearnerKind {
    pub fn label(&self) -> &'static str {
        match self {
            LearnerKind::Kfql => "kfql",
            LearnerKind::Akfql => "akfql",
            LearnerKind::Ptd => "ptd",
        }
    }
}

impl std::fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Learner state owned by one generation run.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    Kalman(WeightBelief),
    ApproxKalman(WeightBelief),
    Ptd {
        weights: Vec<f64>,
        schedule: LearningRateSchedule,
        steps: u64,
    },
}

impl Learner {
    pub fn new(
        kind: LearnerKind,
        prior_mean: Vec<f64>,
        prior_variance: f64,
        schedule: Option<LearningRateSchedule>,
    ) -> Result<Self> {
        Ok(match kind {
            LearnerKind::Kfql => Learner::Kalman(WeightBelief::full_prior(prior_mean, prior_variance)?),
            LearnerKind::Akfql => {
                Learner::ApproxKalman(WeightBelief::diagonal_prior(prior_mean, prior_variance)?)
            }
            LearnerKind::Ptd => {
                let schedule = schedule.ok_or_else(|| {
                    Error::InvalidParameter("PTD learner needs a learning-rate schedule".into())
                })?;
                schedule.validate()?;
                Learner::Ptd {
                    weights: prior_mean,
                    schedule,
                    steps: 0,
                }
            }
        })
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::Kalman(_) => LearnerKind::Kfql,
            Learner::ApproxKalman(_) => LearnerKind::Akfql,
            Learner::Ptd { .. } => LearnerKind::Ptd,
        }
    }

    pub fn mean(&self) -> &[f64] {
        match self {
            Learner::Kalman(b) | Learner::ApproxKalman(b) => &b.mean,
            Learner::Ptd { weights, .. } => weights,
        }
    }

    /// Predicted Q-value; PTD carries no uncertainty and reports zero variance.
    pub fn estimate(&self, phi: &BasisVector) -> Result<QEstimate> {
        match self {
            Learner::Kalman(b) | Learner::ApproxKalman(b) => predict(b, phi),
            Learner::Ptd { weights, .. } => Ok(QEstimate {
                mean: dot(phi, weights)?,
                variance: 0.0,
            }),
        }
    }

    /// One update from the transition out of the state-action pair `phi`.
    pub fn update(
        &mut self,
        phi: &BasisVector,
        summary: &SuccessorSummary,
        noise: &SensorNoise,
    ) -> Result<()> {
        let target = sample_target(summary);
        match self {
            Learner::Kalman(b) => {
                let obs = Observation::new(phi.clone(), target, sensor_noise(noise, summary))?;
                observe_full_in_place(b, &obs)
            }
            Learner::ApproxKalman(b) => {
                let obs = Observation::new(phi.clone(), target, sensor_noise(noise, summary))?;
                observe_diag_in_place(b, &obs)
            }
            Learner::Ptd {
                weights,
                schedule,
                steps,
            } => {
                ptd_update_in_place(weights, schedule, *steps, phi, target)?;
                *steps += 1;
                Ok(())
            }
        }
    }

    /// True when every mean and covariance entry is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Learner::Kalman(b) | Learner::ApproxKalman(b) => {
                b.mean.iter().all(|m| m.is_finite()) && b.covariance.is_finite()
            }
            Learner::Ptd { weights, .. } => weights.iter().all(|w| w.is_finite()),
        }
    }

    /// Fails when a covariance diagonal entry is negative beyond round-off.
    pub fn check_variances(&self) -> Result<()> {
        match self {
            Learner::Kalman(b) | Learner::ApproxKalman(b) => {
                for v in b.covariance.diagonal() {
                    clamp_variance(v)?;
                }
                Ok(())
            }
            Learner::Ptd { .. } => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;

    fn e(n: usize, k: usize) -> BasisVector {
        BasisVector::one_hot(n, k).unwrap()
    }

    fn q(mean: f64, variance: f64) -> QEstimate {
        QEstimate { mean, variance }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn predict_examples() {
        let b = WeightBelief::full_prior(vec![0.0; 2], 1.0).unwrap();
        assert_eq!(predict(&b, &e(2, 0)).unwrap(), q(0.0, 1.0));

        let b = WeightBelief::diagonal_prior(vec![0.0; 75], 10_000.0).unwrap();
        assert_eq!(predict(&b, &e(75, 7)).unwrap().variance, 10_000.0);

        let b = WeightBelief::full_prior(vec![1.0, 2.0], 1.0).unwrap();
        let phi = BasisVector::from_dense(&[0.5, 0.5]).unwrap();
        assert_eq!(predict(&b, &phi).unwrap(), q(1.5, 0.5));
    }

    #[test]
    fn full_gain_examples() {
        let b = WeightBelief::full_prior(vec![0.0; 2], 1.0).unwrap();
        assert_eq!(kalman_gain_full(&b, &e(2, 0), 0.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(kalman_gain_full(&b, &e(2, 0), 1.0).unwrap(), vec![0.5, 0.0]);

        let sigma = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let b = WeightBelief::new(vec![0.0; 2], Covariance::Full(sigma)).unwrap();
        let g = kalman_gain_full(&b, &e(2, 0), 1.0).unwrap();
        assert!(close(&g, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn full_gain_degenerate() {
        let b = WeightBelief::full_prior(vec![0.0; 2], 0.0).unwrap();
        assert!(matches!(
            kalman_gain_full(&b, &e(2, 0), 0.0),
            Err(Error::DegenerateUpdate(_))
        ));
        let diag = WeightBelief::diagonal_prior(vec![0.0; 2], 1.0).unwrap();
        assert!(kalman_gain_full(&diag, &e(2, 0), 1.0).is_err());
    }

    #[test]
    fn exact_measurement_collapses_direction() {
        let b = WeightBelief::full_prior(vec![0.0; 2], 1.0).unwrap();
        let post = observe_full(&b, &Observation::new(e(2, 0), 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(post.mean, vec![1.0, 0.0]);
        assert_eq!(post.covariance, Covariance::Full(Matrix::from_diagonal(&[0.0, 1.0])));
    }

    #[test]
    fn zero_features_leave_belief_unchanged() {
        let b = WeightBelief::full_prior(vec![0.3, -0.2], 2.0).unwrap();
        let obs = Observation::new(BasisVector::zeros(2), 5.0, 0.5).unwrap();
        assert_eq!(observe_full(&b, &obs).unwrap(), b);
        let d = WeightBelief::diagonal_prior(vec![0.3, -0.2], 2.0).unwrap();
        assert_eq!(observe_diag(&d, &obs).unwrap(), d);
    }

    #[test]
    fn diag_gain_examples() {
        let b = WeightBelief::diagonal_prior(vec![0.0; 2], 1.0).unwrap();
        assert_eq!(kalman_gain_diag(&b, &e(2, 0), 0.0).unwrap(), vec![1.0, 0.0]);
        let b = WeightBelief::diagonal_prior(vec![0.0; 2], 0.0).unwrap();
        assert_eq!(kalman_gain_diag(&b, &e(2, 0), 1.0).unwrap(), vec![0.0, 0.0]);
        let b = WeightBelief::diagonal_prior(vec![0.0; 2], 2.0).unwrap();
        let g = kalman_gain_diag(&b, &e(2, 0), 1.0).unwrap();
        assert!(close(&g, &[2.0 / 3.0, 0.0], 1e-15));
        let zero = WeightBelief::diagonal_prior(vec![0.0; 2], 0.0).unwrap();
        assert!(kalman_gain_diag(&zero, &e(2, 0), 0.0).is_err());
    }

    #[test]
    fn diag_update_examples() {
        let b = WeightBelief::diagonal_prior(vec![0.0; 2], 1.0).unwrap();
        let post = observe_diag(&b, &Observation::new(e(2, 0), 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(post.mean, vec![1.0, 0.0]);
        assert_eq!(post.covariance, Covariance::Diagonal(vec![0.0, 1.0]));
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_variance() {
        let b = WeightBelief::new(vec![1.0, 2.0, 3.0], Covariance::Diagonal(vec![1.0, 2.0, 3.0]))
            .unwrap();
        let phi = BasisVector::new(3, vec![(0, 0.5), (2, 0.5)]).unwrap();
        let target = dot(&phi, &b.mean).unwrap();
        let post = observe_diag(&b, &Observation::new(phi, target, 0.1).unwrap()).unwrap();
        assert_eq!(post.mean, b.mean);
        let Covariance::Diagonal(d) = post.covariance else {
            panic!()
        };
        assert!(d[0] < 1.0 && d[2] < 3.0);
        assert_eq!(d[1], 2.0);
    }

    #[test]
    fn first_diag_step_matches_full_step() {
        let mean = vec![0.5, -1.0, 2.0];
        let var = vec![1.5, 0.25, 4.0];
        let full = WeightBelief::new(mean.clone(), Covariance::Full(Matrix::from_diagonal(&var)))
            .unwrap();
        let diag = WeightBelief::new(mean, Covariance::Diagonal(var)).unwrap();
        let phi = BasisVector::new(3, vec![(0, 0.3), (1, -0.7), (2, 0.2)]).unwrap();
        let obs = Observation::new(phi, 1.7, 0.4).unwrap();
        let a = observe_full(&full, &obs).unwrap();
        let b = observe_diag(&diag, &obs).unwrap();
        assert!(close(&a.mean, &b.mean, 1e-12));
        assert!(close(&a.covariance.diagonal(), &b.covariance.diagonal(), 1e-12));
    }

    #[test]
    fn sample_target_examples() {
        assert_eq!(sample_target(&SuccessorSummary::terminal(0.0)), 0.0);
        let s = SuccessorSummary::continuing(3.0, 0.9, vec![q(0.0, 1.0), q(0.0, 2.0)]).unwrap();
        assert_eq!(sample_target(&s), 3.0);
        let s = SuccessorSummary::continuing(1.0, 0.999, vec![q(2.0, 0.0), q(3.5, 0.0)]).unwrap();
        assert!((sample_target(&s) - 4.4965).abs() < 1e-12);
    }

    #[test]
    fn continuing_summary_needs_actions() {
        assert!(SuccessorSummary::continuing(0.0, 0.9, vec![]).is_err());
        assert!(SuccessorSummary::continuing(0.0, 1.5, vec![q(0.0, 0.0)]).is_err());
    }

    fn all_methods(tau: f64) -> [NoiseMethod; 4] {
        [
            NoiseMethod::Policy,
            NoiseMethod::Average,
            NoiseMethod::Max,
            NoiseMethod::Boltzmann { temperature: tau },
        ]
    }

    #[test]
    fn sensor_noise_examples() {
        let zero_var =
            SuccessorSummary::continuing(1.0, 0.9, vec![q(1.0, 0.0), q(2.0, 0.0)]).unwrap();
        for m in all_methods(0.7) {
            let noise = SensorNoise::new(m, 0.25).unwrap();
            assert_eq!(sensor_noise(&noise, &zero_var), 0.25);
            assert_eq!(sensor_noise(&noise, &SuccessorSummary::terminal(1.0)), 0.25);
        }

        let s = SuccessorSummary::continuing(0.0, 1.0, vec![q(0.0, 1.0), q(0.0, 3.0)]).unwrap();
        let avg = SensorNoise::new(NoiseMethod::Average, 0.0).unwrap();
        let max = SensorNoise::new(NoiseMethod::Max, 0.0).unwrap();
        assert_eq!(sensor_noise(&avg, &s), 2.0);
        assert_eq!(sensor_noise(&max, &s), 3.0);

        let tau = 0.8;
        let s = SuccessorSummary::continuing(
            0.0,
            1.0,
            vec![q(0.0, 1.0), q(3f64.ln() * tau, 3.0)],
        )
        .unwrap();
        let boltz = SensorNoise::new(NoiseMethod::Boltzmann { temperature: tau }, 0.0).unwrap();
        assert!((sensor_noise(&boltz, &s) - 2.5).abs() < 1e-12);

        // policy picks the greedy action's variance
        let pol = SensorNoise::new(NoiseMethod::Policy, 0.0).unwrap();
        assert_eq!(sensor_noise(&pol, &s), 3.0);
    }

    #[test]
    fn sensor_noise_scales_with_gamma_squared() {
        let s = SuccessorSummary::continuing(0.0, 0.5, vec![q(0.0, 4.0)]).unwrap();
        let max = SensorNoise::new(NoiseMethod::Max, 0.1).unwrap();
        assert!((sensor_noise(&max, &s) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn boltzmann_survives_tiny_temperature() {
        let s = SuccessorSummary::continuing(0.0, 1.0, vec![q(1e3, 1.0), q(0.0, 5.0)]).unwrap();
        let boltz = SensorNoise::new(NoiseMethod::Boltzmann { temperature: 1e-9 }, 0.0).unwrap();
        assert_eq!(sensor_noise(&boltz, &s), 1.0);
    }

    #[test]
    fn noise_validation() {
        assert!(SensorNoise::new(NoiseMethod::Max, -1.0).is_err());
        assert!(SensorNoise::new(NoiseMethod::Boltzmann { temperature: 0.0 }, 1.0).is_err());
    }

    #[test]
    fn learning_rate_examples() {
        let schedule = LearningRateSchedule::new(0.5, 1e6).unwrap();
        assert_eq!(learning_rate(&schedule, 0), 0.5);
        assert_eq!(learning_rate(&schedule, 1_000_000), 0.25);
        let s = LearningRateSchedule::new(0.1, 1e3).unwrap();
        assert!((learning_rate(&s, 9_000) - 0.01).abs() < 1e-15);
        assert!(LearningRateSchedule::new(0.0, 1.0).is_err());
    }

    #[test]
    fn ptd_examples() {
        let sched = LearningRateSchedule::new(0.5, 1.0).unwrap();
        let phi = BasisVector::from_dense(&[1.0, 1.0]).unwrap();
        // alpha(0) = 0.5
        assert_eq!(ptd_update(&[0.0, 0.0], &sched, 0, &phi, 2.0).unwrap(), vec![1.0, 1.0]);

        let r = vec![0.3, 0.7, -0.1];
        let after = ptd_update(&r, &sched, 1_000_000_000_000, &e(3, 1), 100.0).unwrap();
        assert!(close(&after, &r, 1e-9));

        // one-hot reduces to the tabular step on entry k
        let after = ptd_update(&r, &sched, 0, &e(3, 2), 1.9).unwrap();
        assert_eq!(after, vec![0.3, 0.7, -0.1 + 0.5 * (1.9 - -0.1)]);
    }

    #[test]
    fn ptd_learner_counts_steps() {
        let sched = LearningRateSchedule::new(0.5, 10.0).unwrap();
        let mut l = Learner::new(LearnerKind::Ptd, vec![0.0; 2], 0.0, Some(sched)).unwrap();
        let noise = SensorNoise::new(NoiseMethod::Max, 0.1).unwrap();
        for _ in 0..3 {
            l.update(&e(2, 0), &SuccessorSummary::terminal(1.0), &noise).unwrap();
        }
        let Learner::Ptd { steps, .. } = l else { panic!() };
        assert_eq!(steps, 3);
        assert!(Learner::new(LearnerKind::Ptd, vec![0.0; 2], 0.0, None).is_err());
    }
}
