//! Off-line policy generation and evaluation.
//!
//! A generation run drives one learner through an environment with Boltzmann
//! exploration, updating once per visited state and copying the mean weights
//! at configured visit counts. Each copy is then scored by running its greedy
//! policy from fresh initial states. Runs are independent and seeded from a
//! master seed and the run index only, so every learner and sensor-noise
//! method sees the same environment randomness for a given run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::Basis;
use crate::envs::Environment;
use crate::error::Error;
use crate::learners::{Learner, LearnerKind, LearningRateSchedule, SensorNoise, SuccessorSummary};
use crate::model::{dot, BasisVector, QEstimate};

/// Predicted Q-values beyond this magnitude abort a run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub learner: LearnerKind,
    pub noise: SensorNoise,
    pub prior_mean: Vec<f64>,
    pub prior_variance: f64,
    /// Required for PTD, ignored otherwise.
    pub learning_rate: Option<LearningRateSchedule>,
    /// Exploration temperature for Boltzmann action selection.
    pub temperature: f64,
    pub budget: u64,
    /// Visited-state counts at which the weights are copied.
    pub snapshots: Vec<u64>,
    pub seed: u64,
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.noise.validate()?;
        if !(self.prior_variance >= 0.0 && self.prior_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prior variance {} must be finite and >= 0",
                self.prior_variance
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exploration temperature {} must be > 0",
                self.temperature
            )));
        }
        if self.snapshots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "snapshot points must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = self.snapshots.last() {
            if last > self.budget {
                return Err(Error::InvalidParameter(format!(
                    "snapshot point {last} exceeds the budget {}",
                    self.budget
                )));
            }
        }
        if self.prior_mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("prior mean must be finite".into()));
        }
        Ok(())
    }
}

/// Frozen copy of the mean weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub visited_states: u64,
    pub weights: Vec<f64>,
}

/// A run stopped because the learner became numerically unusable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub visited_states: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("run aborted after {} visited states: {}", .0.visited_states, .0.reason)]
    Aborted(Abort),
}

/// Samples an action with probability proportional to `exp(q / tau)`.
pub fn boltzmann_select<R: Rng + ?Sized>(q_means: &[f64], tau: f64, rng: &mut R) -> usize {
    assert!(!q_means.is_empty(), "no actions to choose from");
    let top = q_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = q_means.iter().map(|q| ((q - top) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (a, w) in weights.iter().enumerate() {
        if u < *w {
            return a;
        }
        u -= w;
    }
    // round-off: fall back to the heaviest action
    greedy_select(&weights)
}

/// Argmax with ties going to the lowest index.
pub fn greedy_select(q_means: &[f64]) -> usize {
    assert!(!q_means.is_empty(), "no actions to choose from");
    let mut best = 0;
    for (a, &q) in q_means.iter().enumerate().skip(1) {
        if q > q_means[best] {
            best = a;
        }
    }
    best
}

fn all_features<S, B: Basis<S>>(
    basis: &B,
    state: &S,
    actions: usize,
) -> Result<Vec<BasisVector>, Error> {
    (0..actions).map(|a| basis.features(state, a)).collect()
}

fn abort(visited: u64, reason: impl Into<String>) -> HarnessError {
    HarnessError::Aborted(Abort {
        visited_states: visited,
        reason: reason.into(),
    })
}

fn check_estimate(q: &QEstimate, visited: u64) -> Result<(), HarnessError> {
    if !q.mean.is_finite() || q.mean.abs() > DIVERGENCE_LIMIT || !q.variance.is_finite() {
        return Err(abort(
            visited,
            format!("diverging Q-value estimate (mean {:e}, variance {:e})", q.mean, q.variance),
        ));
    }
    Ok(())
}

/// Runs one policy-generation pass and returns the configured snapshots.
pub fn generate<E, B>(
    config: &GenerationConfig,
    env: &E,
    basis: &B,
) -> Result<Vec<PolicySnapshot>, HarnessError>
where
    E: Environment,
    B: Basis<E::State>,
{
    config.validate()?;
    if basis.feature_count() != config.prior_mean.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.feature_count(),
            found: config.prior_mean.len(),
        }
        .into());
    }
    let mut learner = Learner::new(
        config.learner,
        config.prior_mean.clone(),
        config.prior_variance,
        config.learning_rate,
    )?;
    let actions = env.action_count();
    let gamma = env.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut snapshots = Vec::with_capacity(config.snapshots.len());
    let mut pending = config.snapshots.iter().copied().peekable();

    let mut state = env.initial_state(&mut rng);
    let mut features = all_features(basis, &state, actions)?;
    let mut visited: u64 = 0;
    loop {
        if pending.next_if_eq(&visited).is_some() {
            snapshots.push(PolicySnapshot {
                visited_states: visited,
                weights: learner.mean().to_vec(),
            });
        }
        if visited >= config.budget {
            break;
        }

        let mut q_means = Vec::with_capacity(actions);
        for phi in &features {
            q_means.push(dot(phi, learner.mean())?);
        }
        let action = boltzmann_select(&q_means, config.temperature, &mut rng);
        let transition = env.step(&state, action, &mut rng)?;

        let next_features = all_features(basis, &transition.next_state, actions)?;
        let summary = if transition.terminal {
            SuccessorSummary::terminal(transition.reward)
        } else {
            let mut successors = Vec::with_capacity(actions);
            for phi in &next_features {
                let q = learner
                    .estimate(phi)
                    .map_err(|e| abort(visited, e.to_string()))?;
                check_estimate(&q, visited)?;
                successors.push(q);
            }
            SuccessorSummary::continuing(transition.reward, gamma, successors)?
        };
        learner
            .update(&features[action], &summary, &config.noise)
            .map_err(|e| abort(visited, e.to_string()))?;
        visited += 1;
        if !learner.is_finite() {
            return Err(abort(visited, "non-finite weight mean or covariance"));
        }
        learner
            .check_variances()
            .map_err(|e| abort(visited, e.to_string()))?;

        if transition.terminal {
            state = env.initial_state(&mut rng);
            features = all_features(basis, &state, actions)?;
        } else {
            state = transition.next_state;
            features = next_features;
        }
    }
    Ok(snapshots)
}

/// Per-trial score of a greedy policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Metric {
    /// Control steps completed without reaching a terminal state.
    StepsSurvived,
    /// Discounted sum of rewards.
    DiscountedReturn { gamma: f64 },
    /// Average reward per step over the horizon.
    MeanReward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub trials: usize,
    pub horizon: u64,
    pub metric: Metric,
}

/// Scores the greedy policy of `snapshot` over `spec.trials` fresh episodes.
pub fn evaluate<E, B, R>(
    snapshot: &PolicySnapshot,
    env: &E,
    basis: &B,
    spec: &EvalSpec,
    rng: &mut R,
) -> Result<Vec<f64>, Error>
where
    E: Environment,
    B: Basis<E::State>,
    R: Rng + ?Sized,
{
    let weights = &snapshot.weights;
    let mut q = vec![0.0; env.action_count()];
    score_policy(env, spec, rng, |state, _| {
        for (a, slot) in q.iter_mut().enumerate() {
            *slot = dot(&basis.features(state, a)?, weights)?;
        }
        Ok(greedy_select(&q))
    })
}

/// Scores the uniformly random policy; the baseline for problems without a
/// natural failure mode.
pub fn evaluate_random<E, R>(env: &E, spec: &EvalSpec, rng: &mut R) -> Result<Vec<f64>, Error>
where
    E: Environment,
    R: Rng + ?Sized,
{
    let actions = env.action_count();
    score_policy(env, spec, rng, |_, rng| Ok(rng.random_range(0..actions)))
}

fn score_policy<E, R, F>(env: &E, spec: &EvalSpec, rng: &mut R, mut choose: F) -> Result<Vec<f64>, Error>
where
    E: Environment,
    R: Rng + ?Sized,
    F: FnMut(&E::State, &mut R) -> Result<usize, Error>,
{
    if spec.trials == 0 {
        return Err(Error::InvalidParameter("need at least one evaluation trial".into()));
    }
    let mut scores = Vec::with_capacity(spec.trials);
    for _ in 0..spec.trials {
        let mut state = env.initial_state(rng);
        let (mut survived, mut total, mut discount, mut steps) = (0u64, 0.0, 1.0, 0u64);
        while steps < spec.horizon {
            let action = choose(&state, rng)?;
            let t = env.step(&state, action, rng)?;
            steps += 1;
            match spec.metric {
                Metric::DiscountedReturn { gamma } => {
                    total += discount * t.reward;
                    discount *= gamma;
                }
                _ => total += t.reward,
            }
            if t.terminal {
                break;
            }
            survived += 1;
            state = t.next_state;
        }
        scores.push(match spec.metric {
            Metric::StepsSurvived => survived as f64,
            Metric::DiscountedReturn { .. } => total,
            Metric::MeanReward => {
                if steps == 0 {
                    0.0
                } else {
                    total / steps as f64
                }
            }
        });
    }
    Ok(scores)
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `seed` for stream `stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(0x5EED)))
}

const GENERATION_STREAM: u64 = 1;
const EVALUATION_STREAM: u64 = 2;

/// Seed of the generation pass of run `run`.
pub fn generation_seed(master: u64, run: usize) -> u64 {
    derive_seed(derive_seed(master, run as u64), GENERATION_STREAM)
}

/// Seed of the evaluation at the `point`-th snapshot of run `run`.
pub fn evaluation_seed(master: u64, run: usize, point: usize) -> u64 {
    derive_seed(
        derive_seed(derive_seed(master, run as u64), EVALUATION_STREAM),
        point as u64,
    )
}

/// One learner setup to compare, with labels used in the output.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSetup {
    pub label: String,
    pub method: String,
    /// Template; the seed is replaced per run.
    pub config: GenerationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub visited_states: u64,
    /// Mean trial score per completed run, in `LearningCurve::completed_runs` order.
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAbort {
    pub run: usize,
    pub abort: Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub learner: String,
    pub method: String,
    pub completed_runs: Vec<usize>,
    pub aborted: Vec<RunAbort>,
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn final_row(&self) -> Option<&CurveRow> {
        self.rows.last()
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

type RunOutcome = Result<Vec<f64>, Abort>;

fn run_once<E, B>(
    setup: &LearnerSetup,
    env: &E,
    basis: &B,
    eval: &EvalSpec,
    master_seed: u64,
    run: usize,
) -> Result<RunOutcome, Error>
where
    E: Environment,
    B: Basis<E::State>,
{
    let config = GenerationConfig {
        seed: generation_seed(master_seed, run),
        ..setup.config.clone()
    };
    let snapshots = match generate(&config, env, basis) {
        Ok(s) => s,
        Err(HarnessError::Aborted(a)) => return Ok(Err(a)),
        Err(HarnessError::Invalid(e)) => return Err(e),
    };
    let mut values = Vec::with_capacity(snapshots.len());
    for (point, snapshot) in snapshots.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(evaluation_seed(master_seed, run, point));
        let scores = evaluate(snapshot, env, basis, eval, &mut rng)?;
        values.push(scores.iter().sum::<f64>() / scores.len() as f64);
    }
    Ok(Ok(values))
}

/// Executes `runs` generate-and-evaluate pipelines per setup on a pool of
/// `threads` workers (0 = all cores). Results do not depend on the thread
/// count.
pub fn run_experiment<E, B>(
    setups: &[LearnerSetup],
    env: &E,
    basis: &B,
    runs: usize,
    eval: &EvalSpec,
    master_seed: u64,
    threads: usize,
) -> Result<Vec<LearningCurve>, Error>
where
    E: Environment + Sync,
    B: Basis<E::State> + Sync,
{
    if runs == 0 {
        return Err(Error::InvalidParameter("need at least one run".into()));
    }
    for setup in setups {
        setup.config.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, usize)> = (0..setups.len())
        .flat_map(|s| (0..runs).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<Result<RunOutcome, Error>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| run_once(&setups[s], env, basis, eval, master_seed, r))
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let mut curves = Vec::with_capacity(setups.len());
    for setup in setups {
        let mut completed_runs = Vec::new();
        let mut aborted = Vec::new();
        let mut per_run = Vec::new();
        for run in 0..runs {
            match outcomes.next().expect("one outcome per job")? {
                Ok(values) => {
                    completed_runs.push(run);
                    per_run.push(values);
                }
                Err(abort) => aborted.push(RunAbort { run, abort }),
            }
        }
        let rows = setup
            .config
            .snapshots
            .iter()
            .enumerate()
            .map(|(point, &visited_states)| {
                let values: Vec<f64> = per_run.iter().map(|v| v[point]).collect();
                let (mean, stderr) = mean_stderr(&values);
                CurveRow {
                    visited_states,
                    per_run: values,
                    mean,
                    stderr,
                }
            })
            .collect();
        curves.push(LearningCurve {
            learner: setup.label.clone(),
            method: setup.method.clone(),
            completed_runs,
            aborted,
            rows,
        });
    }
    Ok(curves)
}

/// Snapshot points: 0, then `per_decade` log-spaced counts from `start` up to
/// `budget`, always ending at `budget`.
pub fn geometric_snapshots(budget: u64, start: u64, per_decade: u32) -> Vec<u64> {
    let mut points = vec![0];
    if budget == 0 {
        return points;
    }
    let start = start.max(1);
    let per_decade = per_decade.max(1);
    let mut k = 0u32;
    loop {
        let p = (start as f64 * 10f64.powf(f64::from(k) / f64::from(per_decade))).round() as u64;
        if p >= budget {
            break;
        }
        if p > *points.last().unwrap() {
            points.push(p);
        }
        k += 1;
    }
    points.push(budget);
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::NoiseMethod;

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_select(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(greedy_select(&[2.0, 2.0]), 0);
        assert_eq!(greedy_select(&[-5.0]), 0);
    }

    #[test]
    fn boltzmann_single_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(boltzmann_select(&[3.0], 0.5, &mut rng), 0);
        }
    }

    #[test]
    fn boltzmann_uniform_on_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[boltzmann_select(&[1.0; 4], 1.0, &mut rng)] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn boltzmann_softmax_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| boltzmann_select(&[0.0, 1.0], 1.0, &mut rng) == 1)
            .count();
        let p = std::f64::consts::E / (1.0 + std::f64::consts::E);
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn boltzmann_cold_limit_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = [0.3, 0.9, -2.0, 0.899];
        for _ in 0..1000 {
            assert_eq!(boltzmann_select(&q, 1e-9, &mut rng), greedy_select(&q));
        }
    }

    #[test]
    fn mean_stderr_examples() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_points() {
        assert_eq!(geometric_snapshots(0, 100, 10), vec![0]);
        assert_eq!(geometric_snapshots(1000, 100, 1), vec![0, 100, 1000]);
        let pts = geometric_snapshots(200_000, 100, 2);
        assert_eq!(pts, vec![0, 100, 316, 1000, 3162, 10_000, 31_623, 100_000, 200_000]);
    }

    #[test]
    fn seeds_differ_by_stream() {
        assert_ne!(generation_seed(7, 0), generation_seed(7, 1));
        assert_ne!(generation_seed(7, 0), evaluation_seed(7, 0, 0));
        assert_ne!(evaluation_seed(7, 0, 0), evaluation_seed(7, 0, 1));
        assert_eq!(generation_seed(7, 3), generation_seed(7, 3));
    }

    #[test]
    fn config_validation() {
        let base = GenerationConfig {
            learner: LearnerKind::Akfql,
            noise: SensorNoise::new(NoiseMethod::Max, 0.1).unwrap(),
            prior_mean: vec![0.0; 4],
            prior_variance: 1.0,
            learning_rate: None,
            temperature: 0.5,
            budget: 10,
            snapshots: vec![0, 10],
            seed: 0,
        };
        assert!(base.validate().is_ok());
        let bad = GenerationConfig {
            snapshots: vec![0, 11],
            ..base.clone()
        };
        assert!(bad.validate().is_err());
        let bad = GenerationConfig {
            snapshots: vec![5, 5],
            ..base.clone()
        };
        assert!(bad.validate().is_err());
        let bad = GenerationConfig {
            temperature: 0.0,
            ..base
        };
        assert!(bad.validate().is_err());
    }
}
