//! Experiment configuration files.
//!
//! Configs are TOML documents. Parsing goes through a `toml::Table` so that
//! `key=value` overrides can be applied before the typed decode, and every
//! error carries the dotted key path it refers to.

use serde::{Deserialize, Serialize};

use crate::basis::{
    carhill_grid, carhill_prior_mean, cartpole_grid, CarHillBasis, CartPoleBasis, CashierBasis,
    CashierBasisSpec, GridSpec,
};
use crate::envs::{CarHillParams, CartPoleParams, CashierParams, CostProfile, EnvKind};
use crate::harness::{
    derive_seed, geometric_snapshots, EvalSpec, GenerationConfig, LearnerSetup, Metric,
};
use crate::learners::{LearnerKind, LearningRateSchedule, NoiseMethod, SensorNoise};

/// Stream used to draw the cashier routing matrix from the master seed.
const ROUTING_STREAM: u64 = 0xC0FFEE;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted key path, or `<document>` for whole-file problems.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub environment: EnvironmentConfig,
    /// Grid override for the grid-based environments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<GridSpec>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    pub learners: Vec<LearnerConfig>,
}

fn default_runs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentConfig {
    CartPole(CartPoleParams),
    Cashier(CashierConfig),
    CarHill(CarHillParams),
}

impl EnvironmentConfig {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvironmentConfig::CartPole(_) => EnvKind::CartPole,
            EnvironmentConfig::Cashier(_) => EnvKind::Cashier,
            EnvironmentConfig::CarHill(_) => EnvKind::CarHill,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CashierConfig {
    pub queues: usize,
    pub jobs: u32,
    pub costs: CostProfile,
    pub gamma: f64,
}

impl Default for CashierConfig {
    fn default() -> Self {
        Self {
            queues: 100,
            jobs: 200,
            costs: CostProfile::Linear,
            gamma: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub budget: u64,
    /// Explicit snapshot points; overrides the geometric grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<u64>>,
    #[serde(default = "default_start")]
    pub start: u64,
    #[serde(default = "default_per_decade")]
    pub per_decade: u32,
}

fn default_start() -> u64 {
    100
}

fn default_per_decade() -> u32 {
    10
}

impl ScheduleConfig {
    pub fn points(&self) -> Vec<u64> {
        match &self.snapshots {
            Some(points) => points.clone(),
            None => geometric_snapshots(self.budget, self.start, self.per_decade),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults per environment: 72000 (cart-pole), 1000 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
}

fn default_trials() -> usize {
    1
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            horizon: None,
            metric: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Policy,
    Average,
    Max,
    Boltzmann,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Policy,
        NoiseKind::Average,
        NoiseKind::Max,
        NoiseKind::Boltzmann,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorMean {
    Constant(f64),
    Values(Vec<f64>),
    Named(NamedPrior),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedPrior {
    /// Rises linearly towards the car-hill summit.
    CarHill,
}

impl Default for PriorMean {
    fn default() -> Self {
        PriorMean::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// Output label; defaults to the learner kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    /// Temperature of the Boltzmann noise method; defaults to `temperature`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_temperature: Option<f64>,
    #[serde(default)]
    pub epsilon0: f64,
    #[serde(default)]
    pub prior_mean: PriorMean,
    #[serde(default)]
    pub prior_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<LearningRateSchedule>,
    /// Exploration temperature for Boltzmann action selection.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_noise() -> NoiseKind {
    NoiseKind::Max
}

fn default_temperature() -> f64 {
    0.5
}

impl LearnerConfig {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.label().to_string())
    }

    pub fn noise_method(&self) -> NoiseMethod {
        match self.noise {
            NoiseKind::Policy => NoiseMethod::Policy,
            NoiseKind::Average => NoiseMethod::Average,
            NoiseKind::Max => NoiseMethod::Max,
            NoiseKind::Boltzmann => NoiseMethod::Boltzmann {
                temperature: self.noise_temperature.unwrap_or(self.temperature),
            },
        }
    }
}

/// A config's environment and basis, instantiated.
#[derive(Debug, Clone)]
pub enum Problem {
    CartPole(CartPoleParams, CartPoleBasis),
    Cashier(CashierParams, CashierBasis),
    CarHill(CarHillParams, CarHillBasis),
}

impl Problem {
    pub fn feature_count(&self) -> usize {
        use crate::basis::Basis;
        match self {
            Problem::CartPole(_, b) => b.feature_count(),
            Problem::Cashier(_, b) => b.feature_count(),
            Problem::CarHill(_, b) => b.feature_count(),
        }
    }

    pub fn action_count(&self) -> usize {
        use crate::envs::Environment;
        match self {
            Problem::CartPole(e, _) => e.action_count(),
            Problem::Cashier(e, _) => e.action_count(),
            Problem::CarHill(e, _) => e.action_count(),
        }
    }

    fn grid(&self) -> Option<&GridSpec> {
        match self {
            Problem::CartPole(_, b) => Some(&b.0),
            Problem::CarHill(_, b) => Some(&b.0),
            Problem::Cashier(..) => None,
        }
    }
}

fn invalid(path: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::new(path, e.to_string())
}

/// Parses a config document into a TOML table, reporting syntax errors.
pub fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>()
        .map_err(|e| ConfigError::new("<document>", e.to_string().trim_end().to_string()))
}

/// Applies a `dotted.key=value` override. Array elements are addressed by
/// index (`learners.0.epsilon0=0.5`). The value is read as a TOML value and
/// falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let mut root = toml::Value::Table(std::mem::take(table));
    let result = assign(&mut root, &parts, 0, value);
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    result
}

fn assign(
    node: &mut toml::Value,
    parts: &[&str],
    depth: usize,
    value: toml::Value,
) -> Result<(), ConfigError> {
    let here = parts[..=depth].join(".");
    let last = depth + 1 == parts.len();
    let part = parts[depth];
    let child = match node {
        toml::Value::Table(t) => {
            if last {
                t.insert(part.to_string(), value);
                return Ok(());
            }
            t.entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        }
        toml::Value::Array(items) => {
            let index: usize = part
                .parse()
                .map_err(|_| ConfigError::new(&here, "expected an array index"))?;
            let len = items.len();
            let slot = items.get_mut(index).ok_or_else(|| {
                ConfigError::new(&here, format!("index out of range for {len} elements"))
            })?;
            if last {
                *slot = value;
                return Ok(());
            }
            slot
        }
        _ => return Err(ConfigError::new(&here, "cannot descend into a scalar")),
    };
    assign(child, parts, depth + 1, value)
}

/// Decodes and validates a config table.
pub fn from_table(table: toml::Table) -> Result<ExperimentConfig, ConfigError> {
    if table.is_empty() {
        return Err(ConfigError::new(
            "<document>",
            "empty config: required keys are `environment`, `schedule` and `learners`",
        ));
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(
            if path == "." { "<document>".to_string() } else { path },
            e.into_inner().to_string(),
        )
    })?;
    config.validate()?;
    Ok(config)
}

/// Parses config text with overrides applied in order.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table = parse_table(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(table)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, &[])
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::new("<document>", e.to_string()))
    }

    /// Everything that determines results except the master seed and the
    /// output location, as canonical TOML.
    pub fn replay_key(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("config always serializes");
        table.remove("seed");
        table.remove("output");
        toml::to_string(&table).expect("table always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.runs == 0 {
            return Err(ConfigError::new("runs", "must be >= 1"));
        }
        if self.learners.is_empty() {
            return Err(ConfigError::new("learners", "at least one learner is required"));
        }
        if self.evaluation.trials == 0 {
            return Err(ConfigError::new("evaluation.trials", "must be >= 1"));
        }
        match &self.environment {
            EnvironmentConfig::CartPole(p) => {
                p.validate().map_err(|e| invalid("environment", e))?
            }
            EnvironmentConfig::CarHill(p) => p.validate().map_err(|e| invalid("environment", e))?,
            EnvironmentConfig::Cashier(c) => {
                if c.queues == 0 {
                    return Err(ConfigError::new("environment.queues", "must be >= 1"));
                }
                if !(0.0..=1.0).contains(&c.gamma) {
                    return Err(ConfigError::new("environment.gamma", "must lie in [0, 1]"));
                }
                if self.basis.is_some() {
                    return Err(ConfigError::new(
                        "basis",
                        "the cashier environment has fixed queue features",
                    ));
                }
            }
        }
        if let Some(grid) = &self.basis {
            grid.validate().map_err(|e| invalid("basis", e))?;
        }
        let points = self.schedule.points();
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::new(
                "schedule.snapshots",
                "snapshot points must be strictly increasing",
            ));
        }
        if points.last().is_some_and(|&p| p > self.schedule.budget) {
            return Err(ConfigError::new(
                "schedule.snapshots",
                format!("points must not exceed the budget {}", self.schedule.budget),
            ));
        }
        if points.is_empty() {
            return Err(ConfigError::new("schedule.snapshots", "need at least one point"));
        }

        let (features, actions) = self.dimensions()?;
        for (i, l) in self.learners.iter().enumerate() {
            let at = |k: &str| format!("learners[{i}].{k}");
            if !(l.epsilon0 >= 0.0 && l.epsilon0.is_finite()) {
                return Err(ConfigError::new(at("epsilon0"), "must be finite and >= 0"));
            }
            if !(l.prior_variance >= 0.0 && l.prior_variance.is_finite()) {
                return Err(ConfigError::new(at("prior_variance"), "must be finite and >= 0"));
            }
            if !(l.temperature > 0.0 && l.temperature.is_finite()) {
                return Err(ConfigError::new(at("temperature"), "must be > 0"));
            }
            if let Some(t) = l.noise_temperature {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(ConfigError::new(at("noise_temperature"), "must be > 0"));
                }
            }
            match (&l.learning_rate, l.kind) {
                (None, LearnerKind::Ptd) => {
                    return Err(ConfigError::new(at("learning_rate"), "required for ptd"))
                }
                (Some(s), _) => s.validate().map_err(|e| invalid(&at("learning_rate"), e))?,
                _ => {}
            }
            match &l.prior_mean {
                PriorMean::Values(v) if v.len() != features => {
                    return Err(ConfigError::new(
                        at("prior_mean"),
                        format!("has {} entries but the basis has {features} features", v.len()),
                    ))
                }
                PriorMean::Named(NamedPrior::CarHill)
                    if self.environment.kind() != EnvKind::CarHill =>
                {
                    return Err(ConfigError::new(
                        at("prior_mean"),
                        "the car-hill prior needs the car-hill environment",
                    ))
                }
                _ => {}
            }
        }
        for (i, l) in self.learners.iter().enumerate() {
            let label = l.label();
            let safe = !label.is_empty()
                && label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !safe || label == "noise-compare" || label == "manifest" {
                return Err(ConfigError::new(
                    format!("learners[{i}].name"),
                    "must be non-empty ASCII letters, digits, `-` or `_`, and not a reserved file name",
                ));
            }
        }
        let mut labels: Vec<String> = self.learners.iter().map(|l| l.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(ConfigError::new(
                "learners",
                format!("duplicate learner label `{}`; set `name`", w[0]),
            ));
        }
        if let (Some(grid), false) = (&self.basis, actions == 0) {
            if grid.action_count != actions {
                return Err(ConfigError::new(
                    "basis.action_count",
                    format!("environment has {actions} actions"),
                ));
            }
        }
        Ok(())
    }

    /// Feature and action counts implied by the environment and basis.
    fn dimensions(&self) -> Result<(usize, usize), ConfigError> {
        Ok(match &self.environment {
            EnvironmentConfig::CartPole(p) => {
                let grid = self.basis.clone().unwrap_or_else(cartpole_grid);
                (grid.feature_count(), p.forces.len())
            }
            EnvironmentConfig::CarHill(p) => {
                let grid = self.basis.clone().unwrap_or_else(carhill_grid);
                (grid.feature_count(), p.forces.len())
            }
            EnvironmentConfig::Cashier(c) => (c.queues, c.queues),
        })
    }

    pub fn eval_spec(&self) -> EvalSpec {
        let kind = self.environment.kind();
        let metric = self.evaluation.metric.unwrap_or(match &self.environment {
            EnvironmentConfig::CartPole(_) => Metric::StepsSurvived,
            EnvironmentConfig::CarHill(p) => Metric::DiscountedReturn { gamma: p.gamma },
            EnvironmentConfig::Cashier(_) => Metric::MeanReward,
        });
        EvalSpec {
            trials: self.evaluation.trials,
            horizon: self.evaluation.horizon.unwrap_or(match kind {
                EnvKind::CartPole => 72_000,
                _ => 1_000,
            }),
            metric,
        }
    }

    /// Instantiates the environment and basis; the cashier routing matrix is
    /// drawn from the master seed.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        Ok(match &self.environment {
            EnvironmentConfig::CartPole(p) => {
                let grid = self.basis.clone().unwrap_or_else(cartpole_grid);
                Problem::CartPole(p.clone(), CartPoleBasis(grid))
            }
            EnvironmentConfig::CarHill(p) => {
                let grid = self.basis.clone().unwrap_or_else(carhill_grid);
                Problem::CarHill(p.clone(), CarHillBasis(grid))
            }
            EnvironmentConfig::Cashier(c) => {
                let params = CashierParams::generate(
                    c.queues,
                    c.jobs,
                    c.costs,
                    c.gamma,
                    derive_seed(self.seed, ROUTING_STREAM),
                )
                .map_err(|e| invalid("environment", e))?;
                let spec = CashierBasisSpec::new(params.routing.clone())
                    .map_err(|e| invalid("environment", e))?;
                Problem::Cashier(params, CashierBasis(spec))
            }
        })
    }

    fn prior_mean(&self, learner: &LearnerConfig, problem: &Problem) -> Vec<f64> {
        let n = problem.feature_count();
        match &learner.prior_mean {
            PriorMean::Constant(c) => vec![*c; n],
            PriorMean::Values(v) => v.clone(),
            PriorMean::Named(NamedPrior::CarHill) => {
                carhill_prior_mean(problem.grid().expect("validated: car-hill grid"))
            }
        }
    }

    /// Learner setups in config order, with `method` labels from their noise
    /// model.
    pub fn setups(&self, problem: &Problem) -> Result<Vec<LearnerSetup>, ConfigError> {
        let snapshots = self.schedule.points();
        self.learners
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let noise = SensorNoise::new(l.noise_method(), l.epsilon0)
                    .map_err(|e| invalid(&format!("learners[{i}]"), e))?;
                Ok(LearnerSetup {
                    label: l.label(),
                    method: l.noise.label().to_string(),
                    config: GenerationConfig {
                        learner: l.kind,
                        noise,
                        prior_mean: self.prior_mean(l, problem),
                        prior_variance: l.prior_variance,
                        learning_rate: l.learning_rate,
                        temperature: l.temperature,
                        budget: self.schedule.budget,
                        snapshots: snapshots.clone(),
                        seed: self.seed,
                    },
                })
            })
            .collect()
    }
}

impl NoiseKind {
    pub fn label(&self) -> &'static str {
        match self {
            NoiseKind::Policy => "policy",
            NoiseKind::Average => "average",
            NoiseKind::Max => "max",
            NoiseKind::Boltzmann => "boltzmann",
        }
    }
}

/// Built-in configurations.
pub const PRESETS: &[(&str, &str)] = &[
    ("cartpole", include_str!("../presets/cartpole.toml")),
    ("cashier", include_str!("../presets/cashier.toml")),
    ("carhill", include_str!("../presets/carhill.toml")),
    ("smoke", include_str!("../presets/smoke.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
        runs = 2
        [environment]
        kind = "cart-pole"
        [schedule]
        budget = 100
        [[learners]]
        kind = "akfql"
        epsilon0 = 0.1
        prior_variance = 10000
        "#
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(minimal()).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.environment, EnvironmentConfig::CartPole(CartPoleParams::default()));
        assert_eq!(c.learners[0].noise, NoiseKind::Max);
        assert_eq!(c.learners[0].temperature, 0.5);
        assert_eq!(c.eval_spec().horizon, 72_000);
        assert_eq!(c.schedule.points(), vec![0, 100]);
    }

    #[test]
    fn empty_document_names_required_keys() {
        let e = parse_config("").unwrap_err();
        assert!(e.message.contains("environment"));
        assert!(e.message.contains("schedule"));
        assert!(e.message.contains("learners"));
        let e = parse_config("# only a comment\n").unwrap_err();
        assert_eq!(e.path, "<document>");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let text = minimal().replace("epsilon0 = 0.1", "epsilon0 = 0.1\nepsilon = 3");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "learners[0].epsilon");
        assert!(e.message.contains("unknown field"), "{e}");

        let text = minimal().replace("kind = \"cart-pole\"", "kind = \"cart-pole\"\nmass = 3");
        let e = parse_config(&text).unwrap_err();
        assert!(e.path.starts_with("environment"), "{e}");
        assert!(e.message.contains("mass"), "{e}");

        let e = parse_config(&format!("{}\nbogus = 1", minimal())).unwrap_err();
        assert!(e.message.contains("bogus"), "{e}");
    }

    #[test]
    fn wrong_types_name_the_key() {
        let text = minimal().replace("budget = 100", "budget = \"lots\"");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "schedule.budget");
    }

    #[test]
    fn syntax_errors_are_reported() {
        let e = parse_config("runs = = 3").unwrap_err();
        assert_eq!(e.path, "<document>");
    }

    #[test]
    fn out_of_range_values() {
        let e = parse_config(&minimal().replace("epsilon0 = 0.1", "epsilon0 = -1")).unwrap_err();
        assert_eq!(e.path, "learners[0].epsilon0");
        let e = parse_config(&minimal().replace("runs = 2", "runs = 0")).unwrap_err();
        assert_eq!(e.path, "runs");
        let text = minimal().replace("kind = \"akfql\"", "kind = \"ptd\"");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "learners[0].learning_rate");
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let text = minimal().replace("prior_variance = 10000", "prior_variance = 1\nprior_mean = [0.0, 1.0]");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.path, "learners[0].prior_mean");
        assert!(e.message.contains("75"), "{e}");
    }

    #[test]
    fn overrides() {
        let c = parse_config_with(
            minimal(),
            &[
                "runs=5".into(),
                "schedule.budget=1000".into(),
                "learners.0.epsilon0=0.25".into(),
                "learners.0.noise=average".into(),
                "evaluation.trials=3".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.runs, 5);
        assert_eq!(c.schedule.budget, 1000);
        assert_eq!(c.learners[0].epsilon0, 0.25);
        assert_eq!(c.learners[0].noise, NoiseKind::Average);
        assert_eq!(c.evaluation.trials, 3);

        let e = parse_config_with(minimal(), &["learners.3.epsilon0=1".into()]).unwrap_err();
        assert_eq!(e.path, "learners.3");
        let e = parse_config_with(minimal(), &["runs".into()]).unwrap_err();
        assert!(e.message.contains("key=value"));
    }

    #[test]
    fn presets_parse() {
        for (name, text) in PRESETS {
            let c = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let problem = c.problem().unwrap();
            assert_eq!(c.setups(&problem).unwrap().len(), c.learners.len());
        }
    }

    fn learner<'a>(c: &'a ExperimentConfig, kind: LearnerKind) -> &'a LearnerConfig {
        c.learners.iter().find(|l| l.kind == kind).unwrap()
    }

    #[test]
    fn benchmark_presets_carry_their_settings() {
        let cp = parse_config(preset("cartpole").unwrap()).unwrap();
        let k = learner(&cp, LearnerKind::Akfql);
        assert_eq!((k.epsilon0, k.prior_variance), (0.1, 10_000.0));
        let p = learner(&cp, LearnerKind::Ptd).learning_rate.unwrap();
        assert_eq!((p.scale, p.decay), (0.5, 1e6));

        let cn = parse_config(preset("cashier").unwrap()).unwrap();
        let k = learner(&cn, LearnerKind::Kfql);
        assert_eq!((k.epsilon0, k.prior_variance), (1.0, 20.0));
        let p = learner(&cn, LearnerKind::Ptd).learning_rate.unwrap();
        assert_eq!((p.scale, p.decay), (0.1, 1e3));

        let ch = parse_config(preset("carhill").unwrap()).unwrap();
        let k = learner(&ch, LearnerKind::Akfql);
        assert_eq!((k.epsilon0, k.prior_variance), (0.5, 0.1));
        assert_eq!(k.prior_mean, PriorMean::Named(NamedPrior::CarHill));
        let p = learner(&ch, LearnerKind::Ptd).learning_rate.unwrap();
        assert_eq!((p.scale, p.decay), (0.1, 1e3));
        let problem = ch.problem().unwrap();
        let setups = ch.setups(&problem).unwrap();
        assert_eq!(setups[0].config.prior_mean, carhill_prior_mean(&carhill_grid()));
    }

    #[test]
    fn cashier_routing_follows_the_seed() {
        let text = preset("cashier").unwrap();
        let a = parse_config_with(text, &["seed=1".into()]).unwrap().problem().unwrap();
        let b = parse_config_with(text, &["seed=1".into()]).unwrap().problem().unwrap();
        let c = parse_config_with(text, &["seed=2".into()]).unwrap().problem().unwrap();
        let routing = |p: &Problem| match p {
            Problem::Cashier(e, _) => e.routing.clone(),
            _ => unreachable!(),
        };
        assert_eq!(routing(&a), routing(&b));
        assert_ne!(routing(&a), routing(&c));
    }

    #[test]
    fn replay_key_ignores_seed_and_output() {
        let a = parse_config_with(minimal(), &["seed=1".into(), "output=\"x\"".into()]).unwrap();
        let b = parse_config_with(minimal(), &["seed=2".into()]).unwrap();
        assert_eq!(a.replay_key(), b.replay_key());
        let c = parse_config_with(minimal(), &["schedule.budget=200".into()]).unwrap();
        assert_ne!(a.replay_key(), c.replay_key());
    }

    #[test]
    fn boltzmann_noise_temperature_defaults_to_exploration_temperature() {
        let c = parse_config_with(minimal(), &["learners.0.noise=boltzmann".into()]).unwrap();
        assert_eq!(
            c.learners[0].noise_method(),
            NoiseMethod::Boltzmann { temperature: 0.5 }
        );
    }
}
