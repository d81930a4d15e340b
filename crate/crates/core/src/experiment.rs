//! Running configured experiments and writing their results.
//!
//! Every command writes its CSV files plus `manifest.json` into an output
//! directory. The manifest records the canonical config text, its hash, the
//! master seed and the hash of every CSV, which is enough to re-execute the
//! command and check the outputs bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, ConfigError, ExperimentConfig, NoiseKind, Problem};
use crate::harness::{run_experiment, LearnerSetup, LearningCurve};
use crate::learners::{LearnerKind, SensorNoise};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "kfql-manifest/1";
pub const NOISE_COMPARE_FILE: &str = "noise-compare.csv";
pub const CSV_HEADER: [&str; 5] = ["learner", "method", "visited_states", "run", "performance"];

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct CommandError {
    pub code: u8,
    pub message: String,
}

impl CommandError {
    pub const CONFIG: u8 = 1;
    pub const RUNTIME: u8 = 2;
    pub const MISMATCH: u8 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: Self::RUNTIME,
            message: message.into(),
        }
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Self {
            code: Self::MISMATCH,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::config(e.to_string())
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CommandError {
    CommandError::runtime(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    NoiseCompare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub learner: String,
    pub method: String,
    pub run: usize,
    pub visited_states: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub command: Command,
    pub seed: u64,
    /// Canonical config without seed and output location.
    pub config: String,
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
    pub aborted_runs: usize,
    pub aborts: Vec<AbortRecord>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CommandError> {
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CommandError::config(format!("{}: {e}", path.display())))
    }
}

/// Results of a finished command.
#[derive(Debug, Clone)]
pub struct Report {
    pub curves: Vec<LearningCurve>,
    pub manifest: Manifest,
    pub dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `{:.16e}` keeps 17 significant digits, enough to round-trip any f64.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Renders curves as CSV: per-run rows (run-major), then one `mean` row and
/// one `stderr` row per snapshot point, for each curve in turn.
pub fn curves_csv(curves: &[LearningCurve]) -> Result<Vec<u8>, CommandError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CommandError::runtime(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for c in curves {
        for (k, run) in c.completed_runs.iter().enumerate() {
            for row in &c.rows {
                w.write_record([
                    c.learner.as_str(),
                    c.method.as_str(),
                    &row.visited_states.to_string(),
                    &run.to_string(),
                    &format_number(row.per_run[k]),
                ])
                .map_err(csv_err)?;
            }
        }
        for (tag, pick) in [("mean", 0), ("stderr", 1)] {
            for row in &c.rows {
                let v = if pick == 0 { row.mean } else { row.stderr };
                w.write_record([
                    c.learner.as_str(),
                    c.method.as_str(),
                    &row.visited_states.to_string(),
                    tag,
                    &format_number(v),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.into_inner()
        .map_err(|e| CommandError::runtime(format!("csv: {e}")))
}

/// Runs the setups on the config's problem.
pub fn execute(
    config: &ExperimentConfig,
    problem: &Problem,
    setups: &[LearnerSetup],
    threads: usize,
) -> Result<Vec<LearningCurve>, CommandError> {
    let eval = config.eval_spec();
    let (runs, seed) = (config.runs, config.seed);
    let result = match problem {
        Problem::CartPole(env, basis) => run_experiment(setups, env, basis, runs, &eval, seed, threads),
        Problem::Cashier(env, basis) => run_experiment(setups, env, basis, runs, &eval, seed, threads),
        Problem::CarHill(env, basis) => run_experiment(setups, env, basis, runs, &eval, seed, threads),
    };
    result.map_err(|e| CommandError::runtime(e.to_string()))
}

/// Setups for comparing the four sensor-noise methods on the config's only
/// learner. Labels stay the same; the `method` column tells them apart.
pub fn noise_compare_setups(
    config: &ExperimentConfig,
    problem: &Problem,
) -> Result<Vec<LearnerSetup>, CommandError> {
    if config.learners.len() != 1 {
        return Err(ConfigError::new(
            "learners",
            format!(
                "noise-compare needs exactly one learner, found {}",
                config.learners.len()
            ),
        )
        .into());
    }
    if config.learners[0].kind == LearnerKind::Ptd {
        return Err(ConfigError::new("learners[0].kind", "ptd has no sensor noise model").into());
    }
    let base = config.setups(problem)?.remove(0);
    NoiseKind::ALL
        .iter()
        .map(|&noise| {
            let mut learner = config.learners[0].clone();
            learner.noise = noise;
            let mut setup = base.clone();
            setup.method = noise.label().to_string();
            setup.config.noise = SensorNoise::new(learner.noise_method(), learner.epsilon0)
                .map_err(|e| ConfigError::new("learners[0]", e.to_string()))?;
            Ok(setup)
        })
        .collect()
}

/// Keeps only the learner labelled `label`.
pub fn select_learner(config: &mut ExperimentConfig, label: &str) -> Result<(), ConfigError> {
    let available: Vec<String> = config.learners.iter().map(|l| l.label()).collect();
    config.learners.retain(|l| l.label() == label);
    if config.learners.is_empty() {
        return Err(ConfigError::new(
            "learners",
            format!("no learner `{label}`; available: {}", available.join(", ")),
        ));
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile, CommandError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    Ok(OutputFile {
        file: name.to_string(),
        sha256: sha256_hex(bytes),
    })
}

/// Executes `command` and writes its CSVs and manifest into `out`. Fails
/// with the runtime code, after writing everything, when every run aborted.
pub fn run_command(
    command: Command,
    config: &ExperimentConfig,
    out: &Path,
    threads: usize,
) -> Result<Report, CommandError> {
    config.validate()?;
    let problem = config.problem()?;
    let setups = match command {
        Command::Run => config.setups(&problem)?,
        Command::NoiseCompare => noise_compare_setups(config, &problem)?,
    };
    let curves = execute(config, &problem, &setups, threads)?;

    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let outputs = match command {
        Command::Run => curves
            .iter()
            .map(|c| write_file(out, &format!("{}.csv", c.learner), &curves_csv(std::slice::from_ref(c))?))
            .collect::<Result<Vec<_>, _>>()?,
        Command::NoiseCompare => vec![write_file(out, NOISE_COMPARE_FILE, &curves_csv(&curves)?)?],
    };

    let aborts: Vec<AbortRecord> = curves
        .iter()
        .flat_map(|c| {
            c.aborted.iter().map(|a| AbortRecord {
                learner: c.learner.clone(),
                method: c.method.clone(),
                run: a.run,
                visited_states: a.abort.visited_states,
                reason: a.abort.reason.clone(),
            })
        })
        .collect();
    let canonical = config.replay_key();
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        command,
        seed: config.seed,
        config_hash: sha256_hex(canonical.as_bytes()),
        config: canonical,
        outputs,
        aborted_runs: aborts.len(),
        aborts,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, json + "\n").map_err(|e| io_error(&path, e))?;

    if curves.iter().all(|c| c.completed_runs.is_empty()) {
        let first = &manifest.aborts[0];
        return Err(CommandError::runtime(format!(
            "all {} runs aborted; first: {} run {} at {} visited states: {}",
            manifest.aborted_runs, first.learner, first.run, first.visited_states, first.reason
        )));
    }
    Ok(Report {
        curves,
        manifest,
        dir: out.to_path_buf(),
    })
}

/// Outcome of a successful replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub files_checked: usize,
}

/// Re-executes the command recorded in a manifest and compares output
/// hashes. The config hash is checked before anything runs.
pub fn replay(manifest_path: &Path, threads: usize) -> Result<ReplayReport, CommandError> {
    let manifest = Manifest::read(manifest_path)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(CommandError::config(format!(
            "unsupported manifest format `{}`",
            manifest.format
        )));
    }
    let actual = sha256_hex(manifest.config.as_bytes());
    if actual != manifest.config_hash {
        return Err(CommandError::mismatch(format!(
            "config hash mismatch: manifest records {}, config text hashes to {actual}",
            manifest.config_hash
        )));
    }
    let mut config = parse_config(&manifest.config)?;
    config.seed = manifest.seed;

    let dir = tempfile::tempdir().map_err(|e| CommandError::runtime(format!("temp dir: {e}")))?;
    let report = match run_command(manifest.command, &config, dir.path(), threads) {
        Ok(r) => r.manifest,
        // all-aborted runs still leave a manifest to compare
        Err(e) if e.code == CommandError::RUNTIME => {
            Manifest::read(&dir.path().join(MANIFEST_FILE)).map_err(|_| e)?
        }
        Err(e) => return Err(e),
    };

    let mut differences = Vec::new();
    for expected in &manifest.outputs {
        match report.outputs.iter().find(|o| o.file == expected.file) {
            Some(got) if got.sha256 == expected.sha256 => {}
            Some(got) => differences.push(format!(
                "{}: expected {}, got {}",
                expected.file, expected.sha256, got.sha256
            )),
            None => differences.push(format!("{}: not produced", expected.file)),
        }
    }
    for got in &report.outputs {
        if !manifest.outputs.iter().any(|o| o.file == got.file) {
            differences.push(format!("{}: not in manifest", got.file));
        }
    }
    if !differences.is_empty() {
        return Err(CommandError::mismatch(format!(
            "output hash mismatch:\n  {}",
            differences.join("\n  ")
        )));
    }
    Ok(ReplayReport {
        files_checked: manifest.outputs.len(),
    })
}
