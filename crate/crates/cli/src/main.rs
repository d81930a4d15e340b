use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kfql::config::{parse_config_with, preset, ExperimentConfig, PRESETS};
use kfql::experiment::{replay, run_command, select_learner, Command, CommandError, Report};

/// Kalman filter Q-learning experiments: learning curves for KFQL, AKFQL and
/// PTD on the cart-pole, cashier and car-hill benchmarks.
#[derive(Debug, Parser)]
#[command(name = "kfql", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every learner in a config and write one CSV per learner.
    Run(RunArgs),
    /// Run one learner once per sensor-noise method with paired seeds.
    NoiseCompare {
        #[command(flatten)]
        run: RunArgs,
        /// Learner label to compare when the config has several.
        #[arg(long)]
        learner: Option<String>,
    },
    /// Re-execute a recorded run and check its output hashes.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// List the built-in configs, or print one.
    Presets {
        /// Print this preset's TOML.
        name: Option<String>,
    },
    /// Check a config without running it.
    Validate(Source),
}

#[derive(Debug, Args)]
struct Source {
    /// Config file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in config (see `kfql presets`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Override a config key, e.g. `--set learners.0.epsilon0=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory; defaults to the config's `output`, then `results`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn load(source: &Source) -> Result<ExperimentConfig, CommandError> {
    let text = match (&source.config, &source.preset) {
        (Some(path), _) => fs::read_to_string(path)
            .map_err(|e| CommandError::config(format!("{}: {e}", path.display())))?,
        (None, Some(name)) => preset(name)
            .ok_or_else(|| CommandError::config(format!("unknown preset `{name}`")))?
            .to_string(),
        (None, None) => return Err(CommandError::config("need --config or --preset")),
    };
    let mut config = parse_config_with(&text, &source.overrides)?;
    if let Some(seed) = source.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(args: &RunArgs, config: &ExperimentConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn summarize(report: &Report) {
    for c in &report.curves {
        match c.final_row() {
            Some(row) => println!(
                "{} ({}): final mean {:.6} +/- {:.6} at {} visited states, {} completed, {} aborted",
                c.learner,
                c.method,
                row.mean,
                row.stderr,
                row.visited_states,
                c.completed_runs.len(),
                c.aborted.len()
            ),
            None => println!("{} ({}): no snapshots", c.learner, c.method),
        }
    }
    for a in &report.manifest.aborts {
        eprintln!(
            "aborted: {} ({}) run {} at {} visited states: {}",
            a.learner, a.method, a.run, a.visited_states, a.reason
        );
    }
    println!("wrote {}", report.dir.display());
}

fn run(command: Command, args: &RunArgs, learner: Option<&str>) -> Result<(), CommandError> {
    let mut config = load(&args.source)?;
    if let Some(label) = learner {
        select_learner(&mut config, label)?;
    }
    let dir = out_dir(args, &config);
    let report = run_command(command, &config, &dir, args.threads)?;
    summarize(&report);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Cmd::Run(args) => run(Command::Run, &args, None),
        Cmd::NoiseCompare { run: args, learner } => run(Command::NoiseCompare, &args, learner.as_deref()),
        Cmd::Replay { manifest, threads } => {
            let report = replay(Path::new(&manifest), threads)?;
            println!("replay passed: {} output files match", report.files_checked);
            Ok(())
        }
        Cmd::Presets { name: None } => {
            for (name, text) in PRESETS {
                let summary = text.lines().next().unwrap_or("").trim_start_matches("# ");
                println!("{name:<16} {summary}");
            }
            Ok(())
        }
        Cmd::Presets { name: Some(name) } => {
            let text = preset(&name).ok_or_else(|| CommandError::config(format!("unknown preset `{name}`")))?;
            print!("{text}");
            Ok(())
        }
        Cmd::Validate(source) => {
            let config = load(&source)?;
            let problem = config.problem()?;
            println!(
                "ok: {} with {} features and {} actions, {} learner(s), {} run(s), budget {}",
                config.environment.kind().label(),
                problem.feature_count(),
                problem.action_count(),
                config.learners.len(),
                config.runs,
                config.schedule.budget
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CommandError::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
