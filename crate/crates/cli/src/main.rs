use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bpskit::commands::{cmd_diagnose, cmd_estimate, cmd_sample, cmd_transform_check};
use bpskit::config::RunConfig;
use bpskit::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Bouncy Particle Sampler: sampling, estimation and drift diagnostics.
#[derive(Parser, Debug)]
#[command(name = "bpskit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// Allow a transform on a target without thick tails.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every chain, writing chain_<c>.jsonl files and manifest.json.
    Sample {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pool trajectory files into one estimate per test function.
    Estimate {
        /// Trajectory files; all must come from the same configuration.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Takes the estimator list from this configuration; coordinate moments otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Writes estimate.json here instead of printing to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regime advice and a drift sweep; table on stderr, JSON on stdout.
    Diagnose {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference and round-trip checks of the tail transforms.
    TransformCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(run: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::parse(&fs::read_to_string(&run.config)?)?;
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    cfg.force |= run.force;
    cfg.validate()?;
    Ok(cfg)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, file_name: &str) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file_name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { run, out } => {
            let cfg = load_config(&run)?;
            let manifest = cmd_sample(&cfg, &out, run.threads)?;
            log::info!("wrote {} chain(s), config hash {}", manifest.chains.len(), manifest.config_hash);
        }
        Command::Estimate { files, config, out } => {
            let specs = config.map(|p| RunConfig::load(&p)).transpose()?.map(|c| c.estimator_specs());
            let report = cmd_estimate(&files, specs.as_deref())?;
            emit(&report, out.as_deref(), "estimate.json")?;
        }
        Command::Diagnose { run, out } => {
            let cfg = load_config(&run)?;
            let report = cmd_diagnose(&cfg, run.threads)?;
            eprintln!("regime: {:?}", report.advice.regime);
            eprint!("{}", report.drift.table());
            emit(&report, out.as_deref(), "diagnose.json")?;
        }
        Command::TransformCheck { seed, out } => {
            let report = cmd_transform_check(seed)?;
            for c in &report.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                eprintln!("{mark} {:<60} {:.3e} (tol {:.0e})", c.name, c.max_error, c.tolerance);
            }
            emit(&report, out.as_deref(), "transform_check.json")?;
            if !report.passed {
                return Err(Error::Numerical("transform checks failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BPSKIT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
