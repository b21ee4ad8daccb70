use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weylnoise::config::{ConfigError, Experiment, ExperimentConfig};
use weylnoise::{emit_outputs, replay, run_experiment, ReplayError, RunError};

const EXIT_CONFIG: u8 = 2;
const EXIT_GUARD: u8 = 3;
const EXIT_MISMATCH: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Parser)]
#[command(name = "weylnoise", version, about = "Eigenvalue statistics of randomly perturbed semiclassical operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the configured one, else runs/<experiment>-<seed>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "WEYLNOISE_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Spectrum(RunArgs),
    Perturb(RunArgs),
    WeylSweep(RunArgs),
    DetTails(RunArgs),
    HsTails(RunArgs),
    GrushinCheck(RunArgs),
    CalcCheck(RunArgs),
    Kappa(RunArgs),
    /// Re-run a stored manifest and compare its tables.
    Replay { manifest: PathBuf },
}

fn run_error_code(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => EXIT_CONFIG,
        RunError::Guard { .. } | RunError::Numerical { .. } => EXIT_GUARD,
        RunError::Pool(_) => EXIT_OTHER,
    }
}

fn run(experiment: Experiment, args: RunArgs) -> Result<(), (u8, String)> {
    let config_err = |e: ConfigError| (EXIT_CONFIG, e.to_string());
    let text = std::fs::read_to_string(&args.config).map_err(|source| config_err(ConfigError::Io { path: args.config.clone(), source }))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|source| config_err(ConfigError::Parse { path: args.config.clone(), source }))?;
    if cfg.experiment != experiment {
        return Err((EXIT_CONFIG, format!("configuration is for {} but the subcommand is {experiment}", cfg.experiment)));
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.experiment, cfg.master_seed)));
    let record = run_experiment(&cfg, threads).map_err(|e| (run_error_code(&e), e.to_string()))?;
    let files = emit_outputs(&record, &out).map_err(|e| (EXIT_OTHER, e.to_string()))?;
    eprintln!(
        "{}: {} result rows, {} metrics, {} violations; {} files in {}",
        cfg.experiment,
        record.results.len(),
        record.metrics.len(),
        record.violations.len(),
        files.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Spectrum(a) => run(Experiment::Spectrum, a),
        Command::Perturb(a) => run(Experiment::Perturb, a),
        Command::WeylSweep(a) => run(Experiment::WeylSweep, a),
        Command::DetTails(a) => run(Experiment::DetTails, a),
        Command::HsTails(a) => run(Experiment::HsTails, a),
        Command::GrushinCheck(a) => run(Experiment::GrushinCheck, a),
        Command::CalcCheck(a) => run(Experiment::CalcCheck, a),
        Command::Kappa(a) => run(Experiment::Kappa, a),
        Command::Replay { manifest } => match replay(&manifest) {
            Ok(report) => match report.mismatch {
                None => {
                    eprintln!("replay matched: {}", report.checked.join(", "));
                    Ok(())
                }
                Some(m) => Err((EXIT_MISMATCH, format!("replay mismatch: {m}"))),
            },
            Err(ReplayError::Run(e)) => Err((run_error_code(&e), e.to_string())),
            Err(e @ ReplayError::Schema(_)) => Err((EXIT_CONFIG, e.to_string())),
            Err(e) => Err((EXIT_OTHER, e.to_string())),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
