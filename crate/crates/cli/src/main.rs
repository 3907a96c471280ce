mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use symfrechet::checks::{run_suite, Suite, INJECT_ENV};
use symfrechet::experiments::{run, ExperimentConfig};
use symfrechet::Error;

use output::RunManifest;

#[derive(Parser)]
#[command(name = "symfrechet", version, about = "Weak-law experiments for Fréchet means on symmetric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long, env = "SYMFRECHET_SEED")]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "SYMFRECHET_JOBS")]
        jobs: Option<usize>,
    },
    /// Run an invariant suite: geometry, symmetry, frechet, sampling or all.
    Check {
        suite: String,
        #[arg(long, env = "SYMFRECHET_SEED", default_value_t = 1)]
        seed: u64,
    },
    /// List scenarios, space families, samplers and the config schema.
    List {
        #[arg(long)]
        json: bool,
    },
}

/// Exit status with a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure { code: 3, message: format!("{}: {e}", path.display()) }
    }

    fn library(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Precondition(_) => Failure::config(e.to_string()),
            other => Failure { code: 1, message: other.to_string() },
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Failure::config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(Failure::library)?;
    Ok(config)
}

fn cmd_run(config: &Path, out: &Path, seed: Option<u64>, jobs: Option<usize>) -> Result<(), Failure> {
    let started = unix_now();
    let clock = Instant::now();
    let config = load_config(config, seed)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::config("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Failure { code: 1, message: e.to_string() })?;
    let threads = pool.current_num_threads();
    let result = pool.install(|| run(&config)).map_err(Failure::library)?;

    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let resolved = toml::to_string(&config).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    let files = output::write_all(out, &resolved, &result)?;
    let manifest = RunManifest::new(&config, &resolved, &result, files, threads, started, unix_now(), clock.elapsed());
    output::write_json(&out.join(output::MANIFEST), &manifest)?;

    for case in &result.report.cases {
        for c in &case.checks {
            println!("{:<4} {}/{}: {}", if c.pass { "pass" } else { "FAIL" }, case.name, c.name, c.detail);
        }
    }
    for w in &result.report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} ({} trials)", out.display(), result.records.len());
    Ok(())
}

fn cmd_check(suite: &str, seed: u64) -> Result<bool, Failure> {
    let suite: Suite = suite.parse().map_err(|e: Error| Failure::config(e.to_string()))?;
    let inject = std::env::var(INJECT_ENV).ok();
    let results = run_suite(suite, seed, inject.as_deref()).map_err(Failure::library)?;
    println!("{:<6} {:<45} {:<22} {:>6} {:>8} {:>12}", "status", "invariant", "subject", "cases", "failures", "worst");
    for r in &results {
        println!(
            "{:<6} {:<45} {:<22} {:>6} {:>8} {:>12.3e}",
            if r.pass { "pass" } else { "FAIL" },
            r.id(),
            r.subject,
            r.cases,
            r.failures,
            r.worst_excess
        );
    }
    let failed: Vec<String> =
        results.iter().filter(|r| !r.pass).map(|r| format!("{} [{}]", r.id(), r.subject)).collect();
    println!("{} of {} invariants passed", results.len() - failed.len(), results.len());
    for f in &failed {
        println!("failed: {f}");
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, seed, jobs } => cmd_run(&config, &out, seed, jobs).map(|_| true),
        Command::Check { suite, seed } => cmd_check(&suite, seed),
        Command::List { json } => {
            output::list(json);
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
