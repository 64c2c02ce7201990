//! `spherefrac` experiment runner.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error,
//! 3 precondition violated, 4 numerical failure, 5 assertion failed.

mod config;
mod experiments;
mod output;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{check, parse, ExperimentConfig};
use experiments::{execute, Failure};
use output::{write_files, write_manifest, RunManifest};

const ASSERTION_FAILED: u8 = 5;

#[derive(Parser)]
#[command(name = "spherefrac", version, about = "Simulate and verify the fractional stochastic heat equation on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Random seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicate fan-out.
    #[arg(long)]
    workers: Option<usize>,
    /// Multiplies every exponent tolerance.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and list every violated precondition without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one configured experiment, or a built-in suite with --suite.
    Run {
        #[arg(long, required_unless_present = "suite", conflicts_with = "suite")]
        config: Option<PathBuf>,
        #[arg(long)]
        suite: Option<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a built-in suite, one subdirectory per experiment.
    Suite {
        #[arg(long, default_value = "acceptance")]
        name: String,
        /// Print the suite's experiments and exit.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides) {
    if o.seed.is_some() {
        cfg.seed = o.seed;
    }
    if o.out.is_some() {
        cfg.output = o.out.clone();
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    if let Some(s) = o.tolerance_scale {
        cfg.tolerance_scale = s;
    }
}

/// Validates, runs and writes one experiment. Returns whether all assertions passed.
fn run_one(cfg: &ExperimentConfig) -> Result<bool, Failure> {
    let d = check(cfg);
    if !d.config.is_empty() {
        return Err(Failure::Config(d.config.join("; ")));
    }
    if !d.preconditions.is_empty() {
        return Err(Failure::Precondition(d.preconditions));
    }
    let dir = cfg
        .output
        .clone()
        .ok_or_else(|| Failure::Config("output directory is required (config `output` or --out)".into()))?;
    let seed = cfg.seed.expect("checked above");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;

    output::discard_manifest(&dir)?;
    let start = Instant::now();
    let outcome = pool.install(|| execute(cfg, seed))?;
    let mut report = serde_json::to_vec_pretty(&outcome.report(cfg, seed)).map_err(|e| Failure::Io(e.to_string()))?;
    report.push(b'\n');
    let mut files = outcome.files.clone();
    files.push(("report.json".into(), report));
    let entries = write_files(&dir, &files)?;
    let manifest = RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        config: serde_json::to_value(cfg).map_err(|e| Failure::Io(e.to_string()))?,
        files: entries,
        assertions_passed: outcome.pass(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&dir, &manifest)?;

    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for a in &outcome.assertions {
        println!("{} {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
    }
    println!("{} files written to {}", files.len(), dir.display());
    Ok(outcome.pass())
}

fn exit_for(result: Result<bool, Failure>) -> u8 {
    match result {
        Ok(true) => 0,
        Ok(false) => ASSERTION_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn run_suite(name: &str, overrides: &Overrides, list: bool) -> u8 {
    let Some(entries) = suite::suite(name) else {
        eprintln!("error: unknown suite `{name}`; available: {}", suite::names().join(", "));
        return 2;
    };
    if list {
        for (n, cfg) in &entries {
            println!("{n}\t{}", cfg.experiment.name());
        }
        return 0;
    }
    let Some(root) = overrides.out.clone() else {
        eprintln!("error: configuration error: --out is required for a suite");
        return 2;
    };
    let mut summary = Vec::new();
    let mut worst = 0u8;
    for (n, mut cfg) in entries {
        apply(&mut cfg, overrides);
        cfg.seed = Some(cfg.seed.unwrap_or(suite::DEFAULT_SEED));
        cfg.output = Some(root.join(&n));
        println!("== {n}");
        let code = exit_for(run_one(&cfg));
        summary.push(json!({ "experiment": n, "exit_code": code }));
        // Hard failures outrank assertion failures.
        worst = match (worst, code) {
            (0, c) | (c, 0) => c,
            (ASSERTION_FAILED, c) | (c, ASSERTION_FAILED) => c,
            (a, _) => a,
        };
    }
    let text = serde_json::to_string_pretty(&json!({ "suite": name, "runs": summary })).unwrap();
    if let Err(e) = std::fs::create_dir_all(&root).and_then(|_| std::fs::write(root.join("suite.json"), text + "\n")) {
        eprintln!("error: i/o error: {e}");
        return 1;
    }
    worst
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate { config, seed } => match load(&config) {
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code() as u8
            }
            Ok(mut cfg) => {
                if seed.is_some() {
                    cfg.seed = seed;
                }
                let d = check(&cfg);
                for m in &d.config {
                    println!("config: {m}");
                }
                for m in &d.preconditions {
                    println!("precondition: {m}");
                }
                if d.is_clean() {
                    println!("ok: {} experiment is valid", cfg.experiment.name());
                    0
                } else if !d.config.is_empty() {
                    2
                } else {
                    3
                }
            }
        },
        Command::Run {
            config,
            suite: Some(name),
            overrides,
        } if config.is_none() => run_suite(&name, &overrides, false),
        Command::Run { config, overrides, .. } => {
            let path = config.expect("clap requires --config without --suite");
            exit_for(load(&path).and_then(|mut cfg| {
                apply(&mut cfg, &overrides);
                run_one(&cfg)
            }))
        }
        Command::Suite { name, list, overrides } => run_suite(&name, &overrides, list),
    };
    ExitCode::from(code)
}
