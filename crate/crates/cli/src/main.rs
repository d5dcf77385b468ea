//! `ara`: generate instances, solve them, run benchmark sweeps and check
//! implementability from the command line.
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input (including
//! usage errors), 3 when solving or writing the result fails.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use ara_core::{
    check_implementability, gen_fams, gen_tsg, run_bench, solve, write_csv, BenchConfig,
    BenchError, GenConfig, Instance, Method, SolveError, SolveOptions,
};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "ara",
    version,
    about = "Security games as adversarial randomized allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance from a generator config (JSON, tagged by `family`).
    Generate {
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and print a JSON report.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "rand")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pure strategies averaged by `rand`.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 600.0)]
        cutoff_s: f64,
        /// Known exact value; fills `loss_pct` for `rand` and `marginal-bound`.
        #[arg(long, allow_negative_numbers = true)]
        baseline: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep and write CSV rows. `ARA_THREADS` caps the workers.
    Bench {
        config: PathBuf,
        /// Overrides the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        cutoff_s: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report whether an instance's constraints are bi-hierarchical.
    CheckImpl {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn solver(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Solver(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(e) | Failure::Solver(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, seed, out } => {
            let text = read(&config)?;
            let mut cfg: GenConfig = serde_json::from_str(&text)
                .with_context(|| format!("{}: invalid generator config", config.display()))
                .map_err(input)?;
            let instance: Instance = match &mut cfg {
                GenConfig::Fams(c) => {
                    c.seed = seed.unwrap_or(c.seed);
                    gen_fams(c).map_err(input)?.into()
                }
                GenConfig::Tsg(c) => {
                    c.seed = seed.unwrap_or(c.seed);
                    gen_tsg(c).map_err(input)?.into()
                }
            };
            emit(out.as_deref(), &instance.to_json_pretty())
        }
        Command::Solve {
            instance,
            method,
            seed,
            samples,
            cutoff_s,
            baseline,
            out,
        } => {
            let inst = load(&instance)?;
            let options = SolveOptions {
                method,
                seed,
                samples,
                cutoff: Some(cutoff(cutoff_s)?),
                baseline,
                ..SolveOptions::default()
            };
            let report = solve(&inst, &options).map_err(|e| match e {
                SolveError::MethodUnavailable { .. } => input(e),
                e => solver(e),
            })?;
            emit(out.as_deref(), &report.to_json_pretty().map_err(solver)?)
        }
        Command::Bench {
            config,
            seed,
            samples,
            cutoff_s,
            out,
        } => {
            let text = read(&config)?;
            let mut cfg: BenchConfig = serde_json::from_str(&text)
                .with_context(|| format!("{}: invalid bench config", config.display()))
                .map_err(input)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.samples = samples.unwrap_or(cfg.samples);
            if let Some(c) = cutoff_s {
                cfg.cutoff_s = cutoff(c)?.as_secs_f64();
            }
            cfg.validate().map_err(input)?;
            let rows = run_bench(&cfg).map_err(|e| match e {
                BenchError::NoMethods | BenchError::Config(_) | BenchError::Gen(_) => input(e),
                e => solver(e),
            })?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).map_err(solver)?;
            emit(
                out.as_deref(),
                &String::from_utf8(buf).expect("csv is utf-8"),
            )
        }
        Command::CheckImpl { instance, out } => {
            let game = load(&instance)?.game().map_err(input)?;
            let verdict = check_implementability(&game);
            let json = serde_json::to_string_pretty(&verdict).expect("verdicts serialize");
            emit(out.as_deref(), &json)
        }
    }
}

fn cutoff(seconds: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(seconds)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| input(anyhow!("--cutoff-s must be a positive number of seconds")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Instance::parse(&read(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let text = if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    };
    let written = match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .context("cannot write to stdout"),
    };
    written.map_err(solver)
}
