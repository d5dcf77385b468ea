//! One-shot solving of an instance with a chosen method, producing a report.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{solve_exact, ExactError, DEFAULT_ENUMERATION_CAP};
use crate::fams::{fams_column_generation, CgOptions, FamsError, FamsFixer};
use crate::game::{AraGame, GameError};
use crate::instance::{Instance, ParseError};
use crate::marginal::{solve_marginal, MarginalError, MarginalSolution};
use crate::sampler::{
    estimate_mixed_until, to_pe0, DomainFixer, MixedEstimate, SamplerError, DEFAULT_RETRY_CAP,
};
use crate::tsg::{tsg_detection_ratio, TsgFixer};

/// Slack allowed between a reported value and its upper bound.
pub const BOUND_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rand,
    Exact,
    Cg,
    MarginalBound,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Rand,
        Method::Exact,
        Method::Cg,
        Method::MarginalBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rand => "rand",
            Method::Exact => "exact",
            Method::Cg => "cg",
            Method::MarginalBound => "marginal-bound",
        }
    }

    /// Methods whose value is the true game value.
    pub fn is_exact(self) -> bool {
        matches!(self, Method::Exact | Method::Cg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                format!("unknown method `{s}` (expected rand, exact, cg or marginal-bound)")
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub seed: u64,
    /// Pure strategies averaged by `rand`.
    pub samples: usize,
    pub retry_cap: u32,
    pub cutoff: Option<Duration>,
    pub enumeration_cap: usize,
    pub cg_tolerance: f64,
    pub dbr_node_cap: u64,
    /// Exact value used for `loss_pct`.
    pub baseline: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let cg = CgOptions::default();
        Self {
            method: Method::Rand,
            seed: 0,
            samples: 1000,
            retry_cap: DEFAULT_RETRY_CAP,
            cutoff: Some(Duration::from_secs(600)),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            cg_tolerance: cg.tolerance,
            dbr_node_cap: cg.node_cap,
            baseline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub family: String,
    pub value: f64,
    pub upper_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_pct: Option<f64>,
    pub wall_ms: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub instance_digest: String,
    pub sample_failures: u32,
    /// Smallest per-sample ratio of repaired to comb-sampled coverage (TSG).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_ratio: Option<f64>,
    /// `1 / detection_ratio`; absent when the ratio is zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_measured: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl SolveReport {
    /// Fails when the value exceeds the upper bound beyond [`BOUND_TOL`].
    pub fn check(&self) -> Result<(), SolveError> {
        if !(self.value <= self.upper_bound + BOUND_TOL) {
            return Err(SolveError::BoundViolated {
                value: self.value,
                upper_bound: self.upper_bound,
            });
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> Result<String, SolveError> {
        self.check()?;
        Ok(serde_json::to_string_pretty(self).expect("reports serialize"))
    }
}

/// `100 (exact - value) / |exact|`; absent for a zero baseline.
pub fn loss_pct(exact: f64, value: f64) -> Option<f64> {
    (exact != 0.0).then(|| 100.0 * (exact - value) / exact.abs())
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("method {method} is not available for {family} instances")]
    MethodUnavailable {
        method: Method,
        family: &'static str,
    },
    #[error("time cutoff reached")]
    Timeout,
    #[error("reported value {value} exceeds its upper bound {upper_bound}")]
    BoundViolated { value: f64, upper_bound: f64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Sampler(SamplerError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Fams(FamsError),
    #[error(transparent)]
    Game(#[from] GameError),
}

impl From<SamplerError> for SolveError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Deadline { .. } => SolveError::Timeout,
            e => SolveError::Sampler(e),
        }
    }
}

impl From<FamsError> for SolveError {
    fn from(e: FamsError) -> Self {
        match e {
            FamsError::Timeout => SolveError::Timeout,
            e => SolveError::Fams(e),
        }
    }
}

/// Result of the randomized pipeline, with the TSG detection accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct RandOutcome {
    pub marginal: MarginalSolution,
    pub mixed: MixedEstimate,
    /// Per accepted sample: the smallest per-target ratio of repaired to
    /// comb-sampled coverage.
    pub sample_ratios: Vec<f64>,
}

impl RandOutcome {
    pub fn min_ratio(&self) -> f64 {
        self.sample_ratios.iter().copied().fold(1.0, f64::min)
    }
}

/// Marginal LP, then `samples` draws of comb sampling plus repair.
pub fn run_rand(instance: &Instance, options: &SolveOptions) -> Result<RandOutcome, SolveError> {
    let deadline = options.cutoff.map(|c| Instant::now() + c);
    let game = instance.game()?;
    let marginal = solve_marginal(&game)?;
    let fixer: Box<dyn DomainFixer> = match instance {
        Instance::Fams(i) => Box::new(FamsFixer::new(i)),
        Instance::Tsg(i) => Box::new(TsgFixer::new(i)),
        Instance::Game(_) => {
            return Err(SolveError::MethodUnavailable {
                method: Method::Rand,
                family: instance.family(),
            })
        }
    };
    let pe0 = to_pe0(&game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mixed = estimate_mixed_until(
        &marginal,
        &pe0,
        fixer.as_ref(),
        &mut rng,
        options.samples,
        options.retry_cap,
        deadline,
    )?;
    let sample_ratios = mixed
        .comb_outputs
        .iter()
        .zip(&mixed.estimate.samples)
        .map(|(before, after)| tsg_detection_ratio(before, after, &game).map(|r| r.min))
        .collect::<Result<_, _>>()?;
    Ok(RandOutcome {
        marginal,
        mixed,
        sample_ratios,
    })
}

pub fn solve(instance: &Instance, options: &SolveOptions) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let deadline = options.cutoff.map(|c| start + c);
    let game = instance.game()?;
    let mut report = SolveReport {
        method: options.method,
        family: instance.family().to_string(),
        value: f64::NAN,
        upper_bound: f64::NAN,
        loss_pct: None,
        wall_ms: 0,
        seed: options.seed,
        samples: None,
        instance_digest: instance.digest(),
        sample_failures: 0,
        detection_ratio: None,
        c_measured: None,
        generator: instance.generator().cloned(),
    };
    match options.method {
        Method::Rand => {
            let out = run_rand(instance, options)?;
            report.value = out.mixed.value;
            report.upper_bound = out.marginal.upper_bound;
            report.samples = Some(options.samples);
            report.sample_failures = out.mixed.failures;
            if matches!(instance, Instance::Tsg(_)) {
                let r = out.min_ratio();
                report.detection_ratio = Some(r);
                report.c_measured = (r > 0.0).then(|| 1.0 / r);
            }
        }
        Method::MarginalBound => {
            let ub = solve_marginal(&game)?.upper_bound;
            report.value = ub;
            report.upper_bound = ub;
        }
        Method::Exact => {
            let (sol, _) = solve_exact(&game, options.enumeration_cap)?;
            report.value = sol.value;
            report.upper_bound = upper_bound(&game)?;
        }
        Method::Cg => {
            let Instance::Fams(inst) = instance else {
                return Err(SolveError::MethodUnavailable {
                    method: Method::Cg,
                    family: instance.family(),
                });
            };
            let cg = CgOptions {
                tolerance: options.cg_tolerance,
                node_cap: options.dbr_node_cap,
                deadline,
            };
            report.value = fams_column_generation(inst, &cg)?.value;
            report.upper_bound = upper_bound(&game)?;
        }
    }
    if deadline.is_some_and(|t| Instant::now() > t) {
        return Err(SolveError::Timeout);
    }
    report.wall_ms = start.elapsed().as_millis() as u64;
    report.loss_pct = if options.method.is_exact() {
        Some(0.0)
    } else {
        options.baseline.and_then(|e| loss_pct(e, report.value))
    };
    report.check()?;
    Ok(report)
}

fn upper_bound(game: &AraGame) -> Result<f64, SolveError> {
    Ok(solve_marginal(game)?.upper_bound)
}
