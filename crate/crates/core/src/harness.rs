//! Benchmark sweeps: generate instances along one size axis, solve each with
//! several methods, and emit CSV rows plus per-size means.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{gen_fams, gen_tsg, FamsGenConfig, GenError, TsgGenConfig};
use crate::instance::Instance;
use crate::solve::{loss_pct, solve, Method, SolveError, SolveOptions};

pub const THREADS_ENV: &str = "ARA_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Fams,
    Tsg,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Fams => "fams",
            Family::Tsg => "tsg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub family: Family,
    /// Generator field swept by `sizes`, e.g. `flights`.
    pub axis: String,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Instance `r` of every size uses seed `seed + r`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff_s: f64,
    /// Generator settings; the axis field and the seed are overwritten per row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fams: Option<FamsGenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tsg: Option<TsgGenConfig>,
}

fn default_samples() -> usize {
    1000
}

fn default_cutoff() -> f64 {
    600.0
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bench config lists no methods")]
    NoMethods,
    #[error("bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
    Timeout,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub family: String,
    pub size: usize,
    /// Instance seed, or `mean` on aggregation rows.
    pub seed: String,
    pub method: Method,
    pub value: Option<f64>,
    pub upper_bound: Option<f64>,
    pub loss_pct: Option<f64>,
    pub wall_ms: Option<f64>,
    pub sample_failures: Option<u32>,
    pub status: RowStatus,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.methods.is_empty() {
            return Err(BenchError::NoMethods);
        }
        if self.sizes.is_empty() || self.repetitions == 0 {
            return Err(BenchError::Config(
                "sizes and repetitions must be non-empty".into(),
            ));
        }
        if !(self.cutoff_s > 0.0) {
            return Err(BenchError::Config("cutoff_s must be positive".into()));
        }
        // Probe the axis on the first size so typos fail before any solving.
        self.instance(self.sizes[0], self.seed).map(|_| ())
    }

    /// Generates the instance for one `(size, seed)` cell of the sweep.
    pub fn instance(&self, size: usize, seed: u64) -> Result<Instance, BenchError> {
        let mut cfg = match self.family {
            Family::Fams => {
                serde_json::to_value(self.fams.as_ref().ok_or_else(|| missing("fams"))?)
            }
            Family::Tsg => serde_json::to_value(self.tsg.as_ref().ok_or_else(|| missing("tsg"))?),
        }
        .expect("generator configs serialize");
        let obj = cfg.as_object_mut().expect("generator configs are objects");
        if !obj.contains_key(&self.axis) {
            return Err(BenchError::Config(format!(
                "axis `{}` is not a {} generator field",
                self.axis,
                self.family.as_str()
            )));
        }
        obj.insert(self.axis.clone(), size.into());
        obj.insert("seed".into(), seed.into());
        let parse = |e: serde_json::Error| BenchError::Config(e.to_string());
        Ok(match self.family {
            Family::Fams => gen_fams(&serde_json::from_value(cfg).map_err(parse)?)?.into(),
            Family::Tsg => gen_tsg(&serde_json::from_value(cfg).map_err(parse)?)?.into(),
        })
    }
}

fn missing(family: &str) -> BenchError {
    BenchError::Config(format!("a `{family}` generator section is required"))
}

/// Worker count from `ARA_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Runs the sweep. Rows come back in `(size, seed, method)` order, each
/// size followed by its per-method means; a failing solve marks its row
/// and the sweep carries on.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    cfg.validate()?;
    let cells: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&size| (0..cfg.repetitions as u64).map(move |r| (size, r)))
        .collect();
    let work = || -> Vec<Result<Vec<BenchRow>, BenchError>> {
        cells
            .par_iter()
            .map(|&(size, r)| run_cell(cfg, size, cfg.seed + r))
            .collect()
    };
    let results = match thread_limit() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::new();
    let mut per_size: BTreeMap<usize, Vec<BenchRow>> = BTreeMap::new();
    for r in results {
        for row in r? {
            per_size.entry(row.size).or_default().push(row);
        }
    }
    for size in &cfg.sizes {
        let Some(block) = per_size.remove(size) else {
            continue;
        };
        let means = cfg
            .methods
            .iter()
            .map(|&m| mean_row(cfg, *size, m, &block))
            .collect::<Vec<_>>();
        rows.extend(block);
        rows.extend(means);
    }
    Ok(rows)
}

fn run_cell(cfg: &BenchConfig, size: usize, seed: u64) -> Result<Vec<BenchRow>, BenchError> {
    let instance = cfg.instance(size, seed)?;
    let mut outcomes = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let options = SolveOptions {
            method,
            seed,
            samples: cfg.samples,
            cutoff: Some(Duration::from_secs_f64(cfg.cutoff_s)),
            ..SolveOptions::default()
        };
        outcomes.push((method, solve(&instance, &options)));
    }
    let baseline = [Method::Exact, Method::Cg].into_iter().find_map(|m| {
        outcomes
            .iter()
            .find(|(method, r)| *method == m && r.is_ok())
            .and_then(|(_, r)| r.as_ref().ok().map(|rep| rep.value))
    });
    Ok(outcomes
        .into_iter()
        .map(|(method, result)| {
            let mut row = BenchRow {
                family: cfg.family.as_str().to_string(),
                size,
                seed: seed.to_string(),
                method,
                value: None,
                upper_bound: None,
                loss_pct: None,
                wall_ms: None,
                sample_failures: None,
                status: RowStatus::Failed,
            };
            match result {
                Ok(rep) => {
                    row.value = Some(rep.value);
                    row.upper_bound = Some(rep.upper_bound);
                    row.loss_pct = baseline.and_then(|e| loss_pct(e, rep.value));
                    row.wall_ms = Some(rep.wall_ms as f64);
                    row.sample_failures = Some(rep.sample_failures);
                    row.status = RowStatus::Ok;
                }
                Err(SolveError::Timeout) => row.status = RowStatus::Timeout,
                Err(_) => row.status = RowStatus::Failed,
            }
            row
        })
        .collect())
}

fn mean_row(cfg: &BenchConfig, size: usize, method: Method, block: &[BenchRow]) -> BenchRow {
    let ok: Vec<&BenchRow> = block
        .iter()
        .filter(|r| r.method == method && r.status == RowStatus::Ok)
        .collect();
    let mean = |f: &dyn Fn(&BenchRow) -> Option<f64>| {
        let vals: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    BenchRow {
        family: cfg.family.as_str().to_string(),
        size,
        seed: "mean".into(),
        method,
        value: mean(&|r| r.value),
        upper_bound: mean(&|r| r.upper_bound),
        loss_pct: mean(&|r| r.loss_pct),
        wall_ms: mean(&|r| r.wall_ms),
        sample_failures: Some(ok.iter().filter_map(|r| r.sample_failures).sum()),
        status: RowStatus::Mean,
    }
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig {
            family: Family::Fams,
            axis: "flights".into(),
            sizes: vec![4, 6],
            repetitions: 2,
            methods: vec![Method::Rand, Method::Cg],
            samples: 50,
            seed: 1,
            cutoff_s: 60.0,
            fams: Some(FamsGenConfig {
                seed: 0,
                flights: 4,
                schedules: 5,
                marshals: 2,
                targets_per_schedule: 2,
            }),
            tsg: None,
        }
    }

    #[test]
    fn sweep_shape_and_csv() {
        let rows = run_bench(&tiny()).unwrap();
        // Two sizes x (two seeds x two methods + two mean rows).
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().filter(|r| r.status == RowStatus::Ok).count() == 8);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "family,size,seed,method,value,upper_bound,loss_pct,wall_ms,sample_failures,status\n"
        ));
    }

    #[test]
    fn empty_method_list_is_rejected() {
        let mut cfg = tiny();
        cfg.methods.clear();
        assert!(matches!(run_bench(&cfg), Err(BenchError::NoMethods)));
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let mut cfg = tiny();
        cfg.axis = "planes".into();
        assert!(matches!(run_bench(&cfg), Err(BenchError::Config(_))));
    }

    #[test]
    fn failures_do_not_abort() {
        let mut cfg = tiny();
        cfg.methods = vec![Method::Exact, Method::Rand];
        cfg.sizes = vec![4];
        let rows = run_bench(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.status != RowStatus::Failed));
        // Cg is FAMS-only; on TSG it fails per row.
        let tsg = BenchConfig {
            family: Family::Tsg,
            axis: "flights".into(),
            sizes: vec![1],
            repetitions: 1,
            methods: vec![Method::Cg, Method::MarginalBound],
            samples: 10,
            seed: 0,
            cutoff_s: 60.0,
            fams: None,
            tsg: Some(TsgGenConfig::desk(0, 1)),
        };
        let rows = run_bench(&tsg).unwrap();
        assert_eq!(rows[0].status, RowStatus::Failed);
        assert_eq!(rows[1].status, RowStatus::Ok);
    }
}
