//! Seeded random instances for both domains.
//!
//! Every instance records the configuration that produced it in its
//! `generator` field, so reports can be audited and regenerated.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fams::{FamsInstance, Flight, Schedule};
use crate::tsg::{Category, Resource, RiskLevel, Team, TsgInstance};

const MAX_FILTER_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("generator size parameter `{0}` must be at least 1")]
    ZeroSize(&'static str),
    #[error("schedules need {per_schedule} distinct flights but only {flights} exist")]
    TooFewFlights { per_schedule: usize, flights: usize },
    #[error("invalid range for `{0}`")]
    BadRange(&'static str),
    #[error("no instance within max_capacity {cap} after {attempts} draws")]
    CapacityFilter { cap: u32, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamsGenConfig {
    pub seed: u64,
    pub flights: usize,
    pub schedules: usize,
    pub marshals: usize,
    pub targets_per_schedule: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsgGenConfig {
    pub seed: u64,
    pub risk_levels: usize,
    pub resource_types: usize,
    pub team_types: usize,
    pub flights: usize,
    /// Inclusive passenger range per category before the risk skew.
    #[serde(default = "default_passengers")]
    pub passengers: (u32, u32),
    #[serde(default = "default_effectiveness")]
    pub effectiveness: (f64, f64),
    /// Capacity headroom over a random feasible screening plan.
    #[serde(default = "default_slack")]
    pub capacity_slack: f64,
    /// Upper limit on distinct resources per team.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_team_size: Option<usize>,
    /// Redraw (from the same stream) until every capacity is at most this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_capacity: Option<u32>,
}

fn default_passengers() -> (u32, u32) {
    (5, 50)
}

fn default_effectiveness() -> (f64, f64) {
    (0.1, 0.95)
}

fn default_slack() -> f64 {
    0.2
}

impl TsgGenConfig {
    /// Desk-scale defaults: six risk levels, eight resource types, twenty team types.
    pub fn desk(seed: u64, flights: usize) -> Self {
        Self {
            seed,
            risk_levels: 6,
            resource_types: 8,
            team_types: 20,
            flights,
            passengers: default_passengers(),
            effectiveness: default_effectiveness(),
            capacity_slack: default_slack(),
            max_team_size: None,
            max_capacity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GenConfig {
    Fams(FamsGenConfig),
    Tsg(TsgGenConfig),
}

/// Flights get `u_def = -1` and `u_undef` uniform on the integers -10..=-2;
/// each schedule flies `targets_per_schedule` distinct flights.
pub fn gen_fams(cfg: &FamsGenConfig) -> Result<FamsInstance, GenError> {
    for (name, v) in [
        ("flights", cfg.flights),
        ("schedules", cfg.schedules),
        ("marshals", cfg.marshals),
        ("targets_per_schedule", cfg.targets_per_schedule),
    ] {
        if v == 0 {
            return Err(GenError::ZeroSize(name));
        }
    }
    if cfg.targets_per_schedule > cfg.flights {
        return Err(GenError::TooFewFlights {
            per_schedule: cfg.targets_per_schedule,
            flights: cfg.flights,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let flights = (0..cfg.flights)
        .map(|id| Flight {
            id: id as u32,
            u_def: -1.0,
            u_undef: -f64::from(rng.random_range(2..=10u32)),
        })
        .collect();
    let schedules = (0..cfg.schedules)
        .map(|id| {
            let mut picked: Vec<u32> = sample(&mut rng, cfg.flights, cfg.targets_per_schedule)
                .into_iter()
                .map(|f| f as u32)
                .collect();
            picked.sort_unstable();
            Schedule {
                id: id as u32,
                flights: picked,
            }
        })
        .collect();
    Ok(FamsInstance {
        marshals: cfg.marshals,
        schedules,
        flights,
        forbidden: Vec::new(),
        generator: Some(
            serde_json::to_value(GenConfig::Fams(cfg.clone())).expect("config serializes"),
        ),
    })
}

/// Teams are random non-empty resource subsets with uniform effectiveness.
/// One category per (risk level, flight); risk ids ascend with risk, and
/// higher levels draw from a shrinking top of the passenger range.
/// Capacities are the resource draw of a random screening plan plus the
/// configured slack, rounded up, so every instance is feasible.
pub fn gen_tsg(cfg: &TsgGenConfig) -> Result<TsgInstance, GenError> {
    for (name, v) in [
        ("risk_levels", cfg.risk_levels),
        ("resource_types", cfg.resource_types),
        ("team_types", cfg.team_types),
        ("flights", cfg.flights),
    ] {
        if v == 0 {
            return Err(GenError::ZeroSize(name));
        }
    }
    let (p_lo, p_hi) = cfg.passengers;
    if p_lo == 0 || p_lo > p_hi {
        return Err(GenError::BadRange("passengers"));
    }
    let (e_lo, e_hi) = cfg.effectiveness;
    if !(0.0..1.0).contains(&e_lo) || !(0.0..1.0).contains(&e_hi) || e_lo > e_hi {
        return Err(GenError::BadRange("effectiveness"));
    }
    if !(cfg.capacity_slack >= 0.0 && cfg.capacity_slack.is_finite()) {
        return Err(GenError::BadRange("capacity_slack"));
    }
    if cfg.max_team_size == Some(0) {
        return Err(GenError::ZeroSize("max_team_size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let attempts = if cfg.max_capacity.is_some() {
        MAX_FILTER_ATTEMPTS
    } else {
        1
    };
    for _ in 0..attempts {
        let inst = draw_tsg(cfg, &mut rng);
        if cfg
            .max_capacity
            .is_none_or(|cap| inst.resources.iter().all(|r| r.capacity <= cap))
        {
            return Ok(inst);
        }
    }
    Err(GenError::CapacityFilter {
        cap: cfg.max_capacity.unwrap_or_default(),
        attempts,
    })
}

fn draw_tsg(cfg: &TsgGenConfig, rng: &mut ChaCha8Rng) -> TsgInstance {
    let r_count = cfg.resource_types;
    let size_cap = cfg.max_team_size.unwrap_or(r_count).min(r_count);
    let teams: Vec<Team> = (0..cfg.team_types)
        .map(|id| {
            let size = rng.random_range(1..=size_cap);
            let mut members: Vec<u32> = sample(rng, r_count, size)
                .into_iter()
                .map(|r| r as u32)
                .collect();
            members.sort_unstable();
            Team {
                id: id as u32,
                members,
                effectiveness: rng.random_range(cfg.effectiveness.0..=cfg.effectiveness.1),
            }
        })
        .collect();

    let weights: Vec<f64> = (0..cfg.risk_levels)
        .map(|_| rng.random_range(1.0..2.0))
        .collect();
    let total: f64 = weights.iter().sum();
    let risk_levels = weights
        .iter()
        .enumerate()
        .map(|(id, w)| RiskLevel {
            id: id as u32,
            probability: w / total,
        })
        .collect();

    let (p_lo, p_hi) = cfg.passengers;
    let levels = cfg.risk_levels as u32;
    let mut categories = Vec::new();
    let mut usage = vec![0u64; r_count];
    for l in 0..levels {
        let top = p_lo + (p_hi - p_lo) * (levels - l) / levels;
        for f in 0..cfg.flights {
            let passengers = rng.random_range(p_lo..=top.max(p_lo));
            for _ in 0..passengers {
                let team = &teams[rng.random_range(0..teams.len())];
                for &r in &team.members {
                    usage[r as usize] += 1;
                }
            }
            categories.push(Category {
                id: l * cfg.flights as u32 + f as u32,
                risk: l,
                flight: f as u32,
                passengers,
                u_def: -1.0,
                u_undef: -f64::from(rng.random_range(2..=10u32)),
            });
        }
    }
    let resources = usage
        .iter()
        .enumerate()
        .map(|(id, &u)| Resource {
            id: id as u32,
            capacity: ((u as f64 * (1.0 + cfg.capacity_slack)).ceil() as u32).max(1),
        })
        .collect();
    TsgInstance {
        resources,
        teams,
        categories,
        risk_levels,
        generator: Some(
            serde_json::to_value(GenConfig::Tsg(cfg.clone())).expect("config serializes"),
        ),
    }
}
