#![allow(dead_code)]

use ara_core::{
    gen_fams, gen_tsg, AraGame, FamsGenConfig, Instance, MixedStrategyEstimate, TsgGenConfig,
};

/// Three marshals; schedules {f0}, {f0, f1}, {f1}.
pub const FAMS_TOY: &str = r#"{
  "marshals": 3,
  "schedules": [
    {"id": 1, "flights": [0]},
    {"id": 2, "flights": [0, 1]},
    {"id": 3, "flights": [1]}
  ],
  "flights": [
    {"id": 0, "u_def": -1, "u_undef": -6},
    {"id": 1, "u_def": -1, "u_undef": -4}
  ]
}"#;

/// X-ray (cap 7) and metal detector (cap 15); teams X-ray, X-ray + MD, MD;
/// categories (R1, F1), (R2, F1), (R2, F2).
pub const TSG_TOY: &str = r#"{
  "resources": [{"id": 0, "capacity": 7}, {"id": 1, "capacity": 15}],
  "teams": [
    {"id": 0, "members": [0], "eff": 0.9},
    {"id": 1, "members": [0, 1], "eff": 0.95},
    {"id": 2, "members": [1], "eff": 0.5}
  ],
  "categories": [
    {"id": 0, "risk": 0, "flight": 0, "n": 2, "u_def": -1, "u_undef": -10},
    {"id": 1, "risk": 1, "flight": 0, "n": 3, "u_def": -1, "u_undef": -5},
    {"id": 2, "risk": 1, "flight": 1, "n": 15, "u_def": -1, "u_undef": -4}
  ],
  "risks": [{"id": 0, "p": 0.4}, {"id": 1, "p": 0.6}]
}"#;

pub fn fams_toy() -> Instance {
    Instance::parse(FAMS_TOY).unwrap()
}

pub fn tsg_toy() -> Instance {
    Instance::parse(TSG_TOY).unwrap()
}

/// Toy FAMS: at most 6 flights, 8 schedules, 3 marshals.
pub fn fams_tiny(seed: u64) -> Instance {
    let cfg = FamsGenConfig {
        seed,
        flights: 3 + (seed % 4) as usize,
        schedules: 4 + (seed / 4 % 5) as usize,
        marshals: 1 + (seed % 3) as usize,
        targets_per_schedule: 1 + (seed / 2 % 3) as usize,
    };
    gen_fams(&cfg).unwrap().into()
}

pub fn tsg_tiny_config(seed: u64) -> TsgGenConfig {
    // risk levels x flights never exceeds three categories
    let (risk_levels, flights) = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1)][seed as usize % 5];
    TsgGenConfig {
        seed,
        risk_levels,
        resource_types: 2,
        team_types: 3,
        flights,
        passengers: (1, 3),
        effectiveness: (0.1, 0.95),
        capacity_slack: 0.2,
        max_team_size: Some(2),
        max_capacity: Some(6),
    }
}

/// Toy TSG: at most 3 categories, 3 teams, capacities at most 6.
pub fn tsg_tiny(seed: u64) -> Instance {
    gen_tsg(&tsg_tiny_config(seed)).unwrap().into()
}

/// Standard error of the averaged strategy's value, with each type's attacked
/// target held at its best response to the mean.
pub fn standard_error(game: &AraGame, est: &MixedStrategyEstimate) -> f64 {
    let attacked: Vec<(f64, u32)> = game
        .adversary_types()
        .iter()
        .filter(|ty| ty.probability > 0.0)
        .map(|ty| {
            let t = ty
                .targets
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ua = game.defender_utility(&est.mean, a).unwrap();
                    let ub = game.defender_utility(&est.mean, b).unwrap();
                    ua.total_cmp(&ub)
                })
                .unwrap();
            (ty.probability, t)
        })
        .collect();
    let v: Vec<f64> = est
        .samples
        .iter()
        .map(|s| {
            attacked
                .iter()
                .map(|&(p, t)| p * game.defender_utility(s, t).unwrap())
                .sum()
        })
        .collect();
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (var / m).sqrt()
}
