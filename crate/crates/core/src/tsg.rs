//! Threat screening: resource teams on rows, passenger categories on
//! columns, per-resource capacities and every passenger screened.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    AdversaryType, Allocation, AraGame, AssignmentConstraint, CellIndex, GameError, Target,
    TargetId,
};
use crate::sampler::{DomainFixer, FixFailure, Pe0Form};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub id: u32,
    /// Resource ids; a repeated id draws on that resource once per occurrence.
    pub members: Vec<u32>,
    #[serde(rename = "eff")]
    pub effectiveness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u32,
    pub risk: u32,
    pub flight: u32,
    #[serde(rename = "n")]
    pub passengers: u32,
    pub u_def: f64,
    pub u_undef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskLevel {
    pub id: u32,
    #[serde(rename = "p")]
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsgInstance {
    pub resources: Vec<Resource>,
    pub teams: Vec<Team>,
    pub categories: Vec<Category>,
    #[serde(rename = "risks")]
    pub risk_levels: Vec<RiskLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsgError {
    #[error("invalid TSG instance: {0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

impl TsgInstance {
    pub fn validate(&self) -> Result<(), TsgError> {
        let bad = |m: String| Err(TsgError::Invalid(m));
        if self.teams.is_empty() || self.categories.is_empty() {
            return bad("at least one team and one category are required".into());
        }
        let mut capacity = BTreeMap::new();
        for r in &self.resources {
            if capacity.insert(r.id, r.capacity).is_some() {
                return bad(format!("duplicate resource id {}", r.id));
            }
        }
        let mut team_ids = HashSet::new();
        let mut deliverable = 0.0;
        for t in &self.teams {
            if !team_ids.insert(t.id) {
                return bad(format!("duplicate team id {}", t.id));
            }
            if t.members.is_empty() {
                return bad(format!("team {} has no members", t.id));
            }
            if !(0.0..1.0).contains(&t.effectiveness) {
                return bad(format!(
                    "team {} effectiveness {} outside [0, 1)",
                    t.id, t.effectiveness
                ));
            }
            let mut draw = f64::INFINITY;
            for (r, m) in multiplicities(&t.members) {
                let Some(cap) = capacity.get(&r) else {
                    return bad(format!("team {} uses unknown resource {r}", t.id));
                };
                draw = draw.min(f64::from(*cap / m));
            }
            deliverable += draw;
        }
        let mut risk_ids = HashSet::new();
        let mut total_p = 0.0;
        for r in &self.risk_levels {
            if !risk_ids.insert(r.id) {
                return bad(format!("duplicate risk level {}", r.id));
            }
            if !(0.0..=1.0).contains(&r.probability) {
                return bad(format!("risk level {} probability {}", r.id, r.probability));
            }
            total_p += r.probability;
        }
        if (total_p - 1.0).abs() > 1e-9 {
            return bad(format!("risk probabilities sum to {total_p}"));
        }
        let mut category_ids = HashSet::new();
        let mut passengers = 0.0;
        for c in &self.categories {
            if !category_ids.insert(c.id) {
                return bad(format!("duplicate category id {}", c.id));
            }
            if c.passengers == 0 {
                return bad(format!("category {} has no passengers", c.id));
            }
            if !risk_ids.contains(&c.risk) {
                return bad(format!(
                    "category {} names unknown risk level {}",
                    c.id, c.risk
                ));
            }
            if !c.u_def.is_finite() || !c.u_undef.is_finite() || c.u_def < c.u_undef {
                return bad(format!(
                    "category {}: payoffs must be finite with u_def >= u_undef",
                    c.id
                ));
            }
            passengers += f64::from(c.passengers);
        }
        if passengers > deliverable {
            return bad(format!(
                "{passengers} passengers exceed the {deliverable} the teams can screen at most"
            ));
        }
        Ok(())
    }

    /// Resources some team uses, ascending by id, with `(team row, multiplicity)` users.
    fn resource_users(&self) -> Vec<(u32, u32, Vec<(usize, u32)>)> {
        let mut users: BTreeMap<u32, Vec<(usize, u32)>> = BTreeMap::new();
        for (i, t) in self.teams.iter().enumerate() {
            for (r, m) in multiplicities(&t.members) {
                users.entry(r).or_default().push((i, m));
            }
        }
        let capacity: BTreeMap<u32, u32> =
            self.resources.iter().map(|r| (r.id, r.capacity)).collect();
        users
            .into_iter()
            .map(|(r, u)| (r, capacity[&r], u))
            .collect()
    }
}

fn multiplicities(members: &[u32]) -> BTreeMap<u32, u32> {
    let mut out = BTreeMap::new();
    for &r in members {
        *out.entry(r).or_insert(0) += 1;
    }
    out
}

/// Rows are teams and columns categories, in instance order.
///
/// Capacity constraints (one per used resource, ascending id) come first,
/// then one equality per category. A category is a target with weights
/// `E_i / N_j`; each risk level is an adversary type over its categories.
pub fn encode_tsg(inst: &TsgInstance) -> Result<AraGame, TsgError> {
    inst.validate()?;
    let (k, n) = (inst.teams.len(), inst.categories.len());
    let mut constraints = Vec::new();
    for (_, cap, users) in inst.resource_users() {
        let mut cells = Vec::new();
        for &(i, m) in &users {
            for j in 0..n {
                cells.extend(std::iter::repeat_n(CellIndex::new(i, j), m as usize));
            }
        }
        constraints.push(AssignmentConstraint::at_most(cells, cap)?);
    }
    let mut targets = Vec::new();
    for (j, c) in inst.categories.iter().enumerate() {
        let cells: Vec<CellIndex> = (0..k).map(|i| CellIndex::new(i, j)).collect();
        constraints.push(AssignmentConstraint::exactly(cells.clone(), c.passengers)?);
        let weights = inst
            .teams
            .iter()
            .map(|t| t.effectiveness / f64::from(c.passengers))
            .collect();
        targets.push(Target::new(c.id, cells, weights, c.u_def, c.u_undef));
    }
    let types = inst
        .risk_levels
        .iter()
        .map(|r| AdversaryType {
            id: r.id,
            probability: r.probability,
            targets: inst
                .categories
                .iter()
                .filter(|c| c.risk == r.id)
                .map(|c| c.id)
                .collect(),
        })
        .collect();
    Ok(AraGame::new(k, n, constraints, targets, Some(types))?)
}

/// Capacity and passenger repair.
///
/// Decreases go one unit at a time: the resource with the largest absolute
/// overflow (ties to the lowest id) gives up a unit from the category with
/// the most passengers that uses it, taken from the least effective team
/// there (ties to the lowest row). Increases fill categories with fewer
/// passengers first, each unit going to the team whose tightest member
/// resource has the least remaining capacity (ties to the lowest row).
#[derive(Debug, Clone)]
pub struct TsgFixer {
    resources: Vec<(u32, u32, Vec<(usize, u32)>)>,
    /// Per team, `(resource position, multiplicity)`.
    team_draws: Vec<Vec<(usize, u32)>>,
    effectiveness: Vec<f64>,
    passengers: Vec<u32>,
    /// Columns in descending passenger order, ties by category id.
    by_size_desc: Vec<usize>,
    /// Columns in ascending passenger order, ties by category id.
    by_size_asc: Vec<usize>,
}

impl TsgFixer {
    pub fn new(inst: &TsgInstance) -> Self {
        let resources = inst.resource_users();
        let mut team_draws = vec![Vec::new(); inst.teams.len()];
        for (p, (_, _, users)) in resources.iter().enumerate() {
            for &(i, m) in users {
                team_draws[i].push((p, m));
            }
        }
        let passengers: Vec<u32> = inst.categories.iter().map(|c| c.passengers).collect();
        let ids: Vec<u32> = inst.categories.iter().map(|c| c.id).collect();
        let mut by_size_desc: Vec<usize> = (0..passengers.len()).collect();
        by_size_desc.sort_by(|&a, &b| passengers[b].cmp(&passengers[a]).then(ids[a].cmp(&ids[b])));
        let mut by_size_asc: Vec<usize> = (0..passengers.len()).collect();
        by_size_asc.sort_by(|&a, &b| passengers[a].cmp(&passengers[b]).then(ids[a].cmp(&ids[b])));
        Self {
            resources,
            team_draws,
            effectiveness: inst.teams.iter().map(|t| t.effectiveness).collect(),
            passengers,
            by_size_desc,
            by_size_asc,
        }
    }

    fn usage(&self, x: &Array2<u32>) -> Vec<u64> {
        let row_totals: Vec<u64> = x
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| u64::from(v)).sum())
            .collect();
        self.resources
            .iter()
            .map(|(_, _, users)| {
                users
                    .iter()
                    .map(|&(i, m)| u64::from(m) * row_totals[i])
                    .sum()
            })
            .collect()
    }
}

impl DomainFixer for TsgFixer {
    fn fix_inequalities(&self, x: &mut Array2<u32>, _pe0: &Pe0Form, _rng: &mut dyn RngCore) {
        loop {
            let usage = self.usage(x);
            let worst = self
                .resources
                .iter()
                .enumerate()
                .filter(|(p, (_, cap, _))| usage[*p] > u64::from(*cap))
                .max_by(|(pa, (ida, capa, _)), (pb, (idb, capb, _))| {
                    (usage[*pa] - u64::from(*capa))
                        .cmp(&(usage[*pb] - u64::from(*capb)))
                        .then(idb.cmp(ida))
                });
            let Some((_, (_, _, users))) = worst else {
                return;
            };
            let cell = self.by_size_desc.iter().find_map(|&j| {
                users
                    .iter()
                    .map(|&(i, _)| i)
                    .filter(|&i| x[[i, j]] > 0)
                    .min_by(|&a, &b| {
                        self.effectiveness[a]
                            .total_cmp(&self.effectiveness[b])
                            .then(a.cmp(&b))
                    })
                    .map(|i| (i, j))
            });
            let (i, j) = cell.expect("an overflowing resource has an allocated cell");
            x[[i, j]] -= 1;
        }
    }

    fn fix_equalities(
        &self,
        x: &mut Array2<u32>,
        _pe0: &Pe0Form,
        _rng: &mut dyn RngCore,
    ) -> Result<(), FixFailure> {
        let usage = self.usage(x);
        let mut remaining: Vec<i64> = self
            .resources
            .iter()
            .zip(&usage)
            .map(|((_, cap, _), &u)| i64::from(*cap) - u as i64)
            .collect();
        for &j in &self.by_size_asc {
            let have: u32 = x.column(j).sum();
            let Some(mut deficit) = self.passengers[j].checked_sub(have) else {
                return Err(FixFailure {
                    reason: format!(
                        "column {j} holds {have} > {} passengers",
                        self.passengers[j]
                    ),
                });
            };
            while deficit > 0 {
                let team = (0..self.team_draws.len())
                    .filter(|&i| {
                        self.team_draws[i]
                            .iter()
                            .all(|&(p, m)| remaining[p] >= i64::from(m))
                    })
                    .min_by_key(|&i| {
                        let slack = self.team_draws[i]
                            .iter()
                            .map(|&(p, _)| remaining[p])
                            .min()
                            .unwrap_or(i64::MAX);
                        (slack, i)
                    });
                let Some(i) = team else {
                    return Err(FixFailure {
                        reason: format!("no team has capacity left for column {j}"),
                    });
                };
                for &(p, m) in &self.team_draws[i] {
                    remaining[p] -= i64::from(m);
                }
                x[[i, j]] += 1;
                deficit -= 1;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRatio {
    /// `coverage(after) / coverage(before)` per target; 1 when the
    /// before-coverage is zero.
    pub per_target: Vec<(TargetId, f64)>,
    pub min: f64,
}

/// How much an allocation change cut each target's detection probability.
pub fn tsg_detection_ratio<A, B>(
    before: &A,
    after: &B,
    game: &AraGame,
) -> Result<DetectionRatio, GameError>
where
    A: Allocation + ?Sized,
    B: Allocation + ?Sized,
{
    let mut per_target = Vec::with_capacity(game.targets().len());
    let mut min = 1.0f64;
    for t in game.targets() {
        let b = game.coverage(before, t.id)?;
        let a = game.coverage(after, t.id)?;
        let r = if b <= 0.0 { 1.0 } else { a / b };
        min = min.min(r);
        per_target.push((t.id, r));
    }
    Ok(DetectionRatio { per_target, min })
}
