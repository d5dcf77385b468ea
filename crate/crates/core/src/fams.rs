//! Air-marshal scheduling: marshals on rows, flight schedules on columns,
//! and at most one marshal per flight.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{maximin_lp, ExactError};
use crate::game::{AraGame, AssignmentConstraint, CellIndex, GameError, PureStrategy, Target};
use crate::sampler::{DomainFixer, FixFailure, Pe0Form};

pub const DEFAULT_DBR_NODE_CAP: u64 = 10_000_000;
pub const DEFAULT_CG_TOLERANCE: f64 = 1e-7;
const CG_ITERATION_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub id: u32,
    pub flights: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub id: u32,
    pub u_def: f64,
    pub u_undef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamsInstance {
    pub marshals: usize,
    pub schedules: Vec<Schedule>,
    pub flights: Vec<Flight>,
    /// `(marshal row, schedule id)` pairs that may not be assigned.
    #[serde(default)]
    pub forbidden: Vec<(usize, u32)>,
    /// Free-form provenance written by the generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamsError {
    #[error("invalid FAMS instance: {0}")]
    Invalid(String),
    #[error("best-response search exceeded {cap} nodes; shrink the instance")]
    SearchCap { cap: u64 },
    #[error("column generation passed its deadline")]
    Timeout,
    #[error("column generation did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Game(#[from] GameError),
}

impl FamsInstance {
    pub fn validate(&self) -> Result<(), FamsError> {
        let bad = |m: String| Err(FamsError::Invalid(m));
        if self.marshals == 0 {
            return bad("at least one marshal is required".into());
        }
        if self.schedules.is_empty() {
            return bad("at least one schedule is required".into());
        }
        let mut flight_ids = HashSet::new();
        for f in &self.flights {
            if !flight_ids.insert(f.id) {
                return bad(format!("duplicate flight id {}", f.id));
            }
            if !f.u_def.is_finite() || !f.u_undef.is_finite() || f.u_def < f.u_undef {
                return bad(format!(
                    "flight {}: payoffs must be finite with u_def >= u_undef",
                    f.id
                ));
            }
        }
        let mut schedule_ids = HashSet::new();
        for s in &self.schedules {
            if !schedule_ids.insert(s.id) {
                return bad(format!("duplicate schedule id {}", s.id));
            }
            if s.flights.is_empty() {
                return bad(format!("schedule {} has no flights", s.id));
            }
            let mut seen = HashSet::new();
            for f in &s.flights {
                if !flight_ids.contains(f) {
                    return bad(format!("schedule {} names unknown flight {f}", s.id));
                }
                if !seen.insert(*f) {
                    return bad(format!("schedule {} lists flight {f} twice", s.id));
                }
            }
        }
        for &(m, s) in &self.forbidden {
            if m >= self.marshals || !schedule_ids.contains(&s) {
                return bad(format!("forbidden pair ({m}, {s}) is out of range"));
            }
        }
        Ok(())
    }

    fn column_of(&self, schedule: u32) -> Option<usize> {
        self.schedules.iter().position(|s| s.id == schedule)
    }

    fn flight_position(&self) -> BTreeMap<u32, usize> {
        self.flights
            .iter()
            .enumerate()
            .map(|(p, f)| (f.id, p))
            .collect()
    }

    /// Largest number of other flights sharing a schedule with any one flight.
    pub fn max_co_scheduled(&self) -> usize {
        let mut neighbours: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for s in &self.schedules {
            for &f in &s.flights {
                neighbours
                    .entry(f)
                    .or_default()
                    .extend(s.flights.iter().copied().filter(|&g| g != f));
            }
        }
        neighbours.values().map(BTreeSet::len).max().unwrap_or(0)
    }
}

/// Rows are marshals and columns schedules, in instance order.
///
/// Constraints come in three blocks: one `<= 1` per marshal row, one `= 0`
/// per forbidden pair, one `<= 1` per flight that appears in some schedule.
/// Each flight is a target with unit weights on every cell whose schedule
/// flies it; targets keep the flight ids.
pub fn encode_fams(inst: &FamsInstance) -> Result<AraGame, FamsError> {
    inst.validate()?;
    let (k, n) = (inst.marshals, inst.schedules.len());
    let mut constraints = Vec::new();
    for i in 0..k {
        constraints.push(AssignmentConstraint::at_most(
            (0..n).map(|j| CellIndex::new(i, j)).collect(),
            1,
        )?);
    }
    for &(m, s) in &inst.forbidden {
        let j = inst.column_of(s).expect("validated");
        constraints.push(AssignmentConstraint::exactly(
            vec![CellIndex::new(m, j)],
            0,
        )?);
    }
    let mut targets = Vec::new();
    for f in &inst.flights {
        let cells: Vec<CellIndex> = (0..k)
            .flat_map(|i| {
                inst.schedules
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.flights.contains(&f.id))
                    .map(move |(j, _)| CellIndex::new(i, j))
            })
            .collect();
        if !cells.is_empty() {
            constraints.push(AssignmentConstraint::at_most(cells.clone(), 1)?);
        }
        targets.push(Target::unit(f.id, cells, f.u_def, f.u_undef));
    }
    Ok(AraGame::new(k, n, constraints, targets, None)?)
}

/// Lowers schedule allocations until no flight carries two marshals.
///
/// Schedules holding violated flights and no satisfied one are cleared
/// first, most violated flights first, ties to the lowest schedule id; such
/// clears never disturb a satisfied flight. When none is left, the most
/// violated flight (ties to the lowest id) loses one of its allocated
/// schedules, chosen uniformly.
#[derive(Debug, Clone)]
pub struct FamsFixer {
    schedule_ids: Vec<u32>,
    flight_ids: Vec<u32>,
    /// Flight positions per column.
    schedule_flights: Vec<Vec<usize>>,
    /// Columns per flight position.
    flight_schedules: Vec<Vec<usize>>,
}

impl FamsFixer {
    pub fn new(inst: &FamsInstance) -> Self {
        let pos = inst.flight_position();
        let schedule_flights: Vec<Vec<usize>> = inst
            .schedules
            .iter()
            .map(|s| s.flights.iter().map(|f| pos[f]).collect())
            .collect();
        let mut flight_schedules = vec![Vec::new(); inst.flights.len()];
        for (j, fs) in schedule_flights.iter().enumerate() {
            for &f in fs {
                flight_schedules[f].push(j);
            }
        }
        Self {
            schedule_ids: inst.schedules.iter().map(|s| s.id).collect(),
            flight_ids: inst.flights.iter().map(|f| f.id).collect(),
            schedule_flights,
            flight_schedules,
        }
    }

    fn column_load(x: &Array2<u32>, j: usize) -> u32 {
        x.column(j).sum()
    }

    fn clear_one(x: &mut Array2<u32>, j: usize) {
        if let Some(i) = (0..x.nrows()).find(|&i| x[[i, j]] > 0) {
            x[[i, j]] = 0;
        }
    }
}

impl DomainFixer for FamsFixer {
    fn fix_inequalities(&self, x: &mut Array2<u32>, _pe0: &Pe0Form, rng: &mut dyn RngCore) {
        let n = self.schedule_flights.len();
        loop {
            let loads: Vec<u32> = (0..n).map(|j| Self::column_load(x, j)).collect();
            let mut count = vec![0u32; self.flight_ids.len()];
            for (j, fs) in self.schedule_flights.iter().enumerate() {
                for &f in fs {
                    count[f] += loads[j];
                }
            }
            if count.iter().all(|&c| c <= 1) {
                return;
            }

            let mut best: Option<(usize, u32, usize)> = None;
            for j in (0..n).filter(|&j| loads[j] > 0) {
                let fs = &self.schedule_flights[j];
                let violated = fs.iter().filter(|&&f| count[f] > 1).count();
                let satisfied = fs.iter().filter(|&&f| count[f] == 1).count();
                if violated == 0 || satisfied > 0 {
                    continue;
                }
                let key = (violated, self.schedule_ids[j]);
                if best.is_none_or(|(v, id, _)| key.0 > v || (key.0 == v && key.1 < id)) {
                    best = Some((key.0, key.1, j));
                }
            }
            if let Some((_, _, j)) = best {
                Self::clear_one(x, j);
                continue;
            }

            let f = (0..count.len())
                .filter(|&f| count[f] > 1)
                .max_by(|&a, &b| {
                    count[a]
                        .cmp(&count[b])
                        .then(self.flight_ids[b].cmp(&self.flight_ids[a]))
                })
                .expect("some flight is violated");
            let allocated: Vec<usize> = self.flight_schedules[f]
                .iter()
                .copied()
                .filter(|&j| loads[j] > 0)
                .collect();
            let j = allocated[rng.random_range(0..allocated.len())];
            Self::clear_one(x, j);
        }
    }

    fn fix_equalities(
        &self,
        x: &mut Array2<u32>,
        pe0: &Pe0Form,
        _rng: &mut dyn RngCore,
    ) -> Result<(), FixFailure> {
        let Some(slack) = pe0.slack() else {
            return Ok(());
        };
        for (i, total) in slack.row_totals.iter().enumerate() {
            let Some(total) = total else { continue };
            let used: u32 = (0..slack.col).map(|j| x[[i, j]]).sum();
            let need = total.checked_sub(used).ok_or_else(|| FixFailure {
                reason: format!("row {i} exceeds its total"),
            })?;
            if need < x[[i, slack.col]] {
                return Err(FixFailure {
                    reason: format!("row {i} would need its slack lowered"),
                });
            }
            x[[i, slack.col]] = need;
        }
        Ok(())
    }
}

/// Best integral allocation for positive cell weights `d` (k x n):
/// each marshal takes at most one allowed schedule, no flight twice.
///
/// Depth-first over marshals with schedules tried in descending weight. A
/// branch is cut when even the better of two optimistic bounds cannot beat
/// the incumbent: every remaining marshal on its best schedule, or the
/// best distinct conflict-free schedules for the remaining marshals.
pub fn fams_dbr(
    inst: &FamsInstance,
    d: &Array2<f64>,
    node_cap: u64,
) -> Result<PureStrategy, FamsError> {
    inst.validate()?;
    let (k, n) = (inst.marshals, inst.schedules.len());
    if d.dim() != (k, n) {
        return Err(GameError::Dimension {
            expected: (k, n),
            found: d.dim(),
        }
        .into());
    }
    let pos = inst.flight_position();
    let flights: Vec<Vec<usize>> = inst
        .schedules
        .iter()
        .map(|s| s.flights.iter().map(|f| pos[f]).collect())
        .collect();
    let forbidden: HashSet<(usize, usize)> = inst
        .forbidden
        .iter()
        .map(|&(m, s)| (m, inst.column_of(s).expect("validated")))
        .collect();
    let options: Vec<Vec<usize>> = (0..k)
        .map(|i| {
            let mut js: Vec<usize> = (0..n)
                .filter(|&j| d[[i, j]] > 0.0 && !forbidden.contains(&(i, j)))
                .collect();
            js.sort_by(|&a, &b| d[[i, b]].total_cmp(&d[[i, a]]).then(a.cmp(&b)));
            js
        })
        .collect();
    let same_as_previous: Vec<bool> = (0..k)
        .map(|i| {
            i > 0 && options[i] == options[i - 1] && (0..n).all(|j| d[[i, j]] == d[[i - 1, j]])
        })
        .collect();
    let mut search = DbrSearch {
        d,
        flights: &flights,
        options: &options,
        same_as_previous: &same_as_previous,
        used_flights: vec![false; inst.flights.len()],
        used_schedule: vec![false; n],
        choice: vec![None; k],
        best_value: 0.0,
        best: vec![None; k],
        nodes: 0,
        node_cap,
    };
    search.visit(0, 0.0)?;
    let mut x = Array2::<u32>::zeros((k, n));
    for (i, c) in search.best.iter().enumerate() {
        if let Some(j) = c {
            x[[i, *j]] = 1;
        }
    }
    Ok(PureStrategy::new(x))
}

struct DbrSearch<'a> {
    d: &'a Array2<f64>,
    flights: &'a [Vec<usize>],
    options: &'a [Vec<usize>],
    same_as_previous: &'a [bool],
    used_flights: Vec<bool>,
    used_schedule: Vec<bool>,
    /// Position within `options[i]` of marshal i's pick.
    choice: Vec<Option<usize>>,
    best_value: f64,
    best: Vec<Option<usize>>,
    nodes: u64,
    node_cap: u64,
}

impl DbrSearch<'_> {
    fn free(&self, j: usize) -> bool {
        !self.used_schedule[j] && self.flights[j].iter().all(|&f| !self.used_flights[f])
    }

    fn bound(&self, i: usize) -> f64 {
        let k = self.options.len();
        let per_marshal: f64 = (i..k)
            .map(|r| {
                self.options[r]
                    .iter()
                    .find(|&&j| self.free(j))
                    .map_or(0.0, |&j| self.d[[r, j]])
            })
            .sum();
        let mut best_per_schedule: Vec<f64> = (0..self.used_schedule.len())
            .filter(|&j| self.free(j))
            .map(|j| (i..k).map(|r| self.d[[r, j]]).fold(0.0, f64::max))
            .filter(|v| *v > 0.0)
            .collect();
        let remaining = k - i;
        let distinct = if best_per_schedule.len() > remaining {
            best_per_schedule.select_nth_unstable_by(remaining, |a, b| b.total_cmp(a));
            best_per_schedule[..remaining].iter().sum()
        } else {
            best_per_schedule.iter().sum()
        };
        per_marshal.min(distinct)
    }

    fn visit(&mut self, i: usize, value: f64) -> Result<(), FamsError> {
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(FamsError::SearchCap { cap: self.node_cap });
        }
        if value > self.best_value + 1e-12 {
            self.best_value = value;
            self.best = self
                .choice
                .iter()
                .enumerate()
                .map(|(r, c)| c.map(|p| self.options[r][p]))
                .collect();
        }
        if i == self.options.len() || value + self.bound(i) <= self.best_value + 1e-12 {
            return Ok(());
        }
        // Identical marshals pick in non-decreasing option order; "none" sorts last.
        let start = if self.same_as_previous[i] {
            self.choice[i - 1].unwrap_or(usize::MAX)
        } else {
            0
        };
        for p in start.min(self.options[i].len())..self.options[i].len() {
            let j = self.options[i][p];
            if !self.free(j) {
                continue;
            }
            self.used_schedule[j] = true;
            for &f in &self.flights[j] {
                self.used_flights[f] = true;
            }
            self.choice[i] = Some(p);
            self.visit(i + 1, value + self.d[[i, j]])?;
            self.choice[i] = None;
            for &f in &self.flights[j] {
                self.used_flights[f] = false;
            }
            self.used_schedule[j] = false;
        }
        self.visit(i + 1, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tolerance: f64,
    pub node_cap: u64,
    pub deadline: Option<Instant>,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_CG_TOLERANCE,
            node_cap: DEFAULT_DBR_NODE_CAP,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub value: f64,
    pub columns: Vec<PureStrategy>,
    pub weights: Vec<f64>,
    pub iterations: usize,
}

/// Column generation: the master mixes the columns found so far (starting
/// from the all-slack column), the slave prices a new one with [`fams_dbr`]
/// on the cell weights the master's target duals induce.
pub fn fams_column_generation(
    inst: &FamsInstance,
    options: &CgOptions,
) -> Result<CgSolution, FamsError> {
    let game = encode_fams(inst)?;
    let (k, n) = game.shape();
    let mut columns = vec![PureStrategy::zeros(k, n)];
    let mut seen: HashSet<Vec<u32>> =
        HashSet::from([columns[0].values().iter().copied().collect()]);
    for iterations in 1..=CG_ITERATION_CAP {
        if options.deadline.is_some_and(|t| Instant::now() >= t) {
            return Err(FamsError::Timeout);
        }
        let master = maximin_lp(&game, &columns)?;
        let mut d = Array2::<f64>::zeros((k, n));
        for &(id, y) in &master.target_duals {
            if y <= 0.0 {
                continue;
            }
            let t = game.target(id)?;
            let scale = y * t.payoff_gap();
            for (c, w) in t.cells.iter().zip(&t.weights) {
                d[[c.row, c.col]] += scale * w;
            }
        }
        let candidate = fams_dbr(inst, &d, options.node_cap)?;
        let mut priced = -master.convexity_dual;
        for &(id, y) in &master.target_duals {
            priced += y * game.defender_utility(&candidate, id)?;
        }
        let key: Vec<u32> = candidate.values().iter().copied().collect();
        if priced <= options.tolerance || !seen.insert(key) {
            return Ok(CgSolution {
                value: master.value,
                columns,
                weights: master.weights,
                iterations,
            });
        }
        columns.push(candidate);
    }
    Err(FamsError::NoConvergence(CG_ITERATION_CAP))
}
