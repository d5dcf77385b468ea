//! Sampling pure strategies from a marginal solution.
//!
//! The pipeline works on games whose equality constraints partition the
//! matrix cells and whose remaining constraints are upper bounds
//! ([`Pe0Form`]). Every equality group is comb-sampled independently, then a
//! [`DomainFixer`] first lowers cells until the upper bounds hold and then
//! raises cells until the equalities hold again.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::time::Instant;

use ndarray::{s, Array2};
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::game::{
    AraGame, AssignmentConstraint, CellIndex, GameError, MarginalStrategy, MixedStrategyEstimate,
    PureStrategy, Violation,
};
use crate::marginal::MarginalSolution;

pub const DEFAULT_RETRY_CAP: u32 = 100;

/// Fractional parts closer than this to 0 or 1 are treated as integral.
const SNAP: f64 = 1e-9;
/// Allowed distance of an equality group's fractional mass from an integer.
const FRACTION_SUM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("game cannot be put in partitioned-equality form: {0}")]
    Structure(String),
    #[error("fractional parts of an equality group sum to {sum}, not an integer")]
    FractionalSum { sum: f64 },
    #[error("constraint is not an equality (bounds [{lower}, {upper}])")]
    NotEquality { lower: u32, upper: u32 },
    #[error("no valid pure strategy after {failures} failed attempts")]
    SamplingFailure { failures: u32 },
    #[error("{phase} fixer moved cell {cell} the wrong way ({before} -> {after})")]
    FixerContract {
        phase: FixPhase,
        cell: CellIndex,
        before: u32,
        after: u32,
    },
    #[error("fixers produced an invalid pure strategy: {0:?}")]
    InvalidOutput(Vec<Violation>),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("sampling passed its deadline after {drawn} samples")]
    Deadline { drawn: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixPhase {
    Inequality,
    Equality,
}

impl fmt::Display for FixPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixPhase::Inequality => "inequality",
            FixPhase::Equality => "equality",
        })
    }
}

/// A fixer could not restore the equalities; the sampler retries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("repair failed: {reason}")]
pub struct FixFailure {
    pub reason: String,
}

/// Domain-specific repair of a comb-sampled matrix, in the augmented shape
/// of [`Pe0Form::game`].
pub trait DomainFixer {
    /// Lowers cells until every inequality holds. Must never raise a cell.
    fn fix_inequalities(&self, x: &mut Array2<u32>, pe0: &Pe0Form, rng: &mut dyn RngCore);

    /// Raises cells until every equality holds. Must never lower a cell.
    fn fix_equalities(
        &self,
        x: &mut Array2<u32>,
        pe0: &Pe0Form,
        rng: &mut dyn RngCore,
    ) -> Result<(), FixFailure>;
}

/// Slack column appended for games whose rows are upper-bounded rather than
/// fixed: `sum_j x[i][j] + s_i = row_totals[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackColumn {
    pub col: usize,
    /// `None` for rows without a slack equality; their slack cell is pinned to zero.
    pub row_totals: Vec<Option<u32>>,
}

/// A game rewritten so that its equality constraints partition the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Pe0Form {
    original: AraGame,
    game: AraGame,
    equality_partition: Vec<AssignmentConstraint>,
    inequalities: Vec<AssignmentConstraint>,
    pinned: Vec<CellIndex>,
    slack: Option<SlackColumn>,
}

impl Pe0Form {
    /// The rewritten (possibly widened) game.
    pub fn game(&self) -> &AraGame {
        &self.game
    }

    pub fn original(&self) -> &AraGame {
        &self.original
    }

    pub fn equality_partition(&self) -> &[AssignmentConstraint] {
        &self.equality_partition
    }

    pub fn inequalities(&self) -> &[AssignmentConstraint] {
        &self.inequalities
    }

    /// Cells forced to zero and covered by no equality.
    pub fn pinned(&self) -> &[CellIndex] {
        &self.pinned
    }

    pub fn slack(&self) -> Option<&SlackColumn> {
        self.slack.as_ref()
    }

    /// Widens a marginal of the original game with its slack column.
    /// Marginals already in the widened shape are returned as they are.
    pub fn lift(&self, x: &MarginalStrategy) -> Result<MarginalStrategy, SamplerError> {
        let shape = x.values().dim();
        if shape == self.game.shape() {
            return Ok(x.clone());
        }
        if shape != self.original.shape() {
            return Err(GameError::Dimension {
                expected: self.original.shape(),
                found: shape,
            }
            .into());
        }
        let mut out = Array2::<f64>::zeros(self.game.shape());
        out.slice_mut(s![.., ..self.original.n()])
            .assign(x.values());
        if let Some(slack) = &self.slack {
            for (i, total) in slack.row_totals.iter().enumerate() {
                if let Some(total) = total {
                    let used: f64 = x.values().row(i).sum();
                    out[[i, slack.col]] = (f64::from(*total) - used).clamp(0.0, f64::from(*total));
                }
            }
        }
        Ok(MarginalStrategy::new(out)?)
    }

    /// Drops the slack column.
    pub fn strip(&self, x: &Array2<u32>) -> PureStrategy {
        PureStrategy::new(x.slice(s![.., ..self.original.n()]).to_owned())
    }
}

/// Rewrites `game` into partitioned-equality form.
///
/// Constraints with upper bound zero pin their cells and are left out of the
/// partition. When equalities leave cells uncovered, each affected row must
/// carry an upper-bound constraint spanning the whole row; it becomes the
/// equality `sum_j x[i][j] + s_i = upper` over a new slack column.
pub fn to_pe0(game: &AraGame) -> Result<Pe0Form, SamplerError> {
    let (k, n) = game.shape();
    let mut pinned_cells: BTreeSet<CellIndex> = BTreeSet::new();
    let mut pinned_constraints = Vec::new();
    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    for s in game.constraints() {
        if s.upper == 0 {
            pinned_cells.extend(s.cells.iter().copied());
            pinned_constraints.push(s.clone());
        } else if s.is_equality() {
            equalities.push(s.clone());
        } else {
            inequalities.push(s.clone());
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; k * n];
    for (ei, s) in equalities.iter().enumerate() {
        let support = s.support();
        if support.len() != s.cells.len() {
            return Err(SamplerError::Structure(format!(
                "equality {ei} repeats a cell; partition groups must be plain sets"
            )));
        }
        for c in support {
            if let Some(prev) = owner[c.row * n + c.col].replace(ei) {
                return Err(SamplerError::Structure(format!(
                    "equalities {prev} and {ei} overlap at cell {c}"
                )));
            }
        }
    }

    let uncovered_rows: BTreeSet<usize> = (0..k)
        .filter(|&i| {
            (0..n).any(|j| {
                owner[i * n + j].is_none() && !pinned_cells.contains(&CellIndex::new(i, j))
            })
        })
        .collect();

    if uncovered_rows.is_empty() {
        if let Some(s) = inequalities.iter().find(|s| s.lower > 0) {
            return Err(SamplerError::Structure(format!(
                "inequality with lower bound {} cannot be handled by downward repair",
                s.lower
            )));
        }
        let pinned = pinned_cells
            .iter()
            .copied()
            .filter(|c| owner[c.row * n + c.col].is_none())
            .collect();
        return Ok(Pe0Form {
            original: game.clone(),
            game: game.clone(),
            equality_partition: equalities,
            inequalities,
            pinned,
            slack: None,
        });
    }

    // Widen with a slack column.
    let slack_col = n;
    let mut row_totals: Vec<Option<u32>> = vec![None; k];
    let mut converted: HashSet<usize> = HashSet::new();
    for &i in &uncovered_rows {
        let full_row: BTreeSet<CellIndex> = (0..n).map(|j| CellIndex::new(i, j)).collect();
        let found = inequalities.iter().enumerate().find(|(idx, s)| {
            !converted.contains(idx)
                && s.lower == 0
                && s.cells.len() == n
                && s.support() == full_row
        });
        let Some((idx, s)) = found else {
            return Err(SamplerError::Structure(format!(
                "row {i} has cells outside every equality and no whole-row upper bound to absorb them"
            )));
        };
        if let Some(j) = (0..n).find(|&j| owner[i * n + j].is_some()) {
            return Err(SamplerError::Structure(format!(
                "row {i} bound overlaps equality {} at cell ({i}, {j})",
                owner[i * n + j].unwrap_or_default()
            )));
        }
        row_totals[i] = Some(s.upper);
        converted.insert(idx);
    }

    let mut partition = equalities;
    let mut widened_constraints = Vec::new();
    let mut pinned: Vec<CellIndex> = pinned_cells
        .iter()
        .copied()
        .filter(|c| owner[c.row * n + c.col].is_none())
        .collect();
    // Cells of converted rows are now covered.
    pinned.retain(|c| row_totals[c.row].is_none());
    for (i, total) in row_totals.iter().enumerate() {
        let slack_cell = CellIndex::new(i, slack_col);
        match total {
            Some(total) => {
                let mut cells: Vec<CellIndex> = (0..n).map(|j| CellIndex::new(i, j)).collect();
                cells.push(slack_cell);
                partition.push(
                    AssignmentConstraint::exactly(cells, *total).map_err(SamplerError::Game)?,
                );
            }
            None => {
                widened_constraints.push(AssignmentConstraint::exactly(vec![slack_cell], 0)?);
                pinned.push(slack_cell);
            }
        }
    }
    partition.sort_by_key(|s| s.support().into_iter().next());
    let remaining: Vec<AssignmentConstraint> = inequalities
        .into_iter()
        .enumerate()
        .filter(|(idx, _)| !converted.contains(idx))
        .map(|(_, s)| s)
        .collect();
    if let Some(s) = remaining.iter().find(|s| s.lower > 0) {
        return Err(SamplerError::Structure(format!(
            "inequality with lower bound {} cannot be handled by downward repair",
            s.lower
        )));
    }

    let mut all = partition.clone();
    all.extend(remaining.iter().cloned());
    all.extend(pinned_constraints);
    all.extend(widened_constraints);
    let widened = AraGame::new(
        k,
        n + 1,
        all,
        game.targets().to_vec(),
        Some(game.adversary_types().to_vec()),
    )?;
    pinned.sort_unstable();
    Ok(Pe0Form {
        original: game.clone(),
        game: widened,
        equality_partition: partition,
        inequalities: remaining,
        pinned,
        slack: Some(SlackColumn {
            col: slack_col,
            row_totals,
        }),
    })
}

/// Comb rounding of one equality group, cells in the order given.
///
/// Fractional parts are laid end to end on `[0, Z)`; a marker sits at
/// `draw + b` for each unit bucket `b`, and the cells under a marker round
/// up while all others round down. Each cell therefore rounds up with
/// probability equal to its fractional part, and exactly `Z` cells round up.
pub fn comb_round(values: &[f64], draw: f64) -> Result<Vec<u32>, SamplerError> {
    debug_assert!((0.0..1.0).contains(&draw));
    let mut out = Vec::with_capacity(values.len());
    let mut fractions = Vec::with_capacity(values.len());
    for &v in values {
        let v = v.max(0.0);
        let mut floor = v.floor();
        let mut frac = v - floor;
        if frac < SNAP {
            frac = 0.0;
        } else if frac > 1.0 - SNAP {
            floor += 1.0;
            frac = 0.0;
        }
        out.push(floor as u32);
        fractions.push(frac);
    }
    let raw: f64 = fractions.iter().sum();
    let buckets = raw.round();
    if (raw - buckets).abs() > FRACTION_SUM_TOL {
        return Err(SamplerError::FractionalSum { sum: raw });
    }
    let buckets = buckets as usize;
    if buckets == 0 {
        return Ok(out);
    }
    let scale = buckets as f64 / raw;
    let fractional: Vec<usize> = (0..values.len()).filter(|&i| fractions[i] > 0.0).collect();
    let mut raised = vec![false; values.len()];
    let mut marker = 0usize;
    let mut pending = 0usize;
    let mut end = 0.0;
    for (pos, &i) in fractional.iter().enumerate() {
        end = if pos + 1 == fractional.len() {
            buckets as f64
        } else {
            end + fractions[i] * scale
        };
        while marker < buckets && draw + (marker as f64) < end {
            pending += 1;
            marker += 1;
        }
        if pending > 0 {
            raised[i] = true;
            pending -= 1;
        }
    }
    // Only reachable through rounding noise: hand leftover markers to the
    // first fractional cells not yet raised.
    pending += buckets - marker;
    for &i in &fractional {
        if pending == 0 {
            break;
        }
        if !raised[i] {
            raised[i] = true;
            pending -= 1;
        }
    }
    for (o, r) in out.iter_mut().zip(raised) {
        if r {
            *o += 1;
        }
    }
    Ok(out)
}

/// Comb-samples one equality constraint of `x_m`. Cells are packed in
/// ascending `(row, col)` order and share a single uniform draw.
pub fn comb_sample<R: Rng + ?Sized>(
    x_m: &MarginalStrategy,
    constraint: &AssignmentConstraint,
    rng: &mut R,
) -> Result<Vec<(CellIndex, u32)>, SamplerError> {
    if !constraint.is_equality() {
        return Err(SamplerError::NotEquality {
            lower: constraint.lower,
            upper: constraint.upper,
        });
    }
    let cells: Vec<CellIndex> = constraint.support().into_iter().collect();
    let (k, n) = x_m.values().dim();
    if let Some(c) = cells.iter().find(|c| c.row >= k || c.col >= n) {
        return Err(GameError::CellOutOfRange {
            context: "comb sample".into(),
            cell: *c,
            k,
            n,
        }
        .into());
    }
    let values: Vec<f64> = cells.iter().map(|c| x_m.values()[[c.row, c.col]]).collect();
    let rounded = comb_round(&values, rng.random::<f64>())?;
    Ok(cells.into_iter().zip(rounded).collect())
}

/// Comb-samples every equality of the partition into a widened integral matrix.
pub fn comb_sample_all<R: Rng + ?Sized>(
    x_aug: &MarginalStrategy,
    pe0: &Pe0Form,
    rng: &mut R,
) -> Result<Array2<u32>, SamplerError> {
    let mut x = Array2::<u32>::zeros(pe0.game.shape());
    for s in &pe0.equality_partition {
        for (c, v) in comb_sample(x_aug, s, rng)? {
            x[[c.row, c.col]] = v;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureSample {
    pub strategy: PureStrategy,
    /// Comb-sampled matrix of the accepted attempt, before repair.
    pub comb: PureStrategy,
    /// Attempts discarded because the equality fixer failed.
    pub failures: u32,
    /// Units removed by the inequality fixer in the accepted attempt.
    pub lowered: u64,
    /// Units added by the equality fixer in the accepted attempt.
    pub raised: u64,
}

/// Comb sampling followed by both fixers, retried with fresh randomness
/// up to `retry_cap` times when the equality fixer fails.
pub fn sample_pure<R: RngCore>(
    ms: &MarginalSolution,
    pe0: &Pe0Form,
    fixer: &dyn DomainFixer,
    rng: &mut R,
    retry_cap: u32,
) -> Result<PureSample, SamplerError> {
    let x_aug = pe0.lift(&ms.x_m)?;
    sample_lifted(&x_aug, pe0, fixer, rng, retry_cap)
}

fn sample_lifted<R: RngCore>(
    x_aug: &MarginalStrategy,
    pe0: &Pe0Form,
    fixer: &dyn DomainFixer,
    rng: &mut R,
    retry_cap: u32,
) -> Result<PureSample, SamplerError> {
    let mut failures = 0u32;
    loop {
        let sampled = comb_sample_all(x_aug, pe0, rng)?;
        let comb = pe0.strip(&sampled);
        match repair(sampled, pe0, fixer, rng)? {
            Ok((x, lowered, raised)) => {
                let strategy = pe0.strip(&x);
                let check = pe0.original.is_valid_pure(&strategy)?;
                if !check.is_valid() {
                    return Err(SamplerError::InvalidOutput(check.violations));
                }
                return Ok(PureSample {
                    strategy,
                    comb,
                    failures,
                    lowered,
                    raised,
                });
            }
            Err(_) => {
                failures += 1;
                if failures > retry_cap {
                    return Err(SamplerError::SamplingFailure { failures });
                }
            }
        }
    }
}

type Repaired = (Array2<u32>, u64, u64);

/// Runs both fixers on a comb-sampled matrix, checking their direction.
/// The outer error is a contract breach; the inner one a retryable failure.
pub fn repair<R: RngCore>(
    mut x: Array2<u32>,
    pe0: &Pe0Form,
    fixer: &dyn DomainFixer,
    rng: &mut R,
) -> Result<Result<Repaired, FixFailure>, SamplerError> {
    let before = x.clone();
    fixer.fix_inequalities(&mut x, pe0, rng);
    let lowered = directed_change(&before, &x, FixPhase::Inequality)?;
    let mid = x.clone();
    if let Err(f) = fixer.fix_equalities(&mut x, pe0, rng) {
        return Ok(Err(f));
    }
    let raised = directed_change(&mid, &x, FixPhase::Equality)?;
    Ok(Ok((x, lowered, raised)))
}

fn directed_change(
    before: &Array2<u32>,
    after: &Array2<u32>,
    phase: FixPhase,
) -> Result<u64, SamplerError> {
    let mut total = 0u64;
    for (((row, col), &b), &a) in before.indexed_iter().zip(after.iter()) {
        let wrong = match phase {
            FixPhase::Inequality => a > b,
            FixPhase::Equality => a < b,
        };
        if wrong {
            return Err(SamplerError::FixerContract {
                phase,
                cell: CellIndex::new(row, col),
                before: b,
                after: a,
            });
        }
        total += u64::from(a.abs_diff(b));
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedEstimate {
    pub estimate: MixedStrategyEstimate,
    /// Pre-repair comb output of each accepted sample, aligned with `estimate.samples`.
    pub comb_outputs: Vec<PureStrategy>,
    /// Game value of the averaged strategy on the original game.
    pub value: f64,
    pub failures: u32,
}

/// Draws `m` valid pure strategies and evaluates their average.
pub fn estimate_mixed<R: RngCore>(
    ms: &MarginalSolution,
    pe0: &Pe0Form,
    fixer: &dyn DomainFixer,
    rng: &mut R,
    m: usize,
    retry_cap: u32,
) -> Result<MixedEstimate, SamplerError> {
    estimate_mixed_until(ms, pe0, fixer, rng, m, retry_cap, None)
}

/// [`estimate_mixed`] that gives up once `deadline` has passed.
pub fn estimate_mixed_until<R: RngCore>(
    ms: &MarginalSolution,
    pe0: &Pe0Form,
    fixer: &dyn DomainFixer,
    rng: &mut R,
    m: usize,
    retry_cap: u32,
    deadline: Option<Instant>,
) -> Result<MixedEstimate, SamplerError> {
    if m == 0 {
        return Err(SamplerError::NoSamples);
    }
    let x_aug = pe0.lift(&ms.x_m)?;
    let mut samples = Vec::with_capacity(m);
    let mut comb_outputs = Vec::with_capacity(m);
    let mut failures = 0u32;
    for drawn in 0..m {
        if drawn % 64 == 0 && deadline.is_some_and(|t| Instant::now() >= t) {
            return Err(SamplerError::Deadline { drawn });
        }
        let s = sample_lifted(&x_aug, pe0, fixer, rng, retry_cap)?;
        failures += s.failures;
        samples.push(s.strategy);
        comb_outputs.push(s.comb);
    }
    let estimate = MixedStrategyEstimate::from_samples(samples);
    let value = pe0.original.game_value(&estimate)?;
    Ok(MixedEstimate {
        estimate,
        comb_outputs,
        value,
        failures,
    })
}
