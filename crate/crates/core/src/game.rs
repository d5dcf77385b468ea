//! The abstract allocation game.
//!
//! A defender places integral amounts of `k` assets on `n` objects, giving a
//! `k x n` allocation matrix. Assignment constraints bound the sum over index
//! sets of that matrix, targets turn weighted sums of cells into defence
//! probabilities, and an attacker of each adversary type picks the target in
//! its own target set that hurts the defender most. Payoffs are zero-sum.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpStatus, Relation};

/// Tolerance on assignment constraints for real-valued (marginal) matrices.
pub const MARGINAL_EPS: f64 = 1e-7;

/// Default cap on the number of targets, as a multiple of `k * n`.
pub const DEFAULT_TARGET_CAP_FACTOR: usize = 64;

pub type TargetId = u32;
pub type TypeId = u32;

/// `(row, col)` position in the allocation matrix. Serialized as `[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl From<[usize; 2]> for CellIndex {
    fn from([row, col]: [usize; 2]) -> Self {
        Self { row, col }
    }
}

impl From<CellIndex> for [usize; 2] {
    fn from(c: CellIndex) -> Self {
        [c.row, c.col]
    }
}

impl From<(usize, usize)> for CellIndex {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for CellIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// `lower <= sum of x over cells <= upper`.
///
/// `cells` is a multiset: a cell listed twice contributes twice to the sum,
/// which is how a team drawing the same resource twice is expressed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentConstraint {
    pub cells: Vec<CellIndex>,
    pub lower: u32,
    pub upper: u32,
}

impl AssignmentConstraint {
    pub fn new(cells: Vec<CellIndex>, lower: u32, upper: u32) -> Result<Self, GameError> {
        let c = Self {
            cells,
            lower,
            upper,
        };
        c.check_shape()?;
        Ok(c)
    }

    pub fn at_most(cells: Vec<CellIndex>, upper: u32) -> Result<Self, GameError> {
        Self::new(cells, 0, upper)
    }

    pub fn exactly(cells: Vec<CellIndex>, value: u32) -> Result<Self, GameError> {
        Self::new(cells, value, value)
    }

    fn check_shape(&self) -> Result<(), GameError> {
        if self.cells.is_empty() {
            return Err(GameError::EmptyConstraint);
        }
        if self.lower > self.upper {
            return Err(GameError::InvertedBounds {
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }

    pub fn is_equality(&self) -> bool {
        self.lower == self.upper
    }

    /// Distinct cells of the constraint.
    pub fn support(&self) -> BTreeSet<CellIndex> {
        self.cells.iter().copied().collect()
    }

    /// Multiplicity of each distinct cell, in ascending cell order.
    pub fn multiplicities(&self) -> Vec<(CellIndex, u32)> {
        let mut counts: Vec<(CellIndex, u32)> = Vec::new();
        let mut sorted = self.cells.clone();
        sorted.sort_unstable();
        for c in sorted {
            match counts.last_mut() {
                Some((last, m)) if *last == c => *m += 1,
                _ => counts.push((c, 1)),
            }
        }
        counts
    }

    pub fn sum<A: Allocation + ?Sized>(&self, x: &A) -> f64 {
        self.cells.iter().map(|&c| x.value(c)).sum()
    }

    pub fn sum_int(&self, x: &Array2<u32>) -> u64 {
        self.cells
            .iter()
            .map(|c| u64::from(x[[c.row, c.col]]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: TargetId,
    pub cells: Vec<CellIndex>,
    /// Aligned with `cells`.
    pub weights: Vec<f64>,
    #[serde(rename = "u_def")]
    pub payoff_defended: f64,
    #[serde(rename = "u_undef")]
    pub payoff_undefended: f64,
}

impl Target {
    pub fn new(
        id: TargetId,
        cells: Vec<CellIndex>,
        weights: Vec<f64>,
        payoff_defended: f64,
        payoff_undefended: f64,
    ) -> Self {
        Self {
            id,
            cells,
            weights,
            payoff_defended,
            payoff_undefended,
        }
    }

    /// A target whose cells all carry weight one.
    pub fn unit(
        id: TargetId,
        cells: Vec<CellIndex>,
        payoff_defended: f64,
        payoff_undefended: f64,
    ) -> Self {
        let weights = vec![1.0; cells.len()];
        Self::new(id, cells, weights, payoff_defended, payoff_undefended)
    }

    /// `U_s - U_u`, non-negative for valid targets.
    pub fn payoff_gap(&self) -> f64 {
        self.payoff_defended - self.payoff_undefended
    }

    pub fn utility_at(&self, coverage: f64) -> f64 {
        coverage * self.payoff_defended + (1.0 - coverage) * self.payoff_undefended
    }

    pub fn weighted_sum<A: Allocation + ?Sized>(&self, x: &A) -> f64 {
        self.cells
            .iter()
            .zip(&self.weights)
            .map(|(&c, w)| w * x.value(c))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryType {
    pub id: TypeId,
    #[serde(rename = "p")]
    pub probability: f64,
    pub targets: Vec<TargetId>,
}

/// Read access to an allocation matrix of either integral or real entries.
pub trait Allocation {
    fn shape(&self) -> (usize, usize);
    fn value(&self, cell: CellIndex) -> f64;
}

impl Allocation for Array2<f64> {
    fn shape(&self) -> (usize, usize) {
        self.dim()
    }
    fn value(&self, c: CellIndex) -> f64 {
        self[[c.row, c.col]]
    }
}

impl Allocation for Array2<u32> {
    fn shape(&self) -> (usize, usize) {
        self.dim()
    }
    fn value(&self, c: CellIndex) -> f64 {
        f64::from(self[[c.row, c.col]])
    }
}

/// A real-valued allocation; a point of the marginal polytope when it
/// satisfies every assignment constraint within [`MARGINAL_EPS`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStrategy(Array2<f64>);

impl MarginalStrategy {
    pub fn new(values: Array2<f64>) -> Result<Self, GameError> {
        if let Some(((row, col), v)) = values
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(GameError::NegativeEntry {
                cell: CellIndex::new(row, col),
                value: *v,
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl Allocation for MarginalStrategy {
    fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }
    fn value(&self, c: CellIndex) -> f64 {
        self.0[[c.row, c.col]]
    }
}

impl From<&PureStrategy> for MarginalStrategy {
    fn from(p: &PureStrategy) -> Self {
        Self(p.0.mapv(f64::from))
    }
}

/// An integral allocation. Validity against a game is checked with
/// [`AraGame::is_valid_pure`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PureStrategy(Array2<u32>);

impl PureStrategy {
    pub fn new(values: Array2<u32>) -> Self {
        Self(values)
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        Self(Array2::zeros((k, n)))
    }

    pub fn values(&self) -> &Array2<u32> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<u32> {
        self.0
    }

    /// Rejects matrices with a negative or fractional entry.
    pub fn from_real(values: &Array2<f64>) -> Result<Self, GameError> {
        let mut out = Array2::zeros(values.dim());
        for ((row, col), &v) in values.indexed_iter() {
            if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
                return Err(GameError::NonIntegral {
                    cell: CellIndex::new(row, col),
                    value: v,
                });
            }
            out[[row, col]] = v as u32;
        }
        Ok(Self(out))
    }
}

impl Allocation for PureStrategy {
    fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }
    fn value(&self, c: CellIndex) -> f64 {
        f64::from(self.0[[c.row, c.col]])
    }
}

/// A bag of sampled pure strategies and their cell-wise mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategyEstimate {
    pub samples: Vec<PureStrategy>,
    pub mean: Array2<f64>,
}

impl MixedStrategyEstimate {
    /// Panics on an empty bag or on samples of differing shapes.
    pub fn from_samples(samples: Vec<PureStrategy>) -> Self {
        assert!(
            !samples.is_empty(),
            "a mixed-strategy estimate needs at least one sample"
        );
        let shape = samples[0].shape();
        let mut sum = Array2::<f64>::zeros(shape);
        for s in &samples {
            assert_eq!(s.shape(), shape, "sample shapes differ");
            sum.zip_mut_with(s.values(), |acc, &v| *acc += f64::from(v));
        }
        let mean = sum / samples.len() as f64;
        Self { samples, mean }
    }
}

impl Allocation for MixedStrategyEstimate {
    fn shape(&self) -> (usize, usize) {
        self.mean.dim()
    }
    fn value(&self, c: CellIndex) -> f64 {
        self.mean[[c.row, c.col]]
    }
}

/// A failed constraint in a pure-strategy check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonIntegral {
        cell: CellIndex,
        value: f64,
    },
    Constraint {
        index: usize,
        achieved: u64,
        lower: u32,
        upper: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonIntegral { cell, value } => {
                write!(f, "cell {cell} holds non-integral {value}")
            }
            Violation::Constraint {
                index,
                achieved,
                lower,
                upper,
            } => write!(
                f,
                "constraint {index}: sum {achieved} outside [{lower}, {upper}]"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PureCheck {
    pub violations: Vec<Violation>,
}

impl PureCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("allocation matrix must be at least 1x1, got {k}x{n}")]
    EmptyMatrix { k: usize, n: usize },
    #[error("assignment constraint has no cells")]
    EmptyConstraint,
    #[error("assignment constraint has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { lower: u32, upper: u32 },
    #[error("{context}: cell {cell} outside the {k}x{n} matrix")]
    CellOutOfRange {
        context: String,
        cell: CellIndex,
        k: usize,
        n: usize,
    },
    #[error("target {target}: {reason}")]
    InvalidTarget { target: TargetId, reason: String },
    #[error("duplicate target id {0}")]
    DuplicateTarget(TargetId),
    #[error("{count} targets exceed the cap of {cap}")]
    TooManyTargets { count: usize, cap: usize },
    #[error("adversary types: {0}")]
    InvalidTypes(String),
    #[error("target {target}: weighted coverage can reach {max} > 1 on the marginal polytope")]
    CoverageExceedsOne { target: TargetId, max: f64 },
    #[error("target {target}: weighted coverage is unbounded on the marginal polytope")]
    CoverageUnbounded { target: TargetId },
    #[error("coverage bound check failed: {0}")]
    Lp(#[from] lp::LpError),
    #[error("unknown target id {0}")]
    UnknownTarget(TargetId),
    #[error("allocation has shape {found:?}, game expects {expected:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("cell {cell} holds negative or non-finite {value}")]
    NegativeEntry { cell: CellIndex, value: f64 },
    #[error("cell {cell} holds non-integral {value}")]
    NonIntegral { cell: CellIndex, value: f64 },
    #[error("constraint {index}: marginal sum {achieved} outside [{lower}, {upper}]")]
    MarginalViolation {
        index: usize,
        achieved: f64,
        lower: u32,
        upper: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameOptions {
    /// Targets allowed per matrix cell.
    pub target_cap_factor: usize,
}

impl Default for GameOptions {
    fn default() -> Self {
        Self {
            target_cap_factor: DEFAULT_TARGET_CAP_FACTOR,
        }
    }
}

/// A validated game. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameSpec", into = "GameSpec")]
pub struct AraGame {
    k: usize,
    n: usize,
    constraints: Vec<AssignmentConstraint>,
    targets: Vec<Target>,
    adversary_types: Vec<AdversaryType>,
    target_index: HashMap<TargetId, usize>,
}

/// Wire form of [`AraGame`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSpec {
    pub k: usize,
    pub n: usize,
    pub constraints: Vec<AssignmentConstraint>,
    pub targets: Vec<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary_types: Option<Vec<AdversaryType>>,
}

impl TryFrom<GameSpec> for AraGame {
    type Error = GameError;
    fn try_from(spec: GameSpec) -> Result<Self, GameError> {
        AraGame::new(
            spec.k,
            spec.n,
            spec.constraints,
            spec.targets,
            spec.adversary_types,
        )
    }
}

impl From<AraGame> for GameSpec {
    fn from(g: AraGame) -> Self {
        GameSpec {
            k: g.k,
            n: g.n,
            constraints: g.constraints,
            targets: g.targets,
            adversary_types: Some(g.adversary_types),
        }
    }
}

impl AraGame {
    /// Builds and validates a game. `adversary_types = None` puts every
    /// target in a single type of probability one.
    pub fn new(
        k: usize,
        n: usize,
        constraints: Vec<AssignmentConstraint>,
        targets: Vec<Target>,
        adversary_types: Option<Vec<AdversaryType>>,
    ) -> Result<Self, GameError> {
        Self::with_options(
            k,
            n,
            constraints,
            targets,
            adversary_types,
            GameOptions::default(),
        )
    }

    pub fn with_options(
        k: usize,
        n: usize,
        constraints: Vec<AssignmentConstraint>,
        targets: Vec<Target>,
        adversary_types: Option<Vec<AdversaryType>>,
        options: GameOptions,
    ) -> Result<Self, GameError> {
        if k == 0 || n == 0 {
            return Err(GameError::EmptyMatrix { k, n });
        }
        let in_range = |c: &CellIndex| c.row < k && c.col < n;
        for (i, s) in constraints.iter().enumerate() {
            s.check_shape()?;
            if let Some(c) = s.cells.iter().find(|c| !in_range(c)) {
                return Err(GameError::CellOutOfRange {
                    context: format!("constraint {i}"),
                    cell: *c,
                    k,
                    n,
                });
            }
        }

        let cap = k * n * options.target_cap_factor;
        if targets.len() > cap {
            return Err(GameError::TooManyTargets {
                count: targets.len(),
                cap,
            });
        }
        let mut target_index = HashMap::with_capacity(targets.len());
        for (idx, t) in targets.iter().enumerate() {
            if target_index.insert(t.id, idx).is_some() {
                return Err(GameError::DuplicateTarget(t.id));
            }
            validate_target(t, k, n)?;
        }

        let adversary_types = match adversary_types {
            Some(types) => types,
            None => vec![AdversaryType {
                id: 0,
                probability: 1.0,
                targets: targets.iter().map(|t| t.id).collect(),
            }],
        };
        validate_types(&adversary_types, &target_index)?;

        let game = Self {
            k,
            n,
            constraints,
            targets,
            adversary_types,
            target_index,
        };
        game.check_coverage_bounds()?;
        Ok(game)
    }

    /// Every target's weighted sum must stay at most one on the marginal
    /// polytope. A constraint containing the whole target with
    /// `max weight * upper <= 1` certifies this directly; otherwise the
    /// weighted sum is maximized by LP.
    fn check_coverage_bounds(&self) -> Result<(), GameError> {
        let supports: Vec<BTreeSet<CellIndex>> =
            self.constraints.iter().map(|s| s.support()).collect();
        for t in &self.targets {
            if t.cells.is_empty() {
                continue;
            }
            let max_w = t.weights.iter().copied().fold(0.0, f64::max);
            if max_w == 0.0 {
                continue;
            }
            let certified = self.constraints.iter().zip(&supports).any(|(s, support)| {
                max_w * f64::from(s.upper) <= 1.0 + 1e-12
                    && t.cells.iter().all(|c| support.contains(c))
            });
            if certified {
                continue;
            }
            let mut program = self.polytope_lp();
            for (c, w) in t.cells.iter().zip(&t.weights) {
                program.objective[self.flat(*c)] += w;
            }
            let sol = lp::solve_lp(&program)?;
            match sol.status {
                LpStatus::Infeasible => {}
                LpStatus::Unbounded => return Err(GameError::CoverageUnbounded { target: t.id }),
                LpStatus::Optimal => {
                    if sol.objective_value > 1.0 + MARGINAL_EPS {
                        return Err(GameError::CoverageExceedsOne {
                            target: t.id,
                            max: sol.objective_value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// An LP over the `k * n` cell variables (row-major) carrying every
    /// assignment constraint; the objective is left at zero.
    pub fn polytope_lp(&self) -> LinearProgram {
        let mut program = LinearProgram::new(self.k * self.n);
        for s in &self.constraints {
            let coeffs: Vec<(usize, f64)> = s.cells.iter().map(|&c| (self.flat(c), 1.0)).collect();
            if s.is_equality() {
                program.add_row(coeffs, Relation::Eq, f64::from(s.upper));
            } else {
                program.add_row(coeffs.clone(), Relation::Le, f64::from(s.upper));
                if s.lower > 0 {
                    program.add_row(coeffs, Relation::Ge, f64::from(s.lower));
                }
            }
        }
        program
    }

    /// Row-major position of a cell.
    pub fn flat(&self, c: CellIndex) -> usize {
        c.row * self.n + c.col
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.k, self.n)
    }

    pub fn constraints(&self) -> &[AssignmentConstraint] {
        &self.constraints
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn adversary_types(&self) -> &[AdversaryType] {
        &self.adversary_types
    }

    pub fn target(&self, id: TargetId) -> Result<&Target, GameError> {
        self.target_index
            .get(&id)
            .map(|&i| &self.targets[i])
            .ok_or(GameError::UnknownTarget(id))
    }

    pub fn target_position(&self, id: TargetId) -> Option<usize> {
        self.target_index.get(&id).copied()
    }

    fn check_shape<A: Allocation + ?Sized>(&self, x: &A) -> Result<(), GameError> {
        if x.shape() != self.shape() {
            return Err(GameError::Dimension {
                expected: self.shape(),
                found: x.shape(),
            });
        }
        Ok(())
    }

    /// Raw `c_t = sum w x` over the target's cells; not clamped.
    pub fn coverage<A: Allocation + ?Sized>(&self, x: &A, t: TargetId) -> Result<f64, GameError> {
        self.check_shape(x)?;
        Ok(self.target(t)?.weighted_sum(x))
    }

    /// Coverage clamped to `[0, 1]`, for reports.
    pub fn reported_coverage<A: Allocation + ?Sized>(
        &self,
        x: &A,
        t: TargetId,
    ) -> Result<f64, GameError> {
        Ok(self.coverage(x, t)?.clamp(0.0, 1.0))
    }

    /// `c_t U_s + (1 - c_t) U_u`; the attacker receives the negation.
    pub fn defender_utility<A: Allocation + ?Sized>(
        &self,
        x: &A,
        t: TargetId,
    ) -> Result<f64, GameError> {
        self.check_shape(x)?;
        let target = self.target(t)?;
        Ok(target.utility_at(target.weighted_sum(x)))
    }

    /// Worst-case defender utility per adversary type, in type order.
    /// Types without targets get `+inf`.
    pub fn type_values<A: Allocation + ?Sized>(&self, x: &A) -> Result<Vec<f64>, GameError> {
        self.check_shape(x)?;
        Ok(self
            .adversary_types
            .iter()
            .map(|ty| {
                ty.targets
                    .iter()
                    .map(|id| {
                        let t = &self.targets[self.target_index[id]];
                        t.utility_at(t.weighted_sum(x))
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect())
    }

    /// `sum_theta p_theta * min_{t in T_theta} U_d(x, t)`: every type best-responds.
    pub fn game_value<A: Allocation + ?Sized>(&self, x: &A) -> Result<f64, GameError> {
        let per_type = self.type_values(x)?;
        Ok(self
            .adversary_types
            .iter()
            .zip(per_type)
            .filter(|(ty, _)| ty.probability > 0.0)
            .map(|(ty, v)| ty.probability * v)
            .sum())
    }

    /// Exact integer check of every assignment constraint.
    pub fn is_valid_pure(&self, p: &PureStrategy) -> Result<PureCheck, GameError> {
        self.check_shape(p)?;
        let violations = self
            .constraints
            .iter()
            .enumerate()
            .filter_map(|(index, s)| {
                let achieved = s.sum_int(p.values());
                (achieved < u64::from(s.lower) || achieved > u64::from(s.upper)).then_some(
                    Violation::Constraint {
                        index,
                        achieved,
                        lower: s.lower,
                        upper: s.upper,
                    },
                )
            })
            .collect();
        Ok(PureCheck { violations })
    }

    /// Pure-strategy check on a real matrix: non-integral cells are
    /// violations in their own right.
    pub fn check_real_as_pure(&self, x: &Array2<f64>) -> Result<PureCheck, GameError> {
        self.check_shape(x)?;
        let non_integral: Vec<Violation> = x
            .indexed_iter()
            .filter(|(_, v)| !v.is_finite() || **v < 0.0 || v.fract() != 0.0)
            .map(|((row, col), &value)| Violation::NonIntegral {
                cell: CellIndex::new(row, col),
                value,
            })
            .collect();
        if !non_integral.is_empty() {
            return Ok(PureCheck {
                violations: non_integral,
            });
        }
        let p = PureStrategy::from_real(x)?;
        self.is_valid_pure(&p)
    }

    /// Checks every assignment constraint within [`MARGINAL_EPS`].
    pub fn check_marginal<A: Allocation + ?Sized>(&self, x: &A) -> Result<(), GameError> {
        self.check_shape(x)?;
        for (index, s) in self.constraints.iter().enumerate() {
            let achieved = s.sum(x);
            if achieved < f64::from(s.lower) - MARGINAL_EPS
                || achieved > f64::from(s.upper) + MARGINAL_EPS
            {
                return Err(GameError::MarginalViolation {
                    index,
                    achieved,
                    lower: s.lower,
                    upper: s.upper,
                });
            }
        }
        Ok(())
    }

    /// Same game with every payoff multiplied by `factor`.
    pub fn scaled_payoffs(&self, factor: f64) -> Self {
        let mut g = self.clone();
        for t in &mut g.targets {
            t.payoff_defended *= factor;
            t.payoff_undefended *= factor;
        }
        g
    }
}

fn validate_target(t: &Target, k: usize, n: usize) -> Result<(), GameError> {
    let bad = |reason: String| GameError::InvalidTarget {
        target: t.id,
        reason,
    };
    if t.weights.len() != t.cells.len() {
        return Err(bad(format!(
            "{} weights for {} cells",
            t.weights.len(),
            t.cells.len()
        )));
    }
    let mut seen = HashSet::with_capacity(t.cells.len());
    for c in &t.cells {
        if c.row >= k || c.col >= n {
            return Err(GameError::CellOutOfRange {
                context: format!("target {}", t.id),
                cell: *c,
                k,
                n,
            });
        }
        if !seen.insert(*c) {
            return Err(bad(format!("cell {c} listed twice")));
        }
    }
    if let Some(w) = t.weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(bad(format!("weight {w} is negative or non-finite")));
    }
    if !t.payoff_defended.is_finite() || !t.payoff_undefended.is_finite() {
        return Err(bad("non-finite payoff".into()));
    }
    if t.payoff_defended < t.payoff_undefended {
        return Err(bad(format!(
            "defended payoff {} below undefended payoff {}",
            t.payoff_defended, t.payoff_undefended
        )));
    }
    Ok(())
}

fn validate_types(
    types: &[AdversaryType],
    targets: &HashMap<TargetId, usize>,
) -> Result<(), GameError> {
    let bad = |msg: String| Err(GameError::InvalidTypes(msg));
    let mut ids = HashSet::new();
    let mut owner: HashMap<TargetId, TypeId> = HashMap::new();
    let mut total = 0.0;
    for ty in types {
        if !ids.insert(ty.id) {
            return bad(format!("duplicate type id {}", ty.id));
        }
        if !(0.0..=1.0).contains(&ty.probability) {
            return bad(format!("type {} has probability {}", ty.id, ty.probability));
        }
        if ty.probability > 0.0 && ty.targets.is_empty() {
            return bad(format!(
                "type {} has positive probability but no targets",
                ty.id
            ));
        }
        total += ty.probability;
        for t in &ty.targets {
            if !targets.contains_key(t) {
                return bad(format!("type {} names unknown target {t}", ty.id));
            }
            if let Some(prev) = owner.insert(*t, ty.id) {
                return bad(format!("target {t} belongs to types {prev} and {}", ty.id));
            }
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return bad(format!("probabilities sum to {total}"));
    }
    if let Some(t) = targets.keys().find(|t| !owner.contains_key(t)) {
        return bad(format!("target {t} belongs to no type"));
    }
    Ok(())
}
