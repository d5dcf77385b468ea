//! Ground truth for tiny games: enumerate every pure strategy, then solve the
//! maximin LP over their mixtures.

use ndarray::Array2;
use thiserror::Error;

use crate::game::{AraGame, CellIndex, GameError, PureStrategy, TargetId};
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};

pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("pure-strategy enumeration stopped at the cap of {cap}; refusing to certify")]
    Truncated { cap: usize },
    #[error("cell {0} lies in no assignment constraint, so the pure strategy set is infinite")]
    UnboundedCell(CellIndex),
    #[error("no pure strategies to mix")]
    NoStrategies,
    #[error("maximin LP is {0:?}")]
    Status(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedStrategySet {
    pub strategies: Vec<PureStrategy>,
    /// The search hit the cap; `strategies` is then only a prefix.
    pub truncated: bool,
}

/// Depth-first search over the cells in row-major order.
///
/// Each cell ranges up to the tightest remaining slack among its
/// constraints, and a branch is cut as soon as some constraint can no longer
/// reach its lower bound with the cells still open.
pub fn enumerate_pure(game: &AraGame, cap: usize) -> Result<EnumeratedStrategySet, ExactError> {
    let (k, n) = game.shape();
    let cells = k * n;
    let constraints = game.constraints();
    let mut touching: Vec<Vec<(usize, u32)>> = vec![Vec::new(); cells];
    for (si, s) in constraints.iter().enumerate() {
        for (c, m) in s.multiplicities() {
            touching[game.flat(c)].push((si, m));
        }
    }
    let mut ceiling = vec![0u32; cells];
    for (f, list) in touching.iter().enumerate() {
        if list.is_empty() {
            return Err(ExactError::UnboundedCell(CellIndex::new(f / n, f % n)));
        }
        ceiling[f] = list
            .iter()
            .map(|&(si, m)| constraints[si].upper / m)
            .min()
            .unwrap_or(0);
    }
    let mut potential: Vec<u64> = vec![0; constraints.len()];
    for (f, list) in touching.iter().enumerate() {
        for &(si, m) in list {
            potential[si] += u64::from(m) * u64::from(ceiling[f]);
        }
    }

    let mut search = Search {
        k,
        n,
        touching: &touching,
        ceiling: &ceiling,
        lower: constraints.iter().map(|s| u64::from(s.lower)).collect(),
        upper: constraints.iter().map(|s| u64::from(s.upper)).collect(),
        sums: vec![0; constraints.len()],
        potential,
        current: vec![0; cells],
        out: Vec::new(),
        cap: cap.max(1),
        truncated: false,
    };
    if search.lower_reachable_all() {
        search.visit(0);
    }
    Ok(EnumeratedStrategySet {
        strategies: search.out,
        truncated: search.truncated,
    })
}

struct Search<'a> {
    k: usize,
    n: usize,
    touching: &'a [Vec<(usize, u32)>],
    ceiling: &'a [u32],
    lower: Vec<u64>,
    upper: Vec<u64>,
    sums: Vec<u64>,
    /// Largest amount the still-open cells can add to each constraint.
    potential: Vec<u64>,
    current: Vec<u32>,
    out: Vec<PureStrategy>,
    cap: usize,
    truncated: bool,
}

impl Search<'_> {
    fn lower_reachable_all(&self) -> bool {
        (0..self.sums.len()).all(|si| self.sums[si] + self.potential[si] >= self.lower[si])
    }

    fn visit(&mut self, f: usize) {
        if self.truncated {
            return;
        }
        if f == self.current.len() {
            if self.out.len() == self.cap {
                self.truncated = true;
                return;
            }
            let m = Array2::from_shape_vec((self.k, self.n), self.current.clone())
                .expect("shape matches");
            self.out.push(PureStrategy::new(m));
            return;
        }
        let list = &self.touching[f];
        let mut top = u64::from(self.ceiling[f]);
        for &(si, m) in list {
            top = top.min((self.upper[si] - self.sums[si]) / u64::from(m));
        }
        for &(si, m) in list {
            self.potential[si] -= u64::from(m) * u64::from(self.ceiling[f]);
        }
        for v in 0..=top {
            let ok = list.iter().all(|&(si, m)| {
                self.sums[si] + u64::from(m) * v + self.potential[si] >= self.lower[si]
            });
            if ok {
                for &(si, m) in list {
                    self.sums[si] += u64::from(m) * v;
                }
                self.current[f] = v as u32;
                self.visit(f + 1);
                for &(si, m) in list {
                    self.sums[si] -= u64::from(m) * v;
                }
                if self.truncated {
                    break;
                }
            }
        }
        self.current[f] = 0;
        for &(si, m) in list {
            self.potential[si] += u64::from(m) * u64::from(self.ceiling[f]);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximinSolution {
    pub value: f64,
    /// Mixture weight per input strategy.
    pub weights: Vec<f64>,
    /// Shadow price of each target's `z <= U(a, t)` row, by target id.
    pub target_duals: Vec<(TargetId, f64)>,
    /// Shadow price of `sum a = 1`.
    pub convexity_dual: f64,
}

/// Best mixture of the given pure strategies:
/// `max sum_theta p_theta z_theta` subject to `z_theta <= sum_m a_m U(P_m, t)`
/// for every target of type theta, `sum a = 1`, `a >= 0`.
pub fn maximin_lp(
    game: &AraGame,
    strategies: &[PureStrategy],
) -> Result<MaximinSolution, ExactError> {
    if strategies.is_empty() {
        return Err(ExactError::NoStrategies);
    }
    let m = strategies.len();
    let types: Vec<_> = game
        .adversary_types()
        .iter()
        .filter(|ty| ty.probability > 0.0)
        .collect();
    let mut program = LinearProgram::new(m + types.len());
    let mut rows = Vec::new();
    for (ti, ty) in types.iter().enumerate() {
        let z = m + ti;
        program.set_objective(z, ty.probability);
        let mut floor = f64::INFINITY;
        for id in &ty.targets {
            let t = game.target(*id)?;
            floor = floor.min(t.payoff_undefended.min(t.payoff_defended));
            let mut coeffs = vec![(z, 1.0)];
            for (a, p) in strategies.iter().enumerate() {
                coeffs.push((a, -game.defender_utility(p, *id)?));
            }
            rows.push((*id, program.add_row(coeffs, Relation::Le, 0.0)));
        }
        // Shifting z's floor below every attainable utility keeps it slack.
        program.set_bounds(z, floor - 1.0, f64::INFINITY);
    }
    let convexity = program.add_row((0..m).map(|a| (a, 1.0)).collect(), Relation::Eq, 1.0);

    let sol = lp::solve_lp(&program)?;
    if sol.status != LpStatus::Optimal {
        return Err(ExactError::Status(sol.status));
    }
    Ok(MaximinSolution {
        value: sol.objective_value,
        weights: sol.values[..m].iter().map(|w| w.max(0.0)).collect(),
        target_duals: rows.into_iter().map(|(id, r)| (id, sol.duals[r])).collect(),
        convexity_dual: sol.duals[convexity],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub value: f64,
    pub weights: Vec<f64>,
}

/// Exact zero-sum value over an exhaustive strategy set.
pub fn exact_maximin(
    game: &AraGame,
    set: &EnumeratedStrategySet,
) -> Result<ExactSolution, ExactError> {
    if set.truncated {
        return Err(ExactError::Truncated {
            cap: set.strategies.len(),
        });
    }
    let sol = maximin_lp(game, &set.strategies)?;
    Ok(ExactSolution {
        value: sol.value,
        weights: sol.weights,
    })
}

/// Enumerate then solve, refusing truncated enumerations.
pub fn solve_exact(
    game: &AraGame,
    cap: usize,
) -> Result<(ExactSolution, EnumeratedStrategySet), ExactError> {
    let set = enumerate_pure(game, cap)?;
    if set.truncated {
        return Err(ExactError::Truncated { cap });
    }
    let sol = exact_maximin(game, &set)?;
    Ok((sol, set))
}
