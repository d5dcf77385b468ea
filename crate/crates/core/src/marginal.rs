//! The marginal LP: best worst-case defender utility over the marginal
//! polytope. Its optimum bounds the game value from above.

use ndarray::Array2;
use thiserror::Error;

use crate::game::{AraGame, GameError, MarginalStrategy, TypeId};
use crate::lp::{self, LpError, LpStatus, Relation};

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSolution {
    pub x_m: MarginalStrategy,
    pub upper_bound: f64,
    /// `(type id, z_theta)` in the game's type order.
    pub per_type_values: Vec<(TypeId, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginalError {
    #[error("marginal LP is infeasible; conflicting assignment constraints: {constraints:?}")]
    Infeasible { constraints: Vec<usize> },
    #[error("marginal LP is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Solves the marginal LP.
///
/// Variables are the `k * n` cells (row-major) followed by one `z` per
/// adversary type. Coverage is substituted into each target row:
/// `z_theta - (U_s - U_u) * sum w x <= U_u` for every `t` of type `theta`.
pub fn solve_marginal(game: &AraGame) -> Result<MarginalSolution, MarginalError> {
    let cells = game.k() * game.n();
    let types = game.adversary_types();
    let mut program = game.polytope_lp();
    let constraint_rows = constraint_row_owners(game);

    program.objective.resize(cells + types.len(), 0.0);
    program.lower.resize(cells + types.len(), 0.0);
    program.upper.resize(cells + types.len(), f64::INFINITY);
    for (ti, ty) in types.iter().enumerate() {
        let z = cells + ti;
        program.set_objective(z, ty.probability);
        // No target utility drops below its undefended payoff, so the type
        // value is bounded below by the smallest one.
        let floor = ty
            .targets
            .iter()
            .map(|id| game.target(*id).map(|t| t.payoff_undefended))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let floor = if floor.is_finite() { floor } else { 0.0 };
        program.set_bounds(z, floor, f64::INFINITY);
        if ty.targets.is_empty() {
            program.set_bounds(z, 0.0, 0.0);
        }
        for id in &ty.targets {
            let t = game.target(*id)?;
            let gap = t.payoff_gap();
            let mut coeffs = vec![(z, 1.0)];
            coeffs.extend(
                t.cells
                    .iter()
                    .zip(&t.weights)
                    .filter(|(_, w)| **w != 0.0 && gap != 0.0)
                    .map(|(c, w)| (game.flat(*c), -gap * w)),
            );
            program.add_row(coeffs, Relation::Le, t.payoff_undefended);
        }
    }

    let sol = lp::solve_lp(&program)?;
    match sol.status {
        LpStatus::Infeasible => {
            let mut constraints: Vec<usize> = sol
                .infeasible_rows
                .iter()
                .filter_map(|&r| constraint_rows.get(r).copied())
                .collect();
            constraints.dedup();
            Err(MarginalError::Infeasible { constraints })
        }
        LpStatus::Unbounded => Err(MarginalError::Unbounded),
        LpStatus::Optimal => {
            let values: Vec<f64> = sol.values[..cells].iter().map(|v| v.max(0.0)).collect();
            let x = Array2::from_shape_vec((game.k(), game.n()), values)
                .expect("cell count matches shape");
            let per_type_values = types
                .iter()
                .enumerate()
                .map(|(ti, ty)| (ty.id, sol.values[cells + ti]))
                .collect();
            Ok(MarginalSolution {
                x_m: MarginalStrategy::new(x)?,
                upper_bound: sol.objective_value,
                per_type_values,
            })
        }
    }
}

/// For each LP row produced by [`AraGame::polytope_lp`], the constraint it
/// came from.
fn constraint_row_owners(game: &AraGame) -> Vec<usize> {
    let mut owners = Vec::new();
    for (i, s) in game.constraints().iter().enumerate() {
        owners.push(i);
        if !s.is_equality() && s.lower > 0 {
            owners.push(i);
        }
    }
    owners
}
