//! Dense two-phase primal simplex.
//!
//! Every LP in the crate (the marginal LP, the maximin oracle and the
//! column-generation master) goes through [`solve_lp`]. The solver is
//! deterministic: pivots use Dantzig's rule until a run of degenerate pivots
//! is observed, after which the phase switches to Bland's rule for good.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// Sparse `(variable, coefficient)` pairs. Repeated variables are summed.
    pub coefficients: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective·x` subject to `rows` and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `num_vars` variables, each bounded to `[0, +inf)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, var: usize, coefficient: f64) {
        self.objective[var] = coefficient;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Appends a row and returns its index.
    pub fn add_row(
        &mut self,
        coefficients: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.rows.push(Row {
            coefficients,
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::DimensionMismatch {
                what: "variable bounds",
                expected: n,
                found: self.lower.len().min(self.upper.len()),
            });
        }
        if let Some(v) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFinite {
                location: format!("objective[{v}]"),
            });
        }
        for v in 0..n {
            let (lo, hi) = (self.lower[v], self.upper[v]);
            if lo.is_nan()
                || hi.is_nan()
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
                || lo > hi
            {
                return Err(LpError::InvalidBounds {
                    var: v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite {
                    location: format!("rhs[{r}]"),
                });
            }
            for &(v, a) in &row.coefficients {
                if v >= n {
                    return Err(LpError::DimensionMismatch {
                        what: "row coefficient index",
                        expected: n,
                        found: v,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite {
                        location: format!("row {r}, var {v}"),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values in the caller's variable space. Empty unless optimal.
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Shadow price of each caller row (`d objective / d rhs`). Empty unless
    /// optimal. For a maximization, `Le` rows have non-negative duals.
    pub duals: Vec<f64>,
    /// Rows still carrying a positive artificial at the end of phase one.
    /// Only populated for infeasible programs.
    pub infeasible_rows: Vec<usize>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Overrides the default cap of `50 * (rows + columns)` pivots.
    pub max_iterations: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("non-finite coefficient at {location}")]
    NonFinite { location: String },
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid bounds on variable {var}: [{lower}, {upper}]")]
    InvalidBounds { var: usize, lower: f64, upper: f64 },
    #[error("simplex stalled: iteration cap of {cap} pivots reached")]
    IterationCap { cap: usize },
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, options: &LpOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut tableau = Tableau::build(lp, options);
    tableau.run()
}

const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 50;

/// `x = offset + sign * column` (plus `- column2` for split free variables).
#[derive(Debug, Clone, Copy)]
struct VarMap {
    offset: f64,
    sign: f64,
    column: usize,
    negative_part: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau {
    /// `m x (cols + 1)` row-major, rhs in the last column.
    a: Vec<f64>,
    m: usize,
    cols: usize,
    kinds: Vec<ColumnKind>,
    basis: Vec<usize>,
    /// Reduced costs `c_B B^-1 A_j - c_j`; optimal when all are `>= -tol`.
    d: Vec<f64>,
    /// Phase-two costs over tableau columns.
    cost: Vec<f64>,
    var_maps: Vec<VarMap>,
    /// Number of caller rows (bound rows follow them).
    caller_rows: usize,
    /// Per caller row: column holding `e_i` and whether the row was negated.
    identity_col: Vec<usize>,
    negated: Vec<bool>,
    objective: Vec<f64>,
    iterations: usize,
    cap: usize,
    tol: LpOptions,
}

impl Tableau {
    fn build(lp: &LinearProgram, tol: &LpOptions) -> Self {
        let n = lp.num_vars();
        let mut var_maps = Vec::with_capacity(n);
        let mut structural = 0usize;
        // Extra `column <= width` rows for two-sided bounds.
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for v in 0..n {
            let (lo, hi) = (lp.lower[v], lp.upper[v]);
            let col = structural;
            structural += 1;
            let map = if lo.is_finite() {
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
                VarMap {
                    offset: lo,
                    sign: 1.0,
                    column: col,
                    negative_part: None,
                }
            } else if hi.is_finite() {
                VarMap {
                    offset: hi,
                    sign: -1.0,
                    column: col,
                    negative_part: None,
                }
            } else {
                let neg = structural;
                structural += 1;
                VarMap {
                    offset: 0.0,
                    sign: 1.0,
                    column: col,
                    negative_part: Some(neg),
                }
            };
            var_maps.push(map);
        }

        // Dense rows in structural space, normalized to rhs >= 0.
        let mut dense_rows: Vec<(Vec<f64>, Relation, f64, bool)> = Vec::new();
        for row in &lp.rows {
            let mut coeffs = vec![0.0; structural];
            let mut rhs = row.rhs;
            for &(v, a) in &row.coefficients {
                let map = var_maps[v];
                rhs -= a * map.offset;
                coeffs[map.column] += a * map.sign;
                if let Some(neg) = map.negative_part {
                    coeffs[neg] -= a;
                }
            }
            dense_rows.push(normalize(coeffs, row.relation, rhs));
        }
        for &(col, width) in &bound_rows {
            let mut coeffs = vec![0.0; structural];
            coeffs[col] = 1.0;
            dense_rows.push(normalize(coeffs, Relation::Le, width));
        }

        let m = dense_rows.len();
        let mut extra = 0usize;
        for (_, rel, _, _) in &dense_rows {
            extra += match rel {
                Relation::Le | Relation::Eq => 1,
                Relation::Ge => 2,
            };
        }
        let cols = structural + extra;
        let width = cols + 1;
        let mut a = vec![0.0; m * width];
        let mut kinds = vec![ColumnKind::Structural; structural];
        let mut basis = Vec::with_capacity(m);
        let mut identity_col = Vec::with_capacity(m);
        let mut negated = Vec::with_capacity(m);
        let mut next = structural;
        for (i, (coeffs, rel, rhs, flipped)) in dense_rows.into_iter().enumerate() {
            let base = i * width;
            a[base..base + structural].copy_from_slice(&coeffs);
            a[base + cols] = rhs;
            match rel {
                Relation::Le => {
                    a[base + next] = 1.0;
                    kinds.push(ColumnKind::Slack);
                    basis.push(next);
                    identity_col.push(next);
                    next += 1;
                }
                Relation::Ge => {
                    a[base + next] = -1.0;
                    kinds.push(ColumnKind::Slack);
                    next += 1;
                    a[base + next] = 1.0;
                    kinds.push(ColumnKind::Artificial);
                    basis.push(next);
                    identity_col.push(next);
                    next += 1;
                }
                Relation::Eq => {
                    a[base + next] = 1.0;
                    kinds.push(ColumnKind::Artificial);
                    basis.push(next);
                    identity_col.push(next);
                    next += 1;
                }
            }
            negated.push(flipped);
        }

        let mut cost = vec![0.0; cols];
        for (v, map) in var_maps.iter().enumerate() {
            let c = lp.objective[v];
            cost[map.column] += c * map.sign;
            if let Some(neg) = map.negative_part {
                cost[neg] -= c;
            }
        }

        let cap = tol.max_iterations.unwrap_or(50 * (m + cols).max(1));
        Self {
            a,
            m,
            cols,
            kinds,
            basis,
            d: vec![0.0; cols],
            cost,
            var_maps,
            caller_rows: lp.rows.len(),
            identity_col,
            negated,
            objective: lp.objective.clone(),
            iterations: 0,
            cap,
            tol: *tol,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        let has_artificials = self.kinds.contains(&ColumnKind::Artificial);
        if has_artificials {
            // Phase one: maximize -sum(artificials).
            let phase_one: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| {
                    if *k == ColumnKind::Artificial {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            self.price(&phase_one);
            if self.iterate(false)? == Outcome::Unbounded {
                unreachable!("phase one objective is bounded by zero");
            }
            let infeasibility: f64 = (0..self.m)
                .filter(|&i| self.kinds[self.basis[i]] == ColumnKind::Artificial)
                .map(|i| self.rhs(i))
                .sum();
            let scale = 1.0 + (0..self.m).map(|i| self.rhs(i).abs()).fold(0.0, f64::max);
            if infeasibility > self.tol.feasibility_tol * scale {
                let mut rows: Vec<usize> = (0..self.m)
                    .filter(|&i| {
                        self.kinds[self.basis[i]] == ColumnKind::Artificial
                            && self.rhs(i) > self.tol.feasibility_tol
                    })
                    .map(|i| self.identity_row(self.basis[i]))
                    .filter(|&r| r < self.caller_rows)
                    .collect();
                rows.sort_unstable();
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    values: Vec::new(),
                    objective_value: f64::NAN,
                    duals: Vec::new(),
                    infeasible_rows: rows,
                });
            }
            self.drive_out_artificials();
        }

        let cost = self.cost.clone();
        self.price(&cost);
        if self.iterate(true)? == Outcome::Unbounded {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                values: Vec::new(),
                objective_value: f64::INFINITY,
                duals: Vec::new(),
                infeasible_rows: Vec::new(),
            });
        }
        Ok(self.extract())
    }

    /// Row whose identity column is `col`.
    fn identity_row(&self, col: usize) -> usize {
        self.identity_col
            .iter()
            .position(|&c| c == col)
            .expect("artificial columns are identity columns")
    }

    fn price(&mut self, cost: &[f64]) {
        for j in 0..self.cols {
            let mut acc = -cost[j];
            for i in 0..self.m {
                let cb = cost[self.basis[i]];
                if cb != 0.0 {
                    acc += cb * self.at(i, j);
                }
            }
            self.d[j] = acc;
        }
    }

    fn iterate(&mut self, phase_two: bool) -> Result<Outcome, LpError> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            let entering = self.choose_entering(phase_two, bland);
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let Some(r) = self.choose_leaving(q, bland) else {
                return Ok(Outcome::Unbounded);
            };
            if self.rhs(r).abs() <= DROP_TOL {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q)?;
        }
    }

    fn choose_entering(&self, phase_two: bool, bland: bool) -> Option<usize> {
        let tol = self.tol.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if phase_two && self.kinds[j] == ColumnKind::Artificial {
                continue;
            }
            let dj = self.d[j];
            if dj < -tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| dj < b) {
                    best = Some((j, dj));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn choose_leaving(&self, q: usize, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            let aiq = self.at(i, q);
            if aiq <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / aiq;
            best = match best {
                None => Some((i, ratio, aiq)),
                Some((bi, br, ba)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    let better = if tie {
                        if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            aiq > ba
                        }
                    } else {
                        ratio < br
                    };
                    if better {
                        Some((i, ratio, aiq))
                    } else {
                        Some((bi, br, ba))
                    }
                }
            };
        }
        best.map(|(i, _, _)| i)
    }

    fn pivot(&mut self, r: usize, q: usize) -> Result<(), LpError> {
        self.iterations += 1;
        if self.iterations > self.cap {
            return Err(LpError::IterationCap { cap: self.cap });
        }
        let width = self.cols + 1;
        let piv = self.at(r, q);
        {
            let row = &mut self.a[r * width..(r + 1) * width];
            for v in row.iter_mut() {
                *v /= piv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                }
            }
            row[q] = 1.0;
        }
        let pivot_row: Vec<f64> = self.a[r * width..(r + 1) * width].to_vec();
        let nz: Vec<usize> = (0..width).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = self.a[i * width + q];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.a[i * width..(i + 1) * width];
            for &j in &nz {
                let v = row[j] - factor * pivot_row[j];
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        let factor = self.d[q];
        if factor != 0.0 {
            for &j in &nz {
                if j < self.cols {
                    let v = self.d[j] - factor * pivot_row[j];
                    self.d[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
            }
            self.d[q] = 0.0;
        }
        self.basis[r] = q;
        Ok(())
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.kinds[self.basis[i]] != ColumnKind::Artificial {
                continue;
            }
            let candidate = (0..self.cols)
                .filter(|&j| self.kinds[j] != ColumnKind::Artificial)
                .max_by(|&x, &y| {
                    self.at(i, x)
                        .abs()
                        .partial_cmp(&self.at(i, y).abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(y.cmp(&x))
                });
            if let Some(j) = candidate {
                if self.at(i, j).abs() > PIVOT_TOL {
                    // Degenerate pivot (rhs is zero); cannot exceed the cap in practice.
                    let _ = self.pivot(i, j);
                }
            }
            // Otherwise the row is redundant and its artificial stays basic at zero.
        }
    }

    fn extract(&self) -> LpSolution {
        let mut column_values = vec![0.0; self.cols];
        for i in 0..self.m {
            column_values[self.basis[i]] = self.rhs(i).max(0.0);
        }
        let values: Vec<f64> = self
            .var_maps
            .iter()
            .map(|map| {
                let mut x = map.offset + map.sign * column_values[map.column];
                if let Some(neg) = map.negative_part {
                    x -= column_values[neg];
                }
                x
            })
            .collect();
        let objective_value = values.iter().zip(&self.objective).map(|(x, c)| x * c).sum();
        let duals = (0..self.caller_rows)
            .map(|r| {
                let y = self.d[self.identity_col[r]];
                if self.negated[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            values,
            objective_value,
            duals,
            infeasible_rows: Vec::new(),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

fn normalize(mut coeffs: Vec<f64>, rel: Relation, rhs: f64) -> (Vec<f64>, Relation, f64, bool) {
    if rhs < 0.0 {
        for c in coeffs.iter_mut() {
            *c = -*c;
        }
        let rel = match rel {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        };
        (coeffs, rel, -rhs, true)
    } else {
        (coeffs, rel, rhs, false)
    }
}
