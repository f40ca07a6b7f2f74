//! First-stage utility elicitation for discrete prospects: the utility
//! vector closest in cross-entropy to a surrogate target that honours the
//! cell's partial preference context.

use nalgebra::{DMatrix, DVector};

use crate::entropy::{self, Constraints};
use crate::error::{GopaError, Result};
use crate::linalg::mixed_nnls;
use crate::model::{CellContext, RankingProblem};

/// Per-cell rank utilities `U_ij(r)`, indexed `[expert][attribute][r - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    cells: Vec<Vec<Vec<f64>>>,
}

impl UtilityTable {
    pub fn new(cells: Vec<Vec<Vec<f64>>>) -> Self {
        UtilityTable { cells }
    }

    /// Fills every cell of `problem` with `f(i, j)`.
    pub fn from_fn(problem: &RankingProblem, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Self {
        let cells = (0..problem.num_experts())
            .map(|i| (0..problem.num_attributes()).map(|j| f(i, j)).collect())
            .collect();
        UtilityTable { cells }
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        &self.cells[i][j]
    }

    pub fn set_cell(&mut self, i: usize, j: usize, values: Vec<f64>) {
        self.cells[i][j] = values;
    }

    pub fn cells(&self) -> &[Vec<Vec<f64>>] {
        &self.cells
    }

    /// Checks that every cell has exactly `K_ij` entries.
    pub fn check_dims(&self, problem: &RankingProblem) -> Result<()> {
        if self.cells.len() != problem.num_experts()
            || self.cells.iter().any(|row| row.len() != problem.num_attributes())
        {
            return Err(GopaError::Dimension(format!(
                "utility table is not {} x {}",
                problem.num_experts(),
                problem.num_attributes()
            )));
        }
        for (i, j) in problem.cell_indices() {
            let k = problem.cell(i, j).max_rank;
            if self.cells[i][j].len() != k {
                return Err(GopaError::Dimension(format!(
                    "cell ({}, {}) has {} utilities for {k} ranks",
                    problem.experts()[i].id,
                    problem.attributes()[j],
                    self.cells[i][j].len()
                )));
            }
        }
        Ok(())
    }
}

/// Builds the constraint system of a cell: normalization, ratio and
/// difference equalities, lower bounds and the weak order.
pub(crate) fn cell_constraints(ctx: &CellContext, k: usize) -> Constraints {
    let mut c = Constraints::default();
    c.equal(vec![1.0; k], 1.0);
    for ratio in &ctx.ratio {
        let mut row = vec![0.0; k];
        row[ratio.rank - 1] = 1.0;
        row[ratio.rank] = -ratio.alpha;
        c.equal(row, 0.0);
    }
    for diff in &ctx.absdiff {
        let mut row = vec![0.0; k];
        row[diff.rank - 1] = 1.0;
        row[diff.rank] = -1.0;
        c.equal(row, diff.beta);
    }
    for bound in &ctx.lower_bounds {
        let mut row = vec![0.0; k];
        row[bound.rank - 1] = 1.0;
        c.at_least(row, bound.gamma);
    }
    for r in 1..k {
        let mut row = vec![0.0; k];
        row[r - 1] = 1.0;
        row[r] = -1.0;
        c.at_least(row, 0.0);
    }
    c
}

fn checked_target(target: &[f64], k: usize) -> Result<Vec<f64>> {
    if target.len() != k {
        return Err(GopaError::Dimension(format!(
            "target has {} values for {k} ranks",
            target.len()
        )));
    }
    if target.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(GopaError::Domain("target values must be positive".into()));
    }
    let total: f64 = target.iter().sum();
    Ok(target.iter().map(|v| v / total).collect())
}

/// Minimizes `sum U(r) ln(U(r) / V(r))` over the cell's feasible set.
///
/// The target is normalized first, so any positive multiple gives the same
/// result.
pub fn elicit_discrete(target: &[f64], ctx: &CellContext, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(GopaError::Dimension("a cell needs at least one rank".into()));
    }
    ctx.check(k, "context")?;
    let v = checked_target(target, k)?;
    if ctx.is_empty() && v.windows(2).all(|w| w[0] >= w[1]) {
        return Ok(v);
    }
    entropy::project(&v, &cell_constraints(ctx, k))
}

/// Maximizes `-sum U(r) ln U(r)` over the cell's feasible set.
pub fn entropy_max_discrete(ctx: &CellContext, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(GopaError::Dimension("a cell needs at least one rank".into()));
    }
    ctx.check(k, "context")?;
    if ctx.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    entropy::project(&vec![1.0; k], &cell_constraints(ctx, k))
}

/// Max-norm of the stationarity residual at `u`, with multipliers of the
/// equality and active inequality rows fitted by sign-constrained least
/// squares.
pub fn kkt_residual_discrete(u: &[f64], target: &[f64], ctx: &CellContext) -> f64 {
    let k = u.len();
    let total: f64 = target.iter().sum();
    let c = cell_constraints(ctx, k);
    let positive: Vec<usize> = (0..k).filter(|&r| u[r] > 0.0).collect();
    let grad: Vec<f64> = positive
        .iter()
        .map(|&r| (u[r] / (target[r] / total)).ln() + 1.0)
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut nonneg = Vec::new();
    for row in &c.eq_rows {
        columns.push(positive.iter().map(|&r| row[r]).collect());
        nonneg.push(false);
    }
    for idx in entropy::active_rows(u, &c) {
        columns.push(positive.iter().map(|&r| c.ineq_rows[idx][r]).collect());
        nonneg.push(true);
    }
    let a = DMatrix::from_fn(positive.len(), columns.len(), |r, col| columns[col][r]);
    let b = DVector::from_vec(grad);
    let mult = mixed_nnls(&a, &b, &nonneg);
    (&b - &a * mult).amax()
}
