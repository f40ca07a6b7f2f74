//! Dense two-phase simplex with Bland's rule, and the weight programs used
//! to verify the closed-form solutions.

use crate::elicit_discrete::UtilityTable;
use crate::error::{GopaError, Result};
use crate::model::RankingProblem;
use crate::structures::harmonic_tail;

/// Pivot and reduced-cost eligibility tolerance.
pub const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// `opt c.x  s.t.  A x (<=|=|>=) b`, each variable nonnegative or free.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub senses: Vec<RowSense>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// An empty program over `n` nonnegative variables.
    pub fn new(direction: Direction, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            direction,
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
            senses: Vec::new(),
            bounds: vec![VarBound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, sense: RowSense, rhs: f64) {
        self.rows.push(coefficients);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(GopaError::Dimension(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        if self.rhs.len() != self.rows.len() || self.senses.len() != self.rows.len() {
            return Err(GopaError::Dimension("row, rhs and sense counts differ".into()));
        }
        if let Some((idx, row)) = self.rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(GopaError::Dimension(format!(
                "row {idx} has {} coefficients, expected {n}",
                row.len()
            )));
        }
        let finite = self.objective.iter().chain(self.rhs.iter()).chain(self.rows.iter().flatten());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(GopaError::Dimension("non-finite coefficient".into()));
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
    /// Objective value in the program's own direction; NaN unless optimal.
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        self.b[row] /= p;
        let pivot_row = self.a[row].clone();
        let pivot_b = self.b[row];
        for r in 0..self.a.len() {
            if r == row {
                continue;
            }
            let f = self.a[r][col];
            if f != 0.0 {
                for (v, pv) in self.a[r].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.b[r] -= f * pivot_b;
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `c.x` over columns not barred. Returns false if unbounded.
    fn optimize(&mut self, c: &[f64], barred: &[bool]) -> Result<bool> {
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index column with positive reduced cost
            let entering = (0..self.ncols).find(|&j| {
                if barred[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced = c[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(r, &bj)| c[bj] * self.a[r][j])
                        .sum::<f64>();
                reduced > PIVOT_TOL
            });
            let Some(col) = entering else { return Ok(true) };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.a.len() {
                let coef = self.a[r][col];
                if coef > PIVOT_TOL {
                    let ratio = self.b[r] / coef;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leaving else { return Ok(false) };
            self.pivot(row, col);
        }
        Err(GopaError::NumericFailure("simplex pivot limit reached".into()))
    }
}

/// Solves a linear program by the two-phase simplex method.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.num_rows();

    // structural columns: one per nonnegative variable, two per free one
    let mut col_of = Vec::with_capacity(n);
    let mut ns = 0;
    for b in &lp.bounds {
        col_of.push(ns);
        ns += if *b == VarBound::Free { 2 } else { 1 };
    }
    let slack_count = lp.senses.iter().filter(|s| **s != RowSense::Eq).count();
    let art_start = ns + slack_count;
    let ncols = art_start + m;

    let sign = if lp.direction == Direction::Maximize { 1.0 } else { -1.0 };
    let mut a = vec![vec![0.0; ncols]; m];
    let mut b = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut slack = ns;
    for r in 0..m {
        let flip = if lp.rhs[r] < 0.0 { -1.0 } else { 1.0 };
        for (v, &coef) in lp.rows[r].iter().enumerate() {
            a[r][col_of[v]] = flip * coef;
            if lp.bounds[v] == VarBound::Free {
                a[r][col_of[v] + 1] = -flip * coef;
            }
        }
        b[r] = flip * lp.rhs[r];
        match lp.senses[r] {
            RowSense::Le => {
                a[r][slack] = flip;
                slack += 1;
            }
            RowSense::Ge => {
                a[r][slack] = -flip;
                slack += 1;
            }
            RowSense::Eq => {}
        }
        a[r][art_start + r] = 1.0;
        basis[r] = art_start + r;
    }
    let mut t = Tableau { a, b, basis, ncols };

    // phase one: drive artificials to zero
    let mut c1 = vec![0.0; ncols];
    for c in c1.iter_mut().skip(art_start) {
        *c = -1.0;
    }
    let none_barred = vec![false; ncols];
    t.optimize(&c1, &none_barred)?;
    let infeas: f64 = t
        .basis
        .iter()
        .zip(&t.b)
        .filter(|(&bj, _)| bj >= art_start)
        .map(|(_, &v)| v)
        .sum();
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeas > 1e-9 * scale {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: vec![0.0; n],
        });
    }
    // pivot remaining (zero-level) artificials out where possible
    for r in 0..m {
        if t.basis[r] >= art_start {
            if let Some(col) = (0..art_start).find(|&j| t.a[r][j].abs() > PIVOT_TOL) {
                t.pivot(r, col);
            }
        }
    }

    // phase two
    let mut c2 = vec![0.0; ncols];
    for v in 0..n {
        c2[col_of[v]] = sign * lp.objective[v];
        if lp.bounds[v] == VarBound::Free {
            c2[col_of[v] + 1] = -sign * lp.objective[v];
        }
    }
    let barred: Vec<bool> = (0..ncols).map(|j| j >= art_start).collect();
    if !t.optimize(&c2, &barred)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NAN,
            x: vec![0.0; n],
        });
    }

    let mut cols = vec![0.0; ncols];
    for (r, &bj) in t.basis.iter().enumerate() {
        cols[bj] = t.b[r];
    }
    let x: Vec<f64> = (0..n)
        .map(|v| match lp.bounds[v] {
            VarBound::NonNegative => cols[col_of[v]],
            VarBound::Free => cols[col_of[v]] - cols[col_of[v] + 1],
        })
        .collect();
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        x,
    })
}

/// A weight program with the variable layout recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProgram {
    pub lp: LinearProgram,
    /// `(i, j, r)` of each weight variable; `r` is 1-based.
    pub weights: Vec<(usize, usize, usize)>,
    /// Index of `z`, if the program has one.
    pub z: Option<usize>,
}

fn weight_layout(problem: &RankingProblem) -> Vec<(usize, usize, usize)> {
    problem
        .cell_indices()
        .flat_map(|(i, j)| (1..=problem.cell(i, j).max_rank).map(move |r| (i, j, r)))
        .collect()
}

fn normalization_row(problem: &RankingProblem, layout: &[(usize, usize, usize)], width: usize) -> Vec<f64> {
    let mut row = vec![0.0; width];
    for (v, &(i, j, r)) in layout.iter().enumerate() {
        row[v] = problem.cell(i, j).frequencies[r - 1] as f64;
    }
    row
}

fn ranking_program(
    problem: &RankingProblem,
    coefficient: impl Fn(usize, usize, usize) -> f64,
) -> WeightProgram {
    let layout = weight_layout(problem);
    let z = layout.len();
    let mut objective = vec![0.0; z + 1];
    objective[z] = 1.0;
    let mut lp = LinearProgram::new(Direction::Maximize, objective);
    lp.bounds[z] = VarBound::Free;
    for (v, &(i, j, r)) in layout.iter().enumerate() {
        let mut row = vec![0.0; z + 1];
        row[z] = coefficient(i, j, r);
        row[v] = -(problem.expert_rank(i) as f64) * problem.attribute_rank(i, j) as f64;
        lp.add_row(row, RowSense::Le, 0.0);
    }
    lp.add_row(normalization_row(problem, &layout, z + 1), RowSense::Eq, 1.0);
    WeightProgram {
        lp,
        weights: layout,
        z: Some(z),
    }
}

/// The ordinal priority program: `max z` with
/// `H(r..K_ij) z <= t_i s_ij w_ijr` and `sum c_ijr w_ijr = 1`.
pub fn build_opa_lp(problem: &RankingProblem) -> WeightProgram {
    ranking_program(problem, |i, j, r| harmonic_tail(r, problem.cell(i, j).max_rank))
}

/// The second-stage program with elicited utilities:
/// `K_ij U_ijr z <= t_i s_ij w_ijr`.
pub fn build_gopa_lp(problem: &RankingProblem, utilities: &UtilityTable) -> Result<WeightProgram> {
    utilities.check_dims(problem)?;
    Ok(ranking_program(problem, |i, j, r| {
        problem.cell(i, j).max_rank as f64 * utilities.cell(i, j)[r - 1]
    }))
}

/// Outcome of the second-stage efficiency program.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyCheck {
    /// Optimal `sum delta(w)`.
    pub value: f64,
    /// Smallest rank gap `delta` at the optimum.
    pub min_delta: f64,
    /// True when `min_delta` equals `z_star` within `1e-8`.
    pub lemma_holds: bool,
    pub weights: Vec<f64>,
    pub layout: Vec<(usize, usize, usize)>,
}

/// Maximizes `sum delta(w)` subject to `delta(w) >= z_star` and the
/// normalization, where `delta_ijr = t_i s_ij r (w_ijr - w_ij,r+1)` and
/// `delta_ijK = t_i s_ij K w_ijK`.
pub fn verify_efficiency(problem: &RankingProblem, z_star: f64) -> Result<EfficiencyCheck> {
    let layout = weight_layout(problem);
    let n = layout.len();
    let mut deltas = Vec::with_capacity(n);
    for (v, &(i, j, r)) in layout.iter().enumerate() {
        let ts = problem.expert_rank(i) as f64 * problem.attribute_rank(i, j) as f64;
        let mut row = vec![0.0; n];
        row[v] = ts * r as f64;
        if r < problem.cell(i, j).max_rank {
            row[v + 1] = -ts * r as f64;
        }
        deltas.push(row);
    }
    let objective = (0..n).map(|v| deltas.iter().map(|row| row[v]).sum()).collect();
    let mut lp = LinearProgram::new(Direction::Maximize, objective);
    for row in &deltas {
        lp.add_row(row.clone(), RowSense::Ge, z_star);
    }
    lp.add_row(normalization_row(problem, &layout, n), RowSense::Eq, 1.0);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Infeasible => return Err(GopaError::InfeasibleStage2(z_star)),
        LpStatus::Unbounded => {
            return Err(GopaError::NumericFailure("second-stage program is unbounded".into()))
        }
        LpStatus::Optimal => {}
    }
    let min_delta = deltas
        .iter()
        .map(|row| row.iter().zip(&sol.x).map(|(a, x)| a * x).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(EfficiencyCheck {
        value: sol.value,
        min_delta,
        lemma_holds: (min_delta - z_star).abs() <= 1e-8,
        weights: sol.x,
        layout,
    })
}
