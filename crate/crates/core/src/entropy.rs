//! Cross-entropy projection onto a polyhedron:
//!
//! `min sum x_i ln(x_i / v_i)  s.t.  A x = b,  G x >= h,  x >= 0`.
//!
//! A feasibility LP finds a relative-interior point and the implicit
//! equalities, equalities are eliminated by a null-space basis, a
//! log-barrier Newton method approaches the optimum, and an active-set
//! Newton step polishes it to the exact KKT point.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{GopaError, Result};
use crate::linalg::{affine_solutions, lstsq, solve_spd};
use crate::lpcheck::{solve_lp, Direction, LinearProgram, LpStatus, RowSense, VarBound};

/// Slack below which an inequality counts as active.
pub const ACTIVE_TOL: f64 = 1e-9;
const INTERIOR_TOL: f64 = 1e-9;

/// Linear constraints of a projection problem. Nonnegativity of `x` is
/// implied and need not be listed.
#[derive(Debug, Clone, Default)]
pub struct Constraints {
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
}

impl Constraints {
    pub fn equal(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn at_least(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    /// Largest violation at `x`, nonnegativity included.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (dot(r) - b).abs());
        let ineq = self
            .ineq_rows
            .iter()
            .zip(&self.ineq_rhs)
            .map(|(r, h)| (h - dot(r)).max(0.0));
        let neg = x.iter().map(|v| (-v).max(0.0));
        eq.chain(ineq).chain(neg).fold(0.0, f64::max)
    }
}

/// All inequality rows with nonnegativity appended as identity rows.
fn full_inequalities(n: usize, c: &Constraints) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = c.ineq_rows.clone();
    let mut rhs = c.ineq_rhs.clone();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push(e);
        rhs.push(0.0);
    }
    (rows, rhs)
}

struct Interior {
    point: Vec<f64>,
    /// Inequalities (in the full list) that hold with equality everywhere.
    implicit: Vec<usize>,
}

/// Finds a relative-interior point of the feasible set by repeatedly
/// maximizing capped slacks of the inequalities not yet shown to be loose.
fn relative_interior(n: usize, c: &Constraints, g: &[Vec<f64>], h: &[f64]) -> Result<Interior> {
    let m = g.len();
    let mut pending: BTreeSet<usize> = (0..m).collect();
    let mut points: Vec<Vec<f64>> = Vec::new();
    loop {
        let mut objective = vec![0.0; n + m];
        for &k in &pending {
            objective[n + k] = 1.0;
        }
        let mut lp = LinearProgram::new(Direction::Maximize, objective);
        for b in lp.bounds.iter_mut().take(n) {
            *b = VarBound::Free;
        }
        for (row, &rhs) in c.eq_rows.iter().zip(&c.eq_rhs) {
            let mut r = row.clone();
            r.resize(n + m, 0.0);
            lp.add_row(r, RowSense::Eq, rhs);
        }
        for k in 0..m {
            let mut r = g[k].clone();
            r.resize(n + m, 0.0);
            r[n + k] = -1.0;
            lp.add_row(r, RowSense::Ge, h[k]);
            let mut cap = vec![0.0; n + m];
            cap[n + k] = 1.0;
            lp.add_row(cap, RowSense::Le, 1.0);
        }
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(GopaError::InfeasibleContext(
                    "the preference constraints admit no utility vector".into(),
                ))
            }
            LpStatus::Unbounded => {
                return Err(GopaError::NumericFailure("feasibility program is unbounded".into()))
            }
        }
        let loose: Vec<usize> = pending
            .iter()
            .copied()
            .filter(|&k| sol.x[n + k] > INTERIOR_TOL)
            .collect();
        points.push(sol.x[..n].to_vec());
        if loose.is_empty() {
            break;
        }
        for k in loose {
            pending.remove(&k);
        }
        if pending.is_empty() {
            break;
        }
    }
    let count = points.len() as f64;
    let point = (0..n)
        .map(|i| points.iter().map(|p| p[i]).sum::<f64>() / count)
        .collect();
    Ok(Interior {
        point,
        implicit: pending.into_iter().collect(),
    })
}

/// Checks feasibility and reports the coordinates pinned at zero on the
/// whole feasible set.
pub fn forced_zeros(n: usize, c: &Constraints) -> Result<Vec<bool>> {
    let (g_all, h_all) = full_inequalities(n, c);
    let interior = relative_interior(n, c, &g_all, &h_all)?;
    let mut out = vec![false; n];
    for k in interior.implicit {
        if k >= c.ineq_rows.len() {
            out[k - c.ineq_rows.len()] = true;
        }
    }
    Ok(out)
}

fn objective_gradient(x: &[f64], v: &[f64]) -> Vec<f64> {
    x.iter().zip(v).map(|(xi, vi)| (xi / vi).ln() + 1.0).collect()
}

fn objective(x: &[f64], v: &[f64]) -> f64 {
    x.iter()
        .zip(v)
        .map(|(xi, vi)| if *xi > 0.0 { xi * (xi / vi).ln() } else { 0.0 })
        .sum()
}

/// Solves the projection. `target` must be positive.
pub fn project(target: &[f64], c: &Constraints) -> Result<Vec<f64>> {
    let n = target.len();
    let (g_all, h_all) = full_inequalities(n, c);
    let interior = relative_interior(n, c, &g_all, &h_all)?;
    let implicit: BTreeSet<usize> = interior.implicit.iter().copied().collect();

    // coordinates pinned at zero leave the objective
    let fixed: Vec<bool> = (0..n)
        .map(|i| implicit.contains(&(c.ineq_rows.len() + i)))
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    if free.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let restrict = |row: &[f64]| free.iter().map(|&i| row[i]).collect::<Vec<f64>>();
    let v: Vec<f64> = free.iter().map(|&i| target[i]).collect();
    let nf = free.len();

    // equalities: explicit plus implicit (excluding the pinned coordinates)
    let mut eq_rows: Vec<Vec<f64>> = c.eq_rows.iter().map(|r| restrict(r)).collect();
    let mut eq_rhs = c.eq_rhs.clone();
    for &k in &implicit {
        if k < c.ineq_rows.len() {
            eq_rows.push(restrict(&g_all[k]));
            eq_rhs.push(h_all[k]);
        }
    }
    // inequalities still able to move: general rows not implicit, and
    // nonnegativity of free coordinates
    let mut ineq: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for k in 0..c.ineq_rows.len() {
        if !implicit.contains(&k) {
            ineq.push((restrict(&g_all[k]), h_all[k], false));
        }
    }
    for f in 0..nf {
        let mut e = vec![0.0; nf];
        e[f] = 1.0;
        ineq.push((e, 0.0, true));
    }

    let a = DMatrix::from_fn(eq_rows.len(), nf, |r, col| eq_rows[r][col]);
    let b = DVector::from_vec(eq_rhs.clone());
    let space = affine_solutions(&a, &b);
    if space.residual > 1e-8 {
        return Err(GopaError::NumericFailure(format!(
            "equality system left a residual of {:.3e}",
            space.residual
        )));
    }
    let mut x0 = DVector::from_vec(restrict(&interior.point));
    if a.nrows() > 0 {
        let fix = lstsq(&a, &(&b - &a * &x0));
        x0 += fix;
    }
    let x_barrier = barrier(&x0, &space.basis, &v, &ineq)?;
    let x = polish(&x_barrier, &v, &eq_rows, &eq_rhs, &ineq).unwrap_or(x_barrier);

    let mut out = vec![0.0; n];
    for (f, &i) in free.iter().enumerate() {
        out[i] = x[f];
    }
    let violation = c.violation(&out);
    if violation > 1e-8 {
        return Err(GopaError::NumericFailure(format!(
            "projection violates the constraints by {violation:.3e}"
        )));
    }
    Ok(out)
}

fn slacks(x: &[f64], ineq: &[(Vec<f64>, f64, bool)]) -> Vec<f64> {
    ineq.iter()
        .map(|(row, h, _)| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - h)
        .collect()
}

/// Log-barrier Newton method in the null-space coordinates `x = x0 + N y`.
fn barrier(
    x0: &DVector<f64>,
    basis: &DMatrix<f64>,
    v: &[f64],
    ineq: &[(Vec<f64>, f64, bool)],
) -> Result<Vec<f64>> {
    let d = basis.ncols();
    let nf = x0.len();
    let x_of = |y: &DVector<f64>| -> Vec<f64> { (x0 + basis * y).iter().copied().collect() };
    let mut y = DVector::zeros(d);
    if d == 0 {
        return Ok(x_of(&y));
    }
    let m = ineq.len() as f64;
    let phi = |y: &DVector<f64>, t: f64| -> Option<f64> {
        let x = x_of(y);
        if x.iter().any(|&xi| xi <= 0.0) {
            return None;
        }
        let s = slacks(&x, ineq);
        if s.iter().any(|&sk| sk <= 0.0) {
            return None;
        }
        Some(t * objective(&x, v) - s.iter().map(|sk| sk.ln()).sum::<f64>())
    };
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let x = x_of(&y);
            let s = slacks(&x, ineq);
            let gf = objective_gradient(&x, v);
            let mut grad_x = DVector::from_fn(nf, |i, _| t * gf[i]);
            let mut hess_x = DMatrix::from_fn(nf, nf, |i, j| if i == j { t / x[i] } else { 0.0 });
            for ((row, _, _), sk) in ineq.iter().zip(&s) {
                let gk = DVector::from_column_slice(row);
                grad_x -= &gk / *sk;
                hess_x += &gk * gk.transpose() / (sk * sk);
            }
            let grad = basis.transpose() * grad_x;
            let hess = basis.transpose() * hess_x * basis;
            let step = -solve_spd(&hess, &grad);
            let decrement = -grad.dot(&step);
            if !decrement.is_finite() {
                return Err(GopaError::NumericFailure("barrier Newton step is not finite".into()));
            }
            if decrement / 2.0 <= 1e-14 {
                break;
            }
            let f0 = phi(&y, t).expect("iterate stays interior");
            let mut alpha = 1.0;
            loop {
                let trial = &y + &step * alpha;
                if let Some(f) = phi(&trial, t) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        y = trial;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    break;
                }
            }
            if alpha < 1e-16 {
                break;
            }
        }
        if m / t < 1e-11 {
            break;
        }
        t *= 8.0;
    }
    Ok(x_of(&y))
}

/// Newton's method on `min f(x) s.t. C x = d`, started anywhere in `x > 0`.
fn equality_newton(start: &[f64], v: &[f64], c: &[Vec<f64>], d: &[f64]) -> Option<Vec<f64>> {
    let n = start.len();
    let m = c.len();
    let mut x = start.to_vec();
    let mut stalled = 0;
    for _ in 0..200 {
        let g = objective_gradient(&x, v);
        let mut kkt = DMatrix::zeros(n + m, n + m);
        let mut rhs = DVector::zeros(n + m);
        for i in 0..n {
            kkt[(i, i)] = 1.0 / x[i];
            rhs[i] = -g[i];
        }
        for (r, row) in c.iter().enumerate() {
            for (col, &a) in row.iter().enumerate() {
                kkt[(n + r, col)] = a;
                kkt[(col, n + r)] = a;
            }
            rhs[n + r] = d[r] - row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        let sol = lstsq(&kkt, &rhs);
        let dx: Vec<f64> = sol.iter().take(n).copied().collect();
        let mut alpha: f64 = 1.0;
        for i in 0..n {
            if dx[i] < 0.0 {
                alpha = alpha.min(0.99 * x[i] / -dx[i]);
            }
        }
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        let size = dx.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let residual = c
            .iter()
            .zip(d)
            .map(|(row, di)| (row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - di).abs())
            .fold(0.0, f64::max);
        if alpha == 1.0 && size <= 1e-15 && residual <= 1e-14 {
            return Some(x);
        }
        if alpha < 1e-10 {
            stalled += 1;
            if stalled > 5 {
                return None;
            }
        } else {
            stalled = 0;
        }
        if alpha == 1.0 && size <= 1e-13 && residual <= 1e-13 {
            return Some(x);
        }
    }
    None
}

/// Active-set refinement of a near-optimal interior point.
fn polish(
    x: &[f64],
    v: &[f64],
    eq_rows: &[Vec<f64>],
    eq_rhs: &[f64],
    ineq: &[(Vec<f64>, f64, bool)],
) -> Option<Vec<f64>> {
    let s = slacks(x, ineq);
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut working: BTreeSet<usize> = (0..ineq.len())
        .filter(|&k| !ineq[k].2 && s[k] <= 1e-6 * scale)
        .collect();
    let mut visited = BTreeSet::new();
    for _ in 0..100 {
        if !visited.insert(working.iter().copied().collect::<Vec<_>>()) {
            return None;
        }
        let mut rows = eq_rows.to_vec();
        let mut rhs = eq_rhs.to_vec();
        for &k in &working {
            rows.push(ineq[k].0.clone());
            rhs.push(ineq[k].1);
        }
        let candidate = equality_newton(x, v, &rows, &rhs)?;

        let cs = slacks(&candidate, ineq);
        let violated = (0..ineq.len())
            .filter(|k| !working.contains(k) && cs[*k] < -1e-13)
            .min_by(|&a, &b| cs[a].total_cmp(&cs[b]));
        if let Some(k) = violated {
            if ineq[k].2 {
                return None;
            }
            working.insert(k);
            continue;
        }
        // multipliers of the working rows from grad f = E^T lambda + G_W^T mu
        let g = objective_gradient(&candidate, v);
        let n = candidate.len();
        let mat = DMatrix::from_fn(n, rows.len(), |i, r| rows[r][i]);
        let mult = lstsq(&mat, &DVector::from_vec(g));
        let negative = working
            .iter()
            .enumerate()
            .map(|(pos, &k)| (k, mult[eq_rows.len() + pos]))
            .filter(|(_, mu)| *mu < -1e-10)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, _)) = negative {
            working.remove(&k);
            continue;
        }
        return Some(candidate);
    }
    None
}

/// Indices of inequality rows (explicit ones only) active at `x`.
pub fn active_rows(x: &[f64], c: &Constraints) -> Vec<usize> {
    c.ineq_rows
        .iter()
        .zip(&c.ineq_rhs)
        .enumerate()
        .filter(|(_, (row, h))| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - *h <= ACTIVE_TOL)
        .map(|(k, _)| k)
        .collect()
}
