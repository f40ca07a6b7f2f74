//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular value cut-off used for rank decisions.
pub const RANK_TOL: f64 = 1e-11;

/// Null space of `A` and the consistency of `A x = b`.
pub struct AffineSpace {
    /// Orthonormal null-space basis, one column per free direction.
    pub basis: DMatrix<f64>,
    /// Largest `|A x0 - b|`; nonzero means the system is inconsistent.
    pub residual: f64,
}

/// Parameterizes the solutions of `A x = b` by an SVD.
pub fn affine_solutions(a: &DMatrix<f64>, b: &DVector<f64>) -> AffineSpace {
    let n = a.ncols();
    if a.nrows() == 0 {
        return AffineSpace {
            basis: DMatrix::identity(n, n),
            residual: 0.0,
        };
    }
    // pad to at least n rows so the SVD yields a full V
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, a.nrows()).copy_from(b);

    let svd = padded.svd(true, true);
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let u = svd.u.as_ref().expect("u requested");
    let smax = svd.singular_values.max();
    let cut = RANK_TOL * smax.max(1.0);

    let mut particular = DVector::zeros(n);
    let mut null_rows = Vec::new();
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let coef = u.column(idx).dot(&rhs) / s;
            particular += v_t.row(idx).transpose() * coef;
        } else {
            null_rows.push(idx);
        }
    }
    let mut basis = DMatrix::zeros(n, null_rows.len());
    for (c, &idx) in null_rows.iter().enumerate() {
        basis.set_column(c, &v_t.row(idx).transpose());
    }
    let residual = (a * &particular - b).amax();
    AffineSpace {
        basis,
        residual,
    }
}

/// Minimum-norm least-squares solution of `A x ~ b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let eps = RANK_TOL * svd.singular_values.max().max(1e-300);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Solves a symmetric positive (semi)definite system, falling back to the
/// pseudo-inverse when Cholesky fails.
pub fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    match h.clone().cholesky() {
        Some(ch) => ch.solve(g),
        None => lstsq(h, g),
    }
}

/// Least squares `min |A x - b|` with `x_i >= 0` wherever `nonneg[i]`.
///
/// Lawson-Hanson active set; unconstrained coordinates stay passive.
pub fn mixed_nnls(a: &DMatrix<f64>, b: &DVector<f64>, nonneg: &[bool]) -> DVector<f64> {
    let n = a.ncols();
    assert_eq!(nonneg.len(), n);
    let tol = 1e-13 * (1.0 + a.amax() * b.amax().max(1.0)) * (n as f64).max(1.0);
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let mut out = DVector::zeros(n);
        if cols.is_empty() {
            return out;
        }
        let sub = a.select_columns(&cols);
        let s = lstsq(&sub, b);
        for (c, &i) in cols.iter().enumerate() {
            out[i] = s[c];
        }
        out
    };

    let mut x = solve_passive(&passive);
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&i| nonneg[i] && !passive[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        let mut guard = 0;
        loop {
            guard += 1;
            let s = solve_passive(&passive);
            let blocking: Vec<usize> = (0..n)
                .filter(|&i| nonneg[i] && passive[i] && s[i] <= 0.0)
                .collect();
            if blocking.is_empty() || guard > n + 2 {
                x = s;
                for i in 0..n {
                    if nonneg[i] && x[i] < 0.0 {
                        x[i] = 0.0;
                    }
                }
                break;
            }
            let alpha = blocking
                .iter()
                .map(|&i| {
                    let d = x[i] - s[i];
                    if d > 0.0 {
                        x[i] / d
                    } else {
                        0.0
                    }
                })
                .fold(1.0f64, f64::min)
                .clamp(0.0, 1.0);
            x += (&s - &x) * alpha;
            for i in 0..n {
                if nonneg[i] && passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}
