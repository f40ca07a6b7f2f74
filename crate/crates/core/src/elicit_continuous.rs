//! First-stage utility elicitation for continuous prospects.
//!
//! The minimizer of `integral u ln(u / v)` under cumulative constraints is
//! the target density times a step function whose jumps sit at the
//! constraint ranks, so the problem reduces to one scale factor per
//! segment between consecutive breakpoints.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::entropy::{self, Constraints};
use crate::error::{GopaError, Result};
use crate::linalg::lstsq;
use crate::model::CellContext;
use crate::structures::TargetDensity;

const DUAL_TOL: f64 = 1e-14;
const ACCEPT_TOL: f64 = 1e-10;

/// How `CDF(r) = gamma` bound entries are read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// `CDF(r) = gamma`.
    #[default]
    Equality,
    /// `CDF(r) >= gamma`.
    Inequality,
}

/// Axis convention for turning a density into per-rank utilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rank `rho` takes `T_{K - rho + 1}`; utilities are nonincreasing.
    #[default]
    Reversed,
    /// Rank `r` takes `T_r`; utilities are nondecreasing.
    Literal,
}

/// Elicited density `u*(x) = kappa_s v(x)` on segment `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDensity {
    target: TargetDensity,
    breakpoints: Vec<f64>,
    scales: Vec<f64>,
    lambda0: f64,
    multipliers: Vec<f64>,
}

impl PiecewiseDensity {
    /// `0 = b_0 < b_1 < ... < b_S = K`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Per-segment scale factors `kappa_s`.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn target(&self) -> &TargetDensity {
        &self.target
    }

    /// Normalization multiplier `lambda_0`.
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    /// Constraint multipliers in context order: ratio, absdiff, bounds.
    pub fn multipliers(&self) -> &[f64] {
        &self.multipliers
    }

    pub fn support(&self) -> f64 {
        self.target.support()
    }

    /// Segment containing `x`; breakpoints belong to the segment on their
    /// left except `0`.
    pub fn segment_of(&self, x: f64) -> usize {
        let s = self.breakpoints[1..].partition_point(|&b| b < x);
        s.min(self.scales.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scales[self.segment_of(x)] * self.target.eval(x)
    }

    /// Mass of each segment.
    pub fn segment_masses(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .zip(&self.scales)
            .map(|(w, k)| k * self.target.integral(w[0], w[1]))
            .collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.support());
        let mut total = 0.0;
        for (w, k) in self.breakpoints.windows(2).zip(&self.scales) {
            if x <= w[0] {
                break;
            }
            total += k * self.target.integral(w[0], x.min(w[1]));
        }
        total
    }
}

/// Jump points of the constraint step functions plus the endpoints.
pub fn breakpoints(ctx: &CellContext, k: usize) -> Vec<f64> {
    let kf = k as f64;
    let mut points = vec![0.0, kf];
    for c in &ctx.ratio {
        points.extend([c.rank as f64 - 1.0, c.rank as f64]);
    }
    for c in &ctx.absdiff {
        points.extend([c.rank as f64 - 1.0, c.rank as f64]);
    }
    for c in &ctx.lower_bounds {
        points.push(c.rank as f64);
    }
    points.retain(|&p| (0.0..=kf).contains(&p));
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// A constraint `sum_s z_s m_s (= or >=) xi` over segment masses.
struct SegmentRow {
    z: Vec<f64>,
    xi: f64,
    inequality: bool,
}

fn segment_rows(ctx: &CellContext, bps: &[f64], mode: BoundMode) -> Vec<SegmentRow> {
    let segments: Vec<(f64, f64)> = bps.windows(2).map(|w| (w[0], w[1])).collect();
    let upto = |r: f64| -> Vec<f64> {
        segments
            .iter()
            .map(|&(_, hi)| if hi <= r { 1.0 } else { 0.0 })
            .collect()
    };
    let mut rows = Vec::new();
    for c in &ctx.ratio {
        let (lo, hi) = (upto(c.rank as f64 - 1.0), upto(c.rank as f64));
        rows.push(SegmentRow {
            z: hi.iter().zip(&lo).map(|(h, l)| h - c.alpha * l).collect(),
            xi: 0.0,
            inequality: false,
        });
    }
    for c in &ctx.absdiff {
        let (lo, hi) = (upto(c.rank as f64 - 1.0), upto(c.rank as f64));
        rows.push(SegmentRow {
            z: hi.iter().zip(&lo).map(|(h, l)| h - l).collect(),
            xi: c.beta,
            inequality: false,
        });
    }
    for c in &ctx.lower_bounds {
        rows.push(SegmentRow {
            z: upto(c.rank as f64),
            xi: c.gamma,
            inequality: mode == BoundMode::Inequality,
        });
    }
    rows
}

/// Solves the cross-entropy problem for a cell with `k` ranks.
pub fn elicit_continuous(
    target: &TargetDensity,
    ctx: &CellContext,
    k: usize,
    mode: BoundMode,
) -> Result<PiecewiseDensity> {
    ctx.check(k, "context")?;
    if (target.support() - k as f64).abs() > 0.0 {
        return Err(GopaError::Dimension(format!(
            "target support [0, {}] does not match {k} ranks",
            target.support()
        )));
    }
    let bps = breakpoints(ctx, k);
    let v: Vec<f64> = bps.windows(2).map(|w| target.integral(w[0], w[1])).collect();
    let ns = v.len();
    let rows = segment_rows(ctx, &bps, mode);

    let mut cons = Constraints::default();
    cons.equal(vec![1.0; ns], 1.0);
    for row in &rows {
        if row.inequality {
            cons.at_least(row.z.clone(), row.xi);
        } else {
            cons.equal(row.z.clone(), row.xi);
        }
    }
    let zeros = entropy::forced_zeros(ns, &cons)?;
    if let Some(s) = zeros.iter().position(|&z| z) {
        return Err(GopaError::InfeasibleContext(format!(
            "the constraints force zero utility on [{}, {}]",
            bps[s],
            bps[s + 1]
        )));
    }

    let (masses, theta) = if rows.iter().any(|r| r.inequality) {
        let m = entropy::project(&v, &cons)?;
        let theta = fit_multipliers(&m, &v, &rows);
        (m, theta)
    } else {
        solve_dual(&v, &rows)?
    };

    let scales = masses.iter().zip(&v).map(|(m, vs)| m / vs).collect();
    Ok(PiecewiseDensity {
        target: target.clone(),
        breakpoints: bps,
        scales,
        lambda0: theta[0] - 1.0,
        multipliers: theta[1..].to_vec(),
    })
}

/// Constraint matrix with the normalization as row 0.
fn z_matrix(ns: usize, rows: &[SegmentRow]) -> (DMatrix<f64>, DVector<f64>) {
    let ne = rows.len() + 1;
    let z = DMatrix::from_fn(ne, ns, |e, s| if e == 0 { 1.0 } else { rows[e - 1].z[s] });
    let xi = DVector::from_fn(ne, |e, _| if e == 0 { 1.0 } else { rows[e - 1].xi });
    (z, xi)
}

/// Maximizes the concave dual `g(theta) = -sum_s m_s(theta) - theta . xi`
/// with `m_s = V_s exp(-(Z^T theta)_s)`.
fn solve_dual(v: &[f64], rows: &[SegmentRow]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ns = v.len();
    let (z, xi) = z_matrix(ns, rows);
    let ne = xi.len();
    let masses = |theta: &DVector<f64>| -> DVector<f64> {
        let expo = z.transpose() * theta;
        DVector::from_fn(ns, |s, _| v[s] * (-expo[s]).exp())
    };
    let dual = |theta: &DVector<f64>| -> f64 { -masses(theta).sum() - theta.dot(&xi) };

    let mut theta = DVector::zeros(ne);
    let mut best = f64::INFINITY;
    for _ in 0..500 {
        let m = masses(&theta);
        let residual = &z * &m - &xi;
        let size = residual.amax();
        best = best.min(size);
        if size <= DUAL_TOL {
            break;
        }
        let hess = &z * DMatrix::from_diagonal(&m) * z.transpose();
        let g0 = dual(&theta);
        let mut moved = false;
        // Newton direction first, then Levenberg-damped ones
        for mu in [0.0, 1e-10, 1e-6, 1e-3, 1.0] {
            let damped = &hess + DMatrix::identity(ne, ne) * (mu * hess.amax().max(1e-300));
            let step = if mu == 0.0 {
                lstsq(&damped, &residual)
            } else {
                match damped.clone().cholesky() {
                    Some(ch) => ch.solve(&residual),
                    None => lstsq(&damped, &residual),
                }
            };
            let slope = residual.dot(&step);
            if !(slope > 0.0 && slope.is_finite()) {
                continue;
            }
            let mut alpha = 1.0;
            while alpha > 1e-12 {
                let trial = &theta + &step * alpha;
                let g = dual(&trial);
                if g.is_finite() && g >= g0 + 1e-4 * alpha * slope {
                    theta = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    let m = masses(&theta);
    let residual = (&z * &m - &xi).amax();
    if residual > ACCEPT_TOL {
        return Err(GopaError::NumericFailure(format!(
            "dual Newton stalled with residual {residual:.3e} (best {best:.3e})"
        )));
    }
    Ok((m.iter().copied().collect(), theta.iter().copied().collect()))
}

/// Recovers `theta` from `ln(m_s / V_s) = -(Z^T theta)_s` by least squares.
fn fit_multipliers(m: &[f64], v: &[f64], rows: &[SegmentRow]) -> Vec<f64> {
    let (z, _) = z_matrix(v.len(), rows);
    let rhs = DVector::from_fn(v.len(), |s, _| -(m[s] / v[s]).ln());
    lstsq(&z.transpose(), &rhs).iter().copied().collect()
}

/// `eta(x) = -(d/dx) ln u*(x)` on an open segment.
pub fn risk_preference(d: &PiecewiseDensity, x: f64) -> Result<f64> {
    let bps = d.breakpoints();
    if bps.iter().any(|&b| (b - x).abs() <= 1e-12) || x < 0.0 || x > d.support() {
        return Err(GopaError::Breakpoint(x));
    }
    Ok(d.target().risk_preference(x))
}

/// Normalized per-rank utilities `T_r / sum T`, with
/// `T_r = integral_0^r u*(K - x) dx`.
pub fn cumulative_utilities(d: &PiecewiseDensity, k: usize, orientation: Orientation) -> Vec<f64> {
    let kf = k as f64;
    let tail: Vec<f64> = (1..=k)
        .map(|r| (1.0 - d.cdf(kf - r as f64)).max(0.0))
        .collect();
    let total: f64 = tail.iter().sum();
    match orientation {
        Orientation::Literal => tail.iter().map(|t| t / total).collect(),
        Orientation::Reversed => (1..=k).map(|rho| tail[k - rho] / total).collect(),
    }
}
