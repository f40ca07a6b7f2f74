//! Consensus statistics: percentage standard deviation, Kendall's W, the
//! F-approximation confidence levels, and Spearman correlation.

use std::fmt;

use serde::Serialize;

use crate::error::{GopaError, Result};
use crate::solver::WeightSolution;

/// Weights closer than this are treated as tied when ranking.
pub const TIE_TOL: f64 = 1e-12;

/// `eta = (1/W) sqrt(sum_i (W/I - w_i)^2 / (I - 1))`.
pub fn psd(contributions: &[f64], total: f64) -> Result<f64> {
    let n = contributions.len();
    if n < 2 {
        return Err(GopaError::Degenerate(format!(
            "percentage standard deviation needs at least two experts, got {n}"
        )));
    }
    if total == 0.0 {
        return Err(GopaError::Degenerate("aggregate weight is zero".into()));
    }
    let mean = total / n as f64;
    let ss: f64 = contributions.iter().map(|w| (mean - w).powi(2)).sum();
    Ok((ss / (n - 1) as f64).sqrt() / total)
}

/// Ranks in descending order of `values` (largest gets 1), ties averaged.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && (values[order[start]] - values[order[end]]).abs() <= TIE_TOL {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Kendall's coefficient of concordance for a raters x items rank matrix,
/// with the per-rater tie correction `sum (t^3 - t)`.
pub fn kendall_w(ranks: &[Vec<f64>]) -> Result<f64> {
    let m = ranks.len();
    if m == 0 {
        return Err(GopaError::Shape("no raters".into()));
    }
    let n = ranks[0].len();
    if n < 2 {
        return Err(GopaError::Shape(format!("need at least two items, got {n}")));
    }
    if let Some(bad) = ranks.iter().position(|r| r.len() != n) {
        return Err(GopaError::Shape(format!(
            "rater {} ranks {} items, expected {n}",
            bad + 1,
            ranks[bad].len()
        )));
    }
    let (mf, nf) = (m as f64, n as f64);
    let sums: Vec<f64> = (0..n).map(|k| ranks.iter().map(|r| r[k]).sum()).collect();
    let mean = sums.iter().sum::<f64>() / nf;
    let s: f64 = sums.iter().map(|r| (r - mean).powi(2)).sum();
    let ties: f64 = ranks
        .iter()
        .map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            let mut total = 0.0;
            let mut start = 0;
            while start < n {
                let mut end = start + 1;
                while end < n && (sorted[end] - sorted[start]).abs() <= TIE_TOL {
                    end += 1;
                }
                let t = (end - start) as f64;
                total += t * t * t - t;
                start = end;
            }
            total
        })
        .sum();
    let denom = mf * mf * (nf * nf * nf - nf) - mf * ties;
    if denom <= 0.0 {
        return Err(GopaError::Degenerate("every rater ties all items".into()));
    }
    Ok((12.0 * s / denom).clamp(0.0, 1.0))
}

#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(GopaError::Domain(format!(
            "incomplete beta needs a, b > 0 and x in [0, 1], got a={a}, b={b}, x={x}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_fraction(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_fraction(b, a, 1.0 - x) / b)
    }
}

/// `P(F <= x)` for an F distribution with (possibly fractional) degrees
/// of freedom.
pub fn f_cdf(x: f64, v1: f64, v2: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 || v1.is_nan() || v1 <= 0.0 || v2.is_nan() || v2 <= 0.0 {
        return Err(GopaError::Domain(format!(
            "F CDF needs x >= 0 and positive degrees of freedom, got x={x}, v1={v1}, v2={v2}"
        )));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    regularized_incomplete_beta(v1 / 2.0, v2 / 2.0, v1 * x / (v1 * x + v2))
}

/// Local confidence level of a concordance `rho` among `raters` over
/// `items`. `None` when the degrees of freedom are not positive.
pub fn lcl(rho: f64, raters: usize, items: usize) -> Option<f64> {
    let i = raters as f64;
    let v1 = items as f64 - 1.0 - 2.0 / i;
    let v2 = (i - 1.0) * v1;
    if !(v1 > 0.0 && v2 > 0.0) {
        return None;
    }
    if rho >= 1.0 {
        return Some(1.0);
    }
    let x = rho.max(0.0) * (i - 1.0) / (1.0 - rho);
    f_cdf(x, v1, v2).ok()
}

/// `GCL = LCL^N * sum_j W^N_j LCL^M_j`.
pub fn gcl(lcl_attributes: f64, attribute_weights: &[f64], lcl_per_attribute: &[f64]) -> f64 {
    lcl_attributes
        * attribute_weights
            .iter()
            .zip(lcl_per_attribute)
            .map(|(w, l)| w * l)
            .sum::<f64>()
}

/// Pearson correlation of two rank vectors.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GopaError::Shape(format!(
            "rank vectors have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    if a.len() < 2 {
        return Err(GopaError::Shape("need at least two ranks".into()));
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(GopaError::Degenerate("constant rank vector".into()));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityLabel {
    LessSensitive,
    Sensitive,
    VerySensitive,
    HighSensitive,
}

impl fmt::Display for SensitivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitivityLabel::LessSensitive => "less sensitive",
            SensitivityLabel::Sensitive => "sensitive",
            SensitivityLabel::VerySensitive => "very sensitive",
            SensitivityLabel::HighSensitive => "high sensitive",
        })
    }
}

/// Maps a confidence level onto the sensitivity scale.
pub fn label(level: f64) -> SensitivityLabel {
    if level >= 0.99 {
        SensitivityLabel::HighSensitive
    } else if level >= 0.95 {
        SensitivityLabel::VerySensitive
    } else if level >= 0.90 {
        SensitivityLabel::Sensitive
    } else {
        SensitivityLabel::LessSensitive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusReport {
    /// PSD of expert contributions to each attribute weight.
    pub psd_attributes: Vec<Option<f64>>,
    /// PSD of expert contributions to each alternative weight.
    pub psd_alternatives: Vec<Option<f64>>,
    /// Concordance of alternative rankings per attribute, `rho^M_j`.
    pub kendall_alternatives: Vec<Option<f64>>,
    /// Concordance of attribute rankings, `rho^N`.
    pub kendall_attributes: Option<f64>,
    pub lcl_alternatives: Vec<Option<f64>>,
    pub lcl_attributes: Option<f64>,
    pub gcl: Option<f64>,
    pub labels_alternatives: Vec<Option<SensitivityLabel>>,
    pub label_attributes: Option<SensitivityLabel>,
    pub label_global: Option<SensitivityLabel>,
}

/// Consensus statistics of a weight solution. Rankings are derived from
/// the weights in descending order with midranks for ties.
pub fn consensus_report(solution: &WeightSolution) -> ConsensusReport {
    let w = &solution.alternative_weights;
    let (ni, nj, nk) = (
        solution.experts.len(),
        solution.attributes.len(),
        solution.alternatives.len(),
    );
    let expert_attr: Vec<Vec<f64>> = (0..ni)
        .map(|i| (0..nj).map(|j| w[i][j].iter().sum()).collect())
        .collect();

    let psd_attributes = (0..nj)
        .map(|j| {
            let parts: Vec<f64> = (0..ni).map(|i| expert_attr[i][j]).collect();
            psd(&parts, solution.attribute_weights[j]).ok()
        })
        .collect();
    let psd_alternatives = (0..nk)
        .map(|k| {
            let parts: Vec<f64> = (0..ni).map(|i| (0..nj).map(|j| w[i][j][k]).sum()).collect();
            psd(&parts, solution.alternative_totals[k]).ok()
        })
        .collect();

    let kendall_alternatives: Vec<Option<f64>> = (0..nj)
        .map(|j| {
            let ranks: Vec<Vec<f64>> = (0..ni).map(|i| midranks(&w[i][j])).collect();
            kendall_w(&ranks).ok()
        })
        .collect();
    let attr_ranks: Vec<Vec<f64>> = expert_attr.iter().map(|row| midranks(row)).collect();
    let kendall_attributes = kendall_w(&attr_ranks).ok();

    let lcl_alternatives: Vec<Option<f64>> = kendall_alternatives
        .iter()
        .map(|rho| rho.and_then(|r| lcl(r, ni, nk)))
        .collect();
    let lcl_attributes = kendall_attributes.and_then(|r| lcl(r, ni, nj));
    let gcl_value = lcl_attributes.and_then(|ln| {
        let per: Option<Vec<f64>> = lcl_alternatives.iter().copied().collect();
        per.map(|per| gcl(ln, &solution.attribute_weights, &per))
    });

    ConsensusReport {
        psd_attributes,
        psd_alternatives,
        labels_alternatives: lcl_alternatives.iter().map(|l| l.map(label)).collect(),
        kendall_alternatives,
        kendall_attributes,
        lcl_alternatives,
        label_attributes: lcl_attributes.map(label),
        lcl_attributes,
        label_global: gcl_value.map(label),
        gcl: gcl_value,
    }
}
