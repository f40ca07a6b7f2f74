//! Global utility structures: rank-based surrogate weights for discrete
//! prospects and risk-preference densities for continuous ones.

use crate::error::{GopaError, Result};
use crate::model::{ContinuousStructure, DiscreteStructure};
use crate::quadrature::adaptive_simpson;

/// Harmonic tail `sum_{h=r}^{k} 1/h`, summed smallest term first.
pub fn harmonic_tail(r: usize, k: usize) -> f64 {
    (r..=k).rev().map(|h| 1.0 / h as f64).sum()
}

/// Surrogate weights `v_r`, `r = 1..=K`, stored at index `r - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateVector {
    values: Vec<f64>,
}

impl SurrogateVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

fn normalized(raw: Vec<f64>) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Evaluates a surrogate weight family for `k` ranks.
pub fn surrogate_weights(kind: DiscreteStructure, k: usize) -> Result<SurrogateVector> {
    if k == 0 {
        return Err(GopaError::Domain("surrogate weights need at least one rank".into()));
    }
    kind.check().map_err(GopaError::Domain)?;
    let kf = k as f64;
    let ranks = 1..=k;
    let values = match kind {
        DiscreteStructure::RankSum => ranks
            .map(|r| 2.0 * (kf + 1.0 - r as f64) / (kf * (kf + 1.0)))
            .collect(),
        DiscreteStructure::RankExponent { exponent } => {
            normalized(ranks.map(|r| (kf + 1.0 - r as f64).powf(exponent)).collect())
        }
        DiscreteStructure::RankReciprocal => {
            let h = harmonic_tail(1, k);
            ranks.map(|r| 1.0 / (r as f64 * h)).collect()
        }
        DiscreteStructure::SumReciprocal => {
            normalized(ranks.map(|r| (kf + 1.0 - r as f64) / kf + 1.0 / r as f64).collect())
        }
        DiscreteStructure::RankOrderCentroid => ranks.map(|r| harmonic_tail(r, k) / kf).collect(),
        DiscreteStructure::UniformDiscrete => vec![1.0 / kf; k],
    };
    Ok(SurrogateVector { values })
}

/// Unnormalized shape with a closed-form antiderivative.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Constant,
    /// `y^(-gamma)` with `y = beta + slope * x`.
    Power { beta: f64, slope: f64, gamma: f64 },
    /// `x^(-gamma)`, `0 < gamma < 1`.
    Crra { gamma: f64 },
    /// `exp(-a (x - x_ref))`.
    Exponential { a: f64, x_ref: f64 },
    /// `k s (1 - s)` with `s = logistic(k (x - centre))`.
    Logistic { k: f64, centre: f64 },
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl Shape {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Shape::Constant => 1.0,
            Shape::Power { beta, slope, gamma } => (beta + slope * x).powf(-gamma),
            Shape::Crra { gamma } => x.powf(-gamma),
            Shape::Exponential { a, x_ref } => (-a * (x - x_ref)).exp(),
            Shape::Logistic { k, centre } => {
                let s = logistic(k * (x - centre));
                k * s * (1.0 - s)
            }
        }
    }

    fn antiderivative(&self, x: f64) -> f64 {
        match *self {
            Shape::Constant => x,
            Shape::Power { beta, slope, gamma } => {
                let y = beta + slope * x;
                if slope == 0.0 {
                    x * y.powf(-gamma)
                } else if gamma == 1.0 {
                    y.ln() / slope
                } else {
                    y.powf(1.0 - gamma) / (slope * (1.0 - gamma))
                }
            }
            Shape::Crra { gamma } => x.powf(1.0 - gamma) / (1.0 - gamma),
            Shape::Exponential { a, x_ref } => -(-a * (x - x_ref)).exp() / a,
            Shape::Logistic { k, centre } => logistic(k * (x - centre)),
        }
    }

    /// `-(d/dx) ln shape(x)`.
    fn risk_preference(&self, x: f64) -> f64 {
        match *self {
            Shape::Constant => 0.0,
            Shape::Power { beta, slope, gamma } => gamma * slope / (beta + slope * x),
            Shape::Crra { gamma } => gamma / x,
            Shape::Exponential { a, .. } => a,
            Shape::Logistic { k, centre } => k * (2.0 * logistic(k * (x - centre)) - 1.0),
        }
    }
}

/// A unit-mass density on `[0, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDensity {
    structure: ContinuousStructure,
    k: f64,
    shape: Shape,
    mass: f64,
}

/// Builds the normalized density of a continuous structure on `[0, k]`.
pub fn target_density(structure: ContinuousStructure, k: usize) -> Result<TargetDensity> {
    if k == 0 {
        return Err(GopaError::Domain("density support must have positive length".into()));
    }
    structure.check(k).map_err(GopaError::Domain)?;
    let kf = k as f64;
    let shape = match structure {
        ContinuousStructure::Neutral => Shape::Constant,
        ContinuousStructure::Hara { alpha, beta, gamma } => Shape::Power {
            beta,
            slope: alpha / gamma,
            gamma,
        },
        ContinuousStructure::Crra { gamma, .. } => Shape::Crra { gamma },
        ContinuousStructure::Cara { a } => Shape::Exponential {
            a,
            x_ref: if a > 0.0 { 0.0 } else { kf },
        },
        ContinuousStructure::SShape { steepness } => Shape::Logistic {
            k: steepness,
            centre: (1.0 + kf) / 2.0,
        },
    };
    let mass = shape.antiderivative(kf) - shape.antiderivative(0.0);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(GopaError::Domain(format!("density mass {mass} on [0, {kf}] is not usable")));
    }
    Ok(TargetDensity {
        structure,
        k: kf,
        shape,
        mass,
    })
}

impl TargetDensity {
    pub fn structure(&self) -> ContinuousStructure {
        self.structure
    }

    /// Upper end of the support.
    pub fn support(&self) -> f64 {
        self.k
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.shape.eval(x) / self.mass
    }

    /// Closed-form `integral_a^b v`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if let Shape::Constant = self.shape {
            return (b - a) / self.mass;
        }
        (self.shape.antiderivative(b) - self.shape.antiderivative(a)) / self.mass
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.integral(0.0, x.clamp(0.0, self.k))
    }

    /// Adaptive-quadrature `integral_a^b v`, for cross-checking.
    pub fn quadrature_integral(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(|x| self.eval(x), a, b, 1e-12)
    }

    /// `eta(x) = -(d/dx) ln v(x)`.
    pub fn risk_preference(&self, x: f64) -> f64 {
        self.shape.risk_preference(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const KINDS: [DiscreteStructure; 6] = [
        DiscreteStructure::RankSum,
        DiscreteStructure::RankExponent { exponent: 1.17 },
        DiscreteStructure::RankReciprocal,
        DiscreteStructure::SumReciprocal,
        DiscreteStructure::RankOrderCentroid,
        DiscreteStructure::UniformDiscrete,
    ];

    #[test]
    fn rank_sum_first_rank() {
        let v = surrogate_weights(DiscreteStructure::RankSum, 4).unwrap();
        assert_relative_eq!(v.values()[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn roc_first_rank() {
        let v = surrogate_weights(DiscreteStructure::RankOrderCentroid, 10).unwrap();
        let h10: f64 = (1..=10).map(|h| 1.0 / h as f64).sum();
        assert_relative_eq!(v.values()[0], h10 / 10.0, epsilon = 1e-15);
        assert_relative_eq!(v.values()[0], 0.292897, epsilon = 1e-6);
    }

    #[test]
    fn single_rank_is_one() {
        for kind in KINDS {
            assert_eq!(surrogate_weights(kind, 1).unwrap().values(), &[1.0]);
        }
    }

    #[test]
    fn normalized_and_decreasing() {
        for kind in KINDS {
            for k in 1..=30 {
                let v = surrogate_weights(kind, k).unwrap();
                let total: f64 = v.values().iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "{kind:?} K={k}");
                for w in v.values().windows(2) {
                    if kind == DiscreteStructure::UniformDiscrete {
                        assert_eq!(w[0], w[1]);
                    } else {
                        assert!(w[0] > w[1], "{kind:?} K={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn sum_reciprocal_direct() {
        for k in 2..=12usize {
            let v = surrogate_weights(DiscreteStructure::SumReciprocal, k).unwrap();
            let kf = k as f64;
            let raw = |r: usize| (kf + 1.0 - r as f64) / kf + 1.0 / r as f64;
            let total: f64 = (1..=k).map(raw).sum();
            for r in 1..=k {
                assert_relative_eq!(v.values()[r - 1], raw(r) / total, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn roc_and_rr_convex_in_rank() {
        for kind in [DiscreteStructure::RankOrderCentroid, DiscreteStructure::RankReciprocal] {
            for k in 3..=15 {
                let v = surrogate_weights(kind, k).unwrap().into_vec();
                for w in v.windows(3) {
                    let (d1, d2) = (w[0] - w[1], w[1] - w[2]);
                    assert!(d1 > 0.0 && d2 > 0.0 && d1 > d2, "{kind:?} K={k}");
                }
            }
        }
    }

    #[test]
    fn neutral_density() {
        let d = target_density(ContinuousStructure::Neutral, 5).unwrap();
        for x in [0.0, 1.3, 4.9] {
            assert_relative_eq!(d.eval(x), 0.2, epsilon = 1e-15);
        }
        assert_relative_eq!(d.integral(0.0, 5.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hara_example_density() {
        let d = target_density(
            ContinuousStructure::Hara { alpha: 2.0, beta: 1.0, gamma: 1.5 },
            7,
        )
        .unwrap();
        assert_relative_eq!(d.integral(0.0, 7.0), 1.0, epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for n in 0..=70 {
            let v = d.eval(n as f64 / 10.0);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
        assert_relative_eq!(d.risk_preference(2.0), 6.0 / 11.0, epsilon = 1e-15);
    }

    #[test]
    fn hara_domain_error() {
        let err = target_density(ContinuousStructure::Hara { alpha: -1.0, beta: 1.0, gamma: 2.0 }, 7);
        assert!(matches!(err, Err(GopaError::Domain(_))));
    }

    #[test]
    fn s_shape_symmetric() {
        let d = target_density(ContinuousStructure::SShape { steepness: 1.0 }, 7).unwrap();
        for t in [0.1, 0.7, 1.5, 2.9, 3.0] {
            assert_relative_eq!(d.eval(4.0 - t), d.eval(4.0 + t), epsilon = 1e-15);
        }
    }

    #[test]
    fn cara_preference_and_mass() {
        for a in [0.8, -0.8, 40.0, -40.0] {
            let d = target_density(ContinuousStructure::Cara { a }, 6).unwrap();
            assert_relative_eq!(d.integral(0.0, 6.0), 1.0, epsilon = 1e-12);
            assert_eq!(d.risk_preference(2.5), a);
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let families = [
            ContinuousStructure::Neutral,
            ContinuousStructure::Hara { alpha: 2.0, beta: 1.0, gamma: 1.5 },
            ContinuousStructure::Hara { alpha: 1.0, beta: 2.0, gamma: 1.0 },
            ContinuousStructure::Hara { alpha: -0.5, beta: 4.0, gamma: -2.0 },
            ContinuousStructure::Crra { alpha: 1.0, gamma: 0.4 },
            ContinuousStructure::Cara { a: 0.7 },
            ContinuousStructure::Cara { a: -1.3 },
            ContinuousStructure::SShape { steepness: 1.0 },
            ContinuousStructure::SShape { steepness: 3.0 },
        ];
        for s in families {
            let d = target_density(s, 7).unwrap();
            for n in 0..20 {
                let a = 0.1 + 0.31 * n as f64;
                let b = (a + 0.77).min(7.0);
                let diff = (d.integral(a, b) - d.quadrature_integral(a, b)).abs();
                assert!(diff <= 1e-9, "{s:?} [{a}, {b}] diff {diff}");
            }
        }
    }
}
