//! Closed-form second-stage weights, the mapping from ranks to
//! alternatives, and the marginal aggregates.

use serde::{Deserialize, Serialize};

use crate::elicit_discrete::UtilityTable;
use crate::error::{GopaError, Result};
use crate::model::RankingProblem;
use crate::structures::harmonic_tail;

/// Tolerance for the normalization and dominance checks on utilities.
pub const SHAPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub experts: Vec<String>,
    pub attributes: Vec<String>,
    pub alternatives: Vec<String>,
    /// Optimal objective `z*`.
    pub z: f64,
    /// `w_ijr`, indexed `[i][j][r - 1]`.
    pub rank_weights: Vec<Vec<Vec<f64>>>,
    /// `w_ijk`, indexed `[i][j][k]`; zero where `k` is excluded.
    pub alternative_weights: Vec<Vec<Vec<f64>>>,
    /// `W^Q_i`.
    pub expert_weights: Vec<f64>,
    /// `W^N_j`.
    pub attribute_weights: Vec<f64>,
    /// `W^M_k`.
    pub alternative_totals: Vec<f64>,
    /// Per-cell utilities the weights were built from.
    pub utilities: Vec<Vec<Vec<f64>>>,
    /// Cells with duplicate, missing, or excluded ranks.
    pub irregular_cells: Vec<(String, String)>,
    /// Alternatives excluded from some cell; when nonempty the alternative
    /// totals are not renormalized.
    pub excluded_alternatives: Vec<String>,
}

impl WeightSolution {
    /// `sum_{ijr} c_ijr w_ijr`, which equals the sum of all mapped weights.
    pub fn normalization(&self) -> f64 {
        self.alternative_weights.iter().flatten().flatten().sum()
    }

    /// The OPA-equivalent per-cell weight sum `sum_k w_ijk`.
    pub fn cell_total(&self, i: usize, j: usize) -> f64 {
        self.alternative_weights[i][j].iter().sum()
    }
}

/// Builds the solution from per-rank coefficients `a_ijr` with
/// `w_ijr = a_ijr z / (t_i s_ij)`.
fn assemble(problem: &RankingProblem, coef: &UtilityTable, utilities: Vec<Vec<Vec<f64>>>) -> WeightSolution {
    let ts = |i: usize, j: usize| problem.expert_rank(i) as f64 * problem.attribute_rank(i, j) as f64;
    let mut denom = 0.0;
    for (i, j) in problem.cell_indices() {
        let cell = problem.cell(i, j);
        for (r, &c) in cell.frequencies.iter().enumerate() {
            denom += c as f64 * coef.cell(i, j)[r] / ts(i, j);
        }
    }
    let z = 1.0 / denom;

    let (ni, nj, nk) = (
        problem.num_experts(),
        problem.num_attributes(),
        problem.num_alternatives(),
    );
    let mut rank_weights = vec![vec![Vec::new(); nj]; ni];
    let mut alternative_weights = vec![vec![vec![0.0; nk]; nj]; ni];
    let mut expert_weights = vec![0.0; ni];
    let mut attribute_weights = vec![0.0; nj];
    let mut alternative_totals = vec![0.0; nk];
    for (i, j) in problem.cell_indices() {
        let w: Vec<f64> = coef.cell(i, j).iter().map(|a| a * z / ts(i, j)).collect();
        for k in 0..nk {
            if let Some(r) = problem.alternative_rank(i, j, k) {
                let v = w[r as usize - 1];
                alternative_weights[i][j][k] = v;
                expert_weights[i] += v;
                attribute_weights[j] += v;
                alternative_totals[k] += v;
            }
        }
        rank_weights[i][j] = w;
    }
    WeightSolution {
        experts: problem.experts().iter().map(|e| e.id.clone()).collect(),
        attributes: problem.attributes().to_vec(),
        alternatives: problem.alternatives().to_vec(),
        z,
        rank_weights,
        alternative_weights,
        expert_weights,
        attribute_weights,
        alternative_totals,
        utilities,
        irregular_cells: problem
            .irregular_cells()
            .into_iter()
            .map(|(i, j)| (problem.experts()[i].id.clone(), problem.attributes()[j].clone()))
            .collect(),
        excluded_alternatives: problem
            .excluded_alternatives()
            .into_iter()
            .map(|k| problem.alternatives()[k].clone())
            .collect(),
    }
}

/// Ordinal priority weights: `w_ijr = H(r..K_ij) z / (t_i s_ij)`.
pub fn solve_opa(problem: &RankingProblem) -> WeightSolution {
    let coef = UtilityTable::from_fn(problem, |i, j| {
        let k = problem.cell(i, j).max_rank;
        (1..=k).map(|r| harmonic_tail(r, k)).collect()
    });
    let utilities = coef
        .cells()
        .iter()
        .map(|row| {
            row.iter()
                .map(|cell| cell.iter().map(|h| h / cell.len() as f64).collect())
                .collect()
        })
        .collect();
    assemble(problem, &coef, utilities)
}

/// Checks that each cell is normalized, nonnegative and nonincreasing.
pub fn check_utilities(problem: &RankingProblem, utilities: &UtilityTable) -> Result<()> {
    utilities.check_dims(problem)?;
    for (i, j) in problem.cell_indices() {
        let u = utilities.cell(i, j);
        let shape_err = |message: String| GopaError::UtilityShape {
            expert: problem.experts()[i].id.clone(),
            attribute: problem.attributes()[j].clone(),
            message,
        };
        let total: f64 = u.iter().sum();
        if (total - 1.0).abs() > SHAPE_TOL {
            return Err(shape_err(format!("utilities sum to {total}, not 1")));
        }
        if let Some(r) = u.iter().position(|&x| x < -SHAPE_TOL || !x.is_finite()) {
            return Err(shape_err(format!("utility at rank {} is {}", r + 1, u[r])));
        }
        if let Some(r) = u.windows(2).position(|w| w[1] > w[0] + SHAPE_TOL) {
            return Err(shape_err(format!(
                "utility increases from rank {} to rank {}",
                r + 1,
                r + 2
            )));
        }
    }
    Ok(())
}

/// Weights from elicited utilities: `w_ijr = K_ij U_ijr z / (t_i s_ij)`.
pub fn solve_gopa(problem: &RankingProblem, utilities: &UtilityTable) -> Result<WeightSolution> {
    check_utilities(problem, utilities)?;
    let coef = UtilityTable::from_fn(problem, |i, j| {
        let k = problem.cell(i, j).max_rank as f64;
        utilities.cell(i, j).iter().map(|u| k * u).collect()
    });
    Ok(assemble(problem, &coef, utilities.cells().to_vec()))
}

/// Marginal sums `(W^Q, W^N, W^M)` of the mapped weight tensor.
pub fn aggregate(solution: &WeightSolution) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = &solution.alternative_weights;
    let (ni, nj, nk) = (
        solution.experts.len(),
        solution.attributes.len(),
        solution.alternatives.len(),
    );
    let mut q = vec![0.0; ni];
    let mut n = vec![0.0; nj];
    let mut m = vec![0.0; nk];
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                q[i] += w[i][j][k];
                n[j] += w[i][j][k];
                m[k] += w[i][j][k];
            }
        }
    }
    (q, n, m)
}

/// Expert weight and rank-based net utility, `w_ir = W^Q_i u_ir`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpertDecomposition {
    pub expert_weight: f64,
    /// `u_ir` for `r = 1..=K`.
    pub net_utility: Vec<f64>,
}

/// Splits rank weights into expert weight times net utility, where
/// `w_ir = sum_j w_ijr`.
pub fn decompose(solution: &WeightSolution) -> Result<Vec<ExpertDecomposition>> {
    if !solution.irregular_cells.is_empty() {
        return Err(GopaError::DecompositionUnsupported);
    }
    Ok(solution
        .rank_weights
        .iter()
        .zip(&solution.expert_weights)
        .map(|(cells, &wq)| {
            let k = cells.first().map_or(0, Vec::len);
            let net_utility = (0..k)
                .map(|r| cells.iter().map(|cell| cell[r]).sum::<f64>() / wq)
                .collect();
            ExpertDecomposition {
                expert_weight: wq,
                net_utility,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiscreteStructure, Expert};
    use crate::structures::surrogate_weights;

    fn regular(expert_ranks: &[u32], nj: usize, nk: usize) -> RankingProblem {
        let ni = expert_ranks.len();
        RankingProblem::new(
            expert_ranks
                .iter()
                .enumerate()
                .map(|(i, &rank)| Expert { id: format!("E{}", i + 1), rank })
                .collect(),
            (1..=nj).map(|j| format!("C{j}")).collect(),
            (1..=nk).map(|k| format!("A{k}")).collect(),
            vec![(1..=nj as u32).collect(); ni],
            vec![vec![(1..=nk as u32).map(Some).collect(); nj]; ni],
        )
        .unwrap()
    }

    #[test]
    fn single_everything() {
        let s = solve_opa(&regular(&[1], 1, 1));
        assert_eq!(s.z, 1.0);
        assert_eq!(s.rank_weights[0][0], vec![1.0]);
        assert_eq!(s.expert_weights, vec![1.0]);
        assert_eq!(s.attribute_weights, vec![1.0]);
    }

    #[test]
    fn three_by_five_by_ten() {
        let s = solve_opa(&regular(&[1, 2, 3], 5, 10));
        let expected = 1.0 / (10.0 * harmonic_tail(1, 3) * harmonic_tail(1, 5));
        assert!((s.z - expected).abs() < 1e-15);
        assert!((s.z - 0.0238885).abs() < 1e-6);
        assert!((s.normalization() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_gopa_case() {
        let p = regular(&[1], 1, 2);
        let u = UtilityTable::new(vec![vec![vec![0.7, 0.3]]]);
        let s = solve_gopa(&p, &u).unwrap();
        assert!((s.z - 0.5).abs() < 1e-15);
        assert!((s.rank_weights[0][0][0] - 0.7).abs() < 1e-15);
        assert!((s.rank_weights[0][0][1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn roc_utilities_reproduce_opa() {
        let p = regular(&[2, 1, 3], 4, 6);
        let roc = surrogate_weights(DiscreteStructure::RankOrderCentroid, 6).unwrap();
        let u = UtilityTable::from_fn(&p, |_, _| roc.values().to_vec());
        let a = solve_gopa(&p, &u).unwrap();
        let b = solve_opa(&p);
        assert!((a.z - b.z).abs() < 1e-15);
        for (x, y) in a.alternative_weights.iter().flatten().flatten().zip(b.alternative_weights.iter().flatten().flatten()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn increasing_utilities_rejected() {
        let p = regular(&[1], 1, 2);
        let u = UtilityTable::new(vec![vec![vec![0.3, 0.7]]]);
        assert!(matches!(solve_gopa(&p, &u), Err(GopaError::UtilityShape { .. })));
        let u = UtilityTable::new(vec![vec![vec![0.6, 0.3]]]);
        assert!(matches!(solve_gopa(&p, &u), Err(GopaError::UtilityShape { .. })));
    }

    #[test]
    fn duplicates_share_weight_and_exclusions_are_zero() {
        let p = RankingProblem::new(
            vec![Expert { id: "E1".into(), rank: 1 }],
            vec!["C1".into()],
            (1..=4).map(|k| format!("A{k}")).collect(),
            vec![vec![1]],
            vec![vec![vec![Some(1), Some(2), Some(2), None]]],
        )
        .unwrap();
        let s = solve_opa(&p);
        let w = &s.alternative_weights[0][0];
        assert_eq!(w[1], w[2]);
        assert_eq!(w[3], 0.0);
        assert!((s.normalization() - 1.0).abs() < 1e-12);
        assert_eq!(s.excluded_alternatives, vec!["A4".to_string()]);
        assert!(matches!(decompose(&s), Err(GopaError::DecompositionUnsupported)));
    }

    #[test]
    fn decomposition_identities() {
        let s = solve_opa(&regular(&[1, 2], 1, 2));
        let d = decompose(&s).unwrap();
        assert!((d[0].expert_weight - 2.0 / 3.0).abs() < 1e-15);
        assert!((d[1].expert_weight - 1.0 / 3.0).abs() < 1e-15);
        assert!((d[0].net_utility[0] - 0.75).abs() < 1e-15);
        assert!((d[1].net_utility[0] - 0.75).abs() < 1e-15);

        let s = solve_opa(&regular(&[3, 1, 2], 5, 10));
        for (i, part) in decompose(&s).unwrap().iter().enumerate() {
            assert!((part.net_utility[0] - 0.292897).abs() < 1e-6);
            for r in 0..10 {
                let w_ir: f64 = s.rank_weights[i].iter().map(|c| c[r]).sum();
                assert!((part.expert_weight * part.net_utility[r] - w_ir).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggregate_matches_stored_totals() {
        let s = solve_opa(&regular(&[1, 2], 3, 4));
        let (q, n, m) = aggregate(&s);
        assert_eq!(q, s.expert_weights);
        assert_eq!(n, s.attribute_weights);
        assert_eq!(m, s.alternative_totals);
        for v in [&q, &n, &m] {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
