//! Expert-rank permutation study and descriptive statistics of the
//! resulting weights.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{GopaError, Result};
use crate::model::{DecisionInput, RankingProblem};
use crate::pipeline::{elicit_all, PipelineOptions};
use crate::solver::solve_gopa;

/// Largest expert count accepted for full permutation (8! scenarios).
pub const MAX_PERMUTED_EXPERTS: usize = 8;

/// Every assignment of the ranks `1..=I` to the experts, in lexicographic
/// order; attribute and alternative ranks are untouched.
pub fn permute_experts(
    problem: &RankingProblem,
) -> Result<impl Iterator<Item = (Vec<u32>, RankingProblem)> + '_> {
    let n = problem.num_experts();
    if n > MAX_PERMUTED_EXPERTS {
        return Err(GopaError::TooManyExperts(n));
    }
    Ok((1..=n as u32).permutations(n).map(move |ranks| {
        let scenario = problem
            .with_expert_ranks(&ranks)
            .expect("permuted ranks are positive");
        (ranks, scenario)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Descriptive {
    pub mean: f64,
    /// Adjusted Fisher-Pearson skewness.
    pub skewness: f64,
    /// Bias-corrected excess kurtosis.
    pub kurtosis: f64,
    /// Sample standard deviation over the mean.
    pub cv: f64,
    pub min: f64,
    pub max: f64,
}

/// Descriptive statistics of at least four samples.
pub fn describe(samples: &[f64]) -> Result<Descriptive> {
    let n = samples.len();
    if n < 4 {
        return Err(GopaError::SampleSize(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let moment = |p: i32| samples.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / nf;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));
    let (skewness, kurtosis) = if m2 <= f64::EPSILON * mean.abs().max(1.0) * 1e-6 {
        (0.0, 0.0)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        (
            g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0),
            ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)),
        )
    };
    let sd = (m2 * nf / (nf - 1.0)).sqrt();
    Ok(Descriptive {
        mean,
        skewness,
        kurtosis,
        cv: if sd == 0.0 { 0.0 } else { sd / mean },
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub expert_ranks: Vec<u32>,
    pub z: f64,
    pub expert_weights: Vec<f64>,
    pub attribute_weights: Vec<f64>,
    pub alternative_totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    /// `expert`, `attribute`, or `alternative`.
    pub kind: &'static str,
    pub id: String,
    pub stats: Descriptive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub scenarios: Vec<Scenario>,
    pub rows: Vec<StatsRow>,
}

/// Elicits the utilities once and re-solves the weights for every
/// permutation of the expert ranks.
pub fn run_sensitivity(input: &DecisionInput, options: PipelineOptions) -> Result<SensitivityReport> {
    let orders: Vec<Vec<u32>> = permute_experts(&input.problem)?.map(|(r, _)| r).collect();
    run_scenarios(input, options, orders)
}

/// Like [`run_sensitivity`] over caller-chosen expert rank vectors.
pub fn run_scenarios(
    input: &DecisionInput,
    options: PipelineOptions,
    expert_ranks: impl IntoIterator<Item = Vec<u32>>,
) -> Result<SensitivityReport> {
    let problem = &input.problem;
    let elicitation = elicit_all(input, options)?;
    let mut scenarios = Vec::new();
    for ranks in expert_ranks {
        let scenario = problem.with_expert_ranks(&ranks)?;
        let s = solve_gopa(&scenario, &elicitation.utilities)?;
        scenarios.push(Scenario {
            expert_ranks: ranks,
            z: s.z,
            expert_weights: s.expert_weights,
            attribute_weights: s.attribute_weights,
            alternative_totals: s.alternative_totals,
        });
    }
    let mut rows = Vec::new();
    let mut push = |kind: &'static str, ids: Vec<String>, get: &dyn Fn(&Scenario) -> &Vec<f64>| {
        for (idx, id) in ids.into_iter().enumerate() {
            let samples: Vec<f64> = scenarios.iter().map(|s| get(s)[idx]).collect();
            if let Ok(stats) = describe(&samples) {
                rows.push(StatsRow { kind, id, stats });
            }
        }
    };
    push(
        "expert",
        problem.experts().iter().map(|e| e.id.clone()).collect(),
        &|s| &s.expert_weights,
    );
    push("attribute", problem.attributes().to_vec(), &|s| &s.attribute_weights);
    push("alternative", problem.alternatives().to_vec(), &|s| &s.alternative_totals);
    Ok(SensitivityReport { scenarios, rows })
}
