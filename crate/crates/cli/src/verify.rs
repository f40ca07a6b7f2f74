//! `verify`: closed-form optimum against the simplex.

use anyhow::Result;
use gopa::elicit_discrete::UtilityTable;
use gopa::lpcheck::{build_gopa_lp, build_opa_lp, solve_lp, LpStatus};
use gopa::model::random_problem;
use gopa::pipeline::elicit_all;
use gopa::solver::{solve_gopa, solve_opa};
use gopa::{DecisionInput, GopaError, RankingProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::emit;
use crate::VerifyArgs;

#[derive(Serialize)]
struct Comparison {
    instance: String,
    method: &'static str,
    formula: f64,
    simplex: Option<f64>,
    gap: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    instances: usize,
    seed: u64,
    tolerance: f64,
    max_gap: f64,
    failures: Vec<Comparison>,
    input: Vec<Comparison>,
    pass: bool,
}

fn compare(
    instance: String,
    method: &'static str,
    formula: f64,
    lp: &gopa::lpcheck::LinearProgram,
    tol: f64,
) -> Result<Comparison> {
    let sol = solve_lp(lp)?;
    let simplex = (sol.status == LpStatus::Optimal).then_some(sol.value);
    let gap = simplex.map(|v| (v - formula).abs());
    Ok(Comparison {
        instance,
        method,
        formula,
        simplex,
        gap,
        pass: gap.is_some_and(|g| g <= tol),
    })
}

fn random_utilities(rng: &mut ChaCha8Rng, p: &RankingProblem) -> UtilityTable {
    UtilityTable::from_fn(p, |i, j| {
        let k = p.cell(i, j).max_rank;
        let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = v.iter().sum();
        v.into_iter().map(|x| x / total).collect()
    })
}

fn check_problem(
    name: String,
    p: &RankingProblem,
    u: &UtilityTable,
    tol: f64,
) -> Result<[Comparison; 2]> {
    Ok([
        compare(name.clone(), "opa", solve_opa(p).z, &build_opa_lp(p).lp, tol)?,
        compare(name, "gopa", solve_gopa(p, u)?.z, &build_gopa_lp(p, u)?.lp, tol)?,
    ])
}

pub fn run(args: &VerifyArgs) -> Result<u8> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(GopaError::Validation {
            path: "--tol".into(),
            message: "tolerance must be positive".into(),
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut all = Vec::new();
    for n in 0..args.samples {
        let (i, j, k) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(2..=6));
        let p = random_problem(&mut rng, i, j, k, n % 2 == 1);
        let u = random_utilities(&mut rng, &p);
        all.extend(check_problem(format!("random-{n}"), &p, &u, args.tol)?);
    }
    let mut input = Vec::new();
    if let Some(path) = &args.input {
        let doc = DecisionInput::from_path(path)?;
        let u = elicit_all(&doc, args.pipeline.options())?.utilities;
        input.extend(check_problem(path.display().to_string(), &doc.problem, &u, args.tol)?);
    }
    let max_gap = all
        .iter()
        .chain(&input)
        .map(|c| c.gap.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let pass = all.iter().chain(&input).all(|c| c.pass);
    let report = VerifyReport {
        instances: args.samples,
        seed: args.seed,
        tolerance: args.tol,
        max_gap,
        failures: all.into_iter().filter(|c| !c.pass).collect(),
        input,
        pass,
    };
    emit(&report, args.output.as_deref(), args.raw)?;
    Ok(if pass { 0 } else { 1 })
}
