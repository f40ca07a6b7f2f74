//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always visible.
//! Checks listed in `UNATTAINABLE` are evaluated against the published
//! value and reported as FAIL, but only break the exit code under
//! `--strict`. Any other failure exits nonzero.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use gopa::elicit_continuous::{
    cumulative_utilities, elicit_continuous, risk_preference, BoundMode, Orientation,
};
use gopa::elicit_discrete::{elicit_discrete, entropy_max_discrete, kkt_residual_discrete, UtilityTable};
use gopa::lpcheck::{build_gopa_lp, build_opa_lp, solve_lp, verify_efficiency, LpStatus};
use gopa::metrics::{f_cdf, gcl, kendall_w, lcl, spearman};
use gopa::model::random_problem;
use gopa::pipeline::{run_gopa, PipelineOptions};
use gopa::sensitivity::run_sensitivity;
use gopa::solver::{solve_gopa, solve_opa};
use gopa::structures::{surrogate_weights, target_density, TargetDensity};
use gopa::{
    CellContext, ContinuousStructure, DecisionInput, DiscreteStructure, GopaError, RankingProblem,
    UtilityStructure,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published fixtures that the documented formulas do not reproduce.
const UNATTAINABLE: &[&str] = &["lcl-0.5154", "kendall-third"];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    fn within(name: impl Into<String>, got: f64, want: f64, tol: f64) -> Self {
        let pass = (got - want).abs() <= tol;
        Check::new(name, pass, format!("got {got:.6} want {want} tol {tol:e}"))
    }
}

fn fixture(name: &str) -> DecisionInput {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name]
        .iter()
        .collect();
    DecisionInput::from_path(path).expect("fixture parses")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn roc(k: usize) -> Vec<f64> {
    surrogate_weights(DiscreteStructure::RankOrderCentroid, k)
        .unwrap()
        .into_vec()
}

/// Same rankings, new attribute ranks.
fn with_attribute_ranks(p: &RankingProblem, s: impl Fn(usize, usize) -> u32) -> RankingProblem {
    let (ni, nj) = (p.num_experts(), p.num_attributes());
    RankingProblem::new(
        p.experts().to_vec(),
        p.attributes().to_vec(),
        p.alternatives().to_vec(),
        (0..ni).map(|i| (0..nj).map(|j| s(i, j)).collect()).collect(),
        (0..ni)
            .map(|i| (0..nj).map(|j| p.alternative_ranks(i, j).to_vec()).collect())
            .collect(),
    )
    .unwrap()
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

fn structures() -> Vec<UtilityStructure> {
    vec![
        UtilityStructure::Discrete(DiscreteStructure::RankOrderCentroid),
        UtilityStructure::Discrete(DiscreteStructure::RankSum),
        UtilityStructure::Discrete(DiscreteStructure::RankReciprocal),
        UtilityStructure::Discrete(DiscreteStructure::SumReciprocal),
        UtilityStructure::Discrete(DiscreteStructure::RankExponent { exponent: 1.17 }),
        UtilityStructure::Continuous(ContinuousStructure::Neutral),
        UtilityStructure::Continuous(ContinuousStructure::Hara {
            alpha: 2.0,
            beta: 1.0,
            gamma: 1.5,
        }),
        UtilityStructure::Continuous(ContinuousStructure::Cara { a: 0.3 }),
        UtilityStructure::Continuous(ContinuousStructure::SShape { steepness: 1.0 }),
    ]
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Vec<Check> {
    let input = fixture("case_study.json");
    let start = Instant::now();
    let run = run_gopa(&input, PipelineOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let want = [0.1460, 0.2190, 0.1095, 0.0876, 0.4380];
    let got = &run.solution.expert_weights;
    let mut checks = vec![Check::new(
        "expert weights",
        max_abs_diff(got, &want) <= 5e-5,
        format!("got {got:.4?}"),
    )];
    // the same weights under other structure mixes
    let mut spread: f64 = 0.0;
    for s in structures() {
        let mut alt = DecisionInput::plain(input.problem.clone());
        for (i, j) in input.problem.cell_indices() {
            alt.structures.set_cell(i, j, s);
        }
        let other = run_gopa(&alt, PipelineOptions::default()).unwrap();
        spread = spread.max(max_abs_diff(&other.solution.expert_weights, got));
    }
    checks.push(Check::new(
        "independent of structures",
        spread <= 1e-12,
        format!("spread {spread:e}"),
    ));
    checks.push(Check::new(
        "runtime",
        elapsed < 1.0,
        format!("{elapsed:.3}s"),
    ));
    checks
}

fn criterion_2() -> Vec<Check> {
    let input = fixture("case_study.json");
    let start = Instant::now();
    let report = run_sensitivity(&input, PipelineOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let mut checks = vec![Check::new(
        "scenarios",
        report.scenarios.len() == 120,
        format!("{}", report.scenarios.len()),
    )];
    let want = [0.2000, 1.1019, -0.3233, 0.6380, 0.0876, 0.4380];
    for row in report.rows.iter().filter(|r| r.kind == "expert") {
        let s = row.stats;
        let got = [s.mean, s.skewness, s.kurtosis, s.cv, s.min, s.max];
        checks.push(Check::new(
            format!("{} stats", row.id),
            max_abs_diff(&got, &want) <= 2e-3,
            format!("got {got:.4?}"),
        ));
    }
    checks.push(Check::new(
        "runtime",
        elapsed < 5.0,
        format!("{elapsed:.3}s"),
    ));
    checks
}

fn criterion_3() -> Vec<Check> {
    let cases = [
        ("lcl-0.5154", 0.5154, 6, 0.9951),
        ("lcl-0.2960", 0.2960, 10, 0.8658),
        ("lcl-0.1893", 0.1893, 10, 0.4941),
    ];
    cases
        .iter()
        .map(|&(name, rho, items, want)| {
            let got = lcl(rho, 5, items).unwrap_or(f64::NAN);
            Check::within(name, got, want, 2e-3)
        })
        .collect()
}

fn criterion_4() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut opa_gap, mut gopa_gap) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for n in 0..50 {
        let (i, j, k) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(2..=6));
        let p = random_problem(&mut rng, i, j, k, n % 2 == 1);

        let lp = solve_lp(&build_opa_lp(&p).lp).unwrap();
        if lp.status != LpStatus::Optimal {
            failures += 1;
            continue;
        }
        opa_gap = opa_gap.max((solve_opa(&p).z - lp.value).abs());

        let u = random_utilities(&mut rng, &p);
        let lp = solve_lp(&build_gopa_lp(&p, &u).unwrap().lp).unwrap();
        if lp.status != LpStatus::Optimal {
            failures += 1;
            continue;
        }
        gopa_gap = gopa_gap.max((solve_gopa(&p, &u).unwrap().z - lp.value).abs());
    }
    vec![
        Check::new("lp optimal", failures == 0, format!("{failures} non-optimal")),
        Check::new("ordinal", opa_gap <= 1e-8, format!("max gap {opa_gap:e}")),
        Check::new("elicited", gopa_gap <= 1e-8, format!("max gap {gopa_gap:e}")),
    ]
}

fn criterion_5() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (i, j, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(2..=8));
        let p = random_problem(&mut rng, i, j, k, false);
        let zs: Vec<f64> = structures()
            .into_iter()
            .map(|s| {
                let mut input = DecisionInput::plain(p.clone());
                for (i, j) in p.cell_indices() {
                    input.structures.set_cell(i, j, s);
                }
                run_gopa(&input, PipelineOptions::default()).unwrap().solution.z
            })
            .collect();
        let hi = zs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = zs.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
    }
    vec![Check::new(
        "z spread over 9 structures",
        worst <= 1e-12,
        format!("max spread {worst:e}"),
    )]
}

fn criterion_6() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut a, mut b, mut c, mut d) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for n in 0..30 {
        let (ni, nj, nk) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(2..=8));
        let p = random_problem(&mut rng, ni, nj, nk, n % 2 == 1);

        // (a) ROC utilities reproduce the ordinal solution
        let u = UtilityTable::from_fn(&p, |i, j| roc(p.cell(i, j).max_rank));
        let g = solve_gopa(&p, &u).unwrap();
        let o = solve_opa(&p);
        for i in 0..ni {
            for j in 0..nj {
                a = a.max(max_abs_diff(&g.alternative_weights[i][j], &o.alternative_weights[i][j]));
            }
        }
        a = a.max((g.z - o.z).abs());

        if n % 2 == 1 {
            continue;
        }
        // (b) equal expert and attribute importance
        let flat = with_attribute_ranks(&p, |_, _| 1).with_expert_ranks(&vec![1; ni]).unwrap();
        let s = solve_opa(&flat);
        for i in 0..ni {
            for j in 0..nj {
                let w = &s.rank_weights[i][j];
                let total: f64 = w.iter().sum();
                let shares: Vec<f64> = w.iter().map(|x| x / total).collect();
                b = b.max(max_abs_diff(&shares, &roc(nk)));
            }
        }
        let single = random_problem(&mut rng, 1, 1, nk, false);
        let s = solve_opa(&single);
        let mapped: Vec<f64> = (0..nk)
            .map(|k| roc(nk)[single.alternative_rank(0, 0, k).unwrap() as usize - 1])
            .collect();
        b = b.max(max_abs_diff(&s.alternative_totals, &mapped));

        // (c) equal expert importance
        let even = p.with_expert_ranks(&vec![1; ni]).unwrap();
        let s = solve_opa(&even);
        let rr = surrogate_weights(DiscreteStructure::RankReciprocal, nj)
            .unwrap()
            .into_vec();
        for i in 0..ni {
            let per_attr: Vec<f64> = (0..nj).map(|j| s.cell_total(i, j)).collect();
            let total: f64 = per_attr.iter().sum();
            let want: Vec<f64> = (0..nj).map(|j| rr[even.attribute_rank(i, j) as usize - 1]).collect();
            let got: Vec<f64> = per_attr.iter().map(|x| x / total).collect();
            c = c.max(max_abs_diff(&got, &want));
        }
    }
    // (d) risk-neutral density without context
    for k in 1..=15 {
        let t = target_density(ContinuousStructure::Neutral, k).unwrap();
        let dens = elicit_continuous(&t, &CellContext::new(), k, BoundMode::Equality).unwrap();
        let u = cumulative_utilities(&dens, k, Orientation::Reversed);
        let rs = surrogate_weights(DiscreteStructure::RankSum, k).unwrap().into_vec();
        d = d.max(max_abs_diff(&u, &rs));
    }
    vec![
        Check::new("(a) roc = ordinal", a <= 1e-12, format!("{a:e}")),
        Check::new("(b) equal importance = roc", b <= 1e-12, format!("{b:e}")),
        Check::new("(c) equal experts = rr", c <= 1e-12, format!("{c:e}")),
        Check::new("(d) neutral = rs", d <= 1e-10, format!("{d:e}")),
    ]
}

// ---------------------------------------------------------------------------
// Grid oracle for discrete elicitation.
//
// A weakly ordered utility vector is written through its differences
// d_r = u_r - u_{r+1} (u_{K+1} = 0), so that sum u = sum r d_r. Ranks with an
// equality fix d_r; the lowest free rank is solved from the normalization and
// the remaining free ranks run over a 1e-3 grid.

#[derive(Clone, Copy)]
enum Fixed {
    Free,
    Ratio(f64),
    Diff(f64),
}

fn kl(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 })
        .sum()
}

fn utilities_from(d: &[f64], fixed: &[Fixed], solved: usize, f: f64, u: &mut [f64]) {
    let k = d.len();
    let mut next = 0.0;
    for r in (0..k).rev() {
        let step = match fixed[r] {
            Fixed::Ratio(alpha) => (alpha - 1.0) * next,
            Fixed::Diff(beta) => beta,
            Fixed::Free if r == solved => f,
            Fixed::Free => d[r],
        };
        next += step;
        u[r] = next;
    }
}

fn grid_best(target: &[f64], ctx: &CellContext, step: f64) -> Option<f64> {
    let k = target.len();
    let mut fixed = vec![Fixed::Free; k];
    for c in &ctx.ratio {
        fixed[c.rank - 1] = Fixed::Ratio(c.alpha);
    }
    for c in &ctx.absdiff {
        fixed[c.rank - 1] = Fixed::Diff(c.beta);
    }
    let free: Vec<usize> = (0..k).filter(|&r| matches!(fixed[r], Fixed::Free)).collect();
    let solved = free[0];
    let grid: Vec<usize> = free[1..].to_vec();

    let mut best: Option<f64> = None;
    let mut d = vec![0.0; k];
    let (mut u0, mut u1, mut u) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut visit = |d: &[f64], best: &mut Option<f64>| {
        utilities_from(d, &fixed, solved, 0.0, &mut u0);
        utilities_from(d, &fixed, solved, 1.0, &mut u1);
        let (s0, s1): (f64, f64) = (u0.iter().sum(), u1.iter().sum());
        let f = (1.0 - s0) / (s1 - s0);
        if f < 0.0 {
            return;
        }
        for r in 0..k {
            u[r] = u0[r] + f * (u1[r] - u0[r]);
        }
        if u.windows(2).any(|w| w[0] < w[1] - 1e-15) || u[k - 1] < 0.0 {
            return;
        }
        if ctx.lower_bounds.iter().any(|b| u[b.rank - 1] < b.gamma) {
            return;
        }
        let value = kl(&u, target);
        if best.is_none_or(|b| value < b) {
            *best = Some(value);
        }
    };

    // odometer over the grid ranks, pruned on sum r d_r <= 1
    fn walk(
        level: usize,
        grid: &[usize],
        used: f64,
        step: f64,
        d: &mut Vec<f64>,
        best: &mut Option<f64>,
        visit: &mut dyn FnMut(&[f64], &mut Option<f64>),
    ) {
        if level == grid.len() {
            visit(d, best);
            return;
        }
        let r = grid[level];
        let weight = (r + 1) as f64;
        let mut n = 0usize;
        loop {
            let value = n as f64 * step;
            if used + weight * value > 1.0 + 1e-12 {
                break;
            }
            d[r] = value;
            walk(level + 1, grid, used + weight * value, step, d, best, visit);
            n += 1;
        }
        d[r] = 0.0;
    }
    walk(0, &grid, 0.0, step, &mut d, &mut best, &mut visit);
    best
}

fn random_context(rng: &mut ChaCha8Rng, k: usize) -> CellContext {
    let mut ctx = CellContext::new();
    let mut taken = vec![false; k + 1];
    if k >= 2 && rng.gen_bool(0.6) {
        let r = rng.gen_range(1..k);
        taken[r] = true;
        ctx = ctx.with_ratio(r, rng.gen_range(1.0..1.6));
    }
    if k >= 3 && rng.gen_bool(0.5) {
        let r = rng.gen_range(1..k);
        if !taken[r] {
            ctx = ctx.with_absdiff(r, rng.gen_range(0.0..0.15));
        }
    }
    if rng.gen_bool(0.5) {
        let r = rng.gen_range(1..=k);
        ctx = ctx.with_lower_bound(r, rng.gen_range(0.0..0.9 / k as f64));
    }
    ctx
}

fn random_target(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let kinds = [
        DiscreteStructure::RankSum,
        DiscreteStructure::RankOrderCentroid,
        DiscreteStructure::RankReciprocal,
        DiscreteStructure::SumReciprocal,
        DiscreteStructure::RankExponent { exponent: 1.17 },
        DiscreteStructure::UniformDiscrete,
    ];
    let pick = rng.gen_range(0..=kinds.len());
    if pick == kinds.len() {
        let v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = v.iter().sum();
        return v.into_iter().map(|x| x / total).collect();
    }
    surrogate_weights(kinds[pick], k).unwrap().into_vec()
}

fn criterion_7() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_gap, mut worst_kkt, mut worst_uniform) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    let mut solved = 0;
    let mut infeasible = 0;
    let mut graded = 0;
    while solved < 100 {
        let k = rng.gen_range(2..=4);
        let ctx = random_context(&mut rng, k);
        let target = random_target(&mut rng, k);
        let u = match elicit_discrete(&target, &ctx, k) {
            Ok(u) => u,
            Err(GopaError::InfeasibleContext(_)) => {
                infeasible += 1;
                continue;
            }
            Err(e) => panic!("elicitation failed: {e}"),
        };
        solved += 1;
        worst_kkt = worst_kkt.max(kkt_residual_discrete(&u, &target, &ctx));
        if let Some(best) = grid_best(&target, &ctx, 1e-3) {
            graded += 1;
            worst_gap = worst_gap.max(kl(&u, &target) - best);
        }
        let flat = elicit_discrete(&vec![1.0 / k as f64; k], &ctx, k).unwrap();
        let maxent = entropy_max_discrete(&ctx, k).unwrap();
        worst_uniform = worst_uniform.max(max_abs_diff(&flat, &maxent));
    }
    vec![
        Check::new(
            "grid oracle",
            worst_gap <= 1e-4 && graded > 50,
            format!("{graded} graded, {infeasible} infeasible skipped, solver - grid <= {worst_gap:.2e}"),
        ),
        Check::new("kkt residual", worst_kkt <= 1e-8, format!("{worst_kkt:e}")),
        Check::new("uniform target = max entropy", worst_uniform <= 1e-8, format!("{worst_uniform:e}")),
    ]
}

// ---------------------------------------------------------------------------

/// Integral of `f` over `[lo, hi]` by composite 5-point Gauss-Legendre after
/// `x = lo + (hi - lo) t^2`, which removes an integrable `x^-g` singularity
/// at `lo`. Nodes never touch the endpoints.
fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let panels = 200;
    let w = hi - lo;
    let g = |t: f64| f(lo + w * t * t) * 2.0 * w * t;
    let h = 1.0 / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = (p as f64 + 0.5) * h;
            NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(x, wt)| wt * g(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

fn example3() -> CellContext {
    CellContext::new()
        .with_lower_bound(1, 0.32)
        .with_ratio(3, 1.15)
        .with_absdiff(5, 0.065)
}

fn continuous_targets(k: usize) -> Vec<(String, TargetDensity)> {
    let kinds = [
        ContinuousStructure::Hara {
            alpha: 2.0,
            beta: 1.0,
            gamma: 1.5,
        },
        ContinuousStructure::Neutral,
        ContinuousStructure::Crra {
            alpha: 1.0,
            gamma: 0.5,
        },
        ContinuousStructure::Cara { a: 0.3 },
        ContinuousStructure::Cara { a: -0.4 },
        ContinuousStructure::SShape { steepness: 1.0 },
    ];
    kinds
        .iter()
        .map(|&s| (format!("{s:?}"), target_density(s, k).unwrap()))
        .collect()
}

fn criterion_8() -> Vec<Check> {
    let (mut spread, mut eta, mut eta_fd, mut cdf_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut example = Check::new("example 3 with hara(2,1,1.5)", false, "not run");
    let mut contexts: Vec<(usize, CellContext)> = vec![(7, example3()), (10, example3())];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    while contexts.len() < 12 {
        let k = rng.gen_range(3..=9);
        contexts.push((k, random_context(&mut rng, k)));
    }
    let mut solved = 0;
    for (n, (k, ctx)) in contexts.iter().enumerate() {
        for (name, target) in continuous_targets(*k) {
            let d = match elicit_continuous(&target, ctx, *k, BoundMode::Equality) {
                Ok(d) => d,
                Err(GopaError::InfeasibleContext(_)) if n >= 2 => continue,
                Err(e) => panic!("{name} on k={k}: {e}"),
            };
            solved += 1;
            if n == 0 && name.starts_with("Hara") {
                let bps = d.breakpoints().to_vec();
                example = Check::new(
                    "example 3 with hara(2,1,1.5)",
                    bps == vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0],
                    format!("breakpoints {bps:?}"),
                );
            }
            let bps = d.breakpoints().to_vec();
            for seg in bps.windows(2) {
                let (lo, hi) = (seg[0], seg[1]);
                let ratios: Vec<f64> = (0..1000)
                    .map(|m| {
                        let x = lo + (hi - lo) * (m as f64 + 0.5) / 1000.0;
                        d.eval(x) / target.eval(x)
                    })
                    .collect();
                let top = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let bottom = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                if top > 0.0 {
                    spread = spread.max((top - bottom) / top);
                }
                if top == 0.0 {
                    continue;
                }
                for m in 1..20 {
                    let x = lo + 0.01 + (hi - lo - 0.02) * m as f64 / 20.0;
                    let e = risk_preference(&d, x).unwrap();
                    eta = eta.max((e - target.risk_preference(x)).abs());
                    let h = 1e-5 * x.min(1.0);
                    let fd = -(d.eval(x + h).ln() - d.eval(x - h).ln()) / (2.0 * h);
                    eta_fd = eta_fd.max((fd - e).abs());
                }
            }
            // cumulative constraints from an independent integration
            let cdf = |r: usize| -> f64 {
                let x = r as f64;
                bps.windows(2)
                    .map(|s| (s[0], s[1].min(x)))
                    .filter(|(lo, hi)| hi > lo)
                    .map(|(lo, hi)| integrate(|t| d.eval(t), lo, hi))
                    .sum()
            };
            cdf_err = cdf_err.max((cdf(*k) - 1.0).abs());
            for c in &ctx.ratio {
                cdf_err = cdf_err.max((cdf(c.rank) - c.alpha * cdf(c.rank - 1)).abs());
            }
            for c in &ctx.absdiff {
                cdf_err = cdf_err.max((cdf(c.rank) - cdf(c.rank - 1) - c.beta).abs());
            }
            for c in &ctx.lower_bounds {
                cdf_err = cdf_err.max((cdf(c.rank) - c.gamma).abs());
            }
        }
    }
    vec![
        example,
        Check::new("solved", solved >= 20, format!("{solved} densities")),
        Check::new("segment ratio spread", spread <= 1e-9, format!("{spread:e}")),
        Check::new("risk preference", eta <= 1e-6, format!("{eta:e}")),
        Check::new("finite differences", eta_fd <= 1e-6, format!("{eta_fd:e}")),
        Check::new("cdf constraints", cdf_err <= 1e-8, format!("{cdf_err:e}")),
    ]
}

fn criterion_9() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut held, mut refused, mut worst) = (0, 0, 0.0f64);
    let total = 30;
    for _ in 0..total {
        let (ni, nj, nk) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(2..=5));
        let p = random_problem(&mut rng, ni, nj, nk, false);
        let z = solve_opa(&p).z;
        let check = verify_efficiency(&p, z).unwrap();
        worst = worst.max((check.min_delta - z).abs());
        if check.lemma_holds {
            held += 1;
        }
        if matches!(verify_efficiency(&p, 1.1 * z), Err(GopaError::InfeasibleStage2(_))) {
            refused += 1;
        }
    }
    vec![
        Check::new(
            "min slack = z*",
            held == total,
            format!("{held}/{total}, max gap {worst:e}"),
        ),
        Check::new("1.1 z* infeasible", refused == total, format!("{refused}/{total}")),
    ]
}

fn criterion_10() -> Vec<Check> {
    let mut checks = vec![Check::within("f(1;1,1)", f_cdf(1.0, 1.0, 1.0).unwrap(), 0.5, 1e-10)];
    let worst = (1..=20)
        .map(|m| {
            let x = m as f64 * 0.37;
            (f_cdf(x, 2.0, 2.0).unwrap() - x / (1.0 + x)).abs()
        })
        .fold(0.0, f64::max);
    checks.push(Check::new("f(x;2,2)", worst <= 1e-10, format!("{worst:e}")));

    let same = vec![vec![1.0, 2.0, 3.0, 4.0]; 3];
    checks.push(Check::within("kendall identical", kendall_w(&same).unwrap(), 1.0, 1e-12));
    let reversed = vec![vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 3.0, 2.0, 1.0]];
    checks.push(Check::within("kendall reversed", kendall_w(&reversed).unwrap(), 0.0, 1e-12));
    let third = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]];
    checks.push(Check::within(
        "kendall-third",
        kendall_w(&third).unwrap(),
        1.0 / 3.0,
        1e-12,
    ));

    let a = [1.0, 2.0, 3.0, 4.0];
    checks.push(Check::within("spearman identical", spearman(&a, &a).unwrap(), 1.0, 1e-12));
    checks.push(Check::within(
        "spearman reversed",
        spearman(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(),
        -1.0,
        1e-12,
    ));
    checks.push(Check::within(
        "spearman swap",
        spearman(&a, &[1.0, 2.0, 4.0, 3.0]).unwrap(),
        0.8,
        1e-12,
    ));
    checks
}

/// Global confidence from the published per-attribute concordances, with
/// the printed attribute weights rescaled to sum to one.
fn gcl_loose() -> Vec<Check> {
    let weights = [0.2444, 0.1481, 0.1329, 0.0512, 0.2007, 0.0931];
    let rho = [0.1893, 0.2213, 0.1496, 0.0982, 0.2882, 0.2960];
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let per: Vec<f64> = rho.iter().map(|&r| lcl(r, 5, 10).unwrap()).collect();
    let got = gcl(lcl(0.5154, 5, 6).unwrap(), &w, &per);
    vec![Check::within("gcl", got, 0.5797, 5e-3)]
}

// ---------------------------------------------------------------------------

type Criterion = fn() -> Vec<Check>;

fn main() {
    let strict = std::env::args().any(|a| a == "--strict");
    let criteria: Vec<(&str, &str, Criterion)> = vec![
        ("1", "case-study expert weights", criterion_1),
        ("2", "permutation sensitivity", criterion_2),
        ("3", "confidence levels", criterion_3),
        ("4", "closed form vs simplex", criterion_4),
        ("5", "z* invariance", criterion_5),
        ("6", "degenerations", criterion_6),
        ("7", "discrete elicitation optimality", criterion_7),
        ("8", "continuous elicitation", criterion_8),
        ("9", "efficiency program", criterion_9),
        ("10", "metrics sanity", criterion_10),
        ("gcl", "global confidence (loose)", gcl_loose),
    ];
    let mut hard_failures = 0;
    let mut known_failures = 0;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let checks = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![Check::new("panic", false, msg)]
        });
        let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
        let ok = failed.is_empty();
        let summary = if ok {
            checks
                .iter()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; ")
        } else {
            failed
                .iter()
                .map(|c| {
                    let tag = if UNATTAINABLE.contains(&c.name.as_str()) {
                        " [documented]"
                    } else {
                        ""
                    };
                    format!("{}: {}{tag}", c.name, c.detail)
                })
                .collect::<Vec<_>>()
                .join("; ")
        };
        println!(
            "criterion {id:>3}: {} {title} ({:.2}s) {summary}",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for c in failed {
            if UNATTAINABLE.contains(&c.name.as_str()) {
                known_failures += 1;
            } else {
                hard_failures += 1;
            }
        }
    }
    println!("acceptance: {hard_failures} unexpected failures, {known_failures} documented failures");
    if hard_failures > 0 || (strict && known_failures > 0) {
        std::process::exit(1);
    }
}
