//! `sensitivity`: expert-rank permutations.

use anyhow::Result;
use gopa::sensitivity::{run_scenarios, run_sensitivity, Scenario, StatsRow};
use gopa::DecisionInput;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{cell, emit_common, write_csv};
use crate::SensitivityArgs;

#[derive(Serialize)]
struct SensitivityOutput<'a> {
    scenario_count: usize,
    sampled: bool,
    rows: &'a [StatsRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    scenarios: Option<&'a [Scenario]>,
}

pub fn run(args: &SensitivityArgs) -> Result<u8> {
    let input = DecisionInput::from_path(&args.common.input)?;
    let options = args.pipeline.options();
    let report = match args.samples {
        None => run_sensitivity(&input, options)?,
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            let base: Vec<u32> = (1..=input.problem.num_experts() as u32).collect();
            let orders = (0..n).map(|_| {
                let mut order = base.clone();
                order.shuffle(&mut rng);
                order
            });
            run_scenarios(&input, options, orders.collect::<Vec<_>>())?
        }
    };
    if let Some(dir) = &args.csv {
        let raw = args.common.raw;
        let rows = report
            .rows
            .iter()
            .map(|r| {
                let s = r.stats;
                let mut row = vec![r.kind.to_string(), r.id.clone()];
                row.extend([s.mean, s.skewness, s.kurtosis, s.cv, s.min, s.max].map(|x| cell(x, raw)));
                row
            })
            .collect();
        write_csv(
            dir,
            "sensitivity.csv",
            &["kind", "id", "mean", "skewness", "kurtosis", "cv", "min", "max"],
            rows,
        )?;
    }
    emit_common(
        &SensitivityOutput {
            scenario_count: report.scenarios.len(),
            sampled: args.samples.is_some(),
            rows: &report.rows,
            scenarios: args.scenarios.then_some(&report.scenarios[..]),
        },
        &args.common,
    )?;
    Ok(0)
}
