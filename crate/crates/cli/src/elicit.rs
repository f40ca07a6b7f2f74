//! `elicit`: first-stage utilities per cell.

use anyhow::Result;
use gopa::elicit_continuous::PiecewiseDensity;
use gopa::pipeline::elicit_cell;
use gopa::structures::{surrogate_weights, target_density};
use gopa::{DecisionInput, GopaError, RankingProblem, UtilityStructure};
use serde::Serialize;

use crate::output::emit_common;
use crate::solve::write_utilities_csv;
use crate::ElicitArgs;

#[derive(Serialize)]
struct DensityReport {
    breakpoints: Vec<f64>,
    scales: Vec<f64>,
    segment_masses: Vec<f64>,
    lambda0: f64,
    multipliers: Vec<f64>,
    /// Elicited CDF at `0, 1, ..., K`.
    cdf: Vec<f64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Target {
    Discrete(Vec<f64>),
    /// Target CDF at `0, 1, ..., K`.
    Continuous { cdf: Vec<f64> },
}

#[derive(Serialize)]
struct CellReport {
    expert: String,
    attribute: String,
    structure: UtilityStructure,
    max_rank: usize,
    utilities: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density: Option<DensityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<Target>,
}

#[derive(Serialize)]
struct ElicitReport {
    options: gopa::pipeline::PipelineOptions,
    cells: Vec<CellReport>,
}

fn density_report(d: &PiecewiseDensity, k: usize) -> DensityReport {
    DensityReport {
        breakpoints: d.breakpoints().to_vec(),
        scales: d.scales().to_vec(),
        segment_masses: d.segment_masses(),
        lambda0: d.lambda0(),
        multipliers: d.multipliers().to_vec(),
        cdf: (0..=k).map(|r| d.cdf(r as f64)).collect(),
    }
}

fn target(structure: UtilityStructure, k: usize) -> Result<Target> {
    Ok(match structure {
        UtilityStructure::Discrete(kind) => Target::Discrete(surrogate_weights(kind, k)?.into_vec()),
        UtilityStructure::Continuous(kind) => {
            let t = target_density(kind, k)?;
            Target::Continuous {
                cdf: (0..=k).map(|r| t.cdf(r as f64)).collect(),
            }
        }
    })
}

/// Resolves `EXPERT,ATTRIBUTE`, each an id or a 1-based index.
pub fn parse_cell(problem: &RankingProblem, spec: &str) -> Result<(usize, usize), GopaError> {
    let bad = |message: String| GopaError::Validation {
        path: "--cell".into(),
        message,
    };
    let (e, a) = spec
        .split_once(',')
        .ok_or_else(|| bad(format!("expected EXPERT,ATTRIBUTE, got `{spec}`")))?;
    let (e, a) = (e.trim(), a.trim());
    let lookup = |token: &str, ids: Vec<&str>| -> Result<usize, GopaError> {
        if let Some(pos) = ids.iter().position(|id| *id == token) {
            return Ok(pos);
        }
        match token.parse::<usize>() {
            Ok(n) if (1..=ids.len()).contains(&n) => Ok(n - 1),
            _ => Err(bad(format!("unknown id or index `{token}`"))),
        }
    };
    let i = lookup(e, problem.experts().iter().map(|x| x.id.as_str()).collect())?;
    let j = lookup(a, problem.attributes().iter().map(String::as_str).collect())?;
    Ok((i, j))
}

pub fn run(args: &ElicitArgs) -> Result<u8> {
    let input = DecisionInput::from_path(&args.common.input)?;
    let options = args.pipeline.options();
    let p = &input.problem;
    let cells: Vec<(usize, usize)> = match &args.cell {
        Some(spec) => vec![parse_cell(p, spec)?],
        None => p.cell_indices().collect(),
    };
    let mut reports = Vec::new();
    for (i, j) in cells {
        let k = p.cell(i, j).max_rank;
        let structure = input.structures.cell(i, j);
        let e = elicit_cell(&input, i, j, options)?;
        reports.push(CellReport {
            expert: p.experts()[i].id.clone(),
            attribute: p.attributes()[j].clone(),
            structure,
            max_rank: k,
            density: e.density.as_ref().map(|d| density_report(d, k)),
            utilities: e.utilities,
            target: if args.dump_target {
                Some(target(structure, k)?)
            } else {
                None
            },
        });
    }
    if let Some(dir) = &args.csv {
        write_utilities_csv(
            dir,
            reports.iter().map(|c| (&c.expert, &c.attribute, &c.utilities[..])),
            args.common.raw,
        )?;
    }
    emit_common(
        &ElicitReport {
            options,
            cells: reports,
        },
        &args.common,
    )?;
    Ok(0)
}
