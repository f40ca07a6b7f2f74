//! `solve`, `opa` and `metrics`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use gopa::metrics::{consensus_report, ConsensusReport, SensitivityLabel};
use gopa::pipeline::{run_gopa, PipelineOptions};
use gopa::solver::{solve_opa, WeightSolution};
use gopa::{DecisionInput, GopaError, UtilityStructure};
use serde::Serialize;
use serde_json::Value;

use crate::output::{cell, emit_common, opt_cell, write_csv};
use crate::{MetricsArgs, SolveArgs};

#[derive(Serialize)]
struct Named {
    id: String,
    weight: f64,
}

#[derive(Serialize)]
struct CellReport {
    expert: String,
    attribute: String,
    structure: UtilityStructure,
    max_rank: usize,
    utilities: Vec<f64>,
    /// Excluded alternatives are omitted.
    weights: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct SolveReport {
    method: &'static str,
    options: Option<PipelineOptions>,
    z: f64,
    experts: Vec<Named>,
    attributes: Vec<Named>,
    alternatives: Vec<Named>,
    cells: Vec<CellReport>,
    irregular_cells: Vec<(String, String)>,
    excluded_alternatives: Vec<String>,
    metrics: MetricsReport,
    solution: WeightSolution,
}

#[derive(Serialize)]
struct AttributeMetrics {
    id: String,
    psd: Option<f64>,
    kendall: Option<f64>,
    lcl: Option<f64>,
    label: Option<SensitivityLabel>,
}

#[derive(Serialize)]
struct AlternativeMetrics {
    id: String,
    psd: Option<f64>,
}

#[derive(Serialize)]
pub struct MetricsReport {
    attributes: Vec<AttributeMetrics>,
    alternatives: Vec<AlternativeMetrics>,
    kendall_attributes: Option<f64>,
    lcl_attributes: Option<f64>,
    label_attributes: Option<SensitivityLabel>,
    gcl: Option<f64>,
    label_global: Option<SensitivityLabel>,
}

fn named(ids: &[String], weights: &[f64]) -> Vec<Named> {
    ids.iter()
        .zip(weights)
        .map(|(id, &weight)| Named {
            id: id.clone(),
            weight,
        })
        .collect()
}

fn metrics_report(s: &WeightSolution) -> MetricsReport {
    let r: ConsensusReport = consensus_report(s);
    MetricsReport {
        attributes: s
            .attributes
            .iter()
            .enumerate()
            .map(|(j, id)| AttributeMetrics {
                id: id.clone(),
                psd: r.psd_attributes[j],
                kendall: r.kendall_alternatives[j],
                lcl: r.lcl_alternatives[j],
                label: r.labels_alternatives[j],
            })
            .collect(),
        alternatives: s
            .alternatives
            .iter()
            .enumerate()
            .map(|(k, id)| AlternativeMetrics {
                id: id.clone(),
                psd: r.psd_alternatives[k],
            })
            .collect(),
        kendall_attributes: r.kendall_attributes,
        lcl_attributes: r.lcl_attributes,
        label_attributes: r.label_attributes,
        gcl: r.gcl,
        label_global: r.label_global,
    }
}

fn label_text(l: Option<SensitivityLabel>) -> String {
    l.map(|l| l.to_string()).unwrap_or_default()
}

fn write_metrics_csv(dir: &Path, m: &MetricsReport, raw: bool) -> Result<()> {
    let mut rows = Vec::new();
    for a in &m.attributes {
        rows.push(vec![
            "attribute".into(),
            a.id.clone(),
            opt_cell(a.psd, raw),
            opt_cell(a.kendall, raw),
            opt_cell(a.lcl, raw),
            label_text(a.label),
        ]);
    }
    for a in &m.alternatives {
        rows.push(vec![
            "alternative".into(),
            a.id.clone(),
            opt_cell(a.psd, raw),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    rows.push(vec![
        "group".into(),
        "attributes".into(),
        String::new(),
        opt_cell(m.kendall_attributes, raw),
        opt_cell(m.lcl_attributes, raw),
        label_text(m.label_attributes),
    ]);
    rows.push(vec![
        "group".into(),
        "global".into(),
        String::new(),
        String::new(),
        opt_cell(m.gcl, raw),
        label_text(m.label_global),
    ]);
    write_csv(dir, "metrics.csv", &["kind", "id", "psd", "kendall", "lcl", "label"], rows)
}

pub fn solve(args: &SolveArgs, ordinal_only: bool) -> Result<u8> {
    let input = DecisionInput::from_path(&args.common.input)?;
    let options = args.pipeline.options();
    let (solution, structures) = if ordinal_only {
        let plain = DecisionInput::plain(input.problem.clone());
        (solve_opa(&plain.problem), plain.structures)
    } else {
        (run_gopa(&input, options)?.solution, input.structures.clone())
    };
    let p = &input.problem;
    let cells = p
        .cell_indices()
        .map(|(i, j)| CellReport {
            expert: p.experts()[i].id.clone(),
            attribute: p.attributes()[j].clone(),
            structure: structures.cell(i, j),
            max_rank: p.cell(i, j).max_rank,
            utilities: solution.utilities[i][j].clone(),
            weights: p
                .alternative_ranks(i, j)
                .iter()
                .enumerate()
                .filter(|(_, r)| r.is_some())
                .map(|(k, _)| (p.alternatives()[k].clone(), solution.alternative_weights[i][j][k]))
                .collect(),
        })
        .collect();
    let metrics = metrics_report(&solution);
    let report = SolveReport {
        method: if ordinal_only { "opa" } else { "gopa" },
        options: (!ordinal_only).then_some(options),
        z: solution.z,
        experts: named(&solution.experts, &solution.expert_weights),
        attributes: named(&solution.attributes, &solution.attribute_weights),
        alternatives: named(&solution.alternatives, &solution.alternative_totals),
        cells,
        irregular_cells: solution.irregular_cells.clone(),
        excluded_alternatives: solution.excluded_alternatives.clone(),
        metrics,
        solution,
    };
    if let Some(dir) = &args.csv {
        let raw = args.common.raw;
        let mut rows = Vec::new();
        for (kind, list) in [
            ("expert", &report.experts),
            ("attribute", &report.attributes),
            ("alternative", &report.alternatives),
        ] {
            for n in list {
                rows.push(vec![kind.to_string(), n.id.clone(), cell(n.weight, raw)]);
            }
        }
        write_csv(dir, "weights.csv", &["kind", "id", "weight"], rows)?;
        write_utilities_csv(dir, report.cells.iter().map(|c| (&c.expert, &c.attribute, &c.utilities[..])), raw)?;
        write_metrics_csv(dir, &report.metrics, raw)?;
    }
    emit_common(&report, &args.common)?;
    Ok(0)
}

pub fn write_utilities_csv<'a>(
    dir: &Path,
    cells: impl Iterator<Item = (&'a String, &'a String, &'a [f64])>,
    raw: bool,
) -> Result<()> {
    let mut rows = Vec::new();
    for (e, a, u) in cells {
        for (r, v) in u.iter().enumerate() {
            rows.push(vec![e.clone(), a.clone(), (r + 1).to_string(), cell(*v, raw)]);
        }
    }
    write_csv(dir, "utilities.csv", &["expert", "attribute", "rank", "utility"], rows)
}

/// Reads a solve report, a bare solution, or an input document to solve.
fn load_solution(path: &Path, options: PipelineOptions) -> Result<WeightSolution> {
    let text = std::fs::read_to_string(path).map_err(|e| GopaError::Validation {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| GopaError::Validation {
        path: "$".into(),
        message: e.to_string(),
    })?;
    let as_solution = |v: &Value| {
        serde_json::from_value::<WeightSolution>(v.clone()).map_err(|e| GopaError::Validation {
            path: "$.solution".into(),
            message: e.to_string(),
        })
    };
    if let Some(s) = value.get("solution") {
        return Ok(as_solution(s)?);
    }
    if value.get("alternative_weights").is_some() {
        return Ok(as_solution(&value)?);
    }
    let input = DecisionInput::parse(&text)?;
    Ok(run_gopa(&input, options)?.solution)
}

pub fn metrics(args: &MetricsArgs) -> Result<u8> {
    let solution = load_solution(&args.common.input, args.pipeline.options())?;
    let report = metrics_report(&solution);
    if let Some(dir) = &args.csv {
        write_metrics_csv(dir, &report, args.common.raw)?;
    }
    emit_common(&report, &args.common)?;
    Ok(0)
}
