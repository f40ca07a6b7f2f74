//! End-to-end run: elicit every cell according to its declared structure,
//! then solve for the weights.

use serde::{Deserialize, Serialize};

use crate::elicit_continuous::{cumulative_utilities, elicit_continuous, BoundMode, Orientation, PiecewiseDensity};
use crate::elicit_discrete::{elicit_discrete, entropy_max_discrete, UtilityTable};
use crate::error::Result;
use crate::model::{DecisionInput, DiscreteStructure, UtilityStructure};
use crate::solver::{solve_gopa, WeightSolution};
use crate::structures::{surrogate_weights, target_density};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub orientation: Orientation,
    pub bound_mode: BoundMode,
}

/// Utilities of one cell and, for continuous cells, the solved density.
#[derive(Debug, Clone, PartialEq)]
pub struct CellElicitation {
    pub utilities: Vec<f64>,
    pub density: Option<PiecewiseDensity>,
}

fn elicit_raw(input: &DecisionInput, i: usize, j: usize, options: PipelineOptions) -> Result<CellElicitation> {
    let k = input.problem.cell(i, j).max_rank;
    let ctx = input.context.cell(i, j);
    match input.structures.cell(i, j) {
        UtilityStructure::Discrete(DiscreteStructure::UniformDiscrete) => Ok(CellElicitation {
            utilities: entropy_max_discrete(ctx, k)?,
            density: None,
        }),
        UtilityStructure::Discrete(kind) => {
            let target = surrogate_weights(kind, k)?;
            Ok(CellElicitation {
                utilities: elicit_discrete(target.values(), ctx, k)?,
                density: None,
            })
        }
        UtilityStructure::Continuous(kind) => {
            let target = target_density(kind, k)?;
            let density = elicit_continuous(&target, ctx, k, options.bound_mode)?;
            Ok(CellElicitation {
                utilities: cumulative_utilities(&density, k, options.orientation),
                density: Some(density),
            })
        }
    }
}

/// Elicits a single cell; errors name the cell.
pub fn elicit_cell(input: &DecisionInput, i: usize, j: usize, options: PipelineOptions) -> Result<CellElicitation> {
    elicit_raw(input, i, j, options).map_err(|e| {
        e.in_cell(&input.problem.experts()[i].id, &input.problem.attributes()[j])
    })
}

/// Per-cell results of the first stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Elicitation {
    pub utilities: UtilityTable,
    /// `[i][j]`, present for continuous cells.
    pub densities: Vec<Vec<Option<PiecewiseDensity>>>,
}

pub fn elicit_all(input: &DecisionInput, options: PipelineOptions) -> Result<Elicitation> {
    let p = &input.problem;
    let mut utilities = vec![vec![Vec::new(); p.num_attributes()]; p.num_experts()];
    let mut densities = vec![vec![None; p.num_attributes()]; p.num_experts()];
    for (i, j) in p.cell_indices() {
        let cell = elicit_cell(input, i, j, options)?;
        utilities[i][j] = cell.utilities;
        densities[i][j] = cell.density;
    }
    Ok(Elicitation {
        utilities: UtilityTable::new(utilities),
        densities,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GopaRun {
    pub elicitation: Elicitation,
    pub solution: WeightSolution,
}

/// Both stages.
pub fn run_gopa(input: &DecisionInput, options: PipelineOptions) -> Result<GopaRun> {
    let elicitation = elicit_all(input, options)?;
    let solution = solve_gopa(&input.problem, &elicitation.utilities)?;
    Ok(GopaRun {
        elicitation,
        solution,
    })
}
