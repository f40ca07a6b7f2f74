//! Expert, attribute, and alternative weights for group decisions from
//! ordinal rankings and partial preference information.
//!
//! The pipeline has two stages. First, each (expert, attribute) cell gets a
//! utility vector over ranks, obtained by minimizing cross-entropy to a
//! global utility structure under the cell's partial preference
//! constraints ([`elicit_discrete`], [`elicit_continuous`]). Second, the
//! closed-form weight optimizer in [`solver`] turns those utilities plus
//! the expert and attribute ranks into weights for every level of the
//! hierarchy.
//!
//! [`lpcheck`] re-solves the weighting programs with a dense simplex so the
//! closed forms can be audited, [`metrics`] computes the consensus
//! statistics, and [`sensitivity`] runs the expert-rank permutation study.

pub mod elicit_continuous;
pub mod elicit_discrete;
mod entropy;
pub mod error;
mod linalg;
pub mod lpcheck;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod quadrature;
pub mod sensitivity;
pub mod solver;
pub mod structures;

pub use error::{GopaError, Result};
pub use model::{
    CellContext, ContinuousStructure, DecisionInput, DiscreteStructure, PreferenceContext,
    RankingProblem, UtilityStructure,
};
pub use solver::WeightSolution;
