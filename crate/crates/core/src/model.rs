//! Input data: ordinal rankings, partial preference contexts, and the
//! utility structure declared for every (expert, attribute) cell.
//!
//! Everything enters through [`InputDocument`], the serde image of the
//! JSON input. Validation turns it into immutable domain values with the
//! per-cell rank ceiling `K_ij` and rank frequencies `c_ijr` precomputed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GopaError, Result};

/// Default exponent of the rank-exponent surrogate weights.
pub const DEFAULT_RANK_EXPONENT: f64 = 1.17;

// ---------------------------------------------------------------------------
// Serialized document
// ---------------------------------------------------------------------------

/// The JSON input document, exactly as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub experts: Vec<ExpertEntry>,
    pub attributes: Vec<String>,
    pub alternatives: Vec<String>,
    /// expert id -> attribute id -> rank.
    pub attribute_ranks: BTreeMap<String, BTreeMap<String, i64>>,
    /// expert id -> attribute id -> alternative id -> rank (null or absent
    /// means the alternative is excluded in that cell).
    pub alternative_ranks: BTreeMap<String, BTreeMap<String, BTreeMap<String, Option<i64>>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<ContextEntry>,
    #[serde(default, skip_serializing_if = "StructureEntries::is_empty")]
    pub structures: StructureEntries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertEntry {
    pub id: String,
    pub rank: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextEntry {
    pub expert: String,
    pub attribute: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratio: Vec<RatioEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absdiff: Vec<AbsDiffEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lowerbound: Vec<LowerBoundEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioEntry {
    pub rank: i64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsDiffEntry {
    pub rank: i64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundEntry {
    pub rank: RankRef,
    pub gamma: f64,
}

/// A rank reference in a lower-bound entry: a concrete rank or `"*"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankRef {
    Rank(i64),
    Wildcard(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntries {
    /// Structure used for every cell without an explicit entry. When absent
    /// the default is rank order centroid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<UtilityStructure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellStructureEntry>,
}

impl StructureEntries {
    pub fn is_empty(&self) -> bool {
        self.default.is_none() && self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellStructureEntry {
    pub expert: String,
    pub attribute: String,
    pub structure: UtilityStructure,
}

// ---------------------------------------------------------------------------
// Utility structures
// ---------------------------------------------------------------------------

/// Rank-based surrogate weight families used as discrete targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscreteStructure {
    RankSum,
    RankExponent {
        #[serde(default = "default_rank_exponent")]
        exponent: f64,
    },
    RankReciprocal,
    SumReciprocal,
    #[serde(alias = "roc")]
    RankOrderCentroid,
    UniformDiscrete,
}

fn default_rank_exponent() -> f64 {
    DEFAULT_RANK_EXPONENT
}

fn default_steepness() -> f64 {
    1.0
}

/// Risk-preference utility densities used as continuous targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContinuousStructure {
    Neutral,
    /// Density `alpha * (beta + alpha/gamma * x)^(-gamma)`.
    Hara { alpha: f64, beta: f64, gamma: f64 },
    /// The `beta = 0` member of the HARA family; `0 < gamma < 1`.
    Crra { alpha: f64, gamma: f64 },
    /// Density proportional to `exp(-a x)`.
    Cara { a: f64 },
    /// Derivative of a logistic centred on `(1 + K) / 2`.
    SShape {
        #[serde(default = "default_steepness")]
        steepness: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UtilityStructure {
    Discrete(DiscreteStructure),
    Continuous(ContinuousStructure),
}

impl Default for UtilityStructure {
    fn default() -> Self {
        UtilityStructure::Discrete(DiscreteStructure::RankOrderCentroid)
    }
}

impl DiscreteStructure {
    pub fn check(&self) -> std::result::Result<(), String> {
        match *self {
            DiscreteStructure::RankExponent { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                Err(format!("rank exponent must be positive, got {exponent}"))
            }
            _ => Ok(()),
        }
    }
}

impl ContinuousStructure {
    /// Checks the parameter domain over `[0, k]`.
    pub fn check(&self, k: usize) -> std::result::Result<(), String> {
        let k = k as f64;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match *self {
            ContinuousStructure::Neutral => Ok(()),
            ContinuousStructure::Hara { alpha, beta, gamma } => {
                finite("alpha", alpha)?;
                finite("beta", beta)?;
                finite("gamma", gamma)?;
                if gamma == 0.0 {
                    return Err("HARA gamma must be nonzero".into());
                }
                let at = |x: f64| beta + alpha / gamma * x;
                // affine in x, so the endpoints decide positivity
                if at(0.0) <= 0.0 || at(k) <= 0.0 {
                    return Err(format!(
                        "HARA base beta + (alpha/gamma) x must stay positive on [0, {k}]"
                    ));
                }
                Ok(())
            }
            ContinuousStructure::Crra { alpha, gamma } => {
                finite("alpha", alpha)?;
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(format!(
                        "CRRA gamma must lie in (0, 1) for the density to be integrable, got {gamma}"
                    ));
                }
                if alpha == 0.0 {
                    return Err("CRRA alpha must be nonzero".into());
                }
                Ok(())
            }
            ContinuousStructure::Cara { a } => {
                finite("a", a)?;
                if a == 0.0 {
                    return Err("CARA coefficient must be nonzero".into());
                }
                Ok(())
            }
            ContinuousStructure::SShape { steepness } => {
                if steepness > 0.0 && steepness.is_finite() {
                    Ok(())
                } else {
                    Err(format!("S-shape steepness must be positive, got {steepness}"))
                }
            }
        }
    }
}

impl UtilityStructure {
    pub fn check(&self, k: usize) -> std::result::Result<(), String> {
        match self {
            UtilityStructure::Discrete(d) => d.check(),
            UtilityStructure::Continuous(c) => c.check(k),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, UtilityStructure::Continuous(_))
    }
}

// ---------------------------------------------------------------------------
// Ranking problem
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expert {
    pub id: String,
    pub rank: u32,
}

/// Derived shape of one (expert, attribute) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellShape {
    /// `K_ij`, the largest rank present.
    pub max_rank: usize,
    /// `c_ijr` for `r = 1..=K_ij` (index `r - 1`).
    pub frequencies: Vec<usize>,
    pub duplicates: bool,
    pub gaps: bool,
    pub excluded: bool,
}

impl CellShape {
    fn from_ranks(ranks: &[Option<u32>]) -> Option<Self> {
        let max_rank = ranks.iter().flatten().copied().max()? as usize;
        let mut frequencies = vec![0usize; max_rank];
        for r in ranks.iter().flatten() {
            frequencies[*r as usize - 1] += 1;
        }
        Some(CellShape {
            max_rank,
            duplicates: frequencies.iter().any(|&c| c > 1),
            gaps: frequencies.contains(&0),
            excluded: ranks.iter().any(Option::is_none),
            frequencies,
        })
    }

    /// True when the ranks form a permutation of `1..=K`.
    pub fn is_regular(&self) -> bool {
        !(self.duplicates || self.gaps || self.excluded)
    }

    pub fn ranked_count(&self) -> usize {
        self.frequencies.iter().sum()
    }
}

/// Validated ordinal inputs with derived cell shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingProblem {
    experts: Vec<Expert>,
    attributes: Vec<String>,
    alternatives: Vec<String>,
    attribute_ranks: Vec<Vec<u32>>,
    alternative_ranks: Vec<Vec<Vec<Option<u32>>>>,
    cells: Vec<Vec<CellShape>>,
}

impl RankingProblem {
    /// Builds a problem from index-addressed ranks.
    ///
    /// `attribute_ranks[i][j]` is `s_ij` and `alternative_ranks[i][j][k]` is
    /// `r_ijk`. Ranks must be positive; alternative ranks may not exceed the
    /// number of alternatives.
    pub fn new(
        experts: Vec<Expert>,
        attributes: Vec<String>,
        alternatives: Vec<String>,
        attribute_ranks: Vec<Vec<u32>>,
        alternative_ranks: Vec<Vec<Vec<Option<u32>>>>,
    ) -> Result<Self> {
        if experts.is_empty() {
            return Err(GopaError::validation("experts", "at least one expert is required"));
        }
        if attributes.is_empty() {
            return Err(GopaError::validation("attributes", "at least one attribute is required"));
        }
        if alternatives.is_empty() {
            return Err(GopaError::validation(
                "alternatives",
                "at least one alternative is required",
            ));
        }
        check_unique("experts", experts.iter().map(|e| e.id.as_str()))?;
        check_unique("attributes", attributes.iter().map(String::as_str))?;
        check_unique("alternatives", alternatives.iter().map(String::as_str))?;

        let (ni, nj, nk) = (experts.len(), attributes.len(), alternatives.len());
        for e in &experts {
            if e.rank == 0 {
                return Err(GopaError::validation(
                    format!("experts.{}.rank", e.id),
                    "rank must be a positive integer",
                ));
            }
        }
        if attribute_ranks.len() != ni || attribute_ranks.iter().any(|row| row.len() != nj) {
            return Err(GopaError::validation(
                "attribute_ranks",
                format!("expected a {ni} x {nj} rank table"),
            ));
        }
        if alternative_ranks.len() != ni
            || alternative_ranks
                .iter()
                .any(|row| row.len() != nj || row.iter().any(|cell| cell.len() != nk))
        {
            return Err(GopaError::validation(
                "alternative_ranks",
                format!("expected a {ni} x {nj} x {nk} rank table"),
            ));
        }

        let mut cells = Vec::with_capacity(ni);
        for i in 0..ni {
            let mut row = Vec::with_capacity(nj);
            for j in 0..nj {
                if attribute_ranks[i][j] == 0 {
                    return Err(GopaError::validation(
                        format!("attribute_ranks.{}.{}", experts[i].id, attributes[j]),
                        "rank must be a positive integer",
                    ));
                }
                for (k, r) in alternative_ranks[i][j].iter().enumerate() {
                    if let Some(r) = *r {
                        if r == 0 || r as usize > nk {
                            return Err(GopaError::validation(
                                format!(
                                    "alternative_ranks.{}.{}.{}",
                                    experts[i].id, attributes[j], alternatives[k]
                                ),
                                format!("rank {r} is outside [1, {nk}]"),
                            ));
                        }
                    }
                }
                let shape = CellShape::from_ranks(&alternative_ranks[i][j]).ok_or_else(|| {
                    GopaError::EmptyCell {
                        expert: experts[i].id.clone(),
                        attribute: attributes[j].clone(),
                    }
                })?;
                row.push(shape);
            }
            cells.push(row);
        }

        Ok(RankingProblem {
            experts,
            attributes,
            alternatives,
            attribute_ranks,
            alternative_ranks,
            cells,
        })
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn num_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn expert_rank(&self, i: usize) -> u32 {
        self.experts[i].rank
    }

    pub fn attribute_rank(&self, i: usize, j: usize) -> u32 {
        self.attribute_ranks[i][j]
    }

    pub fn alternative_rank(&self, i: usize, j: usize, k: usize) -> Option<u32> {
        self.alternative_ranks[i][j][k]
    }

    pub fn alternative_ranks(&self, i: usize, j: usize) -> &[Option<u32>] {
        &self.alternative_ranks[i][j]
    }

    pub fn cell(&self, i: usize, j: usize) -> &CellShape {
        &self.cells[i][j]
    }

    /// All `(i, j)` index pairs in row-major order.
    pub fn cell_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nj = self.num_attributes();
        (0..self.num_experts()).flat_map(move |i| (0..nj).map(move |j| (i, j)))
    }

    /// True when every cell ranks all alternatives as a permutation.
    pub fn is_regular(&self) -> bool {
        self.cells.iter().flatten().all(CellShape::is_regular)
    }

    /// Cells that contain duplicate, missing, or excluded ranks.
    pub fn irregular_cells(&self) -> Vec<(usize, usize)> {
        self.cell_indices()
            .filter(|&(i, j)| !self.cells[i][j].is_regular())
            .collect()
    }

    /// Alternatives excluded from at least one cell.
    pub fn excluded_alternatives(&self) -> Vec<usize> {
        (0..self.num_alternatives())
            .filter(|&k| {
                self.alternative_ranks
                    .iter()
                    .flatten()
                    .any(|cell| cell[k].is_none())
            })
            .collect()
    }

    /// The same problem with new expert ranks.
    pub fn with_expert_ranks(&self, ranks: &[u32]) -> Result<Self> {
        if ranks.len() != self.num_experts() {
            return Err(GopaError::Dimension(format!(
                "{} expert ranks given for {} experts",
                ranks.len(),
                self.num_experts()
            )));
        }
        let experts = self
            .experts
            .iter()
            .zip(ranks)
            .map(|(e, &rank)| Expert {
                id: e.id.clone(),
                rank,
            })
            .collect();
        RankingProblem::new(
            experts,
            self.attributes.clone(),
            self.alternatives.clone(),
            self.attribute_ranks.clone(),
            self.alternative_ranks.clone(),
        )
    }

    pub fn to_document(&self) -> InputDocument {
        let mut attribute_ranks = BTreeMap::new();
        let mut alternative_ranks = BTreeMap::new();
        for (i, e) in self.experts.iter().enumerate() {
            let mut attr = BTreeMap::new();
            let mut alts = BTreeMap::new();
            for (j, a) in self.attributes.iter().enumerate() {
                attr.insert(a.clone(), self.attribute_ranks[i][j] as i64);
                let cell = self
                    .alternatives
                    .iter()
                    .enumerate()
                    .map(|(k, m)| (m.clone(), self.alternative_ranks[i][j][k].map(i64::from)))
                    .collect();
                alts.insert(a.clone(), cell);
            }
            attribute_ranks.insert(e.id.clone(), attr);
            alternative_ranks.insert(e.id.clone(), alts);
        }
        InputDocument {
            experts: self
                .experts
                .iter()
                .map(|e| ExpertEntry {
                    id: e.id.clone(),
                    rank: e.rank as i64,
                })
                .collect(),
            attributes: self.attributes.clone(),
            alternatives: self.alternatives.clone(),
            attribute_ranks,
            alternative_ranks,
            contexts: Vec::new(),
            structures: StructureEntries::default(),
        }
    }

    fn expert_index(&self, id: &str) -> Option<usize> {
        self.experts.iter().position(|e| e.id == id)
    }

    fn attribute_index(&self, id: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == id)
    }

    /// Resolves an `(expert id, attribute id)` pair to indices.
    pub fn cell_index(&self, expert: &str, attribute: &str) -> Option<(usize, usize)> {
        Some((self.expert_index(expert)?, self.attribute_index(attribute)?))
    }
}

fn check_unique<'a>(path: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(GopaError::validation(path, format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

fn positive_rank(path: impl Into<String>, raw: i64) -> Result<u32> {
    if raw <= 0 || raw > u32::MAX as i64 {
        return Err(GopaError::validation(path, format!("rank must be a positive integer, got {raw}")));
    }
    Ok(raw as u32)
}

/// Validates the ranking part of a document.
///
/// Unknown ids in any rank table are rejected; an alternative absent from
/// a cell (or given `null`) is excluded from that cell.
pub fn validate_problem(doc: &InputDocument) -> Result<RankingProblem> {
    let experts = doc
        .experts
        .iter()
        .map(|e| {
            Ok(Expert {
                id: e.id.clone(),
                rank: positive_rank(format!("experts.{}.rank", e.id), e.rank)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let attr_set: BTreeSet<&str> = doc.attributes.iter().map(String::as_str).collect();
    let alt_set: BTreeSet<&str> = doc.alternatives.iter().map(String::as_str).collect();
    let expert_set: BTreeSet<&str> = doc.experts.iter().map(|e| e.id.as_str()).collect();

    for (e, row) in &doc.attribute_ranks {
        if !expert_set.contains(e.as_str()) {
            return Err(GopaError::validation(format!("attribute_ranks.{e}"), "unknown expert"));
        }
        for a in row.keys() {
            if !attr_set.contains(a.as_str()) {
                return Err(GopaError::validation(
                    format!("attribute_ranks.{e}.{a}"),
                    "unknown attribute",
                ));
            }
        }
    }
    for (e, row) in &doc.alternative_ranks {
        if !expert_set.contains(e.as_str()) {
            return Err(GopaError::validation(format!("alternative_ranks.{e}"), "unknown expert"));
        }
        for (a, cell) in row {
            if !attr_set.contains(a.as_str()) {
                return Err(GopaError::validation(
                    format!("alternative_ranks.{e}.{a}"),
                    "unknown attribute",
                ));
            }
            for m in cell.keys() {
                if !alt_set.contains(m.as_str()) {
                    return Err(GopaError::validation(
                        format!("alternative_ranks.{e}.{a}.{m}"),
                        "unknown alternative",
                    ));
                }
            }
        }
    }

    let mut attribute_ranks = Vec::with_capacity(experts.len());
    let mut alternative_ranks = Vec::with_capacity(experts.len());
    for e in &doc.experts {
        let mut attr_row = Vec::with_capacity(doc.attributes.len());
        let mut alt_row = Vec::with_capacity(doc.attributes.len());
        for a in &doc.attributes {
            let path = format!("attribute_ranks.{}.{a}", e.id);
            let raw = doc
                .attribute_ranks
                .get(&e.id)
                .and_then(|row| row.get(a))
                .ok_or_else(|| GopaError::validation(path.clone(), "missing attribute rank"))?;
            attr_row.push(positive_rank(path, *raw)?);

            let cell = doc.alternative_ranks.get(&e.id).and_then(|row| row.get(a));
            let ranks = doc
                .alternatives
                .iter()
                .map(|m| match cell.and_then(|c| c.get(m)).copied().flatten() {
                    None => Ok(None),
                    Some(raw) => positive_rank(format!("alternative_ranks.{}.{a}.{m}", e.id), raw)
                        .map(Some),
                })
                .collect::<Result<Vec<_>>>()?;
            alt_row.push(ranks);
        }
        attribute_ranks.push(attr_row);
        alternative_ranks.push(alt_row);
    }

    RankingProblem::new(
        experts,
        doc.attributes.clone(),
        doc.alternatives.clone(),
        attribute_ranks,
        alternative_ranks,
    )
}

// ---------------------------------------------------------------------------
// Preference contexts
// ---------------------------------------------------------------------------

/// `U(r) = alpha * U(r + 1)` (discrete) or `CDF(r) = alpha * CDF(r - 1)`
/// (continuous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub rank: usize,
    pub alpha: f64,
}

/// `U(r) - U(r + 1) = beta` (discrete) or `CDF(r) - CDF(r - 1) = beta`
/// (continuous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsDiff {
    pub rank: usize,
    pub beta: f64,
}

/// `U(r) >= gamma` (discrete) or `CDF(r) = gamma` (continuous).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBound {
    pub rank: usize,
    pub gamma: f64,
}

/// Partial preference constraints of a single cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellContext {
    pub ratio: Vec<Ratio>,
    pub absdiff: Vec<AbsDiff>,
    pub lower_bounds: Vec<LowerBound>,
}

impl CellContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_ratio(mut self, rank: usize, alpha: f64) -> Self {
        self.ratio.push(Ratio { rank, alpha });
        self
    }

    pub fn with_absdiff(mut self, rank: usize, beta: f64) -> Self {
        self.absdiff.push(AbsDiff { rank, beta });
        self
    }

    pub fn with_lower_bound(mut self, rank: usize, gamma: f64) -> Self {
        self.lower_bounds.push(LowerBound { rank, gamma });
        self
    }

    /// Applies one bound to every rank `1..=k`.
    pub fn with_lower_bound_all(mut self, k: usize, gamma: f64) -> Self {
        self.lower_bounds
            .extend((1..=k).map(|rank| LowerBound { rank, gamma }));
        self
    }

    /// The unbiased context: no constraints beyond the structural ones.
    pub fn is_empty(&self) -> bool {
        self.ratio.is_empty() && self.absdiff.is_empty() && self.lower_bounds.is_empty()
    }

    /// Checks ranges, signs, and duplicates against the cell's rank ceiling.
    pub fn check(&self, k: usize, path: &str) -> Result<()> {
        let mut seen = BTreeSet::new();
        for c in &self.ratio {
            check_range(path, c.rank, k.saturating_sub(1))?;
            if !(c.alpha > 0.0 && c.alpha.is_finite()) {
                return Err(GopaError::Sign {
                    path: format!("{path}.ratio"),
                    message: format!("alpha must be positive, got {}", c.alpha),
                });
            }
            if !seen.insert(("ratio", c.rank)) {
                return Err(duplicate(path, "ratio", c.rank));
            }
        }
        for c in &self.absdiff {
            check_range(path, c.rank, k.saturating_sub(1))?;
            if !(c.beta >= 0.0 && c.beta.is_finite()) {
                return Err(GopaError::Sign {
                    path: format!("{path}.absdiff"),
                    message: format!("beta must be nonnegative, got {}", c.beta),
                });
            }
            if !seen.insert(("absdiff", c.rank)) {
                return Err(duplicate(path, "absdiff", c.rank));
            }
        }
        for c in &self.lower_bounds {
            check_range(path, c.rank, k)?;
            if !(c.gamma >= 0.0 && c.gamma.is_finite()) {
                return Err(GopaError::Sign {
                    path: format!("{path}.lowerbound"),
                    message: format!("gamma must be nonnegative, got {}", c.gamma),
                });
            }
            if !seen.insert(("lowerbound", c.rank)) {
                return Err(duplicate(path, "lowerbound", c.rank));
            }
        }
        Ok(())
    }

    /// Lower bound on `U(r)`, if any.
    pub fn lower_bound_at(&self, rank: usize) -> Option<f64> {
        self.lower_bounds.iter().find(|b| b.rank == rank).map(|b| b.gamma)
    }

    fn sorted(mut self) -> Self {
        self.ratio.sort_by_key(|c| c.rank);
        self.absdiff.sort_by_key(|c| c.rank);
        self.lower_bounds.sort_by_key(|c| c.rank);
        self
    }
}

fn check_range(path: &str, rank: usize, max: usize) -> Result<()> {
    if rank == 0 || rank > max {
        return Err(GopaError::ContextRange {
            path: path.to_string(),
            rank: rank as i64,
            max,
        });
    }
    Ok(())
}

fn duplicate(path: &str, kind: &'static str, rank: usize) -> GopaError {
    GopaError::DuplicateConstraint {
        path: path.to_string(),
        kind,
        rank,
    }
}

/// Per-cell preference contexts, indexed `[expert][attribute]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceContext {
    cells: Vec<Vec<CellContext>>,
}

impl PreferenceContext {
    pub fn empty(problem: &RankingProblem) -> Self {
        PreferenceContext {
            cells: vec![vec![CellContext::default(); problem.num_attributes()]; problem.num_experts()],
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> &CellContext {
        &self.cells[i][j]
    }

    /// Replaces one cell's context after checking it.
    pub fn set_cell(
        &mut self,
        problem: &RankingProblem,
        i: usize,
        j: usize,
        ctx: CellContext,
    ) -> Result<()> {
        let path = format!("contexts.{}.{}", problem.experts()[i].id, problem.attributes()[j]);
        ctx.check(problem.cell(i, j).max_rank, &path)?;
        self.cells[i][j] = ctx.sorted();
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().flatten().all(CellContext::is_empty)
    }
}

fn context_rank(path: &str, raw: i64, max: usize) -> Result<usize> {
    if raw <= 0 || raw as u64 > max as u64 {
        return Err(GopaError::ContextRange {
            path: path.to_string(),
            rank: raw,
            max,
        });
    }
    Ok(raw as usize)
}

/// Validates the context entries of a document against a problem.
pub fn validate_context(entries: &[ContextEntry], problem: &RankingProblem) -> Result<PreferenceContext> {
    let mut out = PreferenceContext::empty(problem);
    let mut seen = BTreeSet::new();
    for (n, entry) in entries.iter().enumerate() {
        let path = format!("contexts[{n}]");
        let (i, j) = problem
            .cell_index(&entry.expert, &entry.attribute)
            .ok_or_else(|| {
                GopaError::validation(
                    path.clone(),
                    format!("unknown cell ({}, {})", entry.expert, entry.attribute),
                )
            })?;
        if !seen.insert((i, j)) {
            return Err(GopaError::validation(
                path,
                format!("second context for cell ({}, {})", entry.expert, entry.attribute),
            ));
        }
        let k = problem.cell(i, j).max_rank;
        let mut ctx = CellContext::default();
        for c in &entry.ratio {
            let rank = context_rank(&format!("{path}.ratio"), c.rank, k.saturating_sub(1))?;
            ctx.ratio.push(Ratio { rank, alpha: c.alpha });
        }
        for c in &entry.absdiff {
            let rank = context_rank(&format!("{path}.absdiff"), c.rank, k.saturating_sub(1))?;
            ctx.absdiff.push(AbsDiff { rank, beta: c.beta });
        }
        for c in &entry.lowerbound {
            match &c.rank {
                RankRef::Rank(raw) => {
                    let rank = context_rank(&format!("{path}.lowerbound"), *raw, k)?;
                    ctx.lower_bounds.push(LowerBound { rank, gamma: c.gamma });
                }
                RankRef::Wildcard(w) if w == "*" => {
                    ctx.lower_bounds
                        .extend((1..=k).map(|rank| LowerBound { rank, gamma: c.gamma }));
                }
                RankRef::Wildcard(w) => {
                    return Err(GopaError::validation(
                        format!("{path}.lowerbound"),
                        format!("rank must be an integer or \"*\", got {w:?}"),
                    ))
                }
            }
        }
        ctx.check(k, &path)?;
        out.cells[i][j] = ctx.sorted();
    }
    Ok(out)
}

/// Per-cell utility structures, indexed `[expert][attribute]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTable {
    cells: Vec<Vec<UtilityStructure>>,
}

impl StructureTable {
    pub fn uniform(problem: &RankingProblem, structure: UtilityStructure) -> Self {
        StructureTable {
            cells: vec![vec![structure; problem.num_attributes()]; problem.num_experts()],
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> UtilityStructure {
        self.cells[i][j]
    }

    pub fn set_cell(&mut self, i: usize, j: usize, structure: UtilityStructure) {
        self.cells[i][j] = structure;
    }
}

/// Validates the structure declarations of a document against a problem.
pub fn validate_structures(entries: &StructureEntries, problem: &RankingProblem) -> Result<StructureTable> {
    let default = entries.default.unwrap_or_default();
    let mut table = StructureTable::uniform(problem, default);
    let mut seen = BTreeSet::new();
    for (n, entry) in entries.cells.iter().enumerate() {
        let path = format!("structures.cells[{n}]");
        let (i, j) = problem
            .cell_index(&entry.expert, &entry.attribute)
            .ok_or_else(|| {
                GopaError::validation(
                    path.clone(),
                    format!("unknown cell ({}, {})", entry.expert, entry.attribute),
                )
            })?;
        if !seen.insert((i, j)) {
            return Err(GopaError::validation(path, "second structure for the same cell"));
        }
        table.cells[i][j] = entry.structure;
    }
    for (i, j) in problem.cell_indices() {
        let k = problem.cell(i, j).max_rank;
        table.cells[i][j].check(k).map_err(|message| {
            GopaError::validation(
                format!("structures.{}.{}", problem.experts()[i].id, problem.attributes()[j]),
                message,
            )
        })?;
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Whole input
// ---------------------------------------------------------------------------

/// A validated input document.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionInput {
    pub problem: RankingProblem,
    pub context: PreferenceContext,
    pub structures: StructureTable,
}

impl DecisionInput {
    pub fn from_document(doc: &InputDocument) -> Result<Self> {
        let problem = validate_problem(doc)?;
        let context = validate_context(&doc.contexts, &problem)?;
        let structures = validate_structures(&doc.structures, &problem)?;
        Ok(DecisionInput {
            problem,
            context,
            structures,
        })
    }

    pub fn parse(json: &str) -> Result<Self> {
        let doc: InputDocument = serde_json::from_str(json)
            .map_err(|e| GopaError::validation("$", e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| GopaError::validation(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    /// Plain ordinal priority input: ROC targets and no contexts.
    pub fn plain(problem: RankingProblem) -> Self {
        DecisionInput {
            context: PreferenceContext::empty(&problem),
            structures: StructureTable::uniform(&problem, UtilityStructure::default()),
            problem,
        }
    }

    /// Serializes back to a document; contexts and structures are written
    /// per cell with explicit ranks.
    pub fn to_document(&self) -> InputDocument {
        let mut doc = self.problem.to_document();
        for (i, j) in self.problem.cell_indices() {
            let expert = self.problem.experts()[i].id.clone();
            let attribute = self.problem.attributes()[j].clone();
            let ctx = self.context.cell(i, j);
            if !ctx.is_empty() {
                doc.contexts.push(ContextEntry {
                    expert: expert.clone(),
                    attribute: attribute.clone(),
                    ratio: ctx
                        .ratio
                        .iter()
                        .map(|c| RatioEntry { rank: c.rank as i64, alpha: c.alpha })
                        .collect(),
                    absdiff: ctx
                        .absdiff
                        .iter()
                        .map(|c| AbsDiffEntry { rank: c.rank as i64, beta: c.beta })
                        .collect(),
                    lowerbound: ctx
                        .lower_bounds
                        .iter()
                        .map(|c| LowerBoundEntry {
                            rank: RankRef::Rank(c.rank as i64),
                            gamma: c.gamma,
                        })
                        .collect(),
                });
            }
            doc.structures.cells.push(CellStructureEntry {
                expert,
                attribute,
                structure: self.structures.cell(i, j),
            });
        }
        doc
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// Draws a random problem with permutation expert and attribute ranks.
///
/// With `irregular`, roughly half of the cells get duplicate ranks, gaps, or
/// excluded alternatives.
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    experts: usize,
    attributes: usize,
    alternatives: usize,
    irregular: bool,
) -> RankingProblem {
    let perm = |rng: &mut R, n: usize| {
        let mut v: Vec<u32> = (1..=n as u32).collect();
        v.shuffle(rng);
        v
    };
    let expert_ranks = perm(rng, experts);
    let attribute_ranks: Vec<Vec<u32>> = (0..experts).map(|_| perm(rng, attributes)).collect();
    let alternative_ranks = (0..experts)
        .map(|_| {
            (0..attributes)
                .map(|_| {
                    let mut cell: Vec<Option<u32>> =
                        perm(rng, alternatives).into_iter().map(Some).collect();
                    if irregular && alternatives > 1 && rng.gen_bool(0.5) {
                        for slot in cell.iter_mut() {
                            let u: f64 = rng.gen();
                            if u < 0.25 {
                                *slot = Some(rng.gen_range(1..=alternatives as u32));
                            } else if u < 0.4 {
                                *slot = None;
                            }
                        }
                        if cell.iter().all(Option::is_none) {
                            cell[0] = Some(1);
                        }
                    }
                    cell
                })
                .collect()
        })
        .collect();
    RankingProblem::new(
        expert_ranks
            .into_iter()
            .enumerate()
            .map(|(i, rank)| Expert {
                id: format!("E{}", i + 1),
                rank,
            })
            .collect(),
        (1..=attributes).map(|j| format!("C{j}")).collect(),
        (1..=alternatives).map(|k| format!("A{k}")).collect(),
        attribute_ranks,
        alternative_ranks,
    )
    .expect("generated ranks are valid")
}
