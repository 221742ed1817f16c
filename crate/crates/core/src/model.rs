//! Domain types for MCDM-extended hierarchical quality models.
//!
//! A [`QualityModel`] is a tree of [`QualityAttribute`]s. Leaves are bound to
//! a metric source and carry a [`ValueType`]; internal nodes carry an
//! [`AggregationSpec`] describing how child values combine. Computed values
//! live in [`crate::eval`], not here.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rank-to-weight elicitation algorithm used by SMARTER nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SmarterAlgorithm {
    #[serde(rename = "ROC")]
    Roc,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "RS")]
    Rs,
}

impl SmarterAlgorithm {
    pub const ALL: [SmarterAlgorithm; 3] = [Self::Roc, Self::Rr, Self::Rs];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Roc => "ROC",
            Self::Rr => "RR",
            Self::Rs => "RS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ROC" => Some(Self::Roc),
            "RR" => Some(Self::Rr),
            "RS" => Some(Self::Rs),
            _ => None,
        }
    }
}

impl fmt::Display for SmarterAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub(crate) const UNKNOWN_AGGREGATION: &str = "unknown aggregation kind";

/// How an internal node combines its children.
///
/// Serialized as an object tagged by `kind` (`SMARTER`, `SMARTS`, `Expression`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAggregation", into = "RawAggregation")]
pub enum AggregationSpec {
    /// Ranks elicited from the decision-maker, one per child; 1 is most important.
    Smarter {
        algorithm: SmarterAlgorithm,
        ranks: Vec<u32>,
    },
    /// Swing ratings, one per child, normalized to weights.
    Smarts { weights: Vec<f64> },
    /// Free-form arithmetic over direct child ids.
    Expression { formula: String },
}

impl AggregationSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Smarter { .. } => "SMARTER",
            Self::Smarts { .. } => "SMARTS",
            Self::Expression { .. } => "Expression",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawAggregation {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    algorithm: Option<SmarterAlgorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ranks: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    formula: Option<String>,
}

impl TryFrom<RawAggregation> for AggregationSpec {
    type Error = String;

    fn try_from(raw: RawAggregation) -> Result<Self, String> {
        let extra = |field: &str, present: bool| {
            if present {
                Err(format!(
                    "field `{field}` is not allowed for {} aggregation",
                    raw.kind
                ))
            } else {
                Ok(())
            }
        };
        let spec = match raw.kind.as_str() {
            "SMARTER" => {
                extra("weights", raw.weights.is_some())?;
                extra("formula", raw.formula.is_some())?;
                AggregationSpec::Smarter {
                    algorithm: raw
                        .algorithm
                        .ok_or("SMARTER aggregation requires `algorithm`")?,
                    ranks: raw
                        .ranks
                        .clone()
                        .ok_or("SMARTER aggregation requires `ranks`")?,
                }
            }
            "SMARTS" => {
                extra("algorithm", raw.algorithm.is_some())?;
                extra("ranks", raw.ranks.is_some())?;
                extra("formula", raw.formula.is_some())?;
                AggregationSpec::Smarts {
                    weights: raw
                        .weights
                        .clone()
                        .ok_or("SMARTS aggregation requires `weights`")?,
                }
            }
            "Expression" => {
                extra("algorithm", raw.algorithm.is_some())?;
                extra("ranks", raw.ranks.is_some())?;
                extra("weights", raw.weights.is_some())?;
                AggregationSpec::Expression {
                    formula: raw
                        .formula
                        .clone()
                        .ok_or("Expression aggregation requires `formula`")?,
                }
            }
            other => return Err(format!("{UNKNOWN_AGGREGATION} `{other}`")),
        };
        Ok(spec)
    }
}

impl From<AggregationSpec> for RawAggregation {
    fn from(spec: AggregationSpec) -> Self {
        let mut raw = RawAggregation {
            kind: spec.kind_name().to_string(),
            algorithm: None,
            ranks: None,
            weights: None,
            formula: None,
        };
        match spec {
            AggregationSpec::Smarter { algorithm, ranks } => {
                raw.algorithm = Some(algorithm);
                raw.ranks = Some(ranks);
            }
            AggregationSpec::Smarts { weights } => raw.weights = Some(weights),
            AggregationSpec::Expression { formula } => raw.formula = Some(formula),
        }
        raw
    }
}

/// Whether larger raw values are better (benefit) or worse (cost).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Benefit,
    Cost,
}

/// Measurement scale of a leaf, with the scoring that maps raw values to reals.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueType {
    Numeric,
    Boolean {
        true_score: f64,
        false_score: f64,
    },
    Categorical {
        category_scores: BTreeMap<String, f64>,
    },
    Ranged {
        min: f64,
        max: f64,
    },
}

impl ValueType {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Numeric => "Numeric",
            Self::Boolean { .. } => "Boolean",
            Self::Categorical { .. } => "Categorical",
            Self::Ranged { .. } => "Ranged",
        }
    }
}

/// A single measurement of one metric for one alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawValue {
    Number(f64),
    Flag(bool),
    Category(String),
}

impl RawValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Number(_) => "number",
            Self::Flag(_) => "flag",
            Self::Category(_) => "category",
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Number(n) => write!(f, "{n}"),
            Self::Flag(b) => write!(f, "{b}"),
            Self::Category(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityAttribute {
    pub id: String,
    pub display_name: String,
    pub children: Vec<QualityAttribute>,
    pub aggregation: Option<AggregationSpec>,
    /// Name of a declared value type; leaves only.
    pub value_type: Option<String>,
    /// Leaves only; absent means benefit.
    pub direction: Option<Direction>,
}

impl QualityAttribute {
    pub fn leaf(id: impl Into<String>, value_type: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id,
            children: Vec::new(),
            aggregation: None,
            value_type: Some(value_type.into()),
            direction: None,
        }
    }

    pub fn node(
        id: impl Into<String>,
        aggregation: AggregationSpec,
        children: Vec<QualityAttribute>,
    ) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id,
            children,
            aggregation: Some(aggregation),
            value_type: None,
            direction: None,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = Some(direction);
        self
    }

    pub fn with_display_name(mut self, name: impl Into<String>) -> Self {
        self.display_name = name.into();
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal, self first.
    pub fn walk(&self) -> Vec<&QualityAttribute> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&QualityAttribute> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: &str) -> Option<&mut QualityAttribute> {
        if self.id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Applies `f` to every node, parents before children.
    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut QualityAttribute)) {
        f(self);
        for child in &mut self.children {
            child.for_each_mut(f);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricBinding {
    pub attribute: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub name: String,
    pub version: String,
    pub root: QualityAttribute,
    pub value_types: BTreeMap<String, ValueType>,
    pub metric_bindings: Vec<MetricBinding>,
}

impl QualityModel {
    pub fn attribute(&self, id: &str) -> Option<&QualityAttribute> {
        self.root.find(id)
    }

    pub fn leaves(&self) -> Vec<&QualityAttribute> {
        self.root
            .walk()
            .into_iter()
            .filter(|a| a.is_leaf())
            .collect()
    }

    /// Metric source bound to a leaf (first binding wins if validation was skipped).
    pub fn source_for(&self, attribute_id: &str) -> Option<&str> {
        self.metric_bindings
            .iter()
            .find(|b| b.attribute == attribute_id)
            .map(|b| b.source.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Alternative {
    pub id: String,
    pub display_name: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default)]
    pub measurements: BTreeMap<String, RawValue>,
}

impl Alternative {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            display_name: id.clone(),
            id,
            metadata: BTreeMap::new(),
            measurements: BTreeMap::new(),
        }
    }

    pub fn with(mut self, source: impl Into<String>, value: RawValue) -> Self {
        self.measurements.insert(source.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("{value} value does not match value type {expected}")]
    VariantMismatch {
        value: &'static str,
        expected: &'static str,
    },
    #[error("unknown category label `{0}`")]
    UnknownCategory(String),
    #[error("value {value} outside range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("value is not finite")]
    NonFinite,
}

/// Maps a raw measurement to a real score according to its value type.
///
/// Numeric and ranged numbers pass through unchanged; the range only
/// restricts which numbers are admissible.
pub fn score_raw(value: &RawValue, vtype: &ValueType) -> Result<f64, ScoreError> {
    let mismatch = || ScoreError::VariantMismatch {
        value: value.kind_name(),
        expected: vtype.kind_name(),
    };
    match (vtype, value) {
        (ValueType::Numeric, RawValue::Number(n)) => {
            if n.is_finite() {
                Ok(*n)
            } else {
                Err(ScoreError::NonFinite)
            }
        }
        (ValueType::Ranged { min, max }, RawValue::Number(n)) => {
            if !n.is_finite() {
                Err(ScoreError::NonFinite)
            } else if n < min || n > max {
                Err(ScoreError::OutOfRange {
                    value: *n,
                    min: *min,
                    max: *max,
                })
            } else {
                Ok(*n)
            }
        }
        (
            ValueType::Boolean {
                true_score,
                false_score,
            },
            RawValue::Flag(b),
        ) => Ok(if *b { *true_score } else { *false_score }),
        (ValueType::Categorical { category_scores }, RawValue::Category(label)) => category_scores
            .get(label)
            .copied()
            .ok_or_else(|| ScoreError::UnknownCategory(label.clone())),
        _ => Err(mismatch()),
    }
}
