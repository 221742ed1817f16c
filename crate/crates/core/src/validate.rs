//! Structural and semantic checks on a [`QualityModel`].
//!
//! Issues are collected rather than thrown. Each carries a stable rule code,
//! the offending attribute id (empty for model-level findings), and a message.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::parse_expression;
use crate::model::{AggregationSpec, QualityAttribute, QualityModel, SmarterAlgorithm, ValueType};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub attribute: String,
    pub rule: String,
    pub message: String,
}

impl ValidationIssue {
    fn new(attribute: &str, rule: &str, message: impl Into<String>) -> Self {
        Self {
            attribute: attribute.to_string(),
            rule: rule.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.attribute.is_empty() {
            write!(f, "[{}] {}", self.rule, self.message)
        } else {
            write!(f, "[{}] {}: {}", self.rule, self.attribute, self.message)
        }
    }
}

pub fn validate_model(model: &QualityModel) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    for (name, vt) in &model.value_types {
        check_value_type(name, vt, &mut issues);
    }

    let nodes = model.root.walk();
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for node in &nodes {
        if !seen.insert(node.id.as_str()) && reported.insert(node.id.as_str()) {
            issues.push(ValidationIssue::new(
                &node.id,
                "duplicate-id",
                "attribute id appears more than once in the tree",
            ));
        }
        if node.id.is_empty() {
            issues.push(ValidationIssue::new(
                "",
                "empty-id",
                "attribute id must not be empty",
            ));
        }
        check_attribute(node, model, &mut issues);
    }

    check_bindings(model, &nodes, &mut issues);

    // order-independent output
    issues.sort();
    issues.dedup();
    issues
}

fn check_value_type(name: &str, vt: &ValueType, issues: &mut Vec<ValidationIssue>) {
    let at = format!("valueType {name}");
    match vt {
        ValueType::Numeric => {}
        ValueType::Boolean {
            true_score,
            false_score,
        } => {
            if !true_score.is_finite() || !false_score.is_finite() {
                issues.push(ValidationIssue::new(
                    "",
                    "non-finite-score",
                    format!("{at}: scores must be finite"),
                ));
            }
        }
        ValueType::Categorical { category_scores } => {
            if category_scores.is_empty() {
                issues.push(ValidationIssue::new(
                    "",
                    "empty-categorical",
                    format!("{at}: at least one category score is required"),
                ));
            }
            for (label, score) in category_scores {
                if !score.is_finite() {
                    issues.push(ValidationIssue::new(
                        "",
                        "non-finite-score",
                        format!("{at}: score for `{label}` must be finite"),
                    ));
                }
            }
        }
        ValueType::Ranged { min, max } => {
            if !(min.is_finite() && max.is_finite() && min < max) {
                issues.push(ValidationIssue::new(
                    "",
                    "invalid-range",
                    format!("{at}: min {min} must be below max {max}"),
                ));
            }
        }
    }
}

fn check_attribute(
    node: &QualityAttribute,
    model: &QualityModel,
    issues: &mut Vec<ValidationIssue>,
) {
    let id = node.id.as_str();
    if node.is_leaf() {
        if node.aggregation.is_some() {
            issues.push(ValidationIssue::new(
                id,
                "leaf-has-aggregation",
                "a leaf must not declare an aggregation",
            ));
        }
        match &node.value_type {
            None => issues.push(ValidationIssue::new(
                id,
                "leaf-missing-valuetype",
                "a leaf must declare a value type",
            )),
            Some(name) if !model.value_types.contains_key(name) => {
                issues.push(ValidationIssue::new(
                    id,
                    "unknown-valuetype",
                    format!("value type `{name}` is not declared"),
                ))
            }
            Some(_) => {}
        }
        return;
    }

    if node.value_type.is_some() {
        issues.push(ValidationIssue::new(
            id,
            "non-leaf-has-valuetype",
            "an attribute with children must not declare a value type",
        ));
    }
    if node.direction.is_some() {
        issues.push(ValidationIssue::new(
            id,
            "non-leaf-has-direction",
            "direction applies to leaves only",
        ));
    }
    let n = node.children.len();
    match &node.aggregation {
        None => issues.push(ValidationIssue::new(
            id,
            "non-leaf-missing-aggregation",
            "an attribute with children must declare an aggregation",
        )),
        Some(AggregationSpec::Smarter { algorithm, ranks }) => {
            if ranks.len() != n {
                issues.push(ValidationIssue::new(
                    id,
                    "rank-count-mismatch",
                    format!("{} ranks for {n} children", ranks.len()),
                ));
            }
            if ranks.contains(&0) {
                issues.push(ValidationIssue::new(
                    id,
                    "invalid-rank",
                    "ranks must be >= 1",
                ));
            }
            if *algorithm == SmarterAlgorithm::Rs && ranks.iter().any(|&r| r as usize > ranks.len())
            {
                issues.push(ValidationIssue::new(
                    id,
                    "rank-exceeds-count",
                    format!("RS requires every rank <= {}", ranks.len()),
                ));
            }
        }
        Some(AggregationSpec::Smarts { weights }) => {
            if weights.len() != n {
                issues.push(ValidationIssue::new(
                    id,
                    "weight-count-mismatch",
                    format!("{} weights for {n} children", weights.len()),
                ));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                issues.push(ValidationIssue::new(
                    id,
                    "non-positive-weight",
                    "SMARTS weights must be positive and finite",
                ));
            }
        }
        Some(AggregationSpec::Expression { formula }) => match parse_expression(formula) {
            Err(e) => issues.push(ValidationIssue::new(id, "expression-syntax", e.to_string())),
            Ok(expr) => {
                let children: BTreeSet<&str> =
                    node.children.iter().map(|c| c.id.as_str()).collect();
                for r in expr.references() {
                    if !children.contains(r) {
                        issues.push(ValidationIssue::new(
                            id,
                            "expression-unknown-reference",
                            format!("`{r}` is not a direct child"),
                        ));
                    }
                }
                if expr.divides_by_literal_zero() {
                    issues.push(ValidationIssue::new(
                        id,
                        "expression-division-by-zero",
                        "division by literal zero",
                    ));
                }
            }
        },
    }
}

fn check_bindings(
    model: &QualityModel,
    nodes: &[&QualityAttribute],
    issues: &mut Vec<ValidationIssue>,
) {
    let by_id: BTreeMap<&str, &QualityAttribute> =
        nodes.iter().map(|n| (n.id.as_str(), *n)).collect();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for binding in &model.metric_bindings {
        *counts.entry(binding.attribute.as_str()).or_default() += 1;
        if binding.source.is_empty() {
            issues.push(ValidationIssue::new(
                &binding.attribute,
                "empty-source",
                "metric source id must not be empty",
            ));
        }
        match by_id.get(binding.attribute.as_str()) {
            None => issues.push(ValidationIssue::new(
                &binding.attribute,
                "binding-unknown-attribute",
                "metric binding refers to an unknown attribute",
            )),
            Some(node) if !node.is_leaf() => issues.push(ValidationIssue::new(
                &binding.attribute,
                "binding-on-non-leaf",
                "only leaves take metric bindings",
            )),
            Some(_) => {}
        }
    }
    for node in nodes.iter().filter(|n| n.is_leaf()) {
        match counts.get(node.id.as_str()).copied().unwrap_or(0) {
            0 => issues.push(ValidationIssue::new(
                &node.id,
                "leaf-missing-binding",
                "leaf has no metric binding",
            )),
            1 => {}
            k => issues.push(ValidationIssue::new(
                &node.id,
                "duplicate-binding",
                format!("leaf has {k} metric bindings"),
            )),
        }
    }
}
