//! Bottom-up evaluation of alternatives against a quality model.
//!
//! Leaves are scored and min-max scaled across the full alternative set
//! passed to [`evaluate`], so adding or removing an alternative can change
//! every other alternative's scaled values. Internal nodes then combine
//! child values with their declared strategy, up to the root.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_expression, parse_expression, Expr, ExprError};
use crate::mcdm::{
    scale_values, smarter_weights, smarts_normalize, utility, McdmError, RankAssignment,
    WeightVector,
};
use crate::model::{
    score_raw, AggregationSpec, Alternative, QualityAttribute, QualityModel, ScoreError,
};
use crate::validate::{validate_model, ValidationIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Single,
    Aggregated,
}

/// Computed value of one attribute for one alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeValue {
    pub attribute_id: String,
    pub value: f64,
    pub kind: ValueKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub child_values: Vec<NodeValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_used: Option<WeightVector>,
}

impl NodeValue {
    pub fn find(&self, attribute_id: &str) -> Option<&NodeValue> {
        if self.attribute_id == attribute_id {
            return Some(self);
        }
        self.child_values.iter().find_map(|c| c.find(attribute_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: String,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationResult {
    pub model_name: String,
    pub per_alternative: BTreeMap<String, NodeValue>,
    pub ranking: Vec<RankEntry>,
}

/// Replaces the aggregation of one internal attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WhatIfOverride {
    pub attribute_id: String,
    pub replacement: AggregationSpec,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("model failed validation with {} issue(s)", .0.len())]
    Invalid(Vec<ValidationIssue>),
    #[error("duplicate alternative id `{0}`")]
    DuplicateAlternative(String),
    #[error("alternative `{alternative}` has no measurement for metric `{metric}`")]
    MissingMeasurement { alternative: String, metric: String },
    #[error("alternative `{alternative}`, attribute `{attribute}`: {source}")]
    Score {
        alternative: String,
        attribute: String,
        source: ScoreError,
    },
    #[error("alternative `{alternative}`, attribute `{attribute}`: {source}")]
    Expression {
        alternative: String,
        attribute: String,
        source: ExprError,
    },
    #[error("attribute `{attribute}`: {source}")]
    Weights {
        attribute: String,
        source: McdmError,
    },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `{0}` is a leaf and has no aggregation to override")]
    LeafOverride(String),
    #[error("override leaves the model invalid with {} issue(s)", .0.len())]
    InvalidOverride(Vec<ValidationIssue>),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Invalid(_) => "validation-failed",
            Self::DuplicateAlternative(_) => "duplicate-alternative",
            Self::MissingMeasurement { .. } => "missing-measurement",
            Self::Score { .. } => "score-error",
            Self::Expression { .. } => "expression-error",
            Self::Weights { .. } => "weight-error",
            Self::UnknownAttribute(_) => "unknown-attribute",
            Self::LeafOverride(_) => "leaf-override",
            Self::InvalidOverride(_) => "invalid-override",
        }
    }

    pub fn issues(&self) -> &[ValidationIssue] {
        match self {
            Self::Invalid(issues) | Self::InvalidOverride(issues) => issues,
            _ => &[],
        }
    }
}

/// Per-node strategy after weights are resolved; independent of the alternative.
enum Combiner {
    Weighted(WeightVector),
    Formula(Expr),
}

pub(crate) fn node_weights(node: &QualityAttribute) -> Result<Option<WeightVector>, EvalError> {
    let wrap = |source| EvalError::Weights {
        attribute: node.id.clone(),
        source,
    };
    match &node.aggregation {
        Some(AggregationSpec::Smarter { algorithm, ranks }) => {
            let ranks = RankAssignment::new(ranks.clone()).map_err(wrap)?;
            smarter_weights(*algorithm, &ranks).map(Some).map_err(wrap)
        }
        Some(AggregationSpec::Smarts { weights }) => {
            smarts_normalize(weights).map(Some).map_err(wrap)
        }
        _ => Ok(None),
    }
}

pub fn evaluate(
    model: &QualityModel,
    alternatives: &[Alternative],
) -> Result<EvaluationResult, EvalError> {
    let issues = validate_model(model);
    if !issues.is_empty() {
        return Err(EvalError::Invalid(issues));
    }
    let mut ids = BTreeSet::new();
    for alt in alternatives {
        if !ids.insert(alt.id.as_str()) {
            return Err(EvalError::DuplicateAlternative(alt.id.clone()));
        }
    }
    if alternatives.is_empty() {
        return Ok(EvaluationResult {
            model_name: model.name.clone(),
            per_alternative: BTreeMap::new(),
            ranking: Vec::new(),
        });
    }

    // leaf id -> scaled value per alternative index
    let mut leaf_values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for leaf in model.leaves() {
        let vtype = leaf
            .value_type
            .as_deref()
            .and_then(|name| model.value_types.get(name))
            .expect("validated leaves reference declared value types");
        let source = model
            .source_for(&leaf.id)
            .expect("validated leaves have a metric binding");
        let mut scores = Vec::with_capacity(alternatives.len());
        for alt in alternatives {
            let raw =
                alt.measurements
                    .get(source)
                    .ok_or_else(|| EvalError::MissingMeasurement {
                        alternative: alt.id.clone(),
                        metric: source.to_string(),
                    })?;
            scores.push(score_raw(raw, vtype).map_err(|source| EvalError::Score {
                alternative: alt.id.clone(),
                attribute: leaf.id.clone(),
                source,
            })?);
        }
        let scaled =
            scale_values(&scores, leaf.direction.unwrap_or_default()).map_err(|source| {
                EvalError::Weights {
                    attribute: leaf.id.clone(),
                    source,
                }
            })?;
        leaf_values.insert(&leaf.id, scaled.into_iter().map(|s| s.get()).collect());
    }

    let mut combiners: BTreeMap<&str, Combiner> = BTreeMap::new();
    for node in model.root.walk().into_iter().filter(|n| !n.is_leaf()) {
        let combiner = match &node.aggregation {
            Some(AggregationSpec::Expression { formula }) => {
                Combiner::Formula(parse_expression(formula).map_err(|source| {
                    EvalError::Expression {
                        alternative: String::new(),
                        attribute: node.id.clone(),
                        source,
                    }
                })?)
            }
            _ => {
                Combiner::Weighted(node_weights(node)?.expect("validated internal nodes aggregate"))
            }
        };
        combiners.insert(&node.id, combiner);
    }

    let ctx = Context {
        leaf_values: &leaf_values,
        combiners: &combiners,
    };
    let mut per_alternative = BTreeMap::new();
    for (index, alt) in alternatives.iter().enumerate() {
        per_alternative.insert(alt.id.clone(), ctx.node_value(&model.root, index, &alt.id)?);
    }
    let ranking = rank_values(per_alternative.iter().map(|(id, v)| (id.as_str(), v.value)));
    Ok(EvaluationResult {
        model_name: model.name.clone(),
        per_alternative,
        ranking,
    })
}

struct Context<'a> {
    leaf_values: &'a BTreeMap<&'a str, Vec<f64>>,
    combiners: &'a BTreeMap<&'a str, Combiner>,
}

impl Context<'_> {
    fn node_value(
        &self,
        node: &QualityAttribute,
        index: usize,
        alt_id: &str,
    ) -> Result<NodeValue, EvalError> {
        if node.is_leaf() {
            return Ok(NodeValue {
                attribute_id: node.id.clone(),
                value: self.leaf_values[node.id.as_str()][index],
                kind: ValueKind::Single,
                child_values: Vec::new(),
                weights_used: None,
            });
        }
        let children = node
            .children
            .iter()
            .map(|c| self.node_value(c, index, alt_id))
            .collect::<Result<Vec<_>, _>>()?;
        let (value, weights_used) = match &self.combiners[node.id.as_str()] {
            Combiner::Weighted(weights) => {
                let values: Vec<f64> = children.iter().map(|c| c.value).collect();
                let u = utility(weights, &values).map_err(|source| EvalError::Weights {
                    attribute: node.id.clone(),
                    source,
                })?;
                (u.get(), Some(weights.clone()))
            }
            Combiner::Formula(expr) => {
                let env: BTreeMap<String, f64> = children
                    .iter()
                    .map(|c| (c.attribute_id.clone(), c.value))
                    .collect();
                let v = eval_expression(expr, &env).map_err(|source| EvalError::Expression {
                    alternative: alt_id.to_string(),
                    attribute: node.id.clone(),
                    source,
                })?;
                (v, None)
            }
        };
        Ok(NodeValue {
            attribute_id: node.id.clone(),
            value,
            kind: ValueKind::Aggregated,
            child_values: children,
            weights_used,
        })
    }
}

fn rank_values<'a>(values: impl Iterator<Item = (&'a str, f64)>) -> Vec<RankEntry> {
    let mut ranking: Vec<RankEntry> = values
        .map(|(id, utility)| RankEntry {
            id: id.to_string(),
            utility,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.utility
            .total_cmp(&a.utility)
            .then_with(|| a.id.cmp(&b.id))
    });
    ranking
}

/// Alternatives by descending root utility; equal utilities order by id.
pub fn rank(result: &EvaluationResult) -> Vec<RankEntry> {
    rank_values(
        result
            .per_alternative
            .iter()
            .map(|(id, v)| (id.as_str(), v.value)),
    )
}

/// Applies overrides to a copy of `model` and checks the copy is still valid.
pub fn apply_overrides(
    model: &QualityModel,
    overrides: &[WhatIfOverride],
) -> Result<QualityModel, EvalError> {
    let mut copy = model.clone();
    for o in overrides {
        let node = copy
            .root
            .find_mut(&o.attribute_id)
            .ok_or_else(|| EvalError::UnknownAttribute(o.attribute_id.clone()))?;
        if node.is_leaf() {
            return Err(EvalError::LeafOverride(o.attribute_id.clone()));
        }
        node.aggregation = Some(o.replacement.clone());
    }
    let issues = validate_model(&copy);
    if !issues.is_empty() {
        return Err(EvalError::InvalidOverride(issues));
    }
    Ok(copy)
}

/// Evaluates `model` with `overrides` applied; `model` itself is untouched.
pub fn what_if(
    model: &QualityModel,
    overrides: &[WhatIfOverride],
    alternatives: &[Alternative],
) -> Result<EvaluationResult, EvalError> {
    evaluate(&apply_overrides(model, overrides)?, alternatives)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, MetricBinding, RawValue, SmarterAlgorithm, ValueType};

    fn model(root: QualityAttribute) -> QualityModel {
        let metric_bindings = root
            .walk()
            .into_iter()
            .filter(|a| a.is_leaf())
            .map(|a| MetricBinding {
                attribute: a.id.clone(),
                source: a.id.clone(),
            })
            .collect();
        QualityModel {
            name: "test".into(),
            version: "1".into(),
            root,
            value_types: [("n".to_string(), ValueType::Numeric)]
                .into_iter()
                .collect(),
            metric_bindings,
        }
    }

    fn alt(id: &str, values: &[(&str, f64)]) -> Alternative {
        values.iter().fold(Alternative::new(id), |a, (k, v)| {
            a.with(*k, RawValue::Number(*v))
        })
    }

    fn utilities(r: &EvaluationResult) -> Vec<(String, f64)> {
        r.ranking
            .iter()
            .map(|e| (e.id.clone(), e.utility))
            .collect()
    }

    #[test]
    fn single_leaf_passes_scaling_through() {
        let m = model(QualityAttribute::leaf("x", "n"));
        let alts = [
            alt("a", &[("x", 10.0)]),
            alt("b", &[("x", 20.0)]),
            alt("c", &[("x", 30.0)]),
        ];
        let r = evaluate(&m, &alts).unwrap();
        assert_eq!(r.per_alternative["a"].value, 0.0);
        assert_eq!(r.per_alternative["b"].value, 0.5);
        assert_eq!(r.per_alternative["c"].value, 1.0);
        let order: Vec<_> = r.ranking.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(order, ["c", "b", "a"]);
        assert_eq!(r.per_alternative["a"].kind, ValueKind::Single);
    }

    fn two_leaf(spec: AggregationSpec) -> QualityModel {
        model(QualityAttribute::node(
            "root",
            spec,
            vec![
                QualityAttribute::leaf("x", "n"),
                QualityAttribute::leaf("y", "n"),
            ],
        ))
    }

    #[test]
    fn smarts_tie_broken_by_id() {
        let m = two_leaf(AggregationSpec::Smarts {
            weights: vec![1.0, 1.0],
        });
        let alts = [
            alt("b", &[("x", 1.0), ("y", 0.0)]),
            alt("a", &[("x", 0.0), ("y", 1.0)]),
        ];
        let r = evaluate(&m, &alts).unwrap();
        assert_eq!(
            utilities(&r),
            [("a".to_string(), 0.5), ("b".to_string(), 0.5)]
        );
        let root = &r.per_alternative["a"];
        assert_eq!(root.kind, ValueKind::Aggregated);
        assert_eq!(root.weights_used.as_ref().unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(root.child_values.len(), 2);
    }

    #[test]
    fn cost_direction_reverses() {
        let m = model(QualityAttribute::leaf("x", "n").with_direction(Direction::Cost));
        let alts = [alt("a", &[("x", 1.0)]), alt("b", &[("x", 3.0)])];
        let r = evaluate(&m, &alts).unwrap();
        assert_eq!(r.ranking[0].id, "a");
    }

    #[test]
    fn expression_node() {
        let m = two_leaf(AggregationSpec::Expression {
            formula: "max(x, y) - min(x, y) / 2".into(),
        });
        let alts = [
            alt("a", &[("x", 0.0), ("y", 10.0)]),
            alt("b", &[("x", 10.0), ("y", 0.0)]),
            alt("c", &[("x", 5.0), ("y", 5.0)]),
        ];
        let r = evaluate(&m, &alts).unwrap();
        // scaled: a=(0,1), b=(1,0), c=(0.5,0.5)
        assert_eq!(r.per_alternative["a"].value, 1.0);
        assert_eq!(r.per_alternative["c"].value, 0.25);
        assert!(r.per_alternative["c"].weights_used.is_none());
    }

    #[test]
    fn expression_division_by_zero_at_runtime() {
        let m = two_leaf(AggregationSpec::Expression {
            formula: "x / y".into(),
        });
        let alts = [
            alt("a", &[("x", 0.0), ("y", 0.0)]),
            alt("b", &[("x", 1.0), ("y", 1.0)]),
        ];
        let err = evaluate(&m, &alts).unwrap_err();
        assert!(matches!(err, EvalError::Expression { ref alternative, .. } if alternative == "a"));
    }

    #[test]
    fn error_paths() {
        let m = two_leaf(AggregationSpec::Smarts { weights: vec![1.0] });
        assert_eq!(evaluate(&m, &[]).unwrap_err().code(), "validation-failed");

        let m = two_leaf(AggregationSpec::Smarts {
            weights: vec![1.0, 1.0],
        });
        let err = evaluate(&m, &[alt("a", &[("x", 1.0)])]).unwrap_err();
        assert_eq!(
            err,
            EvalError::MissingMeasurement {
                alternative: "a".into(),
                metric: "y".into()
            }
        );

        let dup = [
            alt("a", &[("x", 1.0), ("y", 1.0)]),
            alt("a", &[("x", 1.0), ("y", 1.0)]),
        ];
        assert_eq!(
            evaluate(&m, &dup).unwrap_err().code(),
            "duplicate-alternative"
        );

        let bad = [Alternative::new("a")
            .with("x", RawValue::Flag(true))
            .with("y", RawValue::Number(1.0))];
        assert_eq!(evaluate(&m, &bad).unwrap_err().code(), "score-error");
    }

    #[test]
    fn rank_orders_and_breaks_ties() {
        let node = |v: f64| NodeValue {
            attribute_id: "r".into(),
            value: v,
            kind: ValueKind::Single,
            child_values: vec![],
            weights_used: None,
        };
        let result = EvaluationResult {
            model_name: "m".into(),
            per_alternative: [("a".to_string(), node(0.2)), ("b".to_string(), node(0.9))].into(),
            ranking: vec![],
        };
        let ids: Vec<_> = rank(&result).into_iter().map(|e| e.id).collect();
        assert_eq!(ids, ["b", "a"]);
        let result = EvaluationResult {
            per_alternative: [("b".to_string(), node(0.5)), ("a".to_string(), node(0.5))].into(),
            ..result
        };
        let ids: Vec<_> = rank(&result).into_iter().map(|e| e.id).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    fn three(spec: AggregationSpec) -> (QualityModel, Vec<Alternative>) {
        let m = model(QualityAttribute::node(
            "root",
            spec,
            vec![
                QualityAttribute::leaf("x", "n"),
                QualityAttribute::leaf("y", "n"),
                QualityAttribute::leaf("z", "n"),
            ],
        ));
        let alts = vec![
            alt("a", &[("x", 3.0), ("y", 0.0), ("z", 4.0)]),
            alt("b", &[("x", 1.0), ("y", 9.0), ("z", 2.0)]),
            alt("c", &[("x", 2.0), ("y", 4.0), ("z", 0.0)]),
        ];
        (m, alts)
    }

    #[test]
    fn what_if_identity_and_equal_weights() {
        let (m, alts) = three(AggregationSpec::Smarter {
            algorithm: SmarterAlgorithm::Roc,
            ranks: vec![1, 2, 3],
        });
        let base = evaluate(&m, &alts).unwrap();
        assert_eq!(what_if(&m, &[], &alts).unwrap(), base);

        let o = WhatIfOverride {
            attribute_id: "root".into(),
            replacement: AggregationSpec::Smarts {
                weights: vec![3.0; 3],
            },
        };
        let r = what_if(&m, &[o], &alts).unwrap();
        for (id, node) in &r.per_alternative {
            let children = &base.per_alternative[id].child_values;
            let mean = children.iter().map(|c| c.value).sum::<f64>() / children.len() as f64;
            assert!((node.value - mean).abs() < 1e-12);
        }
        // original untouched
        assert_eq!(evaluate(&m, &alts).unwrap(), base);
    }

    #[test]
    fn what_if_rank_swap_swaps_weights() {
        let m = two_leaf(AggregationSpec::Smarter {
            algorithm: SmarterAlgorithm::Rr,
            ranks: vec![1, 2],
        });
        let alts = [
            alt("a", &[("x", 0.0), ("y", 1.0)]),
            alt("b", &[("x", 1.0), ("y", 0.0)]),
        ];
        let before = evaluate(&m, &alts).unwrap();
        let swapped = WhatIfOverride {
            attribute_id: "root".into(),
            replacement: AggregationSpec::Smarter {
                algorithm: SmarterAlgorithm::Rr,
                ranks: vec![2, 1],
            },
        };
        let after = what_if(&m, &[swapped], &alts).unwrap();
        let w0 = before.per_alternative["a"]
            .weights_used
            .clone()
            .unwrap()
            .into_inner();
        let mut w1 = after.per_alternative["a"]
            .weights_used
            .clone()
            .unwrap()
            .into_inner();
        w1.reverse();
        assert_eq!(w0, w1);
        assert_eq!(before.ranking[0].id, "b");
        assert_eq!(after.ranking[0].id, "a");
    }

    #[test]
    fn what_if_errors() {
        let m = two_leaf(AggregationSpec::Smarts {
            weights: vec![1.0, 1.0],
        });
        let spec = AggregationSpec::Smarts { weights: vec![1.0] };
        let o = |id: &str, spec: AggregationSpec| WhatIfOverride {
            attribute_id: id.into(),
            replacement: spec,
        };
        assert_eq!(
            apply_overrides(&m, &[o("nope", spec.clone())]).unwrap_err(),
            EvalError::UnknownAttribute("nope".into())
        );
        assert_eq!(
            apply_overrides(&m, &[o("x", spec.clone())]).unwrap_err(),
            EvalError::LeafOverride("x".into())
        );
        let err = apply_overrides(&m, &[o("root", spec)]).unwrap_err();
        assert_eq!(err.issues()[0].rule, "weight-count-mismatch");
    }

    #[test]
    fn override_spec_json_shape() {
        let o: WhatIfOverride = serde_json::from_str(
            r#"{"attributeId": "root", "replacement": {"kind": "SMARTER", "algorithm": "RS", "ranks": [2, 1]}}"#,
        )
        .unwrap();
        assert_eq!(
            o.replacement,
            AggregationSpec::Smarter {
                algorithm: SmarterAlgorithm::Rs,
                ranks: vec![2, 1]
            }
        );
    }
}
