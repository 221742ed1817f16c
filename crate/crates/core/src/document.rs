//! The `.qm` model document: UTF-8 JSON with a fixed canonical layout.
//!
//! ```json
//! {
//!   "model": { "name": "...", "version": "..." },
//!   "attributes": { "id": "...", "name": "...", "aggregation": {...}, "children": [...] },
//!   "metricBindings": [ { "attribute": "...", "source": "..." } ],
//!   "valueTypes": { "<name>": { "kind": "Numeric" } }
//! }
//! ```
//!
//! Canonical output uses a 2-space indent, the top-level key order above,
//! attribute keys in the order `id, name, direction, valueType, aggregation,
//! children`, and sorted keys in every map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AggregationSpec, Direction, MetricBinding, QualityAttribute, QualityModel, ValueType,
    UNKNOWN_AGGREGATION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    MissingHeader,
    UnknownAggregationKind,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ModelParseError {
    pub kind: ParseErrorKind,
    /// 1-based line and column, when the error has a source location.
    pub position: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ModelParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some((line, column)) => write!(f, "line {line}, column {column}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl ModelParseError {
    fn new(kind: ParseErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            position: None,
            message: message.into(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRoot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<DocHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attributes: Option<DocAttribute>,
    #[serde(rename = "metricBindings", default)]
    metric_bindings: Vec<MetricBinding>,
    #[serde(rename = "valueTypes", default)]
    value_types: BTreeMap<String, DocValueType>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocHeader {
    name: String,
    #[serde(default)]
    version: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocAttribute {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<Direction>,
    #[serde(rename = "valueType", default, skip_serializing_if = "Option::is_none")]
    value_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregation: Option<AggregationSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<DocAttribute>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum DocValueType {
    Numeric,
    #[serde(rename_all = "camelCase")]
    Boolean {
        true_score: f64,
        false_score: f64,
    },
    #[serde(rename_all = "camelCase")]
    Categorical {
        category_scores: BTreeMap<String, f64>,
    },
    Ranged {
        min: f64,
        max: f64,
    },
}

impl From<DocValueType> for ValueType {
    fn from(doc: DocValueType) -> Self {
        match doc {
            DocValueType::Numeric => ValueType::Numeric,
            DocValueType::Boolean {
                true_score,
                false_score,
            } => ValueType::Boolean {
                true_score,
                false_score,
            },
            DocValueType::Categorical { category_scores } => {
                ValueType::Categorical { category_scores }
            }
            DocValueType::Ranged { min, max } => ValueType::Ranged { min, max },
        }
    }
}

impl From<&ValueType> for DocValueType {
    fn from(vt: &ValueType) -> Self {
        match vt.clone() {
            ValueType::Numeric => DocValueType::Numeric,
            ValueType::Boolean {
                true_score,
                false_score,
            } => DocValueType::Boolean {
                true_score,
                false_score,
            },
            ValueType::Categorical { category_scores } => {
                DocValueType::Categorical { category_scores }
            }
            ValueType::Ranged { min, max } => DocValueType::Ranged { min, max },
        }
    }
}

fn attribute_from_doc(doc: DocAttribute) -> QualityAttribute {
    QualityAttribute {
        display_name: doc.name.unwrap_or_else(|| doc.id.clone()),
        id: doc.id,
        children: doc.children.into_iter().map(attribute_from_doc).collect(),
        aggregation: doc.aggregation,
        value_type: doc.value_type,
        direction: doc.direction,
    }
}

fn attribute_to_doc(attr: &QualityAttribute) -> DocAttribute {
    DocAttribute {
        id: attr.id.clone(),
        name: Some(attr.display_name.clone()),
        direction: attr.direction,
        value_type: attr.value_type.clone(),
        aggregation: attr.aggregation.clone(),
        children: attr.children.iter().map(attribute_to_doc).collect(),
    }
}

fn from_json_error(e: serde_json::Error) -> ModelParseError {
    let message = e.to_string();
    let kind = if message.starts_with(UNKNOWN_AGGREGATION) {
        ParseErrorKind::UnknownAggregationKind
    } else {
        ParseErrorKind::Syntax
    };
    // serde_json appends " at line L column C"; the position is kept separately
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    ModelParseError {
        kind,
        position: (e.line() > 0).then(|| (e.line(), e.column())),
        message,
    }
}

/// Parses a model document. Semantic rules are left to
/// [`crate::validate::validate_model`]; duplicate ids are rejected here
/// because the tree cannot be addressed without unique ids.
pub fn parse_model(text: &str) -> Result<QualityModel, ModelParseError> {
    if text.trim().is_empty() {
        return Err(ModelParseError::new(
            ParseErrorKind::MissingHeader,
            "missing model header",
        ));
    }
    let doc: DocRoot = serde_json::from_str(text).map_err(from_json_error)?;
    let header = doc.model.ok_or_else(|| {
        ModelParseError::new(ParseErrorKind::MissingHeader, "missing model header")
    })?;
    let root = doc
        .attributes
        .ok_or_else(|| ModelParseError::new(ParseErrorKind::Syntax, "missing `attributes` tree"))?;
    let root = attribute_from_doc(root);

    let mut seen = BTreeSet::new();
    for node in root.walk() {
        if !seen.insert(node.id.as_str()) {
            return Err(ModelParseError::new(
                ParseErrorKind::DuplicateId,
                format!("duplicate attribute id `{}`", node.id),
            ));
        }
    }

    Ok(QualityModel {
        name: header.name,
        version: header.version,
        root,
        value_types: doc
            .value_types
            .into_iter()
            .map(|(k, v)| (k, v.into()))
            .collect(),
        metric_bindings: doc.metric_bindings,
    })
}

/// Canonical text form; `parse_model(&serialize_model(m)) == Ok(m)`.
pub fn serialize_model(model: &QualityModel) -> String {
    let doc = DocRoot {
        model: Some(DocHeader {
            name: model.name.clone(),
            version: model.version.clone(),
        }),
        attributes: Some(attribute_to_doc(&model.root)),
        metric_bindings: model.metric_bindings.clone(),
        value_types: model
            .value_types
            .iter()
            .map(|(k, v)| (k.clone(), v.into()))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model documents always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SmarterAlgorithm;

    const SMALL: &str = r#"{
  "model": { "name": "tiny", "version": "0.1" },
  "attributes": {
    "id": "root",
    "aggregation": { "kind": "SMARTER", "algorithm": "RR", "ranks": [1, 2] },
    "children": [
      { "id": "forks", "name": "Forks", "valueType": "count" },
      { "id": "issues", "direction": "cost", "valueType": "count" }
    ]
  },
  "metricBindings": [
    { "attribute": "forks", "source": "forks" },
    { "attribute": "issues", "source": "openIssues" }
  ],
  "valueTypes": { "count": { "kind": "Numeric" } }
}"#;

    #[test]
    fn parses_small_document() {
        let m = parse_model(SMALL).unwrap();
        assert_eq!(m.name, "tiny");
        assert_eq!(m.root.children.len(), 2);
        assert_eq!(m.root.display_name, "root");
        assert_eq!(m.root.children[0].display_name, "Forks");
        assert_eq!(m.root.children[1].direction, Some(Direction::Cost));
        assert_eq!(m.source_for("issues"), Some("openIssues"));
        assert_eq!(
            m.root.aggregation,
            Some(AggregationSpec::Smarter {
                algorithm: SmarterAlgorithm::Rr,
                ranks: vec![1, 2]
            })
        );
    }

    #[test]
    fn canonical_fixpoint() {
        let m = parse_model(SMALL).unwrap();
        let once = serialize_model(&m);
        let again = serialize_model(&parse_model(&once).unwrap());
        assert_eq!(once, again);
        assert_eq!(parse_model(&once).unwrap(), m);
        assert!(once.starts_with("{\n  \"model\": {"));
        let model_at = once.find("\"model\"").unwrap();
        let attrs_at = once.find("\"attributes\"").unwrap();
        let bindings_at = once.find("\"metricBindings\"").unwrap();
        assert!(model_at < attrs_at && attrs_at < bindings_at);
    }

    #[test]
    fn unicode_names_preserved() {
        let text = SMALL.replace("\"Forks\"", "\"Forks · 分岐 ✓\"");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.root.children[0].display_name, "Forks · 分岐 ✓");
        let back = parse_model(&serialize_model(&m)).unwrap();
        assert_eq!(back.root.children[0].display_name, "Forks · 分岐 ✓");
    }

    #[test]
    fn empty_document() {
        let e = parse_model("  \n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
        assert_eq!(e.message, "missing model header");
        let e = parse_model(r#"{"attributes": {"id": "a"}}"#).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
    }

    #[test]
    fn unknown_aggregation_kind() {
        let text = SMALL.replace("\"kind\": \"SMARTER\"", "\"kind\": \"AHP\"");
        let e = parse_model(&text).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownAggregationKind);
        assert!(e.message.starts_with("unknown aggregation kind"), "{e}");
        assert!(e.position.is_some());
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_model("{\n  \"model\": {\"name\": \"x\",}\n}").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.position.map(|p| p.0), Some(2));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = SMALL.replace("\"id\": \"issues\"", "\"id\": \"forks\"");
        let e = parse_model(&text).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DuplicateId);
    }

    #[test]
    fn mixed_aggregation_fields_rejected() {
        let text = SMALL.replace(
            "\"ranks\": [1, 2]",
            "\"ranks\": [1, 2], \"weights\": [1, 1]",
        );
        assert_eq!(parse_model(&text).unwrap_err().kind, ParseErrorKind::Syntax);
    }
}
