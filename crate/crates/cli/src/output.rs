//! Stable JSON and plain-text renderings shared by the CLI and the API.

use std::fmt::Write as _;

use qmcdm_core::{EvaluationResult, NodeValue};
use serde::Serialize;
use serde_json::{json, Value};

/// Rounds to six significant digits. Non-finite values pass through.
pub fn round_sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n
                .as_f64()
                .map(round_sig6)
                .and_then(serde_json::Number::from_f64)
            {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with sorted keys and floats cut to six significant digits,
/// so identical inputs give byte-identical output.
pub fn stable_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output types serialize");
    round_floats(&mut v);
    // serde_json's map keeps keys sorted
    let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
    s.push('\n');
    s
}

/// The evaluation file: `{model, method, ranking: [{id, utility, nodeValues}]}`.
pub fn evaluation_document(result: &EvaluationResult, method: &str) -> Value {
    let ranking: Vec<Value> = result
        .ranking
        .iter()
        .map(|e| {
            json!({
                "id": e.id,
                "utility": e.utility,
                "nodeValues": result.per_alternative.get(&e.id),
            })
        })
        .collect();
    json!({
        "model": result.model_name,
        "method": method,
        "ranking": ranking,
    })
}

pub fn ranking_table(result: &EvaluationResult, limit: usize) -> String {
    let width = result
        .ranking
        .iter()
        .take(limit)
        .map(|e| e.id.chars().count())
        .max()
        .unwrap_or(0)
        .max("alternative".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:<width$}  {:>8}",
        "#", "alternative", "utility"
    );
    for (i, e) in result.ranking.iter().take(limit).enumerate() {
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>8.4}", i + 1, e.id, e.utility);
    }
    if result.ranking.len() > limit {
        let _ = writeln!(out, "      ... {} more", result.ranking.len() - limit);
    }
    out
}

/// Indented per-node breakdown for one alternative.
pub fn node_tree(node: &NodeValue) -> String {
    fn walk(n: &NodeValue, depth: usize, out: &mut String) {
        let _ = writeln!(
            out,
            "{:indent$}{}  {:.4}",
            "",
            n.attribute_id,
            n.value,
            indent = depth * 2
        );
        for c in &n.child_values {
            walk(c, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(node, 0, &mut out);
    out
}
