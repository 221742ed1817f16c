//! The bundled PRETTEF (Presentation, Trend, Technology, Features) case
//! study for MVC-framework selection.
//!
//! Only forks and pull-request counts are published per framework, so the
//! quantitative reproduction runs on the Trend subset built from those two
//! columns. The full model is a template: the categorical scores for
//! language, design pattern and license, and every unpublished column, are
//! left for the modeler to fill in.

use std::fmt::Write as _;

use crate::compare::{compare_methods, Method, MethodComparison};
use crate::dataset::{parse_dataset, DatasetFormat, DatasetSchema};
use crate::document::parse_model;
use crate::eval::{evaluate, EvalError, EvaluationResult};
use crate::model::{Alternative, MetricBinding, QualityAttribute, QualityModel, ValueType};

pub const MODEL_DOCUMENT: &str = include_str!("../prettef/prettef.qm");
pub const TREND_SUBSET_DOCUMENT: &str = include_str!("../prettef/trend_subset.qm");
pub const ALTERNATIVES_CSV: &str = include_str!("../prettef/alternatives.csv");

/// Criteria under Trend, in declaration order.
pub const TREND_CRITERIA: [&str; 6] = [
    "Contributors",
    "Stars",
    "PullRequests",
    "Forks",
    "ReleasesPerYear",
    "Language",
];
pub const TREND_RANKS: [u32; 6] = [3, 3, 2, 1, 3, 2];
/// Trend weights as published alongside the ranks.
pub const TREND_WEIGHTS: [f64; 6] = [0.111, 0.111, 0.166, 0.335, 0.111, 0.167];

pub fn model() -> QualityModel {
    parse_model(MODEL_DOCUMENT).expect("bundled PRETTEF model parses")
}

pub fn trend_subset_model() -> QualityModel {
    parse_model(TREND_SUBSET_DOCUMENT).expect("bundled Trend subset model parses")
}

/// A model whose root is the single numeric leaf bound to `source`.
pub fn single_metric_model(source: &str) -> QualityModel {
    QualityModel {
        name: format!("PRETTEF {source} only"),
        version: "2020-12".into(),
        root: QualityAttribute::leaf(source, "count"),
        value_types: [("count".to_string(), ValueType::Numeric)].into(),
        metric_bindings: vec![MetricBinding {
            attribute: source.to_string(),
            source: source.to_string(),
        }],
    }
}

/// The 17 alternatives, typed for `model`'s metric bindings.
pub fn alternatives_for(model: &QualityModel) -> Vec<Alternative> {
    parse_dataset(
        ALTERNATIVES_CSV,
        DatasetFormat::Csv,
        &DatasetSchema::from_model(model),
    )
    .expect("bundled PRETTEF dataset parses")
}

#[derive(Debug, Clone)]
pub struct PrettefReport {
    pub alternatives: usize,
    /// Trend subset evaluated with the ranks as declared (RR).
    pub baseline: EvaluationResult,
    pub comparison: MethodComparison,
    pub forks_only_top: String,
    pub pull_requests_only_top: String,
    pub text: String,
}

/// Evaluates the Trend subset under ROC, RR, RS and SWING and reports how
/// the rankings agree. Offline and deterministic.
pub fn run_prettef_subset() -> Result<PrettefReport, EvalError> {
    let subset = trend_subset_model();
    let alts = alternatives_for(&subset);
    let baseline = evaluate(&subset, &alts)?;
    let comparison = compare_methods(&subset, &alts, &Method::ALL)?;

    let top = |source: &str| -> Result<String, EvalError> {
        let m = single_metric_model(source);
        let r = evaluate(&m, &alternatives_for(&m))?;
        Ok(r.ranking.first().map(|e| e.id.clone()).unwrap_or_default())
    };
    let forks_only_top = top("forks")?;
    let pull_requests_only_top = top("pullRequests")?;

    let text = render_report(
        &comparison,
        alts.len(),
        &forks_only_top,
        &pull_requests_only_top,
    );
    Ok(PrettefReport {
        alternatives: alts.len(),
        baseline,
        comparison,
        forks_only_top,
        pull_requests_only_top,
        text,
    })
}

/// Side-by-side ranking table plus the Kendall tau matrix.
pub fn render_comparison(cmp: &MethodComparison) -> String {
    let mut out = String::new();
    let width = cmp
        .rankings
        .iter()
        .flat_map(|r| r.ranking.iter().map(|e| e.id.len()))
        .max()
        .unwrap_or(0)
        .max(8)
        + 10;
    let _ = write!(out, "{:>4}", "#");
    for r in &cmp.rankings {
        let _ = write!(out, "  {:<width$}", r.method.as_str());
    }
    out.push('\n');
    let rows = cmp
        .rankings
        .iter()
        .map(|r| r.ranking.len())
        .max()
        .unwrap_or(0);
    for i in 0..rows {
        let _ = write!(out, "{:>4}", i + 1);
        for r in &cmp.rankings {
            let cell = r
                .ranking
                .get(i)
                .map(|e| format!("{} ({:.4})", e.id, e.utility))
                .unwrap_or_default();
            let _ = write!(out, "  {cell:<width$}");
        }
        out.push('\n');
    }
    out.push_str("\nKendall tau distance\n");
    let _ = write!(out, "{:>6}", "");
    for r in &cmp.rankings {
        let _ = write!(out, " {:>7}", r.method.as_str());
    }
    out.push('\n');
    for (r, row) in cmp.rankings.iter().zip(&cmp.kendall_tau) {
        let _ = write!(out, "{:>6}", r.method.as_str());
        for d in row {
            let _ = write!(out, " {d:>7.4}");
        }
        out.push('\n');
    }
    let _ = writeln!(
        out,
        "\nCommon prefix ({}): {}",
        cmp.common_prefix.len(),
        cmp.common_prefix.join(", ")
    );
    for note in &cmp.notes {
        let _ = writeln!(out, "note: {note}");
    }
    out
}

fn render_report(
    cmp: &MethodComparison,
    alternatives: usize,
    forks_top: &str,
    prs_top: &str,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "PRETTEF Trend subset (Forks rank 1, Pull Requests rank 2), {alternatives} alternatives\n"
    );
    out.push_str(&render_comparison(cmp));
    let _ = writeln!(out, "\nForks only: {forks_top} ranks first");
    let _ = writeln!(out, "Pull requests only: {prs_top} ranks first");
    out
}
