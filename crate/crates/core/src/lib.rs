//! Hierarchical software-quality models aggregated with multi-criteria
//! decision making.
//!
//! A [`QualityModel`] arranges quality attributes in a tree. Leaves read
//! measurements from metric sources; internal nodes combine their children
//! with SMARTER (ROC, RR, RS rank weights), SMARTS (swing weights) or an
//! arithmetic [`expr`] formula. [`evaluate`] scores and ranks a set of
//! alternatives bottom-up; [`compare_methods`] and [`what_if`] support
//! sensitivity exploration.

pub mod compare;
pub mod dataset;
pub mod document;
pub mod eval;
pub mod expr;
pub mod mcdm;
pub mod model;
pub mod prettef;
pub mod validate;

pub use compare::{
    apply_method, compare_methods, kendall_tau_distance, Method, MethodComparison, MethodRanking,
};
pub use dataset::{parse_dataset, ColumnKind, DatasetError, DatasetFormat, DatasetSchema};
pub use document::{parse_model, serialize_model, ModelParseError, ParseErrorKind};
pub use eval::{
    apply_overrides, evaluate, rank, what_if, EvalError, EvaluationResult, NodeValue, RankEntry,
    ValueKind, WhatIfOverride,
};
pub use expr::{eval_expression, parse_expression, Expr, ExprError};
pub use mcdm::{
    roc_weights, rr_weights, rs_weights, scale_values, smarter_weights, smarts_normalize, utility,
    McdmError, RankAssignment, ScaledValue, Utility, WeightVector,
};
pub use model::{
    score_raw, AggregationSpec, Alternative, Direction, MetricBinding, QualityAttribute,
    QualityModel, RawValue, ScoreError, SmarterAlgorithm, ValueType,
};
pub use validate::{validate_model, ValidationIssue};
