//! Random model/dataset generators and brute-force oracles shared by the
//! property and acceptance suites. The oracles recompute weights and scaled
//! values from their textbook definitions, independently of the library.

#![allow(dead_code)]

use std::collections::BTreeMap;

use qmcdm_core::{
    AggregationSpec, Alternative, Direction, Expr, MetricBinding, QualityAttribute, QualityModel,
    RawValue, SmarterAlgorithm, ValueType,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub struct TreeShape {
    pub max_depth: usize,
    pub max_children: usize,
    /// Allow Expression nodes and non-numeric leaves.
    pub rich: bool,
}

pub const WEIGHTED_TREES: TreeShape = TreeShape {
    max_depth: 4,
    max_children: 5,
    rich: false,
};

pub const RICH_TREES: TreeShape = TreeShape {
    max_depth: 4,
    max_children: 4,
    rich: true,
};

const NAMES: [&str; 6] = [
    "Forks",
    "Qualité",
    "品質",
    "Stars ★",
    "a\"quoted\"",
    "Trend/Δ",
];

pub fn random_ranks(rng: &mut StdRng, n: usize) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(1..=n as u32)).collect()
}

fn random_spec(rng: &mut StdRng, child_ids: &[String], rich: bool) -> AggregationSpec {
    let n = child_ids.len();
    let choice = rng.random_range(0..if rich { 3 } else { 2 });
    match choice {
        0 => AggregationSpec::Smarter {
            algorithm: SmarterAlgorithm::ALL[rng.random_range(0..3)],
            ranks: random_ranks(rng, n),
        },
        1 => AggregationSpec::Smarts {
            weights: (0..n).map(|_| rng.random_range(0.5..100.0)).collect(),
        },
        _ => {
            let refs: Vec<Expr> = child_ids
                .iter()
                .map(|id| Expr::Reference(id.clone()))
                .collect();
            AggregationSpec::Expression {
                formula: random_expr_over(rng, &refs, 3).to_string(),
            }
        }
    }
}

struct Builder<'a> {
    rng: &'a mut StdRng,
    shape: &'a TreeShape,
    next_id: usize,
    leaves: Vec<(String, String)>,
}

impl Builder<'_> {
    fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        // some ids need quoting inside formulas
        if self.shape.rich && self.rng.random_bool(0.2) {
            format!("node-{} x", self.next_id)
        } else {
            format!("n{}", self.next_id)
        }
    }

    fn node(&mut self, depth: usize) -> QualityAttribute {
        let id = self.fresh_id();
        let leaf = depth + 1 >= self.shape.max_depth || self.rng.random_bool(0.3);
        if leaf {
            let vtype = if self.shape.rich {
                ["count", "flag", "stack", "stars"][self.rng.random_range(0..4)]
            } else {
                "count"
            };
            let mut attr = QualityAttribute::leaf(id.clone(), vtype);
            if self.rng.random_bool(0.3) {
                attr.direction = Some(if self.rng.random_bool(0.5) {
                    Direction::Cost
                } else {
                    Direction::Benefit
                });
            }
            if self.shape.rich && self.rng.random_bool(0.5) {
                attr.display_name = NAMES[self.rng.random_range(0..NAMES.len())].to_string();
            }
            self.leaves.push((id.clone(), format!("src_{id}")));
            return attr;
        }
        let n = self.rng.random_range(1..=self.shape.max_children);
        let children: Vec<QualityAttribute> = (0..n).map(|_| self.node(depth + 1)).collect();
        let ids: Vec<String> = children.iter().map(|c| c.id.clone()).collect();
        let spec = random_spec(self.rng, &ids, self.shape.rich);
        QualityAttribute::node(id, spec, children)
    }
}

pub fn value_types() -> BTreeMap<String, ValueType> {
    let mut vt = BTreeMap::new();
    vt.insert("count".to_string(), ValueType::Numeric);
    vt.insert(
        "flag".to_string(),
        ValueType::Boolean {
            true_score: 1.0,
            false_score: 0.25,
        },
    );
    vt.insert(
        "stack".to_string(),
        ValueType::Categorical {
            category_scores: [("backend", 0.5), ("frontend", 0.5), ("full-stack", 1.0)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        },
    );
    vt.insert(
        "stars".to_string(),
        ValueType::Ranged { min: 0.0, max: 5.0 },
    );
    vt
}

/// A random model that passes validation. Every leaf is bound to `src_<id>`.
pub fn random_model(rng: &mut StdRng, shape: &TreeShape) -> QualityModel {
    let mut b = Builder {
        rng,
        shape,
        next_id: 0,
        leaves: Vec::new(),
    };
    let root = b.node(0);
    let metric_bindings = b
        .leaves
        .into_iter()
        .map(|(attribute, source)| MetricBinding { attribute, source })
        .collect();
    QualityModel {
        name: "random model ✓".into(),
        version: "0.1".into(),
        root,
        value_types: value_types(),
        metric_bindings,
    }
}

pub fn random_alternatives(
    rng: &mut StdRng,
    model: &QualityModel,
    count: usize,
) -> Vec<Alternative> {
    (0..count)
        .map(|i| {
            let mut alt = Alternative::new(format!("alt{i:03}"));
            for leaf in model.leaves() {
                let source = model.source_for(&leaf.id).unwrap().to_string();
                let value = match leaf.value_type.as_deref() {
                    Some("flag") => RawValue::Flag(rng.random_bool(0.5)),
                    Some("stack") => RawValue::Category(
                        ["backend", "frontend", "full-stack"][rng.random_range(0..3)].to_string(),
                    ),
                    Some("stars") => RawValue::Number(rng.random_range(0.0..=5.0)),
                    _ => RawValue::Number(rng.random_range(-1000.0..100000.0)),
                };
                alt.measurements.insert(source, value);
            }
            alt
        })
        .collect()
}

pub fn random_expr_over(rng: &mut StdRng, leaves: &[Expr], depth: u32) -> Expr {
    use qmcdm_core::expr::{BinaryOp, Function};
    if depth == 0 || rng.random_bool(0.3) {
        return if leaves.is_empty() || rng.random_bool(0.3) {
            // positive literals only: a printed negative literal reads back as a negation
            let v: f64 = rng.random_range(0.0..1000.0);
            Expr::Number(if rng.random_bool(0.5) { v.round() } else { v })
        } else {
            leaves[rng.random_range(0..leaves.len())].clone()
        };
    }
    match rng.random_range(0..6) {
        0 => Expr::Neg(Box::new(random_expr_over(rng, leaves, depth - 1))),
        1 => {
            let func = [Function::Min, Function::Max, Function::Avg][rng.random_range(0..3)];
            let n = rng.random_range(1..=3);
            Expr::Call(
                func,
                (0..n)
                    .map(|_| random_expr_over(rng, leaves, depth - 1))
                    .collect(),
            )
        }
        k => {
            let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Add][k - 2];
            Expr::Binary(
                op,
                Box::new(random_expr_over(rng, leaves, depth - 1)),
                Box::new(random_expr_over(rng, leaves, depth - 1)),
            )
        }
    }
}

/// Random AST over the variables `a`..`e`, including divisions.
pub fn random_ast(rng: &mut StdRng, depth: u32) -> Expr {
    use qmcdm_core::expr::BinaryOp;
    let vars: Vec<Expr> = ["a", "b", "c", "d", "e"]
        .iter()
        .map(|v| Expr::Reference(v.to_string()))
        .collect();
    let e = random_expr_over(rng, &vars, depth);
    if rng.random_bool(0.3) {
        Expr::Binary(
            BinaryOp::Div,
            Box::new(e),
            Box::new(random_expr_over(rng, &vars, 2)),
        )
    } else {
        e
    }
}

// ---- oracles ----

pub fn oracle_rr(ranks: &[u32]) -> Vec<f64> {
    let total: f64 = ranks.iter().map(|&r| 1.0 / r as f64).sum();
    ranks.iter().map(|&r| (1.0 / r as f64) / total).collect()
}

pub fn oracle_rs(ranks: &[u32]) -> Vec<f64> {
    let n = ranks.len() as f64;
    let total: f64 = ranks.iter().map(|&r| n - r as f64 + 1.0).sum();
    ranks
        .iter()
        .map(|&r| (n - r as f64 + 1.0) / total)
        .collect()
}

/// ROC by direct summation: a criterion whose rank is shared by `t` others
/// occupies sorted positions `lo+1..=lo+t` and takes their mean centroid.
pub fn oracle_roc(ranks: &[u32]) -> Vec<f64> {
    let n = ranks.len();
    let centroid = |p: usize| (p..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64;
    ranks
        .iter()
        .map(|&r| {
            let lo = ranks.iter().filter(|&&o| o < r).count();
            let t = ranks.iter().filter(|&&o| o == r).count();
            (lo + 1..=lo + t).map(centroid).sum::<f64>() / t as f64
        })
        .collect()
}

pub fn oracle_weights(spec: &AggregationSpec) -> Vec<f64> {
    match spec {
        AggregationSpec::Smarter { algorithm, ranks } => match algorithm {
            SmarterAlgorithm::Roc => oracle_roc(ranks),
            SmarterAlgorithm::Rr => oracle_rr(ranks),
            SmarterAlgorithm::Rs => oracle_rs(ranks),
        },
        AggregationSpec::Smarts { weights } => {
            let total: f64 = weights.iter().sum();
            weights.iter().map(|w| w / total).collect()
        }
        AggregationSpec::Expression { .. } => panic!("flat oracle covers weighted nodes only"),
    }
}

/// Product of normalized weights on the path from the root to each leaf.
pub fn path_weights(model: &QualityModel) -> Vec<(String, f64)> {
    fn walk(node: &QualityAttribute, acc: f64, out: &mut Vec<(String, f64)>) {
        if node.children.is_empty() {
            out.push((node.id.clone(), acc));
            return;
        }
        let w = oracle_weights(node.aggregation.as_ref().unwrap());
        for (child, wi) in node.children.iter().zip(w) {
            walk(child, acc * wi, out);
        }
    }
    let mut out = Vec::new();
    walk(&model.root, 1.0, &mut out);
    out
}

fn oracle_score(raw: &RawValue, vt: &ValueType) -> f64 {
    match (raw, vt) {
        (RawValue::Number(n), _) => *n,
        (
            RawValue::Flag(b),
            ValueType::Boolean {
                true_score,
                false_score,
            },
        ) => {
            if *b {
                *true_score
            } else {
                *false_score
            }
        }
        (RawValue::Category(c), ValueType::Categorical { category_scores }) => category_scores[c],
        _ => panic!("generator produced mismatched value"),
    }
}

/// Leaf id -> scaled value per alternative, by min-max over the column.
pub fn oracle_scaled(model: &QualityModel, alts: &[Alternative]) -> BTreeMap<String, Vec<f64>> {
    let mut out = BTreeMap::new();
    for leaf in model.leaves() {
        let vt = &model.value_types[leaf.value_type.as_deref().unwrap()];
        let src = model.source_for(&leaf.id).unwrap();
        let col: Vec<f64> = alts
            .iter()
            .map(|a| oracle_score(&a.measurements[src], vt))
            .collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cost = leaf.direction == Some(Direction::Cost);
        let scaled = col
            .iter()
            .map(|v| {
                if hi == lo {
                    0.5
                } else if cost {
                    (hi - v) / (hi - lo)
                } else {
                    (v - lo) / (hi - lo)
                }
            })
            .collect();
        out.insert(leaf.id.clone(), scaled);
    }
    out
}

/// Flat weighted sum over leaves using path-weight products.
pub fn oracle_flat_utilities(model: &QualityModel, alts: &[Alternative]) -> Vec<f64> {
    let paths = path_weights(model);
    let scaled = oracle_scaled(model, alts);
    (0..alts.len())
        .map(|i| paths.iter().map(|(leaf, w)| w * scaled[leaf][i]).sum())
        .collect()
}
