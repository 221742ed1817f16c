//! Re-evaluating one model under each weighting method and measuring how
//! much the resulting rankings agree.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eval::{evaluate, EvalError, RankEntry};
use crate::mcdm::{rr_weights, RankAssignment};
use crate::model::{AggregationSpec, Alternative, QualityModel, SmarterAlgorithm};

/// Weighting method applied to every SMARTER/SMARTS node of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ROC")]
    Roc,
    #[serde(rename = "RR")]
    Rr,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "SWING")]
    Swing,
}

impl Method {
    pub const ALL: [Method; 4] = [Self::Roc, Self::Rr, Self::Rs, Self::Swing];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Roc => "ROC",
            Self::Rr => "RR",
            Self::Rs => "RS",
            Self::Swing => "SWING",
        }
    }

    fn smarter(self) -> Option<SmarterAlgorithm> {
        match self {
            Self::Roc => Some(SmarterAlgorithm::Roc),
            Self::Rr => Some(SmarterAlgorithm::Rr),
            Self::Rs => Some(SmarterAlgorithm::Rs),
            Self::Swing => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "ROC" => Ok(Self::Roc),
            "RR" => Ok(Self::Rr),
            "RS" => Ok(Self::Rs),
            "SWING" | "SMARTS" => Ok(Self::Swing),
            other => Err(format!(
                "unknown method `{other}` (expected roc, rr, rs or swing)"
            )),
        }
    }
}

/// Dense ranks by descending weight: the largest weight gets rank 1 and
/// equal weights share a rank.
fn ranks_from_weights(weights: &[f64]) -> Vec<u32> {
    let mut distinct: Vec<f64> = weights.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    weights
        .iter()
        .map(|w| {
            distinct
                .iter()
                .position(|d| d == w)
                .map_or(1, |p| p as u32 + 1)
        })
        .collect()
}

/// Rewrites every SMARTER and SMARTS node to use `method`.
///
/// Rank methods keep SMARTER ranks and derive ranks for SMARTS nodes from
/// their weight order. SWING keeps SMARTS weights; SMARTER nodes get their
/// RR-derived weights as swing ratings. Expression nodes are unchanged.
/// Returns the rewritten model and one note per substituted node.
pub fn apply_method(model: &QualityModel, method: Method) -> (QualityModel, Vec<String>) {
    let mut copy = model.clone();
    let mut notes = Vec::new();
    copy.root.for_each_mut(&mut |node| {
        let replacement = match (&node.aggregation, method.smarter()) {
            (Some(AggregationSpec::Smarter { ranks, .. }), Some(algorithm)) => {
                Some(AggregationSpec::Smarter {
                    algorithm,
                    ranks: ranks.clone(),
                })
            }
            (Some(AggregationSpec::Smarts { weights }), Some(algorithm)) => {
                let ranks = ranks_from_weights(weights);
                notes.push(format!(
                    "{method}: `{}` ranks {ranks:?} derived from swing weights",
                    node.id
                ));
                Some(AggregationSpec::Smarter { algorithm, ranks })
            }
            (Some(AggregationSpec::Smarter { ranks, .. }), None) => {
                let weights = RankAssignment::new(ranks.clone())
                    .map(|r| rr_weights(&r).into_inner())
                    .unwrap_or_else(|_| vec![1.0; ranks.len()]);
                notes.push(format!(
                    "SWING: `{}` uses RR-derived weights as swing ratings",
                    node.id
                ));
                Some(AggregationSpec::Smarts { weights })
            }
            _ => None,
        };
        if let Some(spec) = replacement {
            node.aggregation = Some(spec);
        }
    });
    for note in &notes {
        tracing::info!("{note}");
    }
    (copy, notes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRanking {
    pub method: Method,
    pub ranking: Vec<RankEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MethodComparison {
    pub model_name: String,
    pub rankings: Vec<MethodRanking>,
    /// Normalized Kendall tau distance between every pair of rankings, in
    /// the order of `rankings`.
    pub kendall_tau: Vec<Vec<f64>>,
    /// Longest prefix on which every ranking agrees position by position.
    pub common_prefix: Vec<String>,
    pub notes: Vec<String>,
}

/// Fraction of alternative pairs ordered differently by the two rankings.
///
/// Both rankings must cover the same ids; ids missing from `b` are ignored.
pub fn kendall_tau_distance(a: &[RankEntry], b: &[RankEntry]) -> f64 {
    let pos_b: BTreeMap<&str, usize> = b
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let order: Vec<usize> = a
        .iter()
        .filter_map(|e| pos_b.get(e.id.as_str()).copied())
        .collect();
    let n = order.len();
    if n < 2 {
        return 0.0;
    }
    let mut discordant = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if order[i] > order[j] {
                discordant += 1;
            }
        }
    }
    discordant as f64 / (n * (n - 1) / 2) as f64
}

pub fn common_prefix(rankings: &[&[RankEntry]]) -> Vec<String> {
    let Some(first) = rankings.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .take_while(|(i, e)| {
            rankings
                .iter()
                .all(|r| r.get(*i).is_some_and(|o| o.id == e.id))
        })
        .map(|(_, e)| e.id.clone())
        .collect()
}

pub fn compare_methods(
    model: &QualityModel,
    alternatives: &[Alternative],
    methods: &[Method],
) -> Result<MethodComparison, EvalError> {
    let mut rankings = Vec::with_capacity(methods.len());
    let mut notes = Vec::new();
    for &method in methods {
        let (rewritten, method_notes) = apply_method(model, method);
        notes.extend(method_notes);
        let result = evaluate(&rewritten, alternatives)?;
        rankings.push(MethodRanking {
            method,
            ranking: result.ranking,
        });
    }
    let kendall_tau = rankings
        .iter()
        .map(|a| {
            rankings
                .iter()
                .map(|b| kendall_tau_distance(&a.ranking, &b.ranking))
                .collect()
        })
        .collect();
    let slices: Vec<&[RankEntry]> = rankings.iter().map(|r| r.ranking.as_slice()).collect();
    Ok(MethodComparison {
        model_name: model.name.clone(),
        common_prefix: common_prefix(&slices),
        rankings,
        kendall_tau,
        notes,
    })
}
