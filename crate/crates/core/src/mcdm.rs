//! Weight elicitation and weighted-additive scoring.
//!
//! SMARTER derives weights from ranks (ROC, RR, RS); SMARTS normalizes
//! swing ratings. Criterion values are brought onto a common `[0, 1]`
//! scale by min-max scaling over the alternative set before they are
//! combined with [`utility`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Direction, SmarterAlgorithm};

/// Absolute tolerance used when checking that weights form a distribution.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McdmError {
    #[error("empty rank list")]
    EmptyRanks,
    #[error("rank at position {position} must be >= 1")]
    InvalidRank { position: usize },
    #[error(
        "rank-exceeds-count: rank {rank} at position {position} exceeds criterion count {count}"
    )]
    RankExceedsCount {
        position: usize,
        rank: u32,
        count: usize,
    },
    #[error("empty weight list")]
    EmptyWeights,
    #[error("weight {value} at position {position} must be a positive finite number")]
    NonPositiveWeight { position: usize, value: f64 },
    #[error("empty value list")]
    EmptyValues,
    #[error("value at position {position} is not finite")]
    NonFiniteValue { position: usize },
    #[error("length mismatch: {weights} weights, {values} values")]
    LengthMismatch { weights: usize, values: usize },
}

impl McdmError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyRanks => "empty-ranks",
            Self::InvalidRank { .. } => "invalid-rank",
            Self::RankExceedsCount { .. } => "rank-exceeds-count",
            Self::EmptyWeights => "empty-weights",
            Self::NonPositiveWeight { .. } => "non-positive-weight",
            Self::EmptyValues => "empty-values",
            Self::NonFiniteValue { .. } => "non-finite-value",
            Self::LengthMismatch { .. } => "length-mismatch",
        }
    }
}

/// Ranks `r_j`, one per criterion; rank 1 is the most important. Ties allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankAssignment(Vec<u32>);

impl RankAssignment {
    pub fn new(ranks: Vec<u32>) -> Result<Self, McdmError> {
        if ranks.is_empty() {
            return Err(McdmError::EmptyRanks);
        }
        if let Some(position) = ranks.iter().position(|&r| r == 0) {
            return Err(McdmError::InvalidRank { position });
        }
        Ok(Self(ranks))
    }

    pub fn ranks(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Divides every entry by the total. Callers guarantee a positive total.
    fn normalized(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        Self(raw.into_iter().map(|w| w / total).collect())
    }

    /// Uniform weights over `n` criteria.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A criterion value on the common internal scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaledValue(f64);

impl ScaledValue {
    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Utility(f64);

impl Utility {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Rank Order Centroid weights.
///
/// Criteria are sorted by rank (stable, so ties keep input order). Sorted
/// position `j` of `n` gets `(1/n) * sum_{k=j..n} 1/k`. Tied criteria share
/// the mean weight of the positions they occupy.
pub fn roc_weights(ranks: &RankAssignment) -> WeightVector {
    let n = ranks.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ranks.0[i]);

    // centroid[p] for zero-based sorted position p
    let mut centroid = vec![0.0; n];
    let mut tail = 0.0;
    for p in (0..n).rev() {
        tail += 1.0 / (p + 1) as f64;
        centroid[p] = tail / n as f64;
    }

    let mut weights = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let rank = ranks.0[order[start]];
        let mut end = start;
        while end < n && ranks.0[order[end]] == rank {
            end += 1;
        }
        let mean = centroid[start..end].iter().sum::<f64>() / (end - start) as f64;
        for &i in &order[start..end] {
            weights[i] = mean;
        }
        start = end;
    }
    WeightVector::normalized(weights)
}

/// Rank Reciprocal weights: `w_j = (1/r_j) / sum_k (1/r_k)`.
pub fn rr_weights(ranks: &RankAssignment) -> WeightVector {
    WeightVector::normalized(ranks.0.iter().map(|&r| 1.0 / f64::from(r)).collect())
}

/// Rank Sum weights: `w_j = (n - r_j + 1) / sum_k (n - r_k + 1)`.
///
/// Fails when a rank exceeds the number of criteria, since that would give
/// a non-positive numerator.
pub fn rs_weights(ranks: &RankAssignment) -> Result<WeightVector, McdmError> {
    let n = ranks.len();
    let mut raw = Vec::with_capacity(n);
    for (position, &rank) in ranks.0.iter().enumerate() {
        if rank as usize > n {
            return Err(McdmError::RankExceedsCount {
                position,
                rank,
                count: n,
            });
        }
        raw.push((n as f64) - f64::from(rank) + 1.0);
    }
    Ok(WeightVector::normalized(raw))
}

pub fn smarter_weights(
    algorithm: SmarterAlgorithm,
    ranks: &RankAssignment,
) -> Result<WeightVector, McdmError> {
    match algorithm {
        SmarterAlgorithm::Roc => Ok(roc_weights(ranks)),
        SmarterAlgorithm::Rr => Ok(rr_weights(ranks)),
        SmarterAlgorithm::Rs => rs_weights(ranks),
    }
}

/// Swing-weight normalization: `w_j / sum_k w_k`.
pub fn smarts_normalize(raw: &[f64]) -> Result<WeightVector, McdmError> {
    if raw.is_empty() {
        return Err(McdmError::EmptyWeights);
    }
    if let Some((position, &value)) = raw
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w > 0.0))
    {
        return Err(McdmError::NonPositiveWeight { position, value });
    }
    Ok(WeightVector::normalized(raw.to_vec()))
}

/// Min-max scaling of one criterion across every alternative.
///
/// A constant column maps to 0.5 so the criterion is neutral.
pub fn scale_values(values: &[f64], direction: Direction) -> Result<Vec<ScaledValue>, McdmError> {
    if values.is_empty() {
        return Err(McdmError::EmptyValues);
    }
    if let Some(position) = values.iter().position(|v| !v.is_finite()) {
        return Err(McdmError::NonFiniteValue { position });
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range == 0.0 {
        return Ok(vec![ScaledValue(0.5); values.len()]);
    }
    Ok(values
        .iter()
        .map(|&v| {
            let s = match direction {
                Direction::Benefit => (v - min) / range,
                Direction::Cost => (max - v) / range,
            };
            ScaledValue(s.clamp(0.0, 1.0))
        })
        .collect())
}

/// Weighted-additive utility `sum_j w_j * v_j`.
pub fn utility(weights: &WeightVector, values: &[f64]) -> Result<Utility, McdmError> {
    if weights.len() != values.len() {
        return Err(McdmError::LengthMismatch {
            weights: weights.len(),
            values: values.len(),
        });
    }
    Ok(Utility(
        weights.0.iter().zip(values).map(|(w, v)| w * v).sum(),
    ))
}
