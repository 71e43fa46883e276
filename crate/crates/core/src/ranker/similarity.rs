//! Cosine similarity over weight vectors and set-based coefficients.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::weighting::WeightVector;
use crate::scalar::Scalar;

/// `dot(q, d) / (|q| |d|)`, or `0` when either vector is zero.
pub fn cosine<S: Scalar>(q: &WeightVector<S>, d: &WeightVector<S>) -> S {
    let denom = q.norm() * d.norm();
    if denom == S::zero() {
        return S::zero();
    }
    // rounding can push identical vectors a hair above one
    (q.dot(d) / denom).min(S::one())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetMetric {
    Matching,
    Dice,
    Overlap,
    Jaccard,
}

impl SetMetric {
    pub const ALL: [SetMetric; 4] = [Self::Matching, Self::Dice, Self::Overlap, Self::Jaccard];
}

impl fmt::Display for SetMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Matching => "matching",
            Self::Dice => "dice",
            Self::Overlap => "overlap",
            Self::Jaccard => "jaccard",
        })
    }
}

impl FromStr for SetMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| format!("unknown set metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("overlap coefficient is undefined for an empty set")]
    EmptyOverlap,
}

pub fn set_similarity<S: Scalar, T: Ord>(
    metric: SetMetric,
    q: &BTreeSet<T>,
    d: &BTreeSet<T>,
) -> Result<S, SimilarityError> {
    let shared = q.intersection(d).count();
    let (nq, nd) = (q.len(), d.len());
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            S::zero()
        } else {
            S::from_count(num) / S::from_count(den)
        }
    };
    Ok(match metric {
        SetMetric::Matching => S::from_count(shared),
        SetMetric::Dice => ratio(2 * shared, nq + nd),
        SetMetric::Overlap => {
            if nq == 0 || nd == 0 {
                return Err(SimilarityError::EmptyOverlap);
            }
            ratio(shared, nq.min(nd))
        }
        SetMetric::Jaccard => ratio(shared, nq + nd - shared),
    })
}
