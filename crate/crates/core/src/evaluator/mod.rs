//! Two-phase evaluation against a gold standard: detection of features per
//! article, matching of detected features to datasets, and both combined.

mod gold;

pub use gold::{GoldError, GoldStandard};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::FeatureKey;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Detection,
    Matching,
    Combined,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Self::Detection, Self::Matching, Self::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Detection => "detection",
            Self::Matching => "matching",
            Self::Combined => "combined",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

/// Harmonic mean of precision and recall; `0` when both are `0`.
pub fn f_measure<S: Scalar>(p: S, r: S) -> S {
    let sum = p + r;
    if sum == S::zero() {
        S::zero()
    } else {
        S::from_count(2) * p * r / sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport<S> {
    pub phase: Phase,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: S,
    pub recall: S,
    pub f_measure: S,
    /// `tp + fp = 0`; precision is reported as 0.
    pub precision_undefined: bool,
    /// `tp + fn = 0`; recall is reported as 0.
    pub recall_undefined: bool,
}

impl<S: Scalar> EvaluationReport<S> {
    pub fn from_counts(phase: Phase, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                S::zero()
            } else {
                S::from_count(num) / S::from_count(den)
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Self {
            phase,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_measure: f_measure(precision, recall),
            precision_undefined: tp + fp == 0,
            recall_undefined: tp + fn_ == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("article {0:?} is not part of the gold standard")]
    UnknownArticle(String),
}

/// Features flagged per article.
pub type DetectedFeatures = BTreeMap<String, BTreeSet<FeatureKey>>;

/// The candidate DOIs offered for one reference (per-reference workflow) or
/// one feature group (per-feature workflow).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub article_id: String,
    pub feature: FeatureKey,
    pub dois: Vec<String>,
}

fn check_articles(detected: &DetectedFeatures, gold: &GoldStandard) -> Result<(), EvaluationError> {
    match detected.keys().find(|a| !gold.contains_article(a)) {
        Some(a) => Err(EvaluationError::UnknownArticle(a.clone())),
        None => Ok(()),
    }
}

struct DetectionCounts {
    tp: Vec<(String, FeatureKey)>,
    fp: usize,
    fn_: usize,
}

fn detection_counts(detected: &DetectedFeatures, gold: &GoldStandard) -> DetectionCounts {
    let mut counts = DetectionCounts {
        tp: Vec::new(),
        fp: 0,
        fn_: 0,
    };
    let empty = BTreeSet::new();
    for article in gold.articles() {
        let found = detected.get(article).unwrap_or(&empty);
        let truth: BTreeSet<&FeatureKey> = gold.features(article).collect();
        for key in found {
            if truth.contains(key) {
                counts.tp.push((article.to_owned(), key.clone()));
            } else {
                counts.fp += 1;
            }
        }
        counts.fn_ += truth.iter().filter(|k| !found.contains(**k)).count();
    }
    counts
}

/// A feature flagged in an article and listed for it in the gold standard
/// is a TP, an unlisted flag a FP and a missed gold feature a FN.
pub fn evaluate_detection<S: Scalar>(
    detected: &DetectedFeatures,
    gold: &GoldStandard,
) -> Result<EvaluationReport<S>, EvaluationError> {
    check_articles(detected, gold)?;
    let c = detection_counts(detected, gold);
    Ok(EvaluationReport::from_counts(
        Phase::Detection,
        c.tp.len(),
        c.fp,
        c.fn_,
    ))
}

/// Hits and misses over the suggestions for the given true-positive
/// features. A suggestion hits when it offers an acceptable DOI; a feature
/// without any suggestion counts as one miss.
fn matching_counts<'a>(
    true_positives: impl IntoIterator<Item = &'a (String, FeatureKey)>,
    suggestions: &[Suggestion],
    gold: &GoldStandard,
) -> (usize, usize) {
    let mut by_feature: BTreeMap<(&str, &FeatureKey), Vec<&Suggestion>> = BTreeMap::new();
    for s in suggestions {
        by_feature
            .entry((s.article_id.as_str(), &s.feature))
            .or_default()
            .push(s);
    }
    let (mut hits, mut misses) = (0, 0);
    for (article, key) in true_positives {
        let Some(acceptable) = gold.acceptable(article, key) else {
            continue;
        };
        match by_feature.get(&(article.as_str(), key)) {
            Some(items) => {
                for item in items {
                    if item.dois.iter().any(|d| acceptable.contains(d)) {
                        hits += 1;
                    } else {
                        misses += 1;
                    }
                }
            }
            None => misses += 1,
        }
    }
    (hits, misses)
}

fn gold_pairs(gold: &GoldStandard) -> Vec<(String, FeatureKey)> {
    gold.articles()
        .flat_map(|a| gold.features(a).map(move |k| (a.to_owned(), k.clone())))
        .collect()
}

/// Matching phase over the detection true positives, taken here to be every
/// gold feature. Each miss is one FP and one FN, so precision equals recall.
pub fn evaluate_matching<S: Scalar>(
    suggestions: &[Suggestion],
    gold: &GoldStandard,
) -> EvaluationReport<S> {
    let (hits, misses) = matching_counts(&gold_pairs(gold), suggestions, gold);
    EvaluationReport::from_counts(Phase::Matching, hits, misses, misses)
}

/// Matching phase restricted to the features actually detected.
pub fn evaluate_matching_detected<S: Scalar>(
    detected: &DetectedFeatures,
    suggestions: &[Suggestion],
    gold: &GoldStandard,
) -> Result<EvaluationReport<S>, EvaluationError> {
    check_articles(detected, gold)?;
    let c = detection_counts(detected, gold);
    let (hits, misses) = matching_counts(&c.tp, suggestions, gold);
    Ok(EvaluationReport::from_counts(
        Phase::Matching,
        hits,
        misses,
        misses,
    ))
}

/// Detection errors carry over; detection true positives are scored by the
/// matching rule.
pub fn evaluate_combined<S: Scalar>(
    detected: &DetectedFeatures,
    suggestions: &[Suggestion],
    gold: &GoldStandard,
) -> Result<EvaluationReport<S>, EvaluationError> {
    check_articles(detected, gold)?;
    let c = detection_counts(detected, gold);
    let (hits, misses) = matching_counts(&c.tp, suggestions, gold);
    Ok(EvaluationReport::from_counts(
        Phase::Combined,
        hits,
        c.fp + misses,
        c.fn_ + misses,
    ))
}

/// All three phases; the matching phase uses the detected true positives.
pub fn evaluate_all<S: Scalar>(
    detected: &DetectedFeatures,
    suggestions: &[Suggestion],
    gold: &GoldStandard,
) -> Result<Vec<EvaluationReport<S>>, EvaluationError> {
    Ok(vec![
        evaluate_detection(detected, gold)?,
        evaluate_matching_detected(detected, suggestions, gold)?,
        evaluate_combined(detected, suggestions, gold)?,
    ])
}

/// Fixed-width table of reports.
pub fn format_table<S: Scalar>(reports: &[EvaluationReport<S>]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
        "phase", "tp", "fp", "fn", "precision", "recall", "f-measure"
    );
    for r in reports {
        let cell = |v: S, undefined: bool| {
            if undefined {
                "undef".to_owned()
            } else {
                format!("{:.4}", v.to_f64().unwrap_or(f64::NAN))
            }
        };
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9}",
            r.phase.as_str(),
            r.tp,
            r.fp,
            r.fn_,
            cell(r.precision, r.precision_undefined),
            cell(r.recall, r.recall_undefined),
            cell(r.f_measure, false),
        );
    }
    out
}
