//! Log-scaled term frequency, inverse document frequency and tf-idf.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::dictionary::Wordlists;
use crate::scalar::Scalar;
use crate::text::{fold_case, word_tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WeightError {
    #[error("document frequency must be at least 1")]
    ZeroDocumentFrequency,
    #[error("document frequency {df} exceeds corpus size {n}")]
    DocumentFrequencyExceedsCorpus { df: usize, n: usize },
}

/// `0` for an absent term, `1 + log10(count)` otherwise.
pub fn tf_weight<S: Scalar>(count: usize) -> S {
    if count == 0 {
        S::zero()
    } else {
        S::one() + S::from_count(count).log10()
    }
}

/// `log10(n / df)` for `1 <= df <= n`.
pub fn idf<S: Scalar>(n: usize, df: usize) -> Result<S, WeightError> {
    if df == 0 {
        return Err(WeightError::ZeroDocumentFrequency);
    }
    if df > n {
        return Err(WeightError::DocumentFrequencyExceedsCorpus { df, n });
    }
    Ok((S::from_count(n) / S::from_count(df)).log10())
}

/// Case-folded word tokens of `text` without stopwords.
pub fn ranking_terms(text: &str) -> Vec<String> {
    let stopwords = Wordlists::bundled();
    word_tokens(text)
        .into_iter()
        .filter(|t| !stopwords.is_stopword(t.text))
        .map(|t| fold_case(t.text))
        .collect()
}

pub type TermCounts = BTreeMap<String, usize>;

pub fn count_terms<I, T>(terms: I) -> TermCounts
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let mut counts = TermCounts::new();
    for term in terms {
        *counts.entry(term.into()).or_default() += 1;
    }
    counts
}

/// Sparse non-negative term weights; zero weights are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightVector<S> {
    weights: BTreeMap<String, S>,
}

impl<S: Scalar> WeightVector<S> {
    pub fn new() -> Self {
        Self {
            weights: BTreeMap::new(),
        }
    }

    /// Sets a weight. Zero removes the entry.
    ///
    /// # Panics
    /// On negative or non-finite weights.
    pub fn set(&mut self, term: impl Into<String>, weight: S) {
        assert!(
            weight.is_finite() && weight >= S::zero(),
            "weights must be finite and non-negative"
        );
        let term = term.into();
        if weight == S::zero() {
            self.weights.remove(&term);
        } else {
            self.weights.insert(term, weight);
        }
    }

    pub fn get(&self, term: &str) -> S {
        self.weights.get(term).copied().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, S)> {
        self.weights.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dot(&self, other: &Self) -> S {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(t, w)| w * large.get(t)).sum()
    }

    pub fn norm(&self) -> S {
        self.weights.values().map(|w| *w * *w).sum::<S>().sqrt()
    }

    pub fn scaled(&self, factor: S) -> Self {
        let mut out = Self::new();
        for (t, w) in self.iter() {
            out.set(t, w * factor);
        }
        out
    }
}

impl<S: Scalar, T: Into<String>> FromIterator<(T, S)> for WeightVector<S> {
    fn from_iter<I: IntoIterator<Item = (T, S)>>(iter: I) -> Self {
        let mut v = Self::new();
        for (t, w) in iter {
            v.set(t, w);
        }
        v
    }
}

/// Document frequencies over a fixed document collection.
#[derive(Debug, Clone, Default)]
pub struct RankingCorpus {
    documents: Vec<TermCounts>,
    df: HashMap<String, usize>,
}

impl RankingCorpus {
    /// Builds a corpus from already tokenized documents.
    pub fn from_documents(documents: impl IntoIterator<Item = TermCounts>) -> Self {
        let mut corpus = Self::default();
        for doc in documents {
            corpus.push(doc);
        }
        corpus
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        Self::from_documents(texts.into_iter().map(|t| count_terms(ranking_terms(t))))
    }

    pub fn push(&mut self, doc: TermCounts) {
        for term in doc.keys() {
            *self.df.entry(term.clone()).or_default() += 1;
        }
        self.documents.push(doc);
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[TermCounts] {
        &self.documents
    }

    /// Number of documents containing `term`; 0 when unseen.
    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    /// idf of `term`; a term outside the corpus counts as `df = 1`.
    pub fn idf<S: Scalar>(&self, term: &str) -> S {
        let n = self.len().max(1);
        idf(n, self.df(term).clamp(1, n)).expect("df clamped into 1..=n")
    }

    /// tf-idf weights of a bag of terms.
    pub fn weights<S: Scalar>(&self, counts: &TermCounts) -> WeightVector<S> {
        counts
            .iter()
            .map(|(t, c)| (t.as_str(), tf_weight::<S>(*c) * self.idf::<S>(t)))
            .collect()
    }

    /// Sum over terms shared by query and document of
    /// `tf(count in doc) * idf(term)`.
    pub fn tfidf_score<S: Scalar>(&self, query: &TermCounts, doc: &TermCounts) -> S {
        query
            .keys()
            .filter_map(|t| doc.get(t).map(|c| tf_weight::<S>(*c) * self.idf::<S>(t)))
            .sum()
    }

    pub fn tfidf_score_text<S: Scalar>(&self, query: &str, doc: &str) -> S {
        self.tfidf_score(
            &count_terms(ranking_terms(query)),
            &count_terms(ranking_terms(doc)),
        )
    }
}
