use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dictionary::{FeatureKey, FeatureKind};

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold standard line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("gold standard line {line}: {message}")]
    Invalid { line: u64, message: String },
    #[error("reading gold standard: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Deserialize)]
struct Row {
    article_id: String,
    feature: String,
    kind: String,
    acceptable_dois: String,
}

/// Per article, the true features and the DOIs acceptable as a match for
/// each of them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldStandard {
    articles: BTreeMap<String, BTreeMap<FeatureKey, BTreeSet<String>>>,
}

impl GoldStandard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds acceptable DOIs for a feature; repeated entries merge.
    pub fn insert<I, D>(&mut self, article_id: impl Into<String>, feature: FeatureKey, dois: I)
    where
        I: IntoIterator<Item = D>,
        D: Into<String>,
    {
        self.articles
            .entry(article_id.into())
            .or_default()
            .entry(feature)
            .or_default()
            .extend(dois.into_iter().map(Into::into));
    }

    /// Registers an article that has no gold features.
    pub fn insert_article(&mut self, article_id: impl Into<String>) {
        self.articles.entry(article_id.into()).or_default();
    }

    /// Reads the CSV layout `article_id,feature,kind,acceptable_dois` with a
    /// header row; DOIs are separated by semicolons and must not be empty.
    pub fn from_csv(reader: impl Read) -> Result<Self, GoldError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|source| GoldError::Csv { line: 1, source })?
            .clone();
        let mut gold = Self::new();
        for result in rdr.records() {
            let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line());
            let record = result.map_err(|source| GoldError::Csv {
                line: line_of(&source),
                source,
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row: Row = record
                .deserialize(Some(&headers))
                .map_err(|source| GoldError::Csv { line, source })?;
            let invalid = |message: String| GoldError::Invalid { line, message };
            if row.article_id.is_empty() || row.feature.is_empty() {
                return Err(invalid("article_id and feature must not be empty".into()));
            }
            let kind: FeatureKind = row.kind.parse().map_err(|e| invalid(format!("{e}")))?;
            let dois: BTreeSet<String> = row
                .acceptable_dois
                .split(';')
                .map(str::trim)
                .filter(|d| !d.is_empty())
                .map(str::to_owned)
                .collect();
            if dois.is_empty() {
                return Err(invalid(format!(
                    "no acceptable DOI for feature {:?}",
                    row.feature
                )));
            }
            gold.insert(row.article_id, FeatureKey::new(kind, &row.feature), dois);
        }
        Ok(gold)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, GoldError> {
        Self::from_csv(File::open(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["article_id", "feature", "kind", "acceptable_dois"])
            .expect("in-memory write");
        for (article, features) in &self.articles {
            for (key, dois) in features {
                let dois = dois
                    .iter()
                    .map(String::as_str)
                    .collect::<Vec<_>>()
                    .join(";");
                w.write_record([
                    article.as_str(),
                    key.text.as_str(),
                    key.kind.as_str(),
                    &dois,
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    pub fn contains_article(&self, article_id: &str) -> bool {
        self.articles.contains_key(article_id)
    }

    pub fn articles(&self) -> impl Iterator<Item = &str> {
        self.articles.keys().map(String::as_str)
    }

    pub fn features(&self, article_id: &str) -> impl Iterator<Item = &FeatureKey> {
        self.articles
            .get(article_id)
            .into_iter()
            .flat_map(|f| f.keys())
    }

    pub fn acceptable(&self, article_id: &str, feature: &FeatureKey) -> Option<&BTreeSet<String>> {
        self.articles.get(article_id)?.get(feature)
    }

    pub fn feature_count(&self) -> usize {
        self.articles.values().map(BTreeMap::len).sum()
    }
}
