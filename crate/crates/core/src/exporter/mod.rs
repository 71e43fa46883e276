//! Link sets of one article and their RDF and JSON serializations.

mod rdf;

pub use rdf::{
    article_iri, dataset_iri, export_ntriples, export_rdf, export_turtle, vocab, RdfFormat, Triple,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Feature, FeatureKind};
use crate::ranker::FeatureGroup;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("article identifier {0:?} is neither a DOI nor a URN")]
    InvalidPid(String),
    #[error("DOI {0:?} occurs more than once in the link set")]
    DuplicateDoi(String),
    #[error("a link has an empty DOI")]
    EmptyDoi,
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Persistent identifier of an article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pid {
    Doi(String),
    Urn(String),
}

impl Pid {
    /// Accepts `10.x/...`, `doi:10.x/...`, `https://doi.org/10.x/...` and
    /// `urn:...`.
    pub fn parse(raw: &str) -> Result<Self, ExportError> {
        let s = raw.trim();
        let lower = s.to_ascii_lowercase();
        let doi = [
            "https://doi.org/",
            "http://doi.org/",
            "http://dx.doi.org/",
            "doi:",
        ]
        .iter()
        .find_map(|p| lower.starts_with(p).then(|| &s[p.len()..]))
        .unwrap_or(s);
        if doi.starts_with("10.") && doi.contains('/') {
            return Ok(Self::Doi(doi.to_owned()));
        }
        if lower.starts_with("urn:") && s.len() > 4 {
            return Ok(Self::Urn(s.to_owned()));
        }
        Err(ExportError::InvalidPid(raw.to_owned()))
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Doi(d) => write!(f, "doi:{d}"),
            Self::Urn(u) => f.write_str(u),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleMetadata {
    pub article_id: String,
    pub pid: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal: Option<String>,
}

impl ArticleMetadata {
    pub fn new(article_id: impl Into<String>, pid: impl Into<String>) -> Self {
        Self {
            article_id: article_id.into(),
            pid: pid.into(),
            title: None,
            journal: None,
        }
    }

    pub fn parsed_pid(&self) -> Result<Pid, ExportError> {
        Pid::parse(&self.pid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkStatus {
    Confirmed,
    Candidate,
}

impl LinkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Confirmed => "confirmed",
            Self::Candidate => "candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub doi: String,
    pub title: String,
    pub status: LinkStatus,
    pub feature: String,
    pub kind: FeatureKind,
    #[serde(rename = "count")]
    pub occurrence_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSet {
    pub article: ArticleMetadata,
    pub links: Vec<Link>,
}

impl LinkSet {
    pub fn new(article: ArticleMetadata) -> Self {
        Self {
            article,
            links: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<Pid, ExportError> {
        let pid = self.article.parsed_pid()?;
        let mut seen = BTreeSet::new();
        for link in &self.links {
            if link.doi.trim().is_empty() {
                return Err(ExportError::EmptyDoi);
            }
            if !seen.insert(link.doi.as_str()) {
                return Err(ExportError::DuplicateDoi(link.doi.clone()));
            }
        }
        Ok(pid)
    }

    pub fn links_with_status(&self, status: LinkStatus) -> impl Iterator<Item = &Link> {
        self.links.iter().filter(move |l| l.status == status)
    }
}

/// A dataset chosen by the curator for a feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub doi: String,
    pub title: String,
    pub feature: Feature,
}

/// Merges per-feature candidates and confirmed choices into one link set.
///
/// Each DOI appears once: confirmation wins over candidacy, and a DOI
/// offered for several features keeps the first feature with its highest
/// count. Links are ordered confirmed first, then by count (descending) and
/// DOI.
pub fn build_linkset<S: Scalar>(
    article: ArticleMetadata,
    groups: &[FeatureGroup<S>],
    confirmations: &[Confirmation],
) -> LinkSet {
    let mut links: BTreeMap<String, Link> = BTreeMap::new();
    for group in groups {
        for m in &group.matches {
            let count = m.score.to_usize().unwrap_or(0);
            links
                .entry(m.doi.clone())
                .and_modify(|l| l.occurrence_count = l.occurrence_count.max(count))
                .or_insert_with(|| Link {
                    doi: m.doi.clone(),
                    title: m.title.clone(),
                    status: LinkStatus::Candidate,
                    feature: group.feature.text.clone(),
                    kind: group.feature.kind,
                    occurrence_count: count,
                });
        }
    }
    for c in confirmations {
        let link = links.entry(c.doi.clone()).or_insert_with(|| Link {
            doi: c.doi.clone(),
            title: c.title.clone(),
            status: LinkStatus::Confirmed,
            feature: c.feature.text.clone(),
            kind: c.feature.kind,
            occurrence_count: 0,
        });
        link.status = LinkStatus::Confirmed;
    }
    let mut links: Vec<Link> = links.into_values().collect();
    links.sort_by(|a, b| {
        a.status
            .cmp(&b.status)
            .then(b.occurrence_count.cmp(&a.occurrence_count))
            .then_with(|| a.doi.cmp(&b.doi))
    });
    LinkSet { article, links }
}

/// Pretty-printed JSON with a fixed key order.
pub fn export_json(linkset: &LinkSet) -> Result<String, ExportError> {
    linkset.validate()?;
    let mut out = serde_json::to_string_pretty(linkset)?;
    out.push('\n');
    Ok(out)
}

pub fn import_json(text: &str) -> Result<LinkSet, ExportError> {
    let linkset: LinkSet = serde_json::from_str(text)?;
    linkset.validate()?;
    Ok(linkset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    NTriples,
    Turtle,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::NTriples => "nt",
            Self::Turtle => "ttl",
            Self::Json => "json",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            Self::NTriples => "application/n-triples",
            Self::Turtle => "text/turtle",
            Self::Json => "application/json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nt" | "ntriples" | "n-triples" => Ok(Self::NTriples),
            "ttl" | "turtle" => Ok(Self::Turtle),
            "json" => Ok(Self::Json),
            _ => Err(format!(
                "unknown export format {s:?} (expected nt, ttl or json)"
            )),
        }
    }
}

pub fn export(linkset: &LinkSet, format: ExportFormat) -> Result<String, ExportError> {
    match format {
        ExportFormat::NTriples => export_ntriples(linkset),
        ExportFormat::Turtle => export_turtle(linkset),
        ExportFormat::Json => export_json(linkset),
    }
}
