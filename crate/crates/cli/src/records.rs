//! Line-delimited file formats written by `detect` and `rank` and read back
//! by `evaluate`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dataref_core::detector::{ArticleText, ReferenceCandidate, Span};
use dataref_core::dictionary::{FeatureKey, FeatureKind};
use dataref_core::evaluator::{DetectedFeatures, Suggestion};
use dataref_core::{FeatureGroup, RankedMatch};
use serde::{Deserialize, Serialize};

/// One detected reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedLine {
    pub article_id: String,
    /// Position in the article's reference list.
    pub reference: usize,
    pub span: Span,
    pub feature_span: Span,
    pub feature: String,
    pub kind: FeatureKind,
    pub segment: String,
}

impl DetectedLine {
    pub fn new(reference: usize, c: &ReferenceCandidate) -> Self {
        Self {
            article_id: c.article_id.clone(),
            reference,
            span: c.span,
            feature_span: c.feature_span,
            feature: c.feature.text.clone(),
            kind: c.feature.kind,
            segment: c.sentence.clone(),
        }
    }

    pub fn key(&self) -> FeatureKey {
        FeatureKey::new(self.kind, &self.feature)
    }
}

/// One candidate of a reference (per-reference mode) or of a feature group
/// (per-feature mode, where `score` is the occurrence count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLine {
    pub article_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<usize>>,
    pub feature: String,
    pub kind: FeatureKind,
    pub rank: usize,
    pub doi: String,
    pub title: String,
    pub score: f64,
}

impl RankedLine {
    pub fn for_reference(reference: usize, c: &ReferenceCandidate, m: &RankedMatch) -> Self {
        Self {
            article_id: c.article_id.clone(),
            reference: Some(reference),
            span: Some(c.span),
            references: None,
            feature: c.feature.text.clone(),
            kind: c.feature.kind,
            rank: m.rank,
            doi: m.doi.clone(),
            title: m.title.clone(),
            score: m.score,
        }
    }

    pub fn for_group(article_id: &str, g: &FeatureGroup, m: &RankedMatch) -> Self {
        Self {
            article_id: article_id.to_owned(),
            reference: None,
            span: None,
            references: Some(g.references.clone()),
            feature: g.feature.text.clone(),
            kind: g.feature.kind,
            rank: m.rank,
            doi: m.doi.clone(),
            title: m.title.clone(),
            score: m.score,
        }
    }

    pub fn key(&self) -> FeatureKey {
        FeatureKey::new(self.kind, &self.feature)
    }
}

pub fn write_jsonl<T: Serialize>(
    out: &mut impl Write,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader =
        BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?,
        );
    }
    Ok(out)
}

/// A single `.txt` file, or every `.txt` file in a directory, sorted by name.
pub fn article_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_owned()]);
    }
    if !path.is_dir() {
        bail!("{} is neither a file nor a directory", path.display());
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_articles(path: &Path) -> Result<Vec<ArticleText>> {
    article_files(path)?
        .iter()
        .map(|p| ArticleText::read(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn detected_features(lines: &[DetectedLine]) -> DetectedFeatures {
    let mut out = DetectedFeatures::new();
    for l in lines {
        out.entry(l.article_id.clone()).or_default().insert(l.key());
    }
    out
}

/// Rebuilds the suggestion items from ranked lines. Detected references (or
/// features, in per-feature mode) without any ranked line become empty
/// suggestions.
pub fn suggestions(detected: &[DetectedLine], ranked: &[RankedLine]) -> Vec<Suggestion> {
    let per_reference = ranked.iter().any(|l| l.reference.is_some());
    type Slot = (String, Option<usize>, FeatureKey);
    let mut items: BTreeMap<Slot, Vec<(usize, String)>> = BTreeMap::new();
    for d in detected {
        let slot = if per_reference {
            Some(d.reference)
        } else {
            None
        };
        items
            .entry((d.article_id.clone(), slot, d.key()))
            .or_default();
    }
    for l in ranked {
        items
            .entry((l.article_id.clone(), l.reference, l.key()))
            .or_default()
            .push((l.rank, l.doi.clone()));
    }
    items
        .into_iter()
        .map(|((article_id, _, feature), mut dois)| {
            dois.sort();
            Suggestion {
                article_id,
                feature,
                dois: dois.into_iter().map(|(_, d)| d).collect(),
            }
        })
        .collect()
}
