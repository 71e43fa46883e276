//! Dataset registry: records, line-delimited snapshots and a title index.

mod oai;

#[cfg(feature = "http")]
pub use oai::HttpTransport;
pub use oai::{
    parse_list_records, DirectoryTransport, HarvestError, HarvestPage, Harvester, OaiTransport,
    RecordError, RecordStream, ResumeState, TransportError, Verb,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::match_feature;
use crate::dictionary::{Feature, FeatureKind};
use crate::text::{extract_years, fold_case};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "lowercase")]
pub enum ResourceType {
    #[default]
    Dataset,
    Text,
    Collection,
    Video,
    Interactive,
}

impl ResourceType {
    /// Maps a Dublin Core / DataCite type label to a resource type.
    pub fn from_dc_type(label: &str) -> Option<Self> {
        let key: String = label
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "dataset" | "data" => Some(Self::Dataset),
            "text" => Some(Self::Text),
            "collection" => Some(Self::Collection),
            "video" | "movingimage" | "audiovisual" => Some(Self::Video),
            "interactive" | "interactiveresource" => Some(Self::Interactive),
            _ => None,
        }
    }
}

impl fmt::Display for ResourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Dataset => "dataset",
            Self::Text => "text",
            Self::Collection => "collection",
            Self::Video => "video",
            Self::Interactive => "interactive",
        };
        f.write_str(s)
    }
}

/// One registry entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub doi: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publisher: Option<String>,
    #[serde(default)]
    pub resource_type: ResourceType,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecordInvalid {
    #[error("record has an empty DOI")]
    EmptyDoi,
    #[error("record {0} has an empty title")]
    EmptyTitle(String),
}

impl DatasetRecord {
    /// Builds a dataset record, falling back to the first year found in the
    /// title when `year` is `None`.
    pub fn new(doi: impl Into<String>, title: impl Into<String>) -> Self {
        let title = title.into();
        Self {
            doi: doi.into(),
            year: year_from_title(&title),
            title,
            language: None,
            publisher: None,
            resource_type: ResourceType::Dataset,
        }
    }

    pub fn validate(&self) -> Result<(), RecordInvalid> {
        if self.doi.trim().is_empty() {
            return Err(RecordInvalid::EmptyDoi);
        }
        if self.title.trim().is_empty() {
            return Err(RecordInvalid::EmptyTitle(self.doi.clone()));
        }
        Ok(())
    }
}

pub fn year_from_title(title: &str) -> Option<u16> {
    extract_years(title).into_iter().next()
}

/// Splits a title into index tokens: whitespace and `: , ; ( ) [ ]`,
/// case preserved.
pub fn index_tokens(title: &str) -> impl Iterator<Item = &str> {
    title
        .split(|c: char| c.is_whitespace() || matches!(c, ':' | ',' | ';' | '(' | ')' | '[' | ']'))
        .filter(|t| !t.is_empty())
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error reading snapshot: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Immutable index over registry records.
///
/// Records are held sorted by DOI; `token_index` maps each case-preserved
/// title token to the positions of the records containing it.
#[derive(Debug, Clone, Default)]
pub struct RegistryIndex {
    records: Vec<DatasetRecord>,
    token_index: BTreeMap<String, BTreeSet<usize>>,
    folded_vocabulary: Vec<(String, String)>,
    duplicate_warnings: usize,
}

impl RegistryIndex {
    /// Builds an index; later records with an already seen DOI replace the
    /// earlier one and are counted in [`RegistryIndex::duplicate_warnings`].
    pub fn from_records(records: impl IntoIterator<Item = DatasetRecord>) -> Self {
        let mut by_doi: BTreeMap<String, DatasetRecord> = BTreeMap::new();
        let mut duplicates = 0;
        for record in records {
            if by_doi.insert(record.doi.clone(), record).is_some() {
                duplicates += 1;
            }
        }
        let records: Vec<DatasetRecord> = by_doi.into_values().collect();
        let mut token_index: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (pos, record) in records.iter().enumerate() {
            for token in index_tokens(&record.title) {
                token_index.entry(token.to_owned()).or_default().insert(pos);
            }
        }
        let folded_vocabulary = token_index
            .keys()
            .map(|t| (fold_case(t), t.clone()))
            .collect();
        Self {
            records,
            token_index,
            folded_vocabulary,
            duplicate_warnings: duplicates,
        }
    }

    pub fn records(&self) -> &[DatasetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn duplicate_warnings(&self) -> usize {
        self.duplicate_warnings
    }

    pub fn get(&self, doi: &str) -> Option<&DatasetRecord> {
        self.records
            .binary_search_by(|r| r.doi.as_str().cmp(doi))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn token_postings(&self, token: &str) -> Option<&BTreeSet<usize>> {
        self.token_index.get(token)
    }

    /// Records whose title matches `feature` under the detector's matching
    /// rules, ordered by DOI.
    pub fn titles_containing(&self, feature: &Feature) -> Vec<&DatasetRecord> {
        let candidates = self.candidate_positions(feature);
        candidates
            .into_iter()
            .map(|pos| &self.records[pos])
            .filter(|r| !match_feature(&r.title, feature).is_empty())
            .collect()
    }

    /// Superset of the records that can match: every match contains a
    /// delimiter-free piece of the feature inside a single index token.
    fn candidate_positions(&self, feature: &Feature) -> BTreeSet<usize> {
        let Some(piece) = index_tokens(&feature.text).max_by_key(|p| p.len()) else {
            return BTreeSet::new();
        };
        let mut positions = BTreeSet::new();
        match feature.kind {
            FeatureKind::Abbreviation => {
                for (token, postings) in &self.token_index {
                    if token.contains(piece) {
                        positions.extend(postings.iter().copied());
                    }
                }
            }
            FeatureKind::Phrase => {
                let folded = fold_case(piece);
                for (folded_token, token) in &self.folded_vocabulary {
                    if folded_token.contains(&folded) {
                        positions.extend(self.token_index[token].iter().copied());
                    }
                }
            }
        }
        positions
    }

    pub fn write_snapshot(&self, path: impl AsRef<Path>) -> io::Result<()> {
        write_snapshot(path, &self.records)
    }
}

impl FromStr for RegistryIndex {
    type Err = SnapshotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        read_snapshot(s.as_bytes())
    }
}

/// Loads a `.jsonl` snapshot (one record per line, blank lines ignored).
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<RegistryIndex, SnapshotError> {
    read_snapshot(BufReader::new(File::open(path)?))
}

pub fn read_snapshot(reader: impl BufRead) -> Result<RegistryIndex, SnapshotError> {
    let mut records = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| SnapshotError::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        record.validate().map_err(|e| SnapshotError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    let index = RegistryIndex::from_records(records);
    if index.duplicate_warnings() > 0 {
        tracing::warn!(
            duplicates = index.duplicate_warnings(),
            "snapshot contains duplicate DOIs; kept the last occurrence"
        );
    }
    Ok(index)
}

pub fn write_snapshot<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> io::Result<()> {
    let mut out = io::BufWriter::new(File::create(path)?);
    write_records(&mut out, records)?;
    out.flush()
}

pub fn write_records<'a>(
    out: &mut impl Write,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
