//! Feature dictionaries built from dataset titles: abbreviations, special
//! phrases, and the curator's false-positive lists.

mod rules;
mod stats;
mod wordlists;

pub use rules::{
    extract_abbreviations, extract_allcaps_tokens, extract_phrases, is_all_caps, is_roman_numeral,
    preprocess_titles, Preprocessed, Title, MIN_ABBREVIATION_LEN,
};
pub use stats::{is_filename_token, pattern_stats, PatternStats};
pub use wordlists::{bundled_base_terms, Wordlists};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::fold_case;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Abbreviation,
    Phrase,
}

impl FeatureKind {
    /// Identity key of a feature text: abbreviations are case-sensitive,
    /// phrases are compared case-folded.
    pub fn normalize(self, text: &str) -> String {
        match self {
            Self::Abbreviation => text.to_owned(),
            Self::Phrase => fold_case(text),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Abbreviation => "abbreviation",
            Self::Phrase => "phrase",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown feature kind {0:?} (expected abbreviation or phrase)")]
pub struct UnknownKind(pub String);

impl FromStr for FeatureKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abbreviation" | "abbrev" | "a" => Ok(Self::Abbreviation),
            "phrase" | "p" => Ok(Self::Phrase),
            _ => Err(UnknownKind(s.to_owned())),
        }
    }
}

/// A characteristic feature: an abbreviation or phrase taken from titles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub text: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub source_titles: BTreeSet<String>,
}

impl Feature {
    pub fn new(text: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            text: text.into(),
            kind,
            source_titles: BTreeSet::new(),
        }
    }

    pub fn key(&self) -> FeatureKey {
        FeatureKey::new(self.kind, &self.text)
    }
}

/// Normalized (kind, text) identity of a feature; used to group references
/// and to compare against the gold standard.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub kind: FeatureKind,
    pub text: String,
}

impl FeatureKey {
    pub fn new(kind: FeatureKind, text: &str) -> Self {
        Self {
            kind,
            text: kind.normalize(text.trim()),
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.text)
    }
}

impl FromStr for FeatureKey {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, text) = s.split_once(':').ok_or_else(|| UnknownKind(s.to_owned()))?;
        Ok(Self::new(kind.parse()?, text))
    }
}

/// The curated feature dictionaries.
///
/// Invariant: no live feature is listed on the false-positive list of its
/// kind. All mutation goes through methods that keep it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureDictionary {
    abbreviations: BTreeMap<String, Feature>,
    phrases: BTreeMap<String, Feature>,
    fp_abbreviations: BTreeSet<String>,
    fp_phrases: BTreeSet<String>,
    base_terms: BTreeSet<String>,
}

impl FeatureDictionary {
    pub fn new(base_terms: impl IntoIterator<Item = String>) -> Self {
        Self {
            base_terms: base_terms.into_iter().map(|t| fold_case(&t)).collect(),
            ..Self::default()
        }
    }

    pub fn with_bundled_base_terms() -> Self {
        Self::new(bundled_base_terms())
    }

    /// Adds a feature unless it is a known false positive. Features with the
    /// same key are merged, keeping the preferred spelling so the result does
    /// not depend on insertion order.
    pub fn insert(&mut self, feature: Feature) -> bool {
        let key = feature.kind.normalize(&feature.text);
        let (live, fp) = self.sets_mut(feature.kind);
        if fp.contains(&key) {
            return false;
        }
        match live.get_mut(&key) {
            Some(existing) => {
                if prefers_spelling(&feature.text, &existing.text) {
                    existing.text = feature.text;
                }
                existing.source_titles.extend(feature.source_titles);
            }
            None => {
                live.insert(key, feature);
            }
        }
        true
    }

    fn sets_mut(
        &mut self,
        kind: FeatureKind,
    ) -> (&mut BTreeMap<String, Feature>, &mut BTreeSet<String>) {
        match kind {
            FeatureKind::Abbreviation => (&mut self.abbreviations, &mut self.fp_abbreviations),
            FeatureKind::Phrase => (&mut self.phrases, &mut self.fp_phrases),
        }
    }

    /// Marks `text` as a false positive of `kind` and drops it from the
    /// live set. Returns whether the live set changed.
    pub fn add_false_positive(&mut self, text: &str, kind: FeatureKind) -> bool {
        let key = kind.normalize(text.trim());
        if key.is_empty() {
            return false;
        }
        let (live, fp) = self.sets_mut(kind);
        fp.insert(key.clone());
        live.remove(&key).is_some()
    }

    /// Returns a copy with the given false positives applied.
    pub fn apply_false_positives<'a>(
        &self,
        additions: impl IntoIterator<Item = (&'a str, FeatureKind)>,
    ) -> Self {
        let mut next = self.clone();
        for (text, kind) in additions {
            next.add_false_positive(text, kind);
        }
        next
    }

    pub fn abbreviations(&self) -> impl Iterator<Item = &Feature> {
        self.abbreviations.values()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &Feature> {
        self.phrases.values()
    }

    /// Abbreviations first, then phrases, each in key order.
    pub fn features(&self) -> impl Iterator<Item = &Feature> {
        self.abbreviations().chain(self.phrases())
    }

    pub fn get(&self, key: &FeatureKey) -> Option<&Feature> {
        match key.kind {
            FeatureKind::Abbreviation => self.abbreviations.get(&key.text),
            FeatureKind::Phrase => self.phrases.get(&key.text),
        }
    }

    pub fn contains(&self, text: &str, kind: FeatureKind) -> bool {
        self.get(&FeatureKey::new(kind, text)).is_some()
    }

    pub fn false_positives(&self, kind: FeatureKind) -> &BTreeSet<String> {
        match kind {
            FeatureKind::Abbreviation => &self.fp_abbreviations,
            FeatureKind::Phrase => &self.fp_phrases,
        }
    }

    pub fn is_false_positive(&self, text: &str, kind: FeatureKind) -> bool {
        self.false_positives(kind)
            .contains(&kind.normalize(text.trim()))
    }

    pub fn base_terms(&self) -> &BTreeSet<String> {
        &self.base_terms
    }

    pub fn len(&self) -> usize {
        self.abbreviations.len() + self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes one file per list into `dir` (created if missing).
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_lines(
            dir.join(files::ABBREVIATIONS),
            self.abbreviations().map(|f| f.text.as_str()),
        )?;
        write_lines(
            dir.join(files::PHRASES),
            self.phrases().map(|f| f.text.as_str()),
        )?;
        write_lines(
            dir.join(files::FP_ABBREVIATIONS),
            self.fp_abbreviations.iter().map(String::as_str),
        )?;
        write_lines(
            dir.join(files::FP_PHRASES),
            self.fp_phrases.iter().map(String::as_str),
        )?;
        write_lines(
            dir.join(files::BASE_TERMS),
            self.base_terms.iter().map(String::as_str),
        )
    }

    /// Reads a dictionary directory. Missing list files count as empty;
    /// a missing base-term file falls back to the bundled terms.
    pub fn read_dir(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(io::Error::new(
                io::ErrorKind::NotFound,
                format!("dictionary directory {} does not exist", dir.display()),
            ));
        }
        let base_terms = match read_lines(dir.join(files::BASE_TERMS))? {
            Some(terms) => terms.into_iter().collect(),
            None => bundled_base_terms(),
        };
        let mut dict = Self::new(base_terms);
        for text in read_lines(dir.join(files::FP_ABBREVIATIONS))?.unwrap_or_default() {
            dict.add_false_positive(&text, FeatureKind::Abbreviation);
        }
        for text in read_lines(dir.join(files::FP_PHRASES))?.unwrap_or_default() {
            dict.add_false_positive(&text, FeatureKind::Phrase);
        }
        for text in read_lines(dir.join(files::ABBREVIATIONS))?.unwrap_or_default() {
            dict.insert(Feature::new(text, FeatureKind::Abbreviation));
        }
        for text in read_lines(dir.join(files::PHRASES))?.unwrap_or_default() {
            dict.insert(Feature::new(text, FeatureKind::Phrase));
        }
        Ok(dict)
    }
}

pub mod files {
    pub const ABBREVIATIONS: &str = "abbreviations.txt";
    pub const PHRASES: &str = "phrases.txt";
    pub const FP_ABBREVIATIONS: &str = "fp_abbreviations.txt";
    pub const FP_PHRASES: &str = "fp_phrases.txt";
    pub const BASE_TERMS: &str = "base_terms.txt";
}

fn write_lines<'a>(path: impl AsRef<Path>, lines: impl Iterator<Item = &'a str>) -> io::Result<()> {
    let mut body = String::new();
    for line in lines {
        body.push_str(line);
        body.push('\n');
    }
    fs::write(path, body)
}

fn read_lines(path: impl AsRef<Path>) -> io::Result<Option<Vec<String>>> {
    match fs::read_to_string(path) {
        Ok(body) => Ok(Some(
            body.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned)
                .collect(),
        )),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

/// Whether `candidate` should replace `current` as the spelling of a merged
/// feature: mixed case over all caps, then the smaller string.
pub(crate) fn prefers_spelling(candidate: &str, current: &str) -> bool {
    (is_all_caps(candidate), candidate) < (is_all_caps(current), current)
}

/// Builds both dictionaries from titles; false positives already present in
/// `seed` stay excluded and its base terms are used for phrases.
pub fn build_dictionary<'a>(
    titles: impl IntoIterator<Item = Title<'a>>,
    wordlists: &Wordlists,
    seed: FeatureDictionary,
) -> FeatureDictionary {
    let titles: Vec<Title<'a>> = titles.into_iter().collect();
    let pre = preprocess_titles(titles.iter().copied());
    let mut dict = seed;
    let base_terms = dict.base_terms().clone();
    let abbreviations = extract_abbreviations(&pre.mixed_case, wordlists)
        .into_iter()
        .chain(extract_allcaps_tokens(&pre.all_caps, wordlists));
    for feature in abbreviations {
        dict.insert(feature);
    }
    for feature in extract_phrases(&titles, &base_terms, wordlists) {
        dict.insert(feature);
    }
    dict
}
