//! Feature extraction rules applied to dataset titles.
//!
//! Abbreviations come from mixed-case titles (colon-truncated) through six
//! ordered rules, plus the unknown tokens of all-caps titles. Phrases come
//! from three patterns around a small set of base terms such as "survey" or
//! "poll".

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use super::wordlists::Wordlists;
use super::{Feature, FeatureKind};
use crate::text::{fold_case, is_whitelisted_punctuation, is_word_char, tokenize, word_tokens};

/// Minimum number of characters of an abbreviation.
pub const MIN_ABBREVIATION_LEN: usize = 2;

/// A title together with the DOI of its record (empty when unknown).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Title<'a> {
    pub doi: &'a str,
    pub text: &'a str,
}

impl<'a> Title<'a> {
    pub fn new(doi: &'a str, text: &'a str) -> Self {
        Self { doi, text }
    }
}

impl<'a> From<&'a str> for Title<'a> {
    fn from(text: &'a str) -> Self {
        Self { doi: "", text }
    }
}

impl<'a> From<&'a crate::registry::DatasetRecord> for Title<'a> {
    fn from(record: &'a crate::registry::DatasetRecord) -> Self {
        Self {
            doi: &record.doi,
            text: &record.title,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Preprocessed<'a> {
    /// Titles with at least one lowercase letter, cut at the first colon.
    pub mixed_case: Vec<Title<'a>>,
    /// Titles whose cased characters are all uppercase.
    pub all_caps: Vec<Title<'a>>,
}

/// Every cased character is uppercase and there is at least one.
pub fn is_all_caps(text: &str) -> bool {
    text.chars().any(char::is_uppercase) && !text.chars().any(char::is_lowercase)
}

pub fn preprocess_titles<'a>(titles: impl IntoIterator<Item = Title<'a>>) -> Preprocessed<'a> {
    let mut out = Preprocessed::default();
    for title in titles {
        if is_all_caps(title.text) {
            out.all_caps.push(title);
            continue;
        }
        let head = title.text.split(':').next().unwrap_or_default().trim();
        if !head.is_empty() {
            out.mixed_case.push(Title::new(title.doi, head));
        }
    }
    out
}

pub fn is_roman_numeral(token: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^M{0,3}(CM|CD|D?C{0,3})(XC|XL|L?X{0,3})(IX|IV|V?I{0,3})$")
            .expect("valid regex")
    });
    !token.is_empty() && re.is_match(token)
}

fn upper_beyond_first(token: &str) -> bool {
    token.chars().skip(1).any(char::is_uppercase)
}

fn lower_beyond_first(part: &str) -> bool {
    part.chars().skip(1).any(char::is_lowercase)
}

/// The shape conditions of rule 2 that do not concern letter case.
fn plausible_shape(token: &str) -> bool {
    token.chars().count() >= MIN_ABBREVIATION_LEN
        && token.chars().any(char::is_alphabetic)
        && !token.starts_with(|c: char| c.is_ascii_digit() || c.is_numeric())
        && !is_roman_numeral(token)
}

/// Rule 2.
fn passes_case_rule(token: &str) -> bool {
    upper_beyond_first(token) && plausible_shape(token)
}

/// Rule 3: the title opens with a single token directly followed by a
/// standalone dash or an opening parenthesis.
fn leading_single_token(title: &str) -> Option<&str> {
    let pieces: Vec<&str> = title.split_whitespace().collect();
    let delimiter = pieces
        .iter()
        .position(|p| matches!(*p, "-" | "–" | "—") || p.starts_with('('))?;
    if delimiter != 1 {
        return None;
    }
    let tokens = tokenize(pieces[0]);
    match tokens.as_slice() {
        [only] if plausible_shape(only.text) => Some(only.text),
        _ => None,
    }
}

/// Rule 4.
fn passes_punctuation_rule(candidate: &str) -> bool {
    candidate
        .chars()
        .all(|c| is_word_char(c) || is_whitelisted_punctuation(c))
}

/// Rule 5.
fn passes_compound_rule(candidate: &str) -> bool {
    if !candidate.contains(['/', '-']) {
        return true;
    }
    !candidate.split(['/', '-']).any(lower_beyond_first)
}

/// Rule 6.
fn passes_wordlist_rule(candidate: &str, wordlists: &Wordlists) -> bool {
    upper_beyond_first(candidate) || !wordlists.is_known_word(candidate)
}

/// Applies rules 1–6 to preprocessed mixed-case titles.
pub fn extract_abbreviations(titles: &[Title<'_>], wordlists: &Wordlists) -> Vec<Feature> {
    let mut found = Collector::new(FeatureKind::Abbreviation);
    for title in titles {
        let mut candidates: Vec<&str> = tokenize(title.text)
            .into_iter()
            .map(|t| t.text)
            .filter(|t| passes_case_rule(t))
            .collect();
        candidates.extend(leading_single_token(title.text));
        for candidate in candidates {
            if passes_punctuation_rule(candidate)
                && passes_compound_rule(candidate)
                && passes_wordlist_rule(candidate, wordlists)
            {
                found.add(candidate, title.doi);
            }
        }
    }
    found.finish()
}

/// Tokens of all-caps titles that no word list knows.
pub fn extract_allcaps_tokens(titles: &[Title<'_>], wordlists: &Wordlists) -> Vec<Feature> {
    let mut found = Collector::new(FeatureKind::Abbreviation);
    for title in titles {
        for token in tokenize(title.text) {
            let candidate = token.text;
            if plausible_shape(candidate)
                && passes_punctuation_rule(candidate)
                && !wordlists.is_known_word(candidate)
            {
                found.add(candidate, title.doi);
            }
        }
    }
    found.finish()
}

fn is_phrase_word(token: &str) -> bool {
    token.chars().any(char::is_alphabetic) && !token.starts_with(|c: char| c.is_numeric())
}

/// Emits the three phrase types:
/// a single token with a base term inside it ("Singularisierungsstudie"),
/// "Survey of"/"Study of" plus a non-stopword ("Survey of Hunting"), and
/// a base term next to a non-stopword ("Exit Poll").
pub fn extract_phrases(
    titles: &[Title<'_>],
    base_terms: &BTreeSet<String>,
    wordlists: &Wordlists,
) -> Vec<Feature> {
    let mut found = Collector::new(FeatureKind::Phrase);
    for title in titles {
        let text = title.text;
        let tokens = word_tokens(text);
        let folded: Vec<String> = tokens.iter().map(|t| fold_case(t.text)).collect();
        let adjacent = |i: usize| {
            text[tokens[i].end..tokens[i + 1].start]
                .chars()
                .all(char::is_whitespace)
        };

        for (token, f) in tokens.iter().zip(&folded) {
            let compound = token.text.chars().all(|c| c.is_alphabetic() || c == '-');
            if compound
                && !base_terms.contains(f)
                && base_terms.iter().any(|b| f.contains(b.as_str()))
            {
                found.add(token.text, title.doi);
            }
        }

        for i in 0..tokens.len().saturating_sub(2) {
            if matches!(folded[i].as_str(), "survey" | "study")
                && folded[i + 1] == "of"
                && adjacent(i)
                && adjacent(i + 1)
                && is_phrase_word(tokens[i + 2].text)
                && !wordlists.is_stopword(tokens[i + 2].text)
            {
                found.add(&text[tokens[i].start..tokens[i + 2].end], title.doi);
            }
        }

        for i in 0..tokens.len().saturating_sub(1) {
            if !adjacent(i) {
                continue;
            }
            let (a, b) = (tokens[i].text, tokens[i + 1].text);
            let a_base = base_terms.contains(&folded[i]);
            let b_base = base_terms.contains(&folded[i + 1]);
            let partner_ok = |w: &str| is_phrase_word(w) && !wordlists.is_stopword(w);
            if (a_base && partner_ok(b)) || (b_base && partner_ok(a)) {
                found.add(&text[tokens[i].start..tokens[i + 1].end], title.doi);
            }
        }
    }
    found.finish()
}

/// Deduplicates features by key (exact text for abbreviations, folded text
/// for phrases), keeping the preferred spelling and all source DOIs.
struct Collector {
    kind: FeatureKind,
    features: BTreeMap<String, Feature>,
}

impl Collector {
    fn new(kind: FeatureKind) -> Self {
        Self {
            kind,
            features: BTreeMap::new(),
        }
    }

    fn add(&mut self, text: &str, doi: &str) {
        let kind = self.kind;
        let feature = self
            .features
            .entry(kind.normalize(text))
            .or_insert_with(|| Feature::new(text, kind));
        if super::prefers_spelling(text, &feature.text) {
            feature.text = text.to_owned();
        }
        if !doi.is_empty() {
            feature.source_titles.insert(doi.to_owned());
        }
    }

    fn finish(self) -> Vec<Feature> {
        self.features.into_values().collect()
    }
}
