//! Sentence splitting and feature search over article full texts.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dictionary::{Feature, FeatureDictionary, FeatureKind};
use crate::text::{find_bounded, fold_case, is_word_char, word_runs};

#[derive(Debug, Error)]
pub enum ArticleError {
    #[error("article {0:?} has an empty full text")]
    EmptyText(String),
    #[error("article id must not be empty")]
    EmptyId,
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleText {
    pub article_id: String,
    pub fulltext: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl ArticleText {
    pub fn new(
        article_id: impl Into<String>,
        fulltext: impl Into<String>,
    ) -> Result<Self, ArticleError> {
        let article_id = article_id.into();
        let fulltext = fulltext.into();
        if article_id.trim().is_empty() {
            return Err(ArticleError::EmptyId);
        }
        if fulltext.trim().is_empty() {
            return Err(ArticleError::EmptyText(article_id));
        }
        Ok(Self {
            article_id,
            fulltext,
            language: None,
        })
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = Some(language.into());
        self
    }

    /// Reads a UTF-8 text file; the article id is the file stem.
    pub fn read(path: impl AsRef<Path>) -> Result<Self, ArticleError> {
        let path = path.as_ref();
        let io_err = |source| ArticleError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = fs::read_to_string(path).map_err(io_err)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(id, text)
    }

    pub fn sentences(&self) -> Vec<Sentence<'_>> {
        split_sentences(&self.fulltext)
    }
}

/// Half-open range of character (Unicode scalar) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    /// Character offsets into the full text.
    pub span: Span,
    /// Byte offset of `text` in the full text.
    pub byte_start: usize,
}

/// Abbreviations whose final period never ends a sentence.
pub const NON_TERMINAL_ABBREVIATIONS: &[&str] = &[
    "z.B.", "bzw.", "e.g.", "i.e.", "Dr.", "vs.", "et al.", "d.h.", "u.a.", "vgl.", "ca.", "Nr.",
    "Prof.", "cf.", "Abb.", "Tab.", "Fig.", "No.", "S.",
];

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSING_QUOTES: [char; 6] = ['"', '\'', '”', '’', '»', '«'];
const OPENING_QUOTES: [char; 5] = ['"', '\'', '„', '“', '‘'];

/// Splits a text into trimmed sentences.
///
/// A sentence ends at `.`, `!` or `?` (plus trailing terminators and closing
/// quotes) when followed by whitespace and an uppercase letter or digit,
/// unless the period belongs to a known abbreviation or sits inside
/// parentheses. A blank line always ends a sentence and resets the
/// parenthesis depth. Only whitespace lies between consecutive sentences.
pub fn split_sentences(text: &str) -> Vec<Sentence<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            '\n' => {
                let mut j = i + 1;
                while j < n && matches!(chars[j].1, ' ' | '\t' | '\r') {
                    j += 1;
                }
                if j < n && chars[j].1 == '\n' {
                    push_sentence(text, &chars, start, i, &mut out);
                    start = j;
                    depth = 0;
                    i = j + 1;
                    continue;
                }
            }
            _ if TERMINATORS.contains(&c)
                && depth == 0
                && !is_abbreviation_period(text, &chars, i) =>
            {
                let mut end = i + 1;
                while end < n
                    && (TERMINATORS.contains(&chars[end].1)
                        || CLOSING_QUOTES.contains(&chars[end].1))
                {
                    end += 1;
                }
                let mut next = end;
                while next < n && chars[next].1.is_whitespace() {
                    next += 1;
                }
                if next > end && next < n && opens_sentence(&chars, next) {
                    push_sentence(text, &chars, start, end, &mut out);
                    start = end;
                    i = next;
                    continue;
                }
                i = end;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    push_sentence(text, &chars, start, n, &mut out);
    out
}

fn opens_sentence(chars: &[(usize, char)], at: usize) -> bool {
    let starts = |c: char| c.is_uppercase() || c.is_numeric();
    let c = chars[at].1;
    starts(c) || (OPENING_QUOTES.contains(&c) && chars.get(at + 1).is_some_and(|(_, d)| starts(*d)))
}

fn is_abbreviation_period(text: &str, chars: &[(usize, char)], at: usize) -> bool {
    if chars[at].1 != '.' {
        return false;
    }
    let pos = chars[at].0;
    NON_TERMINAL_ABBREVIATIONS.iter().any(|abbr| {
        abbr.match_indices('.').any(|(k, _)| {
            let Some(begin) = pos.checked_sub(k) else {
                return false;
            };
            text.get(begin..begin + abbr.len()) == Some(abbr)
                && text[..begin]
                    .chars()
                    .next_back()
                    .is_none_or(|p| !is_word_char(p))
        })
    })
}

fn push_sentence<'a>(
    text: &'a str,
    chars: &[(usize, char)],
    mut from: usize,
    mut to: usize,
    out: &mut Vec<Sentence<'a>>,
) {
    while from < to && chars[from].1.is_whitespace() {
        from += 1;
    }
    while to > from && chars[to - 1].1.is_whitespace() {
        to -= 1;
    }
    if from == to {
        return;
    }
    let byte_end = chars.get(to).map_or(text.len(), |(b, _)| *b);
    out.push(Sentence {
        text: &text[chars[from].0..byte_end],
        span: Span::new(from, to),
        byte_start: chars[from].0,
    });
}

/// All occurrences of `feature` in `text`, as byte ranges, left to right.
/// Abbreviations match case-sensitively, phrases case-insensitively; both
/// only at token boundaries.
pub fn match_feature(text: &str, feature: &Feature) -> Vec<Range<usize>> {
    find_bounded(
        text,
        &feature.text,
        feature.kind == FeatureKind::Abbreviation,
    )
}

/// A detected dataset reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCandidate {
    pub article_id: String,
    /// The segment of the sentence assigned to this reference.
    pub sentence: String,
    /// Character offsets of `sentence` in the full text.
    pub span: Span,
    /// Character offsets of the feature occurrence in the full text.
    pub feature_span: Span,
    pub feature: Feature,
    pub segment_index: usize,
}

/// Candidates for one feature within one sentence. A feature occurring `k`
/// times yields `k` segments, cut between consecutive occurrences at the
/// whitespace nearest the midpoint of the gap.
pub fn sentence_candidates(
    article_id: &str,
    sentence: &Sentence<'_>,
    feature: &Feature,
) -> Vec<ReferenceCandidate> {
    let matches = match_feature(sentence.text, feature);
    if matches.is_empty() {
        return Vec::new();
    }
    let chars: Vec<(usize, char)> = sentence.text.char_indices().collect();
    let char_at = |byte: usize| chars.partition_point(|(b, _)| *b < byte);
    let char_matches: Vec<Range<usize>> = matches
        .iter()
        .map(|m| char_at(m.start)..char_at(m.end))
        .collect();

    let mut cuts = vec![0];
    for pair in char_matches.windows(2) {
        cuts.push(cut_point(&chars, pair[0].end, pair[1].start));
    }
    cuts.push(chars.len());

    let stripped = Feature::new(feature.text.clone(), feature.kind);
    let byte_of = |c: usize| chars.get(c).map_or(sentence.text.len(), |(b, _)| *b);
    char_matches
        .iter()
        .enumerate()
        .map(|(idx, m)| {
            let (mut from, mut to) = (cuts[idx], cuts[idx + 1]);
            while from < to && chars[from].1.is_whitespace() {
                from += 1;
            }
            while to > from && chars[to - 1].1.is_whitespace() {
                to -= 1;
            }
            let base = sentence.span.start;
            ReferenceCandidate {
                article_id: article_id.to_owned(),
                sentence: sentence.text[byte_of(from)..byte_of(to)].to_owned(),
                span: Span::new(base + from, base + to),
                feature_span: Span::new(base + m.start, base + m.end),
                feature: stripped.clone(),
                segment_index: idx,
            }
        })
        .collect()
}

/// Cut position in `gap_start..gap_end` (chars): the whitespace nearest the
/// midpoint, else the nearest non-alphanumeric character, else the midpoint.
fn cut_point(chars: &[(usize, char)], gap_start: usize, gap_end: usize) -> usize {
    let mid = (gap_start + gap_end) / 2;
    let nearest = |pred: &dyn Fn(char) -> bool| {
        (gap_start..gap_end)
            .filter(|&p| pred(chars[p].1))
            .min_by_key(|&p| (p.abs_diff(mid), p))
    };
    nearest(&|c: char| c.is_whitespace())
        .or_else(|| nearest(&|c: char| !is_word_char(c)))
        .unwrap_or(mid)
}

/// Indexes features by the case-folded first alphanumeric run of their text,
/// so only features whose head word occurs in a sentence are tried.
struct FeatureIndex<'d> {
    by_head: HashMap<String, Vec<&'d Feature>>,
    always: Vec<&'d Feature>,
}

impl<'d> FeatureIndex<'d> {
    fn new(features: impl Iterator<Item = &'d Feature>) -> Self {
        let mut by_head: HashMap<String, Vec<&Feature>> = HashMap::new();
        let mut always = Vec::new();
        for feature in features {
            let starts_with_word = feature.text.trim_start().starts_with(is_word_char);
            match word_runs(&feature.text).first() {
                Some(run) if starts_with_word => by_head
                    .entry(fold_case(&feature.text[run.clone()]))
                    .or_default()
                    .push(feature),
                _ => always.push(feature),
            }
        }
        Self { by_head, always }
    }

    fn candidates(&self, sentence: &str) -> Vec<&'d Feature> {
        let heads: BTreeSet<String> = word_runs(sentence)
            .into_iter()
            .map(|r| fold_case(&sentence[r]))
            .collect();
        let mut found: Vec<&Feature> = heads
            .iter()
            .filter_map(|h| self.by_head.get(h))
            .flatten()
            .copied()
            .chain(self.always.iter().copied())
            .collect();
        found.sort_by(|a, b| (a.kind, &a.text).cmp(&(b.kind, &b.text)));
        found.dedup_by(|a, b| a.kind == b.kind && a.text == b.text);
        found
    }
}

/// Every feature occurrence in every sentence, ordered by span, then
/// segment index, then feature.
pub fn find_references(article: &ArticleText, dict: &FeatureDictionary) -> Vec<ReferenceCandidate> {
    let index = FeatureIndex::new(dict.features());
    let mut out = Vec::new();
    for sentence in article.sentences() {
        for feature in index.candidates(sentence.text) {
            out.extend(sentence_candidates(&article.article_id, &sentence, feature));
        }
    }
    sort_candidates(&mut out);
    out
}

pub fn sort_candidates(candidates: &mut [ReferenceCandidate]) {
    candidates.sort_by(|a, b| {
        (
            a.span,
            a.segment_index,
            a.feature.kind,
            &a.feature.text,
            a.feature_span,
        )
            .cmp(&(
                b.span,
                b.segment_index,
                b.feature.kind,
                &b.feature.text,
                b.feature_span,
            ))
    });
}
