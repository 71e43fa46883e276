//! Title-pattern statistics over a registry dump.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureDictionary, FeatureKind};
use crate::detector::match_feature;
use crate::text::{fold_case, tokenize};

/// Fractions of titles, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub titles: usize,
    pub abbrev_pct: f64,
    pub phrase_pct: f64,
    pub intersection_pct: f64,
    pub filename_pct: f64,
}

/// A token of the form `name.EXT` with a two- to four-letter extension.
pub fn is_filename_token(token: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z0-9_\-]+\.[A-Za-z]{2,4}$").expect("valid regex"))
        .is_match(token)
}

fn title_has(title: &str, folded: &str, feature: &Feature) -> bool {
    let plausible = match feature.kind {
        FeatureKind::Abbreviation => title.contains(feature.text.as_str()),
        FeatureKind::Phrase => feature
            .text
            .split_whitespace()
            .all(|w| folded.contains(fold_case(w).as_str())),
    };
    plausible && !match_feature(title, feature).is_empty()
}

pub fn pattern_stats<'a>(
    titles: impl IntoIterator<Item = &'a str>,
    dict: &FeatureDictionary,
) -> PatternStats {
    let (mut n, mut abbrev, mut phrase, mut both, mut filename) =
        (0usize, 0usize, 0usize, 0usize, 0usize);
    for title in titles {
        n += 1;
        let folded = fold_case(title);
        let a = dict.abbreviations().any(|f| title_has(title, &folded, f));
        let p = dict.phrases().any(|f| title_has(title, &folded, f));
        abbrev += usize::from(a);
        phrase += usize::from(p);
        both += usize::from(a && p);
        filename += usize::from(tokenize(title).iter().any(|t| is_filename_token(t.text)));
    }
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    PatternStats {
        titles: n,
        abbrev_pct: frac(abbrev),
        phrase_pct: frac(phrase),
        intersection_pct: frac(both),
        filename_pct: frac(filename),
    }
}
