//! Word lists used to prune abbreviation candidates and to filter phrase
//! partners: English and German vocabularies, country names, stopwords and
//! the curated base terms.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use crate::text::fold_case;

const ENGLISH: &str = include_str!("../../resources/english.txt");
const GERMAN: &str = include_str!("../../resources/german.txt");
const COUNTRIES: &str = include_str!("../../resources/countries.txt");
const STOPWORDS_EN: &str = include_str!("../../resources/stopwords_en.txt");
const STOPWORDS_DE: &str = include_str!("../../resources/stopwords_de.txt");
const BASE_TERMS: &str = include_str!("../../resources/base_terms.txt");

fn lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Case-folded lookup sets. All queries fold their argument first.
#[derive(Debug, Clone, Default)]
pub struct Wordlists {
    english: HashSet<String>,
    german: HashSet<String>,
    countries: HashSet<String>,
    stopwords: HashSet<String>,
}

impl Wordlists {
    /// The lists shipped with the crate, parsed once per process.
    pub fn bundled() -> &'static Wordlists {
        static BUNDLED: OnceLock<Wordlists> = OnceLock::new();
        BUNDLED.get_or_init(|| Wordlists {
            english: lines(ENGLISH).map(fold_case).collect(),
            german: lines(GERMAN).map(fold_case).collect(),
            countries: lines(COUNTRIES).map(fold_case).collect(),
            stopwords: lines(STOPWORDS_EN)
                .chain(lines(STOPWORDS_DE))
                .map(fold_case)
                .collect(),
        })
    }

    pub fn from_lists<'a>(
        english: impl IntoIterator<Item = &'a str>,
        german: impl IntoIterator<Item = &'a str>,
        countries: impl IntoIterator<Item = &'a str>,
        stopwords: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Self {
            english: english.into_iter().map(fold_case).collect(),
            german: german.into_iter().map(fold_case).collect(),
            countries: countries.into_iter().map(fold_case).collect(),
            stopwords: stopwords.into_iter().map(fold_case).collect(),
        }
    }

    pub fn is_english_word(&self, word: &str) -> bool {
        self.english.contains(&fold_case(word))
    }

    pub fn is_german_word(&self, word: &str) -> bool {
        self.german.contains(&fold_case(word))
    }

    pub fn is_country(&self, word: &str) -> bool {
        self.countries.contains(&fold_case(word))
    }

    /// English word, German word or country name.
    pub fn is_known_word(&self, word: &str) -> bool {
        let folded = fold_case(word);
        self.english.contains(&folded)
            || self.german.contains(&folded)
            || self.countries.contains(&folded)
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(&fold_case(word))
    }

    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        (
            self.english.len(),
            self.german.len(),
            self.countries.len(),
            self.stopwords.len(),
        )
    }
}

pub fn bundled_base_terms() -> BTreeSet<String> {
    lines(BASE_TERMS).map(fold_case).collect()
}
