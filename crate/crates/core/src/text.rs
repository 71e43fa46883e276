//! Shared text primitives: the deterministic tokenizer, token-boundary
//! matching, case folding and year extraction.

use std::ops::Range;

/// Punctuation that may appear inside an abbreviation.
pub const ABBREVIATION_PUNCTUATION: [char; 5] = ['.', '-', '/', '*', '&'];

pub fn is_whitelisted_punctuation(c: char) -> bool {
    ABBREVIATION_PUNCTUATION.contains(&c)
}

pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// A token borrowed from its source text, with byte offsets into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

/// Splits `text` on Unicode whitespace and peels punctuation off both ends
/// of every piece.
///
/// A run of non-alphanumeric characters at either end of a piece is removed
/// when it contains any character outside [`ABBREVIATION_PUNCTUATION`];
/// a run made only of whitelisted characters is kept, so `"L.A."` survives
/// while `"(DAWN)."` becomes `"DAWN"`. Pieces that end up empty are dropped.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut piece_start = None;
    for (idx, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(start) = piece_start.take() {
                push_piece(text, start, idx, &mut tokens);
            }
        } else if piece_start.is_none() {
            piece_start = Some(idx);
        }
    }
    if let Some(start) = piece_start {
        push_piece(text, start, text.len(), &mut tokens);
    }
    tokens
}

fn push_piece<'a>(text: &'a str, start: usize, end: usize, out: &mut Vec<Token<'a>>) {
    let piece = &text[start..end];
    let (lead, trail) = trim_offsets(piece);
    if lead < trail {
        out.push(Token {
            text: &piece[lead..trail],
            start: start + lead,
            end: start + trail,
        });
    }
}

fn trim_offsets(piece: &str) -> (usize, usize) {
    // leading run
    let lead_run_end = piece
        .char_indices()
        .find(|(_, c)| is_word_char(*c))
        .map(|(i, _)| i)
        .unwrap_or(piece.len());
    if lead_run_end == piece.len() {
        // no alphanumeric content at all
        return if piece.chars().all(is_whitelisted_punctuation) {
            (0, piece.len())
        } else {
            (0, 0)
        };
    }
    let lead = if piece[..lead_run_end]
        .chars()
        .all(is_whitelisted_punctuation)
    {
        0
    } else {
        lead_run_end
    };
    let trail_run_start = piece
        .char_indices()
        .rev()
        .find(|(_, c)| is_word_char(*c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let trail = if piece[trail_run_start..]
        .chars()
        .all(is_whitelisted_punctuation)
    {
        piece.len()
    } else {
        trail_run_start
    };
    (lead, trail)
}

/// Like [`tokenize`], but strips every non-alphanumeric character from both
/// ends of each token. Used for phrases and ranking terms.
pub fn word_tokens(text: &str) -> Vec<Token<'_>> {
    tokenize(text)
        .into_iter()
        .filter_map(|t| {
            let trimmed = t.text.trim_start_matches(|c: char| !is_word_char(c));
            let lead = t.text.len() - trimmed.len();
            let trimmed = trimmed.trim_end_matches(|c: char| !is_word_char(c));
            (!trimmed.is_empty()).then(|| Token {
                text: trimmed,
                start: t.start + lead,
                end: t.start + lead + trimmed.len(),
            })
        })
        .collect()
}

/// Case folding applied character by character (no context-sensitive
/// mappings), so that folded strings compare the same way
/// [`chars_eq_ignore_case`] does.
pub fn fold_case(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

pub fn chars_eq_ignore_case(a: char, b: char) -> bool {
    a == b || a.to_lowercase().eq(b.to_lowercase())
}

/// Maximal runs of alphanumeric characters, as byte ranges.
pub fn word_runs(text: &str) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (idx, c) in text.char_indices() {
        if is_word_char(c) {
            if start.is_none() {
                start = Some(idx);
            }
        } else if let Some(s) = start.take() {
            runs.push(s..idx);
        }
    }
    if let Some(s) = start {
        runs.push(s..text.len());
    }
    runs
}

/// Finds all non-overlapping occurrences of `needle` in `haystack` that sit
/// on token boundaries, left to right, as byte ranges into `haystack`.
///
/// Whitespace inside the needle matches any non-empty run of whitespace in
/// the haystack. The characters immediately before and after a match must
/// not be alphanumeric.
pub fn find_bounded(haystack: &str, needle: &str, case_sensitive: bool) -> Vec<Range<usize>> {
    let words: Vec<Vec<char>> = needle
        .split_whitespace()
        .map(|w| w.chars().collect())
        .collect();
    if words.is_empty() {
        return Vec::new();
    }
    let eq = |a: char, b: char| {
        if case_sensitive {
            a == b
        } else {
            chars_eq_ignore_case(a, b)
        }
    };
    let chars: Vec<(usize, char)> = haystack.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map(|(b, _)| *b).unwrap_or(haystack.len());

    let mut found = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if i > 0 && is_word_char(chars[i - 1].1) {
            i += 1;
            continue;
        }
        match match_words_at(&chars, i, &words, &eq) {
            Some(end) if chars.get(end).is_none_or(|(_, c)| !is_word_char(*c)) => {
                found.push(byte_at(i)..byte_at(end));
                i = end;
            }
            _ => i += 1,
        }
    }
    found
}

fn match_words_at(
    chars: &[(usize, char)],
    start: usize,
    words: &[Vec<char>],
    eq: &impl Fn(char, char) -> bool,
) -> Option<usize> {
    let mut pos = start;
    for (w, word) in words.iter().enumerate() {
        if w > 0 {
            let ws_start = pos;
            while pos < chars.len() && chars[pos].1.is_whitespace() {
                pos += 1;
            }
            if pos == ws_start {
                return None;
            }
        }
        for &wc in word {
            let (_, hc) = *chars.get(pos)?;
            if !eq(wc, hc) {
                return None;
            }
            pos += 1;
        }
    }
    Some(pos)
}

/// Four-digit years in 1900–2099 that form a whole alphanumeric run.
pub fn extract_years(text: &str) -> Vec<u16> {
    word_runs(text)
        .into_iter()
        .filter_map(|r| {
            let run = &text[r];
            if run.len() == 4 && run.bytes().all(|b| b.is_ascii_digit()) {
                let year: u16 = run.parse().ok()?;
                (1900..=2099).contains(&year).then_some(year)
            } else {
                None
            }
        })
        .collect()
}

/// Converts a byte offset into a character (Unicode scalar) offset.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Slices `text` by character offsets.
pub fn slice_chars(text: &str, range: Range<usize>) -> &str {
    let mut indices = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()));
    let start = indices.nth(range.start).unwrap_or(text.len());
    let end = if range.end > range.start {
        indices
            .nth(range.end - range.start - 1)
            .unwrap_or(text.len())
    } else {
        start
    };
    &text[start..end]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(s: &str) -> Vec<&str> {
        tokenize(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenizer_peels_brackets_and_commas() {
        assert_eq!(
            texts("Drug Abuse Warning Network (DAWN), 2008"),
            ["Drug", "Abuse", "Warning", "Network", "DAWN", "2008"]
        );
        assert_eq!(texts("(NHM&E)."), ["NHM&E"]);
        assert_eq!(texts("Allbus/GGSS)"), ["Allbus/GGSS"]);
    }

    #[test]
    fn tokenizer_keeps_whitelisted_edges() {
        assert_eq!(texts("L.A. L.A.FANS -"), ["L.A.", "L.A.FANS", "-"]);
        assert_eq!(texts("– «»"), Vec::<&str>::new());
    }

    #[test]
    fn token_offsets_index_source() {
        let s = "über (PIAAC), x";
        for t in tokenize(s) {
            assert_eq!(&s[t.start..t.end], t.text);
        }
    }

    #[test]
    fn bounded_find_respects_boundaries() {
        assert_eq!(find_bounded("ALLBUS (2010)", "ALLBUS", true).len(), 1);
        assert!(find_bounded("we tallbus the data", "ALLBUS", false).is_empty());
        assert!(find_bounded("ALLBUSX", "ALLBUS", true).is_empty());
        assert_eq!(find_bounded("ALLBUS-Wellen", "ALLBUS", true), vec![0..6]);
    }

    #[test]
    fn bounded_find_folds_case_and_whitespace() {
        let hay = "the exit poll and the Exit\n  Poll";
        assert_eq!(find_bounded(hay, "Exit Poll", false).len(), 2);
        assert_eq!(find_bounded(hay, "Exit Poll", true).len(), 1);
    }

    #[test]
    fn years_are_whole_runs_in_range() {
        assert_eq!(
            extract_years("ALLBUS 1998, 2010. ZA4610 1880–1910 2100"),
            [1998, 2010, 1910]
        );
    }

    #[test]
    fn char_slicing() {
        let s = "Bevölkerung 2010";
        assert_eq!(slice_chars(s, 12..16), "2010");
        assert_eq!(char_offset(s, s.find("2010").unwrap()), 12);
    }
}
