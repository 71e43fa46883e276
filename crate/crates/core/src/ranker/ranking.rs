//! Per-reference candidate ranking, the year heuristic and per-feature
//! aggregation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::config::RankerConfig;
use super::similarity::cosine;
use super::weighting::{count_terms, ranking_terms, RankingCorpus, TermCounts};
use crate::detector::{ArticleText, ReferenceCandidate};
use crate::dictionary::{Feature, FeatureKey};
use crate::registry::{DatasetRecord, RegistryIndex};
use crate::scalar::Scalar;
use crate::text::extract_years;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch<S> {
    pub doi: String,
    pub title: String,
    pub score: S,
    pub rank: usize,
}

fn desc<S: Scalar>(a: S, b: S) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn has_year(title: &str, years: &[u16]) -> bool {
    !years.is_empty() && extract_years(title).iter().any(|y| years.contains(y))
}

fn assign_ranks<S>(matches: &mut [RankedMatch<S>]) {
    for (i, m) in matches.iter_mut().enumerate() {
        m.rank = i + 1;
    }
}

/// Multiplies the score of every title sharing a year with `segment` by
/// `factor` and re-sorts by score. Items with equal scores keep their order.
pub fn year_boost<S: Scalar>(
    segment: &str,
    matches: &[RankedMatch<S>],
    factor: S,
) -> Vec<RankedMatch<S>> {
    let years = extract_years(segment);
    let mut out: Vec<RankedMatch<S>> = matches
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if has_year(&m.title, &years) {
                m.score = m.score * factor;
            }
            m
        })
        .collect();
    out.sort_by(|a, b| desc(a.score, b.score));
    assign_ranks(&mut out);
    out
}

/// Term counts of every sentence of an article, shared by all of its
/// references.
#[derive(Debug, Clone)]
pub struct ArticleContext {
    sentences: Vec<TermCounts>,
}

impl ArticleContext {
    pub fn new(article: &ArticleText) -> Self {
        Self {
            sentences: article
                .sentences()
                .iter()
                .map(|s| count_terms(ranking_terms(s.text)))
                .collect(),
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }
}

/// The article's sentences plus every registry title containing one
/// feature.
#[derive(Debug, Clone)]
pub struct FeatureCorpus<'r> {
    pub corpus: RankingCorpus,
    titles: Vec<(&'r DatasetRecord, TermCounts)>,
}

impl<'r> FeatureCorpus<'r> {
    pub fn new(context: &ArticleContext, index: &'r RegistryIndex, feature: &Feature) -> Self {
        let titles: Vec<_> = index
            .titles_containing(feature)
            .into_iter()
            .map(|r| (r, count_terms(ranking_terms(&r.title))))
            .collect();
        let corpus = RankingCorpus::from_documents(
            context
                .sentences
                .iter()
                .cloned()
                .chain(titles.iter().map(|(_, c)| c.clone())),
        );
        Self { corpus, titles }
    }

    pub fn title_count(&self) -> usize {
        self.titles.len()
    }

    /// Unboosted cosine of every title against `segment`, in DOI order.
    pub fn cosines<S: Scalar>(&self, segment: &str) -> Vec<(&'r DatasetRecord, S)> {
        let query = self
            .corpus
            .weights::<S>(&count_terms(ranking_terms(segment)));
        self.titles
            .iter()
            .map(|(r, counts)| (*r, cosine(&query, &self.corpus.weights::<S>(counts))))
            .collect()
    }

    /// Boosted, thresholded, sorted and truncated candidates for `segment`.
    pub fn rank<S: Scalar>(&self, segment: &str, config: &RankerConfig<S>) -> Vec<RankedMatch<S>> {
        let years = extract_years(segment);
        let mut scored: Vec<(bool, RankedMatch<S>)> = self
            .cosines::<S>(segment)
            .into_iter()
            .map(|(r, score)| {
                let hit = has_year(&r.title, &years);
                let score = if hit {
                    score * config.year_boost_factor
                } else {
                    score
                };
                (
                    hit,
                    RankedMatch {
                        doi: r.doi.clone(),
                        title: r.title.clone(),
                        score,
                        rank: 0,
                    },
                )
            })
            .filter(|(_, m)| m.score >= config.score_threshold)
            .collect();
        scored.sort_by(|(ha, a), (hb, b)| {
            desc(a.score, b.score)
                .then_with(|| hb.cmp(ha))
                .then_with(|| a.doi.cmp(&b.doi))
        });
        scored.truncate(config.top_k_reference);
        let mut out: Vec<_> = scored.into_iter().map(|(_, m)| m).collect();
        assign_ranks(&mut out);
        out
    }
}

/// Ranks the registry titles containing the reference's feature against the
/// reference segment.
pub fn rank_candidates<S: Scalar>(
    reference: &ReferenceCandidate,
    index: &RegistryIndex,
    article: &ArticleText,
    config: &RankerConfig<S>,
) -> Vec<RankedMatch<S>> {
    let context = ArticleContext::new(article);
    FeatureCorpus::new(&context, index, &reference.feature).rank(&reference.sentence, config)
}

/// Ranks all references of one article, building each feature's corpus once.
pub fn rank_article<S: Scalar>(
    references: &[ReferenceCandidate],
    index: &RegistryIndex,
    article: &ArticleText,
    config: &RankerConfig<S>,
) -> Vec<Vec<RankedMatch<S>>> {
    let context = ArticleContext::new(article);
    let mut corpora: HashMap<FeatureKey, FeatureCorpus<'_>> = HashMap::new();
    references
        .iter()
        .map(|r| {
            corpora
                .entry(r.feature.key())
                .or_insert_with(|| FeatureCorpus::new(&context, index, &r.feature))
                .rank(&r.sentence, config)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup<S> {
    pub feature: Feature,
    /// Positions of the grouped references in the input.
    pub references: Vec<usize>,
    /// The score field carries the number of reference lists naming the DOI.
    pub matches: Vec<RankedMatch<S>>,
}

/// Groups references by feature and keeps the `top_k` DOIs occurring most
/// often across their candidate lists, ties broken by best rank, then DOI.
pub fn aggregate_per_feature<'a, S: Scalar>(
    ranked: impl IntoIterator<Item = (&'a ReferenceCandidate, &'a [RankedMatch<S>])>,
    top_k: usize,
) -> Vec<FeatureGroup<S>> {
    struct Tally<'t> {
        title: &'t str,
        count: usize,
        best_rank: usize,
    }
    type Group<'g> = (Feature, Vec<usize>, BTreeMap<&'g str, Tally<'g>>);
    let mut groups: BTreeMap<FeatureKey, Group<'a>> = BTreeMap::new();
    for (pos, (reference, matches)) in ranked.into_iter().enumerate() {
        let (_, refs, tallies) = groups.entry(reference.feature.key()).or_insert_with(|| {
            (
                Feature::new(reference.feature.text.clone(), reference.feature.kind),
                Vec::new(),
                BTreeMap::new(),
            )
        });
        refs.push(pos);
        for m in matches {
            let tally = tallies.entry(m.doi.as_str()).or_insert(Tally {
                title: &m.title,
                count: 0,
                best_rank: usize::MAX,
            });
            tally.count += 1;
            tally.best_rank = tally.best_rank.min(m.rank);
        }
    }
    groups
        .into_values()
        .map(|(feature, references, tallies)| {
            let mut entries: Vec<(&str, Tally)> = tallies.into_iter().collect();
            entries.sort_by(|(da, a), (db, b)| {
                b.count
                    .cmp(&a.count)
                    .then(a.best_rank.cmp(&b.best_rank))
                    .then(da.cmp(db))
            });
            entries.truncate(top_k);
            let matches = entries
                .into_iter()
                .enumerate()
                .map(|(i, (doi, t))| RankedMatch {
                    doi: doi.to_owned(),
                    title: t.title.to_owned(),
                    score: S::from_count(t.count),
                    rank: i + 1,
                })
                .collect();
            FeatureGroup {
                feature,
                references,
                matches,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::find_references;
    use crate::dictionary::{FeatureDictionary, FeatureKind};

    fn m(doi: &str, title: &str, score: f64, rank: usize) -> RankedMatch<f64> {
        RankedMatch {
            doi: doi.into(),
            title: title.into(),
            score,
            rank,
        }
    }

    #[test]
    fn year_boost_reorders() {
        let ranked = [
            m("10.1/a", "Study Allbus 2000", 0.7, 1),
            m("10.1/b", "Allbus 2014", 0.6, 2),
        ];
        let boosted = year_boost("study allbus 2014", &ranked, 1.5);
        assert_eq!(boosted[0].doi, "10.1/b");
        assert_eq!((boosted[0].rank, boosted[1].rank), (1, 2));
        assert!((boosted[0].score - 0.9).abs() < 1e-12);
    }

    #[test]
    fn year_boost_without_years_or_uniform() {
        let ranked = [
            m("1", "A 2000", 0.5, 1),
            m("2", "B 2000", 0.5, 2),
            m("3", "C", 0.1, 3),
        ];
        assert_eq!(year_boost("no year here", &ranked, 1.5), ranked);
        let boosted = year_boost("in 2000", &ranked[..2], 1.5);
        assert_eq!(
            boosted.iter().map(|x| x.doi.as_str()).collect::<Vec<_>>(),
            ["1", "2"]
        );
    }

    fn piaac_index() -> RegistryIndex {
        RegistryIndex::from_records([
            DatasetRecord::new(
                "10.1/cy",
                "Programme for the International Assessment of Adult Competencies (PIAAC), Cyprus",
            ),
            DatasetRecord::new(
                "10.1/de",
                "Programme for the International Assessment of Adult Competencies (PIAAC), Germany",
            ),
            DatasetRecord::new("10.1/it", "European Values Study 2008: Italy (EVS 2008)"),
        ])
    }

    #[test]
    fn geography_term_decides() {
        let article = ArticleText::new(
            "a",
            "Wir analysieren Kompetenzen. Grundlage sind die PIAAC Daten für Germany. Weitere Daten fehlen.",
        )
        .unwrap();
        let mut dict = FeatureDictionary::default();
        dict.insert(Feature::new("PIAAC", FeatureKind::Abbreviation));
        let refs = find_references(&article, &dict);
        assert_eq!(refs.len(), 1);
        let ranked =
            rank_candidates::<f64>(&refs[0], &piaac_index(), &article, &RankerConfig::default());
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].doi, "10.1/de");
        assert!(ranked[0].score > ranked[1].score);
    }

    fn reference(feature: &str, i: usize) -> ReferenceCandidate {
        ReferenceCandidate {
            article_id: "a".into(),
            sentence: String::new(),
            span: crate::detector::Span::new(i, i + 1),
            feature_span: crate::detector::Span::new(i, i + 1),
            feature: Feature::new(feature, FeatureKind::Abbreviation),
            segment_index: 0,
        }
    }

    #[test]
    fn aggregation_counts_and_truncates() {
        let refs: Vec<_> = (0..10).map(|i| reference("ALLBUS", i)).collect();
        let lists: Vec<Vec<RankedMatch<f64>>> = (0..10)
            .map(|i| {
                let mut l = vec![m("X", "x", 0.9, 1)];
                l.extend((0..4).map(|j| m(&format!("D{}", i + j), "d", 0.1, j + 2)));
                l
            })
            .collect();
        let groups = aggregate_per_feature(refs.iter().zip(lists.iter().map(Vec::as_slice)), 6);
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        assert_eq!(g.references.len(), 10);
        assert_eq!(g.matches.len(), 6);
        assert_eq!(
            (
                g.matches[0].doi.as_str(),
                g.matches[0].score,
                g.matches[0].rank
            ),
            ("X", 10.0, 1)
        );
        // D3..D9 each appear 4 times with best rank 2
        assert_eq!(g.matches[1].score, 4.0);
    }

    #[test]
    fn single_reference_group_keeps_its_list() {
        let r = reference("PIAAC", 0);
        let list = vec![m("b", "B", 0.5, 1), m("a", "A", 0.4, 2)];
        let groups = aggregate_per_feature([(&r, list.as_slice())], 6);
        let dois: Vec<_> = groups[0].matches.iter().map(|x| x.doi.as_str()).collect();
        assert_eq!(dois, ["b", "a"]);
    }
}
