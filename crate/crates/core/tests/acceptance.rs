//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dataref_core::detector::{find_references, ArticleText, ReferenceCandidate};
use dataref_core::dictionary::{
    build_dictionary, Feature, FeatureDictionary, FeatureKey, FeatureKind, Title, Wordlists,
};
use dataref_core::evaluator::{
    evaluate_detection, evaluate_matching, evaluate_matching_detected, f_measure, DetectedFeatures,
    GoldStandard, Suggestion,
};
use dataref_core::exporter::{
    build_linkset, export_json, export_ntriples, export_turtle, import_json, ArticleMetadata,
    Confirmation, LinkSet,
};
use dataref_core::ranker::{
    aggregate_per_feature, cosine, idf, rank_article, set_similarity, tf_weight, ArticleContext,
    FeatureCorpus, RankingCorpus, SetMetric, TermCounts,
};
use dataref_core::registry::{DatasetRecord, RegistryIndex};
use dataref_core::{DefaultRankerConfig, FeatureGroup, RankedMatch};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rio_api::parser::TriplesParser;
use rio_turtle::{NTriplesParser, TurtleError, TurtleParser};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    }};
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("formula fidelity", formula_fidelity),
        ("f-measure arithmetic", f_measure_arithmetic),
        ("dictionary rules", dictionary_rules),
        ("year-boost heuristic", year_boost_heuristic),
        ("end-to-end synthetic reproduction", end_to_end),
        ("workflow cardinality", workflow_cardinality),
        ("evaluation protocol", evaluation_protocol),
        ("export", export_criterion),
        ("service", service_criterion),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<36} {detail} ({secs:.2}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<36} {detail} ({secs:.2}s)");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// Independent oracles

fn oracle_tf(count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        1.0 + (count as f64).ln() / std::f64::consts::LN_10
    }
}

fn oracle_df(docs: &[Vec<(String, usize)>], term: &str) -> usize {
    docs.iter()
        .filter(|d| d.iter().any(|(t, c)| t == term && *c > 0))
        .count()
}

fn oracle_idf(docs: &[Vec<(String, usize)>], term: &str) -> f64 {
    let n = docs.len() as f64;
    let df = oracle_df(docs, term).max(1) as f64;
    (n / df).ln() / std::f64::consts::LN_10
}

fn count_of(bag: &[(String, usize)], term: &str) -> usize {
    bag.iter().filter(|(t, _)| t == term).map(|(_, c)| *c).sum()
}

fn oracle_tfidf(
    docs: &[Vec<(String, usize)>],
    query: &[(String, usize)],
    doc: &[(String, usize)],
) -> f64 {
    let mut total = 0.0;
    for (term, _) in query {
        let c = count_of(doc, term);
        if c > 0 {
            total += oracle_tf(c) * oracle_idf(docs, term);
        }
    }
    total
}

fn oracle_cosine(
    docs: &[Vec<(String, usize)>],
    query: &[(String, usize)],
    doc: &[(String, usize)],
) -> f64 {
    let mut vocab: Vec<&str> = query.iter().chain(doc).map(|(t, _)| t.as_str()).collect();
    vocab.sort_unstable();
    vocab.dedup();
    let weight =
        |bag: &[(String, usize)], t: &str| oracle_tf(count_of(bag, t)) * oracle_idf(docs, t);
    let q: Vec<f64> = vocab.iter().map(|t| weight(query, t)).collect();
    let d: Vec<f64> = vocab.iter().map(|t| weight(doc, t)).collect();
    let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
    let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nq == 0.0 || nd == 0.0 {
        0.0
    } else {
        dot / (nq * nd)
    }
}

/// Set coefficients by linear scans over unsorted vectors.
fn oracle_set(metric: SetMetric, a: &[u32], b: &[u32]) -> Option<f64> {
    let shared = a.iter().filter(|x| b.contains(x)).count() as f64;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let union = na + nb - shared;
    match metric {
        SetMetric::Matching => Some(shared),
        SetMetric::Dice => Some(if na + nb == 0.0 {
            0.0
        } else {
            2.0 * shared / (na + nb)
        }),
        SetMetric::Overlap => (na > 0.0 && nb > 0.0).then(|| shared / na.min(nb)),
        SetMetric::Jaccard => Some(if union == 0.0 { 0.0 } else { shared / union }),
    }
}

fn random_bag(rng: &mut ChaCha8Rng, vocab: &[String]) -> Vec<(String, usize)> {
    let k = rng.random_range(0..=vocab.len().min(8));
    let mut terms: Vec<&String> = vocab.choose_multiple(rng, k).collect();
    terms.sort();
    terms
        .into_iter()
        .map(|t| (t.clone(), rng.random_range(1..=5)))
        .collect()
}

fn as_counts(bag: &[(String, usize)]) -> TermCounts {
    bag.iter().cloned().collect()
}

fn random_set(rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut v: Vec<u32> = (0..rng.random_range(0..=8))
        .map(|_| rng.random_range(0..12))
        .collect();
    v.sort_unstable();
    v.dedup();
    v.shuffle(rng);
    v
}

// ---------------------------------------------------------------------------
// Criteria

fn formula_fidelity() -> Outcome {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut checks = 0usize;
    for trial in 0..1000 {
        let n_terms = rng.random_range(1..=30);
        let vocab: Vec<String> = (0..n_terms).map(|i| format!("t{i}")).collect();
        let mut query_vocab = vocab.clone();
        query_vocab.extend((0..3).map(|i| format!("unseen{i}")));
        let n_docs = rng.random_range(1..=20);
        let docs: Vec<Vec<(String, usize)>> =
            (0..n_docs).map(|_| random_bag(&mut rng, &vocab)).collect();
        let query = random_bag(&mut rng, &query_vocab);
        let corpus = RankingCorpus::from_documents(docs.iter().map(|d| as_counts(d)));
        let q_counts = as_counts(&query);
        let q_weights = corpus.weights::<f64>(&q_counts);

        for c in 0..=12 {
            let got = tf_weight::<f64>(c);
            ensure!(
                (got - oracle_tf(c)).abs() <= TOL,
                "trial {trial}: tf({c}) = {got}"
            );
            checks += 1;
        }
        let df = rng.random_range(1..=n_docs);
        let got = idf::<f64>(n_docs, df).map_err(|e| e.to_string())?;
        let want = (n_docs as f64 / df as f64).ln() / std::f64::consts::LN_10;
        ensure!(
            (got - want).abs() <= TOL,
            "trial {trial}: idf({n_docs}, {df}) = {got}, oracle {want}"
        );
        ensure!(
            idf::<f64>(n_docs, 0).is_err() && idf::<f64>(n_docs, n_docs + 1).is_err(),
            "idf domain"
        );
        checks += 1;

        for term in &query_vocab {
            let got = corpus.idf::<f64>(term);
            let want = oracle_idf(&docs, term);
            ensure!(
                (got - want).abs() <= TOL,
                "trial {trial}: corpus idf({term}) = {got}, oracle {want}"
            );
            checks += 1;
        }
        for doc in &docs {
            let d_counts = as_counts(doc);
            let got = corpus.tfidf_score::<f64>(&q_counts, &d_counts);
            let want = oracle_tfidf(&docs, &query, doc);
            ensure!(
                (got - want).abs() <= TOL,
                "trial {trial}: tfidf {got} vs oracle {want}"
            );
            let got = cosine(&q_weights, &corpus.weights::<f64>(&d_counts));
            let want = oracle_cosine(&docs, &query, doc);
            ensure!(
                (got - want).abs() <= TOL,
                "trial {trial}: cosine {got} vs oracle {want}"
            );
            checks += 2;
        }

        let (a, b) = (random_set(&mut rng), random_set(&mut rng));
        let (sa, sb): (BTreeSet<u32>, BTreeSet<u32>) =
            (a.iter().copied().collect(), b.iter().copied().collect());
        for metric in SetMetric::ALL {
            let got = set_similarity::<f64, u32>(metric, &sa, &sb).ok();
            let want = oracle_set(metric, &a, &b);
            match (got, want) {
                (Some(g), Some(w)) => ensure!(
                    (g - w).abs() <= TOL,
                    "trial {trial}: {metric} {g} vs oracle {w}"
                ),
                (None, None) => {}
                _ => {
                    return Err(format!(
                        "trial {trial}: {metric} definedness differs: {got:?} vs {want:?}"
                    ))
                }
            }
            checks += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(10),
        "took {elapsed:?}, limit 10 s"
    );
    Ok(format!("1000 instances, {checks} comparisons within 1e-9"))
}

fn f_measure_arithmetic() -> Outcome {
    let detection = f_measure::<f64>(0.91, 0.77);
    let matching = f_measure::<f64>(0.83, 0.83);
    let combined = f_measure::<f64>(0.76, 0.64);
    ensure!(
        (0.832..=0.842).contains(&detection),
        "F(0.91, 0.77) = {detection}"
    );
    ensure!(matching == 0.83, "F(0.83, 0.83) = {matching}");
    ensure!(
        (0.692..=0.700).contains(&combined),
        "F(0.76, 0.64) = {combined}"
    );
    Ok(format!("{detection:.4} / {matching} / {combined:.4}"))
}

const DICTIONARY_TITLES: [&str; 14] = [
    "Drug Abuse Warning Network (DAWN), 2008",
    "New York Police Department (NYPD) Stop, Question, and Frisk Database, 2006",
    "euandi (Experteninterviews) - Reduzierte Version",
    "Kumulierte Allbus/GGSS 1980-2012",
    "SFB580-B2 Teilprojekt Jena",
    "Historische Volkszählung A*CENSUS",
    "Los Angeles Family and Neighborhood Survey (L.A.FANS)",
    "Projekt aDvANCE 2012",
    "GBF/DIME Datenbasis",
    "NHM&E Abschlussbericht",
    "Singularisierungsstudie 1995",
    "Survey of Hunting 2001",
    "Freedom Poll 2004",
    "Czech Exit Poll 1996",
];

fn dictionary_rules() -> Outcome {
    let titles: Vec<String> = DICTIONARY_TITLES.iter().map(|t| t.to_string()).collect();
    let dois: Vec<String> = (0..titles.len())
        .map(|i| format!("10.9999/dict.{i}"))
        .collect();
    let dict = build_dictionary(
        titles.iter().zip(&dois).map(|(t, d)| Title::new(d, t)),
        Wordlists::bundled(),
        FeatureDictionary::with_bundled_base_terms(),
    );
    let abbreviations: BTreeSet<&str> = dict.abbreviations().map(|f| f.text.as_str()).collect();
    let phrases: BTreeSet<&str> = dict.phrases().map(|f| f.text.as_str()).collect();
    let want_abbreviations: BTreeSet<&str> = [
        "A*CENSUS",
        "DAWN",
        "GBF/DIME",
        "L.A.FANS",
        "NHM&E",
        "NYPD",
        "SFB580-B2",
        "aDvANCE",
        "euandi",
    ]
    .into();
    let want_phrases: BTreeSet<&str> = [
        "Exit Poll",
        "Experteninterviews",
        "Freedom Poll",
        "Neighborhood Survey",
        "Singularisierungsstudie",
        "Survey of Hunting",
    ]
    .into();
    ensure!(
        abbreviations == want_abbreviations,
        "abbreviations {abbreviations:?}"
    );
    ensure!(phrases == want_phrases, "phrases {phrases:?}");

    let pruned = dict.apply_false_positives([("NYPD", FeatureKind::Abbreviation)]);
    let nypd = FeatureKey::new(FeatureKind::Abbreviation, "NYPD");
    ensure!(
        pruned.get(&nypd).is_none(),
        "NYPD still live after FP addition"
    );
    ensure!(
        pruned
            .false_positives(FeatureKind::Abbreviation)
            .contains("NYPD"),
        "NYPD not on the FP list"
    );
    ensure!(
        pruned.abbreviations().count() == 8,
        "FP addition removed more than NYPD"
    );
    let nypd_title = DatasetRecord::new("10.9999/nypd", DICTIONARY_TITLES[1]);
    let rebuilt = build_dictionary(
        [Title::from(&nypd_title)],
        Wordlists::bundled(),
        pruned.clone(),
    );
    ensure!(rebuilt.get(&nypd).is_none(), "rebuild re-admitted NYPD");
    Ok(format!(
        "{} abbreviations, {} phrases, NYPD removable",
        abbreviations.len(),
        phrases.len()
    ))
}

fn year_boost_heuristic() -> Outcome {
    let mut text = String::new();
    for i in 0..8 {
        text.push_str(&format!("Wave {i} of the 2014 fieldwork went smoothly. "));
    }
    text.push_str("This study compares Allbus respondents. Allbus weights were applied.");
    let article = ArticleText::new("boost", text).map_err(|e| e.to_string())?;
    let registry = RegistryIndex::from_records([
        DatasetRecord::new("10.4232/study2000", "Study Allbus 2000"),
        DatasetRecord::new("10.4232/allbus2014", "Allbus 2014"),
    ]);
    let feature = Feature::new("Allbus", FeatureKind::Abbreviation);
    let context = ArticleContext::new(&article);
    let corpus = FeatureCorpus::new(&context, &registry, &feature);
    let segment = "study allbus 2014";
    ensure!(
        corpus.corpus.df("2014") > corpus.corpus.df("study"),
        "fixture does not make 2014 frequent and study rare"
    );

    let mut unboosted = corpus.cosines::<f64>(segment);
    unboosted.sort_by(|a, b| b.1.total_cmp(&a.1));
    ensure!(
        unboosted[0].0.title == "Study Allbus 2000",
        "unboosted winner is {:?}",
        unboosted[0].0.title
    );
    let neutral = DefaultRankerConfig {
        year_boost_factor: 1.0,
        ..Default::default()
    };
    let plain = corpus.rank(segment, &neutral);
    ensure!(
        plain[0].title == "Study Allbus 2000",
        "factor 1 winner is {:?}",
        plain[0].title
    );

    let config = DefaultRankerConfig::default();
    let boosted = corpus.rank(segment, &config);
    ensure!(
        boosted[0].title == "Allbus 2014",
        "boosted winner is {:?}",
        boosted[0].title
    );
    Ok(format!(
        "cosine {:.3} vs {:.3}; boosted {:.3} vs {:.3} at factor {}",
        unboosted[0].1,
        unboosted[1].1,
        boosted[0].score,
        boosted[1].score,
        config.year_boost_factor
    ))
}

// ---------------------------------------------------------------------------
// Synthetic corpus with planted references

const REGIONS: [&str; 8] = [
    "Bavaria",
    "Saxony",
    "Hesse",
    "Bremen",
    "Berlin",
    "Hamburg",
    "Thuringia",
    "Brandenburg",
];
const FILLER: [&str; 8] = [
    "The analysis follows a standard multilevel design.",
    "Respondents were weighted to match census margins.",
    "Missing values were imputed with chained equations.",
    "We discuss limitations at the end of the article.",
    "Results are robust to alternative specifications.",
    "Standard errors are clustered by municipality.",
    "Earlier work reached similar conclusions.",
    "The appendix lists all items used in the models.",
];

struct Planted {
    article_id: String,
    feature: String,
    doi: String,
}

struct Synthetic {
    features: Vec<String>,
    registry: RegistryIndex,
    articles: Vec<ArticleText>,
    planted: Vec<Planted>,
}

impl Synthetic {
    fn gold(&self) -> GoldStandard {
        let mut gold = GoldStandard::new();
        let mut acceptable: BTreeMap<(&str, &str), BTreeSet<&str>> = BTreeMap::new();
        for p in &self.planted {
            acceptable
                .entry((&p.article_id, &p.feature))
                .or_default()
                .insert(&p.doi);
        }
        for ((article, feature), dois) in acceptable {
            gold.insert(
                article,
                FeatureKey::new(FeatureKind::Abbreviation, feature),
                dois,
            );
        }
        for a in &self.articles {
            gold.insert_article(a.article_id.clone());
        }
        gold
    }

    fn dictionary(&self) -> FeatureDictionary {
        build_dictionary(
            self.registry.records().iter().map(Title::from),
            Wordlists::bundled(),
            FeatureDictionary::with_bundled_base_terms(),
        )
    }
}

fn feature_name(rng: &mut ChaCha8Rng, taken: &BTreeSet<String>) -> String {
    const LETTERS: &[u8] = b"BCDFGHJKLMNPQRSTVWXZ";
    loop {
        let len = rng.random_range(4..=5);
        let name: String = (0..len)
            .map(|_| *LETTERS.choose(rng).unwrap() as char)
            .collect();
        if !taken.contains(&name) && !Wordlists::bundled().is_known_word(&name) {
            return name;
        }
    }
}

/// 10 features with 6 titles each: three distinguished by year, three by
/// region. 10 articles cite 3 or 4 features each, one or two titles per
/// feature, with the discriminating year or region in the citing sentence.
fn synthetic(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let mut features = Vec::new();
    let mut records = Vec::new();
    // (doi, discriminating sentence) per feature
    let mut citations: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for _ in 0..10 {
        let f = feature_name(&mut rng, &taken);
        taken.insert(f.clone());
        let mut years: Vec<u16> = (1980..2021).collect();
        years.shuffle(&mut rng);
        let mut regions = REGIONS.to_vec();
        regions.shuffle(&mut rng);
        for (j, year) in years[..3].iter().enumerate() {
            let doi = format!("10.5555/{}.{j}", f.to_lowercase());
            records.push(DatasetRecord::new(&doi, format!("{f} Welle {year}")));
            let sentence = format!("We use the {f} data from {year} for the main models.");
            citations
                .entry(f.clone())
                .or_default()
                .push((doi, sentence));
        }
        for (j, region) in regions[..3].iter().enumerate() {
            let doi = format!("10.5555/{}.{}", f.to_lowercase(), j + 3);
            records.push(DatasetRecord::new(
                &doi,
                format!("{f} Regionaldaten {region}"),
            ));
            let sentence = format!("Additional estimates rely on the {f} records for {region}.");
            citations
                .entry(f.clone())
                .or_default()
                .push((doi, sentence));
        }
        features.push(f);
    }

    let mut articles = Vec::new();
    let mut planted = Vec::new();
    for a in 0..10 {
        let article_id = format!("art{a:02}");
        let mut sentences: Vec<String> = FILLER
            .choose_multiple(&mut rng, 4)
            .map(|s| s.to_string())
            .collect();
        let k = rng.random_range(3..=4);
        for f in features.choose_multiple(&mut rng, k) {
            let per_feature = rng.random_range(1..=2);
            for (doi, sentence) in citations[f].choose_multiple(&mut rng, per_feature) {
                sentences.push(sentence.clone());
                planted.push(Planted {
                    article_id: article_id.clone(),
                    feature: f.clone(),
                    doi: doi.clone(),
                });
            }
        }
        sentences.shuffle(&mut rng);
        articles
            .push(ArticleText::new(&article_id, sentences.join(" ")).expect("non-empty article"));
    }
    Synthetic {
        features,
        registry: RegistryIndex::from_records(records),
        articles,
        planted,
    }
}

fn detect_all(
    fixture: &Synthetic,
    dict: &FeatureDictionary,
) -> (DetectedFeatures, Vec<Vec<ReferenceCandidate>>) {
    let mut detected = DetectedFeatures::new();
    let mut all = Vec::new();
    for article in &fixture.articles {
        let refs = find_references(article, dict);
        let entry = detected.entry(article.article_id.clone()).or_default();
        entry.extend(refs.iter().map(|r| r.feature.key()));
        all.push(refs);
    }
    (detected, all)
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let fixture = synthetic(0x5eed_00e2e);
    ensure!(
        fixture.registry.len() == 60,
        "registry has {} titles",
        fixture.registry.len()
    );
    let gold = fixture.gold();
    let dict = fixture.dictionary();
    let live: BTreeSet<&str> = dict.abbreviations().map(|f| f.text.as_str()).collect();
    let wanted: BTreeSet<&str> = fixture.features.iter().map(String::as_str).collect();
    ensure!(
        live == wanted && dict.phrases().count() == 0,
        "dictionary {live:?} differs from planted features"
    );

    let (detected, refs) = detect_all(&fixture, &dict);
    let detection = evaluate_detection::<f64>(&detected, &gold).map_err(|e| e.to_string())?;
    ensure!(detection.f_measure == 1.0, "detection {detection:?}");
    ensure!(
        refs.iter().map(Vec::len).sum::<usize>() == fixture.planted.len(),
        "{} references for {} planted",
        refs.iter().map(Vec::len).sum::<usize>(),
        fixture.planted.len()
    );

    let config = DefaultRankerConfig::default();
    let mut suggestions = Vec::new();
    let mut rank_one = 0;
    for (article, refs) in fixture.articles.iter().zip(&refs) {
        for (r, ranked) in refs
            .iter()
            .zip(rank_article(refs, &fixture.registry, article, &config))
        {
            let acceptable = gold
                .acceptable(&article.article_id, &r.feature.key())
                .expect("gold feature");
            if ranked.first().is_some_and(|m| acceptable.contains(&m.doi)) {
                rank_one += 1;
            }
            suggestions.push(Suggestion {
                article_id: article.article_id.clone(),
                feature: r.feature.key(),
                dois: ranked.into_iter().map(|m| m.doi).collect(),
            });
        }
    }
    let matching = evaluate_matching_detected::<f64>(&detected, &suggestions, &gold)
        .map_err(|e| e.to_string())?;
    ensure!(
        matching.precision == 1.0 && matching.fp == 0,
        "top-5 hit rate {matching:?}"
    );

    let mut order = fixture.features.clone();
    order.sort();
    let removed: Vec<&str> = order.iter().take(2).map(String::as_str).collect();
    let pruned =
        dict.apply_false_positives(removed.iter().map(|f| (*f, FeatureKind::Abbreviation)));
    let gold_pairs: BTreeSet<(&str, &str)> = fixture
        .planted
        .iter()
        .map(|p| (p.article_id.as_str(), p.feature.as_str()))
        .collect();
    let kept = gold_pairs
        .iter()
        .filter(|(_, f)| !removed.contains(f))
        .count();
    let planted_recall = kept as f64 / gold_pairs.len() as f64;
    let (detected, _) = detect_all(&fixture, &pruned);
    let reduced = evaluate_detection::<f64>(&detected, &gold).map_err(|e| e.to_string())?;
    ensure!(
        (reduced.recall - planted_recall).abs() <= 0.01,
        "recall {} vs planted {planted_recall}",
        reduced.recall
    );
    ensure!(reduced.fp == 0, "pruning produced false positives");

    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(30),
        "took {elapsed:?}, limit 30 s"
    );
    Ok(format!(
        "F = {}, top-5 hit rate = {} ({rank_one}/{} at rank 1), recall {:.4} vs planted {planted_recall:.4}",
        detection.f_measure,
        matching.precision,
        suggestions.len(),
        reduced.recall
    ))
}

// ---------------------------------------------------------------------------

fn random_pipeline_input(rng: &mut ChaCha8Rng) -> (ArticleText, RegistryIndex, FeatureDictionary) {
    const NAMES: [&str; 5] = ["ALLBUS", "GESIS", "PIAAC", "SOEP", "ESS"];
    const WORDS: [&str; 8] = [
        "Welle",
        "Daten",
        "Panel",
        "Bavaria",
        "Saxony",
        "cumulated",
        "release",
        "Survey",
    ];
    let mut records = Vec::new();
    for i in 0..rng.random_range(0..40) {
        let name = NAMES.choose(rng).unwrap();
        let word = WORDS.choose(rng).unwrap();
        let year = rng.random_range(1990..2020);
        records.push(DatasetRecord::new(
            format!("10.7777/{i}"),
            format!("{name} {word} {year}"),
        ));
    }
    let mut sentences = Vec::new();
    for _ in 0..rng.random_range(1..12) {
        let words: Vec<String> = (0..rng.random_range(2..10))
            .map(|_| match rng.random_range(0..4) {
                0 => NAMES.choose(rng).unwrap().to_string(),
                1 => rng.random_range(1990..2020).to_string(),
                _ => WORDS.choose(rng).unwrap().to_lowercase(),
            })
            .collect();
        let mut s = words.join(" ");
        s[..1].make_ascii_uppercase();
        sentences.push(format!("{s}."));
    }
    let mut dict = FeatureDictionary::with_bundled_base_terms();
    for name in NAMES.choose_multiple(rng, 3) {
        dict.insert(Feature::new(*name, FeatureKind::Abbreviation));
    }
    let article = ArticleText::new("rand", sentences.join(" ")).expect("non-empty");
    (article, RegistryIndex::from_records(records), dict)
}

fn workflow_cardinality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0ca7);
    let config = DefaultRankerConfig::default();
    let (mut references, mut groups_seen, mut truncated) = (0usize, 0usize, 0usize);
    for trial in 0..300 {
        let (article, registry, dict) = random_pipeline_input(&mut rng);
        let refs = find_references(&article, &dict);
        let ranked: Vec<Vec<RankedMatch>> = rank_article(&refs, &registry, &article, &config);
        ensure!(
            ranked.iter().all(|l| l.len() <= 5),
            "trial {trial}: a reference list exceeds 5"
        );
        let groups: Vec<FeatureGroup> =
            aggregate_per_feature(refs.iter().zip(ranked.iter().map(Vec::as_slice)), 6);
        for g in &groups {
            ensure!(
                g.matches.len() <= 6,
                "trial {trial}: a feature list exceeds 6"
            );
            let members: Vec<usize> = (0..refs.len())
                .filter(|&i| refs[i].feature.key() == g.feature.key())
                .collect();
            ensure!(
                g.references == members,
                "trial {trial}: group members {:?} vs {members:?}",
                g.references
            );
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for &i in &members {
                for m in &ranked[i] {
                    *counts.entry(m.doi.as_str()).or_default() += 1;
                }
            }
            for m in &g.matches {
                ensure!(
                    m.score == counts[m.doi.as_str()] as f64,
                    "trial {trial}: count of {} is {} vs brute force {}",
                    m.doi,
                    m.score,
                    counts[m.doi.as_str()]
                );
            }
            let kept: BTreeSet<&str> = g.matches.iter().map(|m| m.doi.as_str()).collect();
            let floor = g
                .matches
                .iter()
                .map(|m| m.score as usize)
                .min()
                .unwrap_or(0);
            ensure!(
                counts.iter().all(|(d, c)| kept.contains(d) || *c <= floor),
                "trial {trial}: a dropped DOI outnumbers a kept one"
            );
            ensure!(
                kept.len() == counts.len().min(6),
                "trial {trial}: group kept {} of {}",
                kept.len(),
                counts.len()
            );
            truncated += usize::from(counts.len() > 6);
        }
        references += refs.len();
        groups_seen += groups.len();
    }
    Ok(format!(
        "300 inputs, {references} references, {groups_seen} groups ({truncated} truncated to 6)"
    ))
}

fn evaluation_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0e7a);
    let names = ["A", "B", "C", "D", "E", "F"];
    let dois: Vec<String> = (0..8).map(|i| format!("10.1/{i}")).collect();
    for trial in 0..1000 {
        let mut gold = GoldStandard::new();
        let mut detected = DetectedFeatures::new();
        let mut suggestions = Vec::new();
        for a in 0..rng.random_range(1..=4) {
            let article = format!("a{a}");
            gold.insert_article(article.clone());
            let k = rng.random_range(0..=4);
            for name in names.choose_multiple(&mut rng, k) {
                let n = rng.random_range(1..=3);
                let acceptable: Vec<&String> = dois.choose_multiple(&mut rng, n).collect();
                gold.insert(
                    &article,
                    FeatureKey::new(FeatureKind::Abbreviation, name),
                    acceptable,
                );
            }
            let k = rng.random_range(0..=5);
            for name in names.choose_multiple(&mut rng, k) {
                let key = FeatureKey::new(FeatureKind::Abbreviation, name);
                detected
                    .entry(article.clone())
                    .or_default()
                    .insert(key.clone());
                for _ in 0..rng.random_range(0..=3) {
                    let n = rng.random_range(0..=5);
                    suggestions.push(Suggestion {
                        article_id: article.clone(),
                        feature: key.clone(),
                        dois: dois.choose_multiple(&mut rng, n).cloned().collect(),
                    });
                }
            }
        }
        let reports = [
            evaluate_matching::<f64>(&suggestions, &gold),
            evaluate_matching_detected::<f64>(&detected, &suggestions, &gold)
                .map_err(|e| e.to_string())?,
        ];
        for r in reports {
            ensure!(r.fp == r.fn_, "trial {trial}: fp {} != fn {}", r.fp, r.fn_);
            ensure!(
                r.precision == r.recall,
                "trial {trial}: precision {} != recall {}",
                r.precision,
                r.recall
            );
            ensure!(
                r.precision_undefined == r.recall_undefined,
                "trial {trial}: undefined flags differ"
            );
        }
    }
    Ok("1000 randomized trials, fp = fn and precision = recall".into())
}

// ---------------------------------------------------------------------------

fn sample_linkset() -> LinkSet {
    let feature = Feature::new("ALLBUS", FeatureKind::Abbreviation);
    let m = |doi: &str, title: &str, count: f64| RankedMatch {
        doi: doi.into(),
        title: title.into(),
        score: count,
        rank: 0,
    };
    let groups = vec![
        FeatureGroup {
            feature: feature.clone(),
            references: vec![0, 2, 5],
            matches: vec![
                m(
                    "10.4232/1.12796",
                    "Allgemeine Bevölkerungsumfrage der Sozialwissenschaften ALLBUS 2016",
                    3.0,
                ),
                m(
                    "10.4232/1.12209",
                    "ALLBUS 2014 \"Kumulation\"\twith tab",
                    2.0,
                ),
                m(
                    "10.1002/(SICI)1097-4571<2>",
                    "Title with \\ backslash\nand newline",
                    1.0,
                ),
            ],
        },
        FeatureGroup {
            feature: Feature::new("Exit Poll", FeatureKind::Phrase),
            references: vec![1],
            matches: vec![m(
                "10.5555/exit poll",
                "Czech Exit Poll 1996 – Ergebnisse",
                1.0,
            )],
        },
    ];
    let confirmations = [Confirmation {
        doi: "10.4232/1.12209".into(),
        title: "ALLBUS 2014".into(),
        feature,
    }];
    let mut meta = ArticleMetadata::new("ssoar-1", "urn:nbn:de:0168-ssoar-12345");
    meta.title = Some("Soziale Ungleichheit – eine Übersicht".into());
    meta.journal = Some("mda".into());
    build_linkset(meta, &groups, &confirmations)
}

fn parse_ntriples(text: &str) -> Result<BTreeSet<String>, String> {
    let mut out = BTreeSet::new();
    NTriplesParser::new(text.as_bytes())
        .parse_all(&mut |t| -> Result<(), TurtleError> {
            out.insert(t.to_string());
            Ok(())
        })
        .map_err(|e| format!("N-Triples: {e}"))?;
    Ok(out)
}

fn parse_turtle(text: &str) -> Result<BTreeSet<String>, String> {
    let mut out = BTreeSet::new();
    TurtleParser::new(text.as_bytes(), None)
        .parse_all(&mut |t| -> Result<(), TurtleError> {
            out.insert(t.to_string());
            Ok(())
        })
        .map_err(|e| format!("Turtle: {e}"))?;
    Ok(out)
}

fn export_criterion() -> Outcome {
    let linkset = sample_linkset();
    let nt = export_ntriples(&linkset).map_err(|e| e.to_string())?;
    let triples = parse_ntriples(&nt)?;
    let preamble = 4;
    ensure!(
        triples.len() == 3 * linkset.links.len() + preamble && nt.lines().count() == triples.len(),
        "{} triples for {} links",
        triples.len(),
        linkset.links.len()
    );
    let ttl = export_turtle(&linkset).map_err(|e| e.to_string())?;
    ensure!(
        parse_turtle(&ttl)? == triples,
        "Turtle and N-Triples graphs differ"
    );

    let json = export_json(&linkset).map_err(|e| e.to_string())?;
    let back = import_json(&json).map_err(|e| e.to_string())?;
    ensure!(back == linkset, "JSON round trip changed the link set");
    ensure!(
        json.contains("Allgemeine Bevölkerungsumfrage"),
        "UTF-8 title not preserved byte-exactly"
    );

    let again = sample_linkset();
    ensure!(
        export_ntriples(&again).unwrap() == nt
            && export_turtle(&again).unwrap() == ttl
            && export_json(&again).unwrap() == json,
        "export is not byte-deterministic"
    );
    Ok(format!(
        "{} triples parsed, Turtle graph equal, JSON round trip exact",
        triples.len()
    ))
}

// ---------------------------------------------------------------------------

fn service_criterion() -> Outcome {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(service_checks())
}

async fn call(
    app: &axum::Router,
    method: &str,
    uri: &str,
    body: Option<serde_json::Value>,
) -> (u16, Vec<u8>) {
    use http_body_util::BodyExt;
    use tower::ServiceExt;
    let mut req = axum::http::Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            axum::body::Body::from(v.to_string())
        }
        None => axum::body::Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status().as_u16();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

fn data(bytes: &[u8]) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(bytes).expect("JSON envelope");
    assert_eq!(v["schema_version"], 1);
    v["data"].clone()
}

async fn service_checks() -> Outcome {
    use serde_json::json;
    let fixture = synthetic(0x5eed_05e7);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let state = dataref_service::AppState::open(
        dir.path(),
        fixture.registry.clone(),
        fixture.dictionary(),
        DefaultRankerConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let app = dataref_service::build_router(Arc::new(state));
    let article = &fixture.articles[0];
    let planted: Vec<&Planted> = fixture
        .planted
        .iter()
        .filter(|p| p.article_id == article.article_id)
        .collect();

    let (s, _) = call(
        &app,
        "POST",
        "/articles",
        Some(json!({"article_id": article.article_id, "text": article.fulltext, "pid": "10.1234/acc"})),
    )
    .await;
    ensure!(s == 201, "upload returned {s}");
    let (s, body) = call(
        &app,
        "GET",
        &format!("/articles/{}/references", article.article_id),
        None,
    )
    .await;
    ensure!(s == 200, "references returned {s}");
    let refs = data(&body)["references"].as_array().unwrap().clone();
    ensure!(
        refs.len() == planted.len(),
        "{} references for {} planted",
        refs.len(),
        planted.len()
    );
    for n in 0..refs.len() {
        let (s, body) = call(
            &app,
            "GET",
            &format!("/articles/{}/references/{n}/candidates", article.article_id),
            None,
        )
        .await;
        let candidates = data(&body)["candidates"].as_array().unwrap().len();
        ensure!(
            s == 200 && (1..=5).contains(&candidates),
            "reference {n}: {s}, {candidates} candidates"
        );
    }
    let (s, body) = call(
        &app,
        "GET",
        &format!("/articles/{}/features", article.article_id),
        None,
    )
    .await;
    let groups = data(&body)["features"].as_array().unwrap().clone();
    ensure!(
        s == 200
            && groups
                .iter()
                .all(|g| g["matches"].as_array().unwrap().len() <= 6),
        "features endpoint"
    );

    let (s, body) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"article_id": article.article_id, "workflow": "per_reference"})),
    )
    .await;
    ensure!(s == 201, "session creation returned {s}");
    let session = data(&body);
    let id = session["session_id"].as_str().unwrap().to_owned();
    let doi = session["items"][0]["candidates"][0]["doi"].clone();
    let decide = format!("/sessions/{id}/decisions");
    let (s1, _) = call(&app, "POST", &decide, Some(json!({"item": 0, "doi": doi}))).await;
    let (s2, _) = call(
        &app,
        "POST",
        &decide,
        Some(json!({"item": 0, "reject": true})),
    )
    .await;
    let (s3, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/undo"),
        Some(json!({"item": 0})),
    )
    .await;
    let (s4, _) = call(&app, "POST", &decide, Some(json!({"item": 0, "doi": doi}))).await;
    ensure!(
        (s1, s2, s3, s4) == (200, 409, 200, 200),
        "decision statuses {:?}",
        (s1, s2, s3, s4)
    );

    let (s, body) = call(
        &app,
        "GET",
        &format!("/articles/{}/export?format=nt", article.article_id),
        None,
    )
    .await;
    ensure!(s == 200, "export returned {s}");
    let nt = String::from_utf8(body).map_err(|e| e.to_string())?;
    let triples = parse_ntriples(&nt)?;
    ensure!(
        triples.iter().any(|t| t.contains("\"confirmed\"")),
        "confirmed link missing from export"
    );

    let dropped = &planted[0].feature;
    let (s, _) = call(
        &app,
        "POST",
        "/dictionary/false-positives",
        Some(json!({"text": dropped, "kind": "abbreviation"})),
    )
    .await;
    ensure!(s == 200, "false-positive addition returned {s}");
    let (_, body) = call(
        &app,
        "GET",
        &format!("/articles/{}/references", article.article_id),
        None,
    )
    .await;
    let after = data(&body)["references"].as_array().unwrap().clone();
    ensure!(
        after
            .iter()
            .all(|r| r["feature"]["text"] != dropped.as_str()),
        "{dropped} still detected after FP addition"
    );

    let (s404, _) = call(&app, "GET", "/articles/missing/features", None).await;
    let (s400, _) = call(&app, "POST", "/sessions", Some(json!({"article_id": 3}))).await;
    ensure!(
        (s404, s400) == (404, 400),
        "error statuses {:?}",
        (s404, s400)
    );
    Ok(format!(
        "{} references ranked, {} triples exported",
        refs.len(),
        triples.len()
    ))
}
