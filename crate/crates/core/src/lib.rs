//! Detection of dataset references in article full texts and linking of
//! each reference to records of a dataset registry.
//!
//! The pipeline runs [`registry`] → [`dictionary`] → [`detector`] →
//! [`ranker`], with [`evaluator`] scoring the output against a gold standard
//! and [`exporter`] serializing confirmed and candidate links.

pub mod detector;
pub mod dictionary;
pub mod evaluator;
pub mod exporter;
pub mod ranker;
pub mod registry;
pub mod scalar;
pub mod text;

pub use detector::{
    find_references, match_feature, split_sentences, ArticleText, ReferenceCandidate, Span,
};
pub use dictionary::{build_dictionary, Feature, FeatureDictionary, FeatureKey, FeatureKind};
pub use evaluator::{f_measure, GoldStandard, Phase};
pub use exporter::{
    build_linkset, export_json, export_ntriples, export_turtle, import_json, LinkSet,
};
pub use ranker::{aggregate_per_feature, rank_article, rank_candidates, year_boost, RankerConfig};
pub use registry::{load_snapshot, DatasetRecord, RegistryIndex};
pub use scalar::Scalar;

/// Default scalar of the concrete aliases.
pub type Score = f64;
pub type RankedMatch = ranker::RankedMatch<Score>;
pub type FeatureGroup = ranker::FeatureGroup<Score>;
pub type DefaultRankerConfig = ranker::RankerConfig<Score>;
pub type EvaluationReport = evaluator::EvaluationReport<Score>;
