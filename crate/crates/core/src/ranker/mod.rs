//! Candidate ranking: tf-idf weighting, similarity measures, the year
//! heuristic and per-feature aggregation.

mod config;
mod ranking;
mod similarity;
mod weighting;

pub use config::{ConfigError, RankerConfig};
pub use ranking::{
    aggregate_per_feature, rank_article, rank_candidates, year_boost, ArticleContext,
    FeatureCorpus, FeatureGroup, RankedMatch,
};
pub use similarity::{cosine, set_similarity, SetMetric, SimilarityError};
pub use weighting::{
    count_terms, idf, ranking_terms, tf_weight, RankingCorpus, TermCounts, WeightError,
    WeightVector,
};
