//! Evaluation quantities computed from archived chains.

pub mod fft;
pub mod matching;
pub mod mi;
pub mod posterior;
pub mod rank;

pub use fft::{fft_feature_matrix, fft_features, DEFAULT_PERIODS};
pub use matching::{confusion, hungarian, match_topics, match_words, pearson};
pub use mi::{pool_counts, word_topic_mi, WordTopicMi};
pub use posterior::{
    smooth_topic_posterior, topic_proportion_features, word_proportion_features, TopicCurve,
    DEFAULT_SMOOTH_WINDOW,
};
pub use rank::{healthy_ranking, rank_score, HealthRanking, RankInput, RankScore};
