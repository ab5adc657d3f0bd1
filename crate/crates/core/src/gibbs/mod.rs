//! Block Gibbs sampler.

pub mod chain;
pub mod conditionals;
pub mod counts;
pub mod states;

pub use chain::{run_chain, run_chain_with, ChainState, FixedTopics, GibbsConfig, Sample, Sampler};
pub use conditionals::{sample_beta, sample_omega, sample_phi, sample_transitions, sample_words};
pub use counts::{collect_counts, SuffStats};
pub use states::{
    backward_messages, backward_messages_from_table, loglik_table, sample_states, slice_posteriors,
    LogLikTable, Messages, Path, PreparedSeries,
};
