//! Time series topic model: series switch between latent topics, each topic
//! is a distribution over a shared vocabulary of autoregressive regimes
//! ("words") with geometric durations, and everything is fit by block Gibbs
//! sampling under a weak-limit hierarchical Dirichlet process prior.

pub mod data_io;
pub mod dist;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod model;
pub mod observation;
pub mod par;
pub mod session;

pub use error::{Error, Result};
pub use model::{
    ArWord, Corpus, Hyperparameters, ModelParams, SeriesState, TimeSeries, Transitions,
};
pub use par::Execution;
