//! Chain orchestration: initialization from the generative prior and the
//! fixed update order of one sweep.

use rand::RngCore;

use crate::dist::{self, Stream};
use crate::error::{Error, Result};
use crate::gibbs::conditionals::{
    sample_beta, sample_omega, sample_phi, sample_transitions, sample_words,
};
use crate::gibbs::counts::{collect_counts, SuffStats};
use crate::gibbs::states::{
    backward_messages_from_table, complete_loglik, loglik_table, sample_states, PreparedSeries,
};
use crate::model::{
    self, simulate_latent, ArWord, Corpus, Hyperparameters, ModelParams, SeriesState,
};
use crate::observation::MniwPrior;
use crate::par::{self, Execution};

/// Topic descriptions held fixed while only transitions and states are
/// resampled.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTopics {
    pub beta: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub words: Vec<ArWord>,
}

impl From<&ModelParams> for FixedTopics {
    fn from(p: &ModelParams) -> Self {
        Self {
            beta: p.beta.clone(),
            phi: p.phi.clone(),
            words: p.words.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub n_iter: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub n_chains: u64,
    pub seed: u64,
    pub supervised: bool,
    pub fixed_topics: Option<FixedTopics>,
    pub execution: Execution,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 2000,
            burn_in: 1000,
            thin: 1,
            n_chains: 1,
            seed: 0,
            supervised: false,
            fixed_topics: None,
            execution: Execution::default(),
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.thin == 0 || self.n_chains == 0 {
            return Err(Error::InvalidParameter(
                "n_iter, thin and n_chains must be positive".into(),
            ));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be below n_iter {}",
                self.burn_in, self.n_iter
            )));
        }
        Ok(())
    }

    /// Whether the sample produced by sweep number `iteration` (1-based) is kept.
    pub fn emits(&self, iteration: u64) -> bool {
        iteration > self.burn_in && (iteration - self.burn_in) % self.thin == 0
    }
}

/// Full mutable state of one chain between sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub chain: u64,
    /// Number of completed sweeps.
    pub iteration: u64,
    pub params: ModelParams,
    pub states: Vec<SeriesState>,
    pub stats: SuffStats,
    /// Complete-data log likelihood of the last sampled states.
    pub log_joint: f64,
    pub rng: Stream,
}

/// One archived draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iteration: u64,
    pub log_joint: f64,
    pub params: ModelParams,
    pub states: Vec<SeriesState>,
}

impl From<&ChainState> for Sample {
    fn from(c: &ChainState) -> Self {
        Self {
            iteration: c.iteration,
            log_joint: c.log_joint,
            params: c.params.clone(),
            states: c.states.clone(),
        }
    }
}

/// Data and settings shared by every chain of one run.
pub struct Sampler {
    series: Vec<PreparedSeries>,
    hyper: Hyperparameters,
    prior: MniwPrior,
    config: GibbsConfig,
    labels: Vec<Option<Vec<bool>>>,
    dim: usize,
}

impl Sampler {
    pub fn new(corpus: &Corpus, hyper: &Hyperparameters, config: &GibbsConfig) -> Result<Self> {
        hyper.validate()?;
        config.validate()?;
        corpus.validate(hyper.ar_order)?;
        let dim = corpus.dim().unwrap_or(1);
        let prior = hyper.prior_for(dim)?;
        let series = corpus
            .residuals
            .iter()
            .map(|r| PreparedSeries::new(r, hyper.ar_order))
            .collect::<Result<Vec<_>>>()?;
        let labels = if config.supervised {
            for mask in corpus.labels.iter().flatten() {
                model::validate_mask(mask, hyper.n_topics)?;
            }
            corpus.labels.clone()
        } else {
            vec![None; corpus.len()]
        };
        if let Some(fixed) = &config.fixed_topics {
            if fixed.beta.len() != hyper.n_words
                || fixed.words.len() != hyper.n_words
                || fixed.phi.len() != hyper.n_topics
            {
                return Err(Error::Shape(format!(
                    "fixed topics have {} weights, {} words, {} topics; run expects L={} and D={}",
                    fixed.beta.len(),
                    fixed.words.len(),
                    fixed.phi.len(),
                    hyper.n_words,
                    hyper.n_topics
                )));
            }
            for w in &fixed.words {
                w.validate(dim, hyper.ar_order)?;
            }
        }
        Ok(Self {
            series,
            hyper: hyper.clone(),
            prior,
            config: config.clone(),
            labels,
            dim,
        })
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.config
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.series.iter().map(PreparedSeries::len).collect()
    }

    /// Prior-drawn parameters and latent paths drawn from the generative
    /// process (not informed by the data).
    pub fn init(&self, chain: u64) -> Result<ChainState> {
        let mut rng = dist::stream(self.config.seed, &[chain]);
        let mut params = model::sample_prior_params(&self.hyper, self.dim, &mut rng)?;
        if let Some(fixed) = &self.config.fixed_topics {
            params.beta = fixed.beta.clone();
            params.phi = fixed.phi.clone();
            params.words = fixed.words.clone();
        }
        let mut states = Vec::with_capacity(self.series.len());
        for (ser, mask) in self.series.iter().zip(&self.labels) {
            let pi_n = model::sample_series_transitions(
                &params.pi_g,
                self.hyper.alpha_l,
                None,
                mask.as_deref(),
                &mut rng,
            )?;
            let (d, z, o) = simulate_latent(&params, &pi_n, ser.len(), &mut rng);
            states.push(SeriesState {
                d,
                z,
                o,
                pi_n,
                labels: mask.clone(),
            });
        }
        let stats = collect_counts(&states, self.hyper.n_topics, self.hyper.n_words);
        Ok(ChainState {
            chain,
            iteration: 0,
            params,
            states,
            stats,
            log_joint: f64::NAN,
            rng,
        })
    }

    /// One sweep: states, counts, beta, phi, omega, words, transitions.
    pub fn step(&self, chain: &mut ChainState) -> Result<()> {
        let base = chain.rng.next_u64();
        let params = &chain.params;
        let states = &chain.states;
        let paths = par::map_indexed(&self.series, self.config.execution, |i, ser| {
            let tag = |e: Error| match e {
                Error::Numerical { slice, .. } => Error::Numerical { series: i, slice },
                other => other,
            };
            let pi_n = &states[i].pi_n;
            let table = loglik_table(ser, params).map_err(tag)?;
            let msgs = backward_messages_from_table(&table, params, pi_n).map_err(tag)?;
            let mut rng = dist::stream(base, &[i as u64]);
            let path = sample_states(&table, params, pi_n, &msgs, &mut rng).map_err(tag)?;
            let lj = complete_loglik(&table, params, pi_n, &path.d, &path.z, &path.o);
            Ok((path, lj))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let mut log_joint = 0.0;
        for (st, (path, lj)) in chain.states.iter_mut().zip(paths) {
            st.d = path.d;
            st.z = path.z;
            st.o = path.o;
            log_joint += lj;
        }
        let stats = collect_counts(&chain.states, self.hyper.n_topics, self.hyper.n_words);
        let rng = &mut chain.rng;
        if self.config.fixed_topics.is_none() {
            let beta = sample_beta(&stats, &self.hyper, rng)?;
            let phi = sample_phi(&beta, &stats, &self.hyper, rng)?;
            let omega = sample_omega(&stats, &self.hyper, rng)?;
            let seed = rng.next_u64();
            let words = sample_words(
                &self.series,
                &chain.states,
                &self.prior,
                &omega,
                seed,
                self.config.execution,
            )?;
            chain.params.beta = beta;
            chain.params.phi = phi;
            chain.params.words = words;
        }
        let (pi_g, series_pi) = sample_transitions(&stats, &self.hyper, &self.labels, rng)?;
        chain.params.pi_g = pi_g;
        for (st, pi) in chain.states.iter_mut().zip(series_pi) {
            st.pi_n = pi;
        }
        chain.stats = stats;
        chain.log_joint = log_joint;
        chain.iteration += 1;
        Ok(())
    }
}

/// Runs one chain to completion, handing every kept state to `on_sample`.
pub fn run_chain_with<F>(
    corpus: &Corpus,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    chain: u64,
    mut on_sample: F,
) -> Result<()>
where
    F: FnMut(&ChainState) -> Result<()>,
{
    let sampler = Sampler::new(corpus, hyper, config)?;
    let mut state = sampler.init(chain)?;
    while state.iteration < config.n_iter {
        sampler.step(&mut state)?;
        if config.emits(state.iteration) {
            on_sample(&state)?;
        }
    }
    Ok(())
}

pub fn run_chain(
    corpus: &Corpus,
    hyper: &Hyperparameters,
    config: &GibbsConfig,
    chain: u64,
) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    run_chain_with(corpus, hyper, config, chain, |s| {
        out.push(Sample::from(s));
        Ok(())
    })?;
    Ok(out)
}
