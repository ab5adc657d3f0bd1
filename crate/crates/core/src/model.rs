//! Domain types for the time series topic model and forward simulation of
//! synthetic corpora from known parameters.
//!
//! Topic and word indices are zero-based throughout. Transition matrices have
//! `D + 1` rows: row 0 is the distribution of the first topic of a series and
//! row `i + 1` holds the transitions out of topic `i`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::observation::{self, Mniw, MniwPrior, WordLikelihood};

/// Fixed model hyperparameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Concentration of the global word weights.
    pub gamma: f64,
    /// Concentration of each topic around the global weights.
    pub eta: f64,
    /// Total mass of the global topic-transition prior row.
    pub alpha_g: f64,
    /// Concentration of series transitions around the global ones.
    pub alpha_l: f64,
    /// Extra self-transition mass on the global transition rows.
    pub kappa: f64,
    /// Symmetric Beta concentration for word continuation probabilities.
    pub rho: f64,
    /// Weak-limit truncation (vocabulary size).
    pub n_words: usize,
    pub n_topics: usize,
    pub ar_order: usize,
    /// Defaults to [`Mniw::weak_default`] when absent.
    pub mniw_prior: Option<MniwPrior>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            gamma: 10.0,
            eta: 10.0,
            alpha_g: 10.0,
            alpha_l: 10.0,
            kappa: 25.0,
            rho: 20.0,
            n_words: 15,
            n_topics: 4,
            ar_order: 1,
            mniw_prior: None,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("alpha_g", self.alpha_g),
            ("alpha_l", self.alpha_l),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be nonnegative, got {}",
                self.kappa
            )));
        }
        for (name, v) in [
            ("n_words", self.n_words),
            ("n_topics", self.n_topics),
            ("ar_order", self.ar_order),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        Ok(())
    }

    /// The observation prior for `m`-dimensional series, validated.
    pub fn prior_for(&self, m: usize) -> Result<MniwPrior> {
        let prior = match &self.mniw_prior {
            Some(p) => p.clone(),
            None => Mniw::weak_default(m, self.ar_order),
        };
        prior.validate(m, self.ar_order)?;
        Ok(prior)
    }
}

/// One vocabulary entry: an AR(p) regime with a geometric duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ArWord {
    /// `m x (m * p)` coefficient matrix.
    pub coef: DMatrix<f64>,
    /// `m x m` noise covariance.
    pub noise_cov: DMatrix<f64>,
    /// Probability that the word continues for one more step; the mean word
    /// length is `1 / (1 - continuation)`.
    pub continuation: f64,
}

impl ArWord {
    pub fn dim(&self) -> usize {
        self.coef.nrows()
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        if self.coef.shape() != (m, m * p) || self.noise_cov.shape() != (m, m) {
            return Err(Error::Shape(format!(
                "word has coef {:?} and noise {:?}, expected ({m}, {}) and ({m}, {m})",
                self.coef.shape(),
                self.noise_cov.shape(),
                m * p
            )));
        }
        if !(self.continuation > 0.0 && self.continuation < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "continuation probability {} outside (0, 1)",
                self.continuation
            )));
        }
        if self.noise_cov.clone().cholesky().is_none() {
            return Err(Error::Decomposition(
                "noise covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Largest eigenvalue modulus of the companion matrix; below 1 exactly
    /// when the regime is stationary.
    pub fn spectral_radius(&self) -> f64 {
        let m = self.coef.nrows();
        let k = self.coef.ncols();
        let mut comp = DMatrix::zeros(k, k);
        comp.rows_mut(0, m).copy_from(&self.coef);
        for i in m..k {
            comp[(i, i - m)] = 1.0;
        }
        comp.complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Row-stochastic `(D + 1) x D` topic transition matrix, row 0 initial.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    n_topics: usize,
    data: Vec<f64>,
}

impl Transitions {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_topics = rows.first().map_or(0, |r| r.len());
        if n_topics == 0 || rows.len() != n_topics + 1 || rows.iter().any(|r| r.len() != n_topics) {
            return Err(Error::Shape(format!(
                "transition matrix must be (D + 1) x D, got {} rows",
                rows.len()
            )));
        }
        let t = Self {
            n_topics,
            data: rows.into_iter().flatten().collect(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn n_topics(&self) -> usize {
        self.n_topics
    }

    /// Row `r` of the full matrix (0 = initial distribution).
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_topics..(r + 1) * self.n_topics]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.n_topics..(r + 1) * self.n_topics]
    }

    pub fn initial(&self) -> &[f64] {
        self.row(0)
    }

    /// Transition probabilities out of topic `d`.
    pub fn from_topic(&self, d: usize) -> &[f64] {
        self.row(d + 1)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_topics)
    }

    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.rows().enumerate() {
            check_simplex(row)
                .map_err(|e| Error::InvalidParameter(format!("transition row {r}: {e}")))?;
        }
        Ok(())
    }
}

fn check_simplex(v: &[f64]) -> std::result::Result<(), String> {
    if v.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(format!("negative or non-finite entry in {v:?}"));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(format!("sums to {s}"));
    }
    Ok(())
}

/// Global state of one Gibbs sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub words: Vec<ArWord>,
    pub pi_g: Transitions,
}

impl ModelParams {
    pub fn n_topics(&self) -> usize {
        self.phi.len()
    }

    pub fn n_words(&self) -> usize {
        self.beta.len()
    }

    pub fn dim(&self) -> usize {
        self.words.first().map_or(0, ArWord::dim)
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        let l = self.beta.len();
        check_simplex(&self.beta).map_err(|e| Error::InvalidParameter(format!("beta {e}")))?;
        if self.words.len() != l {
            return Err(Error::Shape(format!(
                "{} words for {l} weights",
                self.words.len()
            )));
        }
        for (d, row) in self.phi.iter().enumerate() {
            if row.len() != l {
                return Err(Error::Shape(format!("phi[{d}] has length {}", row.len())));
            }
            check_simplex(row).map_err(|e| Error::InvalidParameter(format!("phi[{d}] {e}")))?;
        }
        if self.pi_g.n_topics() != self.phi.len() {
            return Err(Error::Shape("pi_g does not match topic count".into()));
        }
        self.pi_g.validate()?;
        for w in &self.words {
            w.validate(m, p)?;
        }
        Ok(())
    }
}

/// Latent trajectory of one series over its modeled steps `t = p..T`
/// (zero-based), plus the series transition matrix and optional label mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesState {
    pub d: Vec<usize>,
    pub z: Vec<usize>,
    /// `true` means the previous word continued.
    pub o: Vec<bool>,
    pub pi_n: Transitions,
    pub labels: Option<Vec<bool>>,
}

impl SeriesState {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Linear scan of the structural invariants.
    pub fn validate(&self, n_topics: usize, n_words: usize) -> Result<()> {
        let t = self.d.len();
        if self.z.len() != t || self.o.len() != t {
            return Err(Error::Shape("d, z, o lengths differ".into()));
        }
        if self.pi_n.n_topics() != n_topics {
            return Err(Error::Shape("pi_n does not match topic count".into()));
        }
        self.pi_n.validate()?;
        if let Some(mask) = &self.labels {
            validate_mask(mask, n_topics)?;
        }
        if t > 0 && self.o[0] {
            return Err(Error::InvalidParameter("o[0] must be a word start".into()));
        }
        for s in 0..t {
            if self.d[s] >= n_topics || self.z[s] >= n_words {
                return Err(Error::InvalidParameter(format!(
                    "index out of range at step {s}"
                )));
            }
            if let Some(mask) = &self.labels {
                if !mask[self.d[s]] {
                    return Err(Error::InvalidLabel(format!(
                        "step {s} visits masked topic {}",
                        self.d[s]
                    )));
                }
            }
            if s > 0 {
                let same_topic = self.d[s] == self.d[s - 1];
                if self.o[s] && (!same_topic || self.z[s] != self.z[s - 1]) {
                    return Err(Error::InvalidParameter(format!(
                        "continuation at step {s} changes topic or word"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn validate_mask(mask: &[bool], n_topics: usize) -> Result<()> {
    if mask.len() != n_topics {
        return Err(Error::InvalidLabel(format!(
            "mask has length {}, expected {n_topics}",
            mask.len()
        )));
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::InvalidLabel("mask has no permitted topic".into()));
    }
    Ok(())
}

/// A multichannel series stored row-major, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} values do not split into rows of {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("rows have unequal length".into()));
        }
        Self::new(dim.max(1), rows.concat())
    }

    pub fn univariate(values: Vec<f64>) -> Self {
        Self { dim: 1, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of one channel across time.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.dim)
            .copied()
            .collect()
    }
}

/// Observed series together with their preprocessed residuals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub ids: Vec<String>,
    pub series: Vec<TimeSeries>,
    /// What the model sees; equal to `series` until basal removal is applied.
    pub residuals: Vec<TimeSeries>,
    pub grades: Vec<Option<i64>>,
    pub labels: Vec<Option<Vec<bool>>>,
}

impl Corpus {
    pub fn from_series(series: Vec<TimeSeries>) -> Self {
        let n = series.len();
        Self {
            ids: (0..n).map(|i| format!("s{i}")).collect(),
            residuals: series.clone(),
            series,
            grades: vec![None; n],
            labels: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.series.first().map(TimeSeries::dim)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let n = self.series.len();
        if self.residuals.len() != n
            || self.ids.len() != n
            || self.grades.len() != n
            || self.labels.len() != n
        {
            return Err(Error::Shape("corpus columns have different lengths".into()));
        }
        let m = self.dim().unwrap_or(1);
        for (i, (s, r)) in self.series.iter().zip(&self.residuals).enumerate() {
            if s.dim() != m || r.dim() != m || s.len() != r.len() {
                return Err(Error::Shape(format!(
                    "series {i} does not match corpus dimension {m}"
                )));
            }
            if s.len() <= p {
                return Err(Error::SeriesTooShort {
                    len: s.len(),
                    required: p + 1,
                });
            }
        }
        Ok(())
    }
}

/// Draws a full parameter set from the weak-limit prior.
pub fn sample_prior_params<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    m: usize,
    rng: &mut R,
) -> Result<ModelParams> {
    hyper.validate()?;
    if m == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    let l = hyper.n_words;
    let d = hyper.n_topics;
    let beta = dist::dirichlet(&vec![hyper.gamma / l as f64; l], rng)?;
    let phi = (0..d)
        .map(|_| {
            let a: Vec<f64> = beta.iter().map(|b| hyper.eta * b).collect();
            dist::dirichlet(&a, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let prior = hyper.prior_for(m)?;
    let words = (0..l)
        .map(|_| sample_prior_word(&prior, hyper.rho, rng))
        .collect::<Result<Vec<_>>>()?;
    let pi_g = sample_global_transitions_prior(hyper, rng)?;
    Ok(ModelParams {
        beta,
        phi,
        words,
        pi_g,
    })
}

pub fn sample_prior_word<R: Rng + ?Sized>(
    prior: &MniwPrior,
    rho: f64,
    rng: &mut R,
) -> Result<ArWord> {
    let (coef, noise_cov) = observation::sample_mniw(prior, rng)?;
    let continuation = dist::beta(rho / 2.0, rho / 2.0, rng)?;
    Ok(ArWord {
        coef,
        noise_cov,
        continuation,
    })
}

/// Redraws non-stationary words from the prior until every spectral radius is
/// below `max_radius`, giving up after `max_tries` draws per word.
pub fn stabilize_words<R: Rng + ?Sized>(
    params: &mut ModelParams,
    hyper: &Hyperparameters,
    max_radius: f64,
    max_tries: usize,
    rng: &mut R,
) -> Result<()> {
    let prior = hyper.prior_for(params.dim())?;
    for (l, w) in params.words.iter_mut().enumerate() {
        let mut tries = 0;
        while w.spectral_radius() >= max_radius {
            if tries == max_tries {
                return Err(Error::InvalidParameter(format!(
                    "word {l}: no stationary draw in {max_tries} tries"
                )));
            }
            *w = sample_prior_word(&prior, hyper.rho, rng)?;
            tries += 1;
        }
    }
    Ok(())
}

fn sample_global_transitions_prior<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<Transitions> {
    let d = hyper.n_topics;
    let base = hyper.alpha_g / d as f64;
    let rows = (0..=d)
        .map(|r| {
            let mut a = vec![base; d];
            if r > 0 {
                a[r - 1] += hyper.kappa;
            }
            dist::dirichlet(&a, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Transitions::from_rows(rows)
}

/// Prior mean of a series transition row, restricted to the permitted topics
/// of `mask` and renormalized.
pub fn masked_mean(row: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let Some(mask) = mask.filter(|m| !m.iter().all(|&b| b)) else {
        return row.to_vec();
    };
    let mut out: Vec<f64> = row
        .iter()
        .zip(mask)
        .map(|(&p, &keep)| if keep { p } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    } else {
        // every permitted entry underflowed; fall back to uniform on the mask
        let k = mask.iter().filter(|&&b| b).count() as f64;
        for (x, &keep) in out.iter_mut().zip(mask) {
            *x = if keep { 1.0 / k } else { 0.0 };
        }
    }
    out
}

/// Draws series transitions around the global rows: row `i` is
/// `Dir(alpha_l * pi_g[i] + counts[i])`, masked when labels are given.
pub(crate) fn sample_series_transitions<R: Rng + ?Sized>(
    pi_g: &Transitions,
    alpha_l: f64,
    counts: Option<&[u64]>,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<Transitions> {
    let d = pi_g.n_topics();
    let rows = pi_g
        .rows()
        .enumerate()
        .map(|(r, row)| {
            let mean = masked_mean(row, mask);
            let a: Vec<f64> = mean
                .iter()
                .enumerate()
                .map(|(k, &p)| alpha_l * p + counts.map_or(0.0, |c| c[r * d + k] as f64))
                .collect();
            dist::dirichlet(&a, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Transitions::from_rows(rows)
}

/// Latent path `(d, z, o)` of length `len` drawn from the generative process.
pub fn simulate_latent<R: Rng + ?Sized>(
    params: &ModelParams,
    pi_n: &Transitions,
    len: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>, Vec<bool>) {
    let mut d = Vec::with_capacity(len);
    let mut z = Vec::with_capacity(len);
    let mut o = Vec::with_capacity(len);
    for s in 0..len {
        if s == 0 {
            let d0 = dist::categorical(pi_n.initial(), rng);
            d.push(d0);
            z.push(dist::categorical(&params.phi[d0], rng));
            o.push(false);
            continue;
        }
        let (dp, zp) = (d[s - 1], z[s - 1]);
        let dt = dist::categorical(pi_n.from_topic(dp), rng);
        let cont = dt == dp && rng.random::<f64>() < params.words[zp].continuation;
        let zt = if cont {
            zp
        } else {
            dist::categorical(&params.phi[dt], rng)
        };
        d.push(dt);
        z.push(zt);
        o.push(cont);
    }
    (d, z, o)
}

/// Simulates one series of total length `len`; the first `p` rows are
/// `y_init` and carry no latent state.
pub fn simulate_series<R: Rng + ?Sized>(
    params: &ModelParams,
    pi_n: &Transitions,
    len: usize,
    y_init: &TimeSeries,
    rng: &mut R,
) -> Result<(TimeSeries, SeriesState)> {
    let m = y_init.dim();
    let p = y_init.len();
    if p == 0 {
        return Err(Error::Shape(
            "y_init must hold at least one observation".into(),
        ));
    }
    if len <= p {
        return Err(Error::SeriesTooShort {
            len,
            required: p + 1,
        });
    }
    if params.dim() != m || params.words.iter().any(|w| w.coef.ncols() != m * p) {
        return Err(Error::Shape(format!(
            "parameters do not match dimension {m} and order {p}"
        )));
    }
    pi_n.validate()?;
    let factors = params
        .words
        .iter()
        .map(WordLikelihood::new)
        .collect::<Result<Vec<_>>>()?;
    let (d, z, o) = simulate_latent(params, pi_n, len - p, rng);
    let mut values = y_init.values().to_vec();
    values.reserve((len - p) * m);
    let mut x = DVector::zeros(m * p);
    for (s, &word) in z.iter().enumerate() {
        let t = p + s;
        for lag in 0..p {
            let row = &values[(t - lag - 1) * m..(t - lag) * m];
            x.rows_mut(lag * m, m).copy_from_slice(row);
        }
        let eps = DVector::from_fn(m, |_, _| dist::std_normal(rng));
        let y = &params.words[word].coef * &x + factors[word].chol_l() * eps;
        values.extend(y.iter());
    }
    let state = SeriesState {
        d,
        z,
        o,
        pi_n: pi_n.clone(),
        labels: None,
    };
    Ok((TimeSeries::new(m, values)?, state))
}

/// Simulates a corpus: per series, transitions are drawn around `pi_g` and a
/// path is generated from standard-normal initial lags.
pub fn simulate_corpus<R: Rng + ?Sized>(
    params: &ModelParams,
    hyper: &Hyperparameters,
    lengths: &[usize],
    rng: &mut R,
) -> Result<(Corpus, Vec<SeriesState>)> {
    hyper.validate()?;
    let p = hyper.ar_order;
    if let Some(&bad) = lengths.iter().find(|&&t| t <= p) {
        return Err(Error::SeriesTooShort {
            len: bad,
            required: p + 1,
        });
    }
    let m = params.dim().max(1);
    let mut series = Vec::with_capacity(lengths.len());
    let mut states = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let pi_n = sample_series_transitions(&params.pi_g, hyper.alpha_l, None, None, rng)?;
        let init: Vec<f64> = (0..m * p).map(|_| dist::std_normal(rng)).collect();
        let y_init = TimeSeries::new(m, init)?;
        let (y, st) = simulate_series(params, &pi_n, len, &y_init, rng)?;
        series.push(y);
        states.push(st);
    }
    Ok((Corpus::from_series(series), states))
}
