//! Conjugate conditional updates for the global and series parameters.

use rand::Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::gibbs::counts::SuffStats;
use crate::gibbs::states::PreparedSeries;
use crate::model::{self, validate_mask, ArWord, Hyperparameters, SeriesState, Transitions};
use crate::observation::{mniw_update_stats, sample_mniw, MniwPrior, RegressionStats};
use crate::par::{self, Execution};

/// `beta ~ Dir(gamma / L + m_{.,l})`
pub fn sample_beta<R: Rng + ?Sized>(
    stats: &SuffStats,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let base = hyper.gamma / stats.n_words as f64;
    let alpha: Vec<f64> = stats
        .word_totals()
        .iter()
        .map(|&m| base + m as f64)
        .collect();
    dist::dirichlet(&alpha, rng)
}

/// `phi_d ~ Dir(eta * beta_l + m_{d,l})` for every topic.
pub fn sample_phi<R: Rng + ?Sized>(
    beta: &[f64],
    stats: &SuffStats,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    (0..stats.n_topics)
        .map(|d| {
            let alpha: Vec<f64> = beta
                .iter()
                .enumerate()
                .map(|(l, b)| hyper.eta * b + stats.m(d, l) as f64)
                .collect();
            dist::dirichlet(&alpha, rng)
        })
        .collect()
}

/// `omega_l ~ Beta(rho / 2 + continues, rho / 2 + stops)`.
pub fn sample_omega<R: Rng + ?Sized>(
    stats: &SuffStats,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let half = hyper.rho / 2.0;
    stats
        .c_bar
        .iter()
        .map(|&[stops, continues]| dist::beta(half + continues as f64, half + stops as f64, rng))
        .collect()
}

/// Per-word regression sums over every modeled step assigned to that word.
pub fn word_regressions(
    series: &[PreparedSeries],
    states: &[SeriesState],
    n_words: usize,
) -> Vec<RegressionStats> {
    let (m, k) = series.first().map_or((1, 1), |s| {
        (s.dim(), if s.is_empty() { s.dim() } else { s.x(0).len() })
    });
    let mut out = vec![RegressionStats::zeros(m, k); n_words];
    for (ser, st) in series.iter().zip(states) {
        for (s, &z) in st.z.iter().enumerate() {
            out[z].push(ser.y(s), ser.x(s));
        }
    }
    out
}

/// Resamples `(A, V)` of every word from its MNIW posterior; words without
/// data get a fresh prior draw. Continuation probabilities are left as given.
pub fn sample_words(
    series: &[PreparedSeries],
    states: &[SeriesState],
    prior: &MniwPrior,
    continuation: &[f64],
    seed: u64,
    mode: Execution,
) -> Result<Vec<ArWord>> {
    let regs = word_regressions(series, states, continuation.len());
    par::map_indexed(&regs, mode, |l, reg| {
        let mut rng = dist::stream(seed, &[l as u64]);
        let post = mniw_update_stats(prior, reg)?;
        let (coef, noise_cov) = sample_mniw(&post, &mut rng)?;
        Ok(ArWord {
            coef,
            noise_cov,
            continuation: continuation[l],
        })
    })
    .into_iter()
    .collect()
}

/// Global rows `Dir(alpha_g / D + kappa delta_i + c^i)` (no sticky mass on the
/// initial row), then series rows `Dir(alpha_l * pi_g^i [masked] + c_n^i)`.
pub fn sample_transitions<R: Rng + ?Sized>(
    stats: &SuffStats,
    hyper: &Hyperparameters,
    labels: &[Option<Vec<bool>>],
    rng: &mut R,
) -> Result<(Transitions, Vec<Transitions>)> {
    let d = stats.n_topics;
    if labels.len() != stats.trans_counts.len() {
        return Err(Error::Shape(format!(
            "{} label entries for {} series",
            labels.len(),
            stats.trans_counts.len()
        )));
    }
    for mask in labels.iter().flatten() {
        validate_mask(mask, d)?;
    }
    let base = hyper.alpha_g / d as f64;
    let rows = (0..=d)
        .map(|r| {
            let alpha: Vec<f64> = (0..d)
                .map(|k| {
                    let sticky = if r > 0 && k == r - 1 {
                        hyper.kappa
                    } else {
                        0.0
                    };
                    base + sticky + stats.trans_totals[r * d + k] as f64
                })
                .collect();
            dist::dirichlet(&alpha, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let pi_g = Transitions::from_rows(rows)?;
    let series = stats
        .trans_counts
        .iter()
        .zip(labels)
        .map(|(counts, mask)| {
            model::sample_series_transitions(
                &pi_g,
                hyper.alpha_l,
                Some(counts),
                mask.as_deref(),
                rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pi_g, series))
}
