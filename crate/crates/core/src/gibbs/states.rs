//! Joint block update of a series' latent trajectory.
//!
//! The latent chain runs over pairs `(d, z)` of topic and word. Marginalizing
//! the switch `o`, one step moves with kernel
//!
//! ```text
//! K((d, z) -> (d', z')) = pi(d, d') * [ omega_z 1{z' = z} + (1 - omega_z) phi_d'(z') ]   if d' = d
//!                       = pi(d, d') * phi_d'(z')                                           otherwise
//! ```
//!
//! Backward messages are computed in log space with per-slice
//! renormalization; the path is then sampled forward, and `o` is drawn last
//! from its two-term conditional in the stay-on-the-same-word case.

use rand::Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::model::{ModelParams, TimeSeries, Transitions};
use crate::observation::{build_design, WordLikelihood};

/// Responses and stacked lag vectors for the modeled steps of one series.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    m: usize,
    k: usize,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl PreparedSeries {
    pub fn new(residuals: &TimeSeries, p: usize) -> Result<Self> {
        let xs = build_design(residuals, p)?;
        let m = residuals.dim();
        let y = residuals.values()[p * m..].to_vec();
        Ok(Self {
            m,
            k: m * p,
            y,
            x: xs.concat(),
        })
    }

    /// Number of modeled steps.
    pub fn len(&self) -> usize {
        self.y.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn y(&self, s: usize) -> &[f64] {
        &self.y[s * self.m..(s + 1) * self.m]
    }

    pub fn x(&self, s: usize) -> &[f64] {
        &self.x[s * self.k..(s + 1) * self.k]
    }
}

/// `log p(y_s | x_s, word l)` for every modeled step and word.
#[derive(Debug, Clone)]
pub struct LogLikTable {
    n_words: usize,
    data: Vec<f64>,
}

impl LogLikTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_words = rows.first().map_or(0, Vec::len);
        Self {
            n_words,
            data: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        if self.n_words == 0 {
            0
        } else {
            self.data.len() / self.n_words
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_words..(s + 1) * self.n_words]
    }

    pub fn slice_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.n_words..(s + 1) * self.n_words]
    }
}

pub fn loglik_table(series: &PreparedSeries, params: &ModelParams) -> Result<LogLikTable> {
    let factors = params
        .words
        .iter()
        .map(WordLikelihood::new)
        .collect::<Result<Vec<_>>>()?;
    let l = factors.len();
    let mut data = Vec::with_capacity(series.len() * l);
    for s in 0..series.len() {
        let (y, x) = (series.y(s), series.x(s));
        for f in &factors {
            let v = f.loglik(y, x);
            if !v.is_finite() {
                return Err(Error::Numerical {
                    series: 0,
                    slice: s,
                });
            }
            data.push(v);
        }
    }
    Ok(LogLikTable { n_words: l, data })
}

/// Normalized backward messages `log m_s(d, z)`, state index `d * L + z`.
#[derive(Debug, Clone)]
pub struct Messages {
    n_states: usize,
    data: Vec<f64>,
}

impl Messages {
    pub fn len(&self) -> usize {
        if self.n_states == 0 {
            0
        } else {
            self.data.len() / self.n_states
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        &self.data[s * self.n_states..(s + 1) * self.n_states]
    }
}

/// Sampled trajectory of one series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub d: Vec<usize>,
    pub z: Vec<usize>,
    pub o: Vec<bool>,
}

pub fn backward_messages(
    series: &PreparedSeries,
    params: &ModelParams,
    pi_n: &Transitions,
) -> Result<Messages> {
    let table = loglik_table(series, params)?;
    backward_messages_from_table(&table, params, pi_n)
}

pub fn backward_messages_from_table(
    table: &LogLikTable,
    params: &ModelParams,
    pi_n: &Transitions,
) -> Result<Messages> {
    let n_topics = params.n_topics();
    let n_words = params.n_words();
    let n_states = n_topics * n_words;
    let len = table.len();
    let mut data = vec![0.0; len * n_states];
    let mut b = vec![0.0; n_states];
    let mut q = vec![0.0; n_topics];
    for s in (0..len.saturating_sub(1)).rev() {
        let (head, tail) = data.split_at_mut((s + 1) * n_states);
        let next = &tail[..n_states];
        let ll = table.slice(s + 1);
        let mut mx = f64::NEG_INFINITY;
        for j in 0..n_states {
            b[j] = ll[j % n_words] + next[j];
            mx = mx.max(b[j]);
        }
        if !mx.is_finite() {
            return Err(Error::Numerical {
                series: 0,
                slice: s + 1,
            });
        }
        b.iter_mut().for_each(|v| *v = (*v - mx).exp());
        for (dp, qd) in q.iter_mut().enumerate() {
            let bd = &b[dp * n_words..(dp + 1) * n_words];
            *qd = params.phi[dp].iter().zip(bd).map(|(f, v)| f * v).sum();
        }
        let cur = &mut head[s * n_states..];
        let mut best = 0.0f64;
        for d in 0..n_topics {
            let row = pi_n.from_topic(d);
            let off: f64 = (0..n_topics)
                .filter(|&k| k != d)
                .map(|k| row[k] * q[k])
                .sum();
            for z in 0..n_words {
                let w = params.words[z].continuation;
                let j = d * n_words + z;
                let v = off + row[d] * (w * b[j] + (1.0 - w) * q[d]);
                cur[j] = v;
                best = best.max(v);
            }
        }
        if !(best > 0.0 && best.is_finite()) {
            return Err(Error::Numerical {
                series: 0,
                slice: s,
            });
        }
        cur[..n_states]
            .iter_mut()
            .for_each(|v| *v = (*v / best).ln());
    }
    Ok(Messages { n_states, data })
}

/// Log kernel from `prev` (or the initial row when `None`) into `(d, z)`.
#[inline]
fn log_kernel(
    params: &ModelParams,
    pi_n: &Transitions,
    prev: Option<(usize, usize)>,
    d: usize,
    z: usize,
) -> f64 {
    match prev {
        None => (pi_n.initial()[d] * params.phi[d][z]).ln(),
        Some((dp, zp)) => {
            let t = pi_n.from_topic(dp)[d];
            let emit = if d == dp {
                let w = params.words[zp].continuation;
                w * f64::from(u8::from(z == zp)) + (1.0 - w) * params.phi[d][z]
            } else {
                params.phi[d][z]
            };
            (t * emit).ln()
        }
    }
}

/// Forward-samples `(d, z)` slice by slice, then the switch indicators.
pub fn sample_states<R: Rng + ?Sized>(
    table: &LogLikTable,
    params: &ModelParams,
    pi_n: &Transitions,
    messages: &Messages,
    rng: &mut R,
) -> Result<Path> {
    let n_topics = params.n_topics();
    let n_words = params.n_words();
    let len = table.len();
    let mut path = Path {
        d: Vec::with_capacity(len),
        z: Vec::with_capacity(len),
        o: Vec::with_capacity(len),
    };
    let mut lw = vec![0.0; n_topics * n_words];
    let mut prev = None;
    for s in 0..len {
        let ll = table.slice(s);
        let msg = messages.slice(s);
        for d in 0..n_topics {
            for z in 0..n_words {
                let j = d * n_words + z;
                lw[j] = log_kernel(params, pi_n, prev, d, z) + ll[z] + msg[j];
            }
        }
        let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !mx.is_finite() {
            return Err(Error::Numerical {
                series: 0,
                slice: s,
            });
        }
        let j = dist::categorical(&dist::normalize_log(&lw), rng);
        let (d, z) = (j / n_words, j % n_words);
        let cont = match prev {
            Some((dp, zp)) if dp == d && zp == z => {
                let w = params.words[z].continuation;
                let p1 = w / (w + (1.0 - w) * params.phi[d][z]);
                rng.random::<f64>() < p1
            }
            _ => false,
        };
        path.d.push(d);
        path.z.push(z);
        path.o.push(cont);
        prev = Some((d, z));
    }
    Ok(path)
}

/// Smoothed per-slice posteriors over `(d, z)` from a normalized forward
/// filter combined with the backward messages.
pub fn slice_posteriors(
    table: &LogLikTable,
    params: &ModelParams,
    pi_n: &Transitions,
    messages: &Messages,
) -> Vec<Vec<f64>> {
    let n_topics = params.n_topics();
    let n_words = params.n_words();
    let n_states = n_topics * n_words;
    let mut out = Vec::with_capacity(table.len());
    let mut alpha = vec![0.0; n_states];
    for s in 0..table.len() {
        let ll = table.slice(s);
        let mx = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut next = vec![0.0; n_states];
        if s == 0 {
            for d in 0..n_topics {
                for z in 0..n_words {
                    next[d * n_words + z] = pi_n.initial()[d] * params.phi[d][z];
                }
            }
        } else {
            let mass: Vec<f64> = (0..n_topics)
                .map(|d| alpha[d * n_words..(d + 1) * n_words].iter().sum())
                .collect();
            for d2 in 0..n_topics {
                let stay = pi_n.from_topic(d2)[d2];
                let enter: f64 = (0..n_topics)
                    .filter(|&d| d != d2)
                    .map(|d| mass[d] * pi_n.from_topic(d)[d2])
                    .sum();
                let redraw: f64 = (0..n_words)
                    .map(|z| alpha[d2 * n_words + z] * (1.0 - params.words[z].continuation))
                    .sum();
                for z2 in 0..n_words {
                    let j = d2 * n_words + z2;
                    next[j] = params.phi[d2][z2] * (enter + stay * redraw)
                        + stay * alpha[j] * params.words[z2].continuation;
                }
            }
        }
        for (j, v) in next.iter_mut().enumerate() {
            *v *= (ll[j % n_words] - mx).exp();
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        alpha = next;
        let msg = messages.slice(s);
        let mut post: Vec<f64> = alpha.iter().zip(msg).map(|(a, m)| a * m.exp()).collect();
        let total: f64 = post.iter().sum();
        post.iter_mut().for_each(|v| *v /= total);
        out.push(post);
    }
    out
}

/// `log p(y, d, z, o | params, pi_n)` over the modeled steps.
pub fn complete_loglik(
    table: &LogLikTable,
    params: &ModelParams,
    pi_n: &Transitions,
    d: &[usize],
    z: &[usize],
    o: &[bool],
) -> f64 {
    let mut total = 0.0;
    for s in 0..d.len() {
        total += table.slice(s)[z[s]];
        total += if s == 0 {
            (pi_n.initial()[d[0]] * params.phi[d[0]][z[0]]).ln()
        } else {
            let (dp, zp) = (d[s - 1], z[s - 1]);
            let t = pi_n.from_topic(dp)[d[s]].ln();
            let w = params.words[zp].continuation;
            t + if d[s] != dp {
                params.phi[d[s]][z[s]].ln()
            } else if o[s] {
                w.ln()
            } else {
                (1.0 - w).ln() + params.phi[d[s]][z[s]].ln()
            }
        };
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::stream;
    use crate::model::ArWord;
    use nalgebra::DMatrix;

    fn single_params(omega: f64) -> ModelParams {
        ModelParams {
            beta: vec![1.0],
            phi: vec![vec![1.0]],
            words: vec![ArWord {
                coef: DMatrix::from_element(1, 1, 0.5),
                noise_cov: DMatrix::from_element(1, 1, 1.0),
                continuation: omega,
            }],
            pi_g: Transitions::from_rows(vec![vec![1.0], vec![1.0]]).unwrap(),
        }
    }

    #[test]
    fn single_state_messages_are_constant() {
        let params = single_params(0.7);
        let series =
            PreparedSeries::new(&TimeSeries::univariate(vec![0.1, 0.5, -0.3, 0.2, 0.9]), 1)
                .unwrap();
        let msgs = backward_messages(&series, &params, &params.pi_g).unwrap();
        for s in 0..msgs.len() {
            assert!(msgs.slice(s)[0].abs() < 1e-15);
        }
    }

    #[test]
    fn single_state_switch_rate_is_omega() {
        let omega = 0.7;
        let params = single_params(omega);
        let series = PreparedSeries::new(&TimeSeries::univariate(vec![0.0; 2001]), 1).unwrap();
        let table = loglik_table(&series, &params).unwrap();
        let msgs = backward_messages_from_table(&table, &params, &params.pi_g).unwrap();
        let path =
            sample_states(&table, &params, &params.pi_g, &msgs, &mut stream(1, &[])).unwrap();
        assert!(path.d.iter().all(|&d| d == 0));
        assert!(!path.o[0]);
        let rate = path.o[1..].iter().filter(|&&c| c).count() as f64 / 1999.0;
        assert!((rate - omega).abs() < 4.0 * (omega * (1.0 - omega) / 1999.0).sqrt());
    }

    #[test]
    fn messages_are_scale_invariant() {
        let mut rng = stream(3, &[]);
        let hyper = crate::model::Hyperparameters {
            n_words: 2,
            n_topics: 2,
            ..Default::default()
        };
        let params = crate::model::sample_prior_params(&hyper, 1, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![dist::std_normal(&mut rng), dist::std_normal(&mut rng)])
            .collect();
        let table = LogLikTable::from_rows(rows.clone());
        let mut shifted = LogLikTable::from_rows(rows);
        shifted.slice_mut(3).iter_mut().for_each(|v| *v += 17.5);
        let a = backward_messages_from_table(&table, &params, &params.pi_g).unwrap();
        let b = backward_messages_from_table(&shifted, &params, &params.pi_g).unwrap();
        for s in 0..a.len() {
            for (x, y) in a.slice(s).iter().zip(b.slice(s)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn long_series_messages_stay_finite() {
        let mut rng = stream(4, &[]);
        let hyper = crate::model::Hyperparameters {
            n_words: 5,
            n_topics: 3,
            ..Default::default()
        };
        let mut params = crate::model::sample_prior_params(&hyper, 1, &mut rng).unwrap();
        for (w, a) in params.words.iter_mut().zip([-0.8, -0.3, 0.0, 0.4, 0.9]) {
            w.coef[(0, 0)] = a;
        }
        let (corpus, _) =
            crate::model::simulate_corpus(&params, &hyper, &[10_000], &mut rng).unwrap();
        let series = PreparedSeries::new(&corpus.residuals[0], 1).unwrap();
        let msgs = backward_messages(&series, &params, &params.pi_g).unwrap();
        assert!((0..msgs.len()).all(|s| msgs.slice(s).iter().all(|v| !v.is_nan() && *v <= 0.0)));
    }
}
