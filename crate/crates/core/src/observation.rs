//! AR(p) likelihoods and the conjugate matrix-normal inverse-Wishart update
//! for word parameters.
//!
//! A word maps the stacked lag vector `x_t = [y_{t-1}; ...; y_{t-p}]` of
//! length `m * p` to `y_t = A x_t + v_t` with `v_t ~ N(0, V)`, so `A` is
//! `m x (m * p)`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::dist;
use crate::error::{Error, Result};
use crate::model::{ArWord, TimeSeries};

/// Matrix-normal inverse-Wishart distribution over `(A, V)`:
/// `V ~ IW(scale, dof)` and `A | V ~ MN(mean, V, col_precision^-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mniw {
    pub mean: DMatrix<f64>,
    pub col_precision: DMatrix<f64>,
    pub scale: DMatrix<f64>,
    pub dof: f64,
}

pub type MniwPrior = Mniw;
pub type MniwPosterior = Mniw;

impl Mniw {
    /// Weakly informative default: zero mean, `0.1 I` column precision,
    /// `m I` scale and `m + 2` degrees of freedom.
    pub fn weak_default(m: usize, p: usize) -> Self {
        Self {
            mean: DMatrix::zeros(m, m * p),
            col_precision: DMatrix::identity(m * p, m * p) * 0.1,
            scale: DMatrix::identity(m, m) * m as f64,
            dof: m as f64 + 2.0,
        }
    }

    /// Like [`Mniw::weak_default`] but with the scale set to `0.75` times the
    /// pooled covariance of first differences, so prior noise matches the
    /// data's magnitude.
    pub fn data_scaled(series: &[TimeSeries], p: usize) -> Result<Self> {
        let m = series
            .first()
            .map(TimeSeries::dim)
            .ok_or_else(|| Error::EmptyInput("no series to scale the prior from".into()))?;
        let mut sum = DVector::<f64>::zeros(m);
        let mut outer = DMatrix::<f64>::zeros(m, m);
        let mut n = 0usize;
        for s in series {
            if s.dim() != m {
                return Err(Error::Shape(format!(
                    "series of dimension {} among dimension {m}",
                    s.dim()
                )));
            }
            for t in 1..s.len() {
                let diff =
                    DVector::from_iterator(m, s.at(t).iter().zip(s.at(t - 1)).map(|(a, b)| a - b));
                outer += &diff * diff.transpose();
                sum += diff;
                n += 1;
            }
        }
        if n < 2 {
            return Err(Error::EmptyInput(
                "need at least two differences to scale the prior".into(),
            ));
        }
        let mean = &sum / n as f64;
        let cov = (outer - &mean * mean.transpose() * n as f64) / (n - 1) as f64;
        let mut prior = Self::weak_default(m, p);
        prior.scale = cov * 0.75;
        if Cholesky::new(prior.scale.clone()).is_none() {
            return Err(Error::Conditioning(
                "first differences have a singular covariance".into(),
            ));
        }
        prior.validate(m, p)?;
        Ok(prior)
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        let k = m * p;
        if self.mean.shape() != (m, k)
            || self.col_precision.shape() != (k, k)
            || self.scale.shape() != (m, m)
        {
            return Err(Error::Shape(format!(
                "MNIW shapes mean {:?}, precision {:?}, scale {:?} do not fit m={m}, p={p}",
                self.mean.shape(),
                self.col_precision.shape(),
                self.scale.shape()
            )));
        }
        for (name, mat) in [
            ("col_precision", &self.col_precision),
            ("scale", &self.scale),
        ] {
            if (mat - mat.transpose()).abs().max() > 1e-9 * (1.0 + mat.abs().max()) {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
            let eig = mat.clone().symmetric_eigenvalues();
            if eig.iter().any(|&e| e < -1e-12 * (1.0 + mat.abs().max())) {
                return Err(Error::InvalidParameter(format!(
                    "{name} is not positive semidefinite"
                )));
            }
        }
        if !(self.dof > m as f64 - 1.0) {
            return Err(Error::ImproperPosterior(format!(
                "dof {} must exceed m - 1 = {}",
                self.dof,
                m as f64 - 1.0
            )));
        }
        Ok(())
    }
}

/// Observations assigned to one word, stacked column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPair {
    /// `m x n`
    pub y: DMatrix<f64>,
    /// `(m * p) x n`
    pub x: DMatrix<f64>,
}

impl DesignPair {
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.ncols() != x.ncols() {
            return Err(Error::Shape(format!(
                "Y has {} columns but X has {}",
                y.ncols(),
                x.ncols()
            )));
        }
        Ok(Self { y, x })
    }

    pub fn stats(&self) -> RegressionStats {
        RegressionStats {
            xx: &self.x * self.x.transpose(),
            yx: &self.y * self.x.transpose(),
            yy: &self.y * self.y.transpose(),
            n: self.y.ncols(),
        }
    }
}

/// Gram sums of a regression design: `X X'`, `Y X'`, `Y Y'` and the column count.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionStats {
    pub xx: DMatrix<f64>,
    pub yx: DMatrix<f64>,
    pub yy: DMatrix<f64>,
    pub n: usize,
}

impl RegressionStats {
    pub fn zeros(m: usize, k: usize) -> Self {
        Self {
            xx: DMatrix::zeros(k, k),
            yx: DMatrix::zeros(m, k),
            yy: DMatrix::zeros(m, m),
            n: 0,
        }
    }

    pub fn push(&mut self, y: &[f64], x: &[f64]) {
        let k = x.len();
        let m = y.len();
        for i in 0..k {
            for j in 0..k {
                self.xx[(i, j)] += x[i] * x[j];
            }
        }
        for i in 0..m {
            for j in 0..k {
                self.yx[(i, j)] += y[i] * x[j];
            }
            for j in 0..m {
                self.yy[(i, j)] += y[i] * y[j];
            }
        }
        self.n += 1;
    }
}

/// Stacked lag vectors for `t = p..T` (zero-based).
pub fn build_design(series: &TimeSeries, p: usize) -> Result<Vec<Vec<f64>>> {
    let t_len = series.len();
    if p == 0 {
        return Err(Error::InvalidParameter(
            "AR order must be at least 1".into(),
        ));
    }
    if t_len <= p {
        return Err(Error::SeriesTooShort {
            len: t_len,
            required: p + 1,
        });
    }
    Ok((p..t_len)
        .map(|t| {
            (1..=p)
                .flat_map(|lag| series.at(t - lag).iter().copied())
                .collect()
        })
        .collect())
}

/// Cholesky factorization, retried once with a `1e-9 * trace / n` ridge.
pub(crate) fn cholesky_jittered(mat: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = mat.clone().cholesky() {
        return Some(c);
    }
    let n = mat.nrows().max(1);
    let jitter = 1e-9 * mat.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    (mat + DMatrix::identity(n, n) * jitter).cholesky()
}

fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

/// Precomputed Cholesky factor of a word's noise covariance.
#[derive(Debug, Clone)]
pub struct WordLikelihood {
    coef: DMatrix<f64>,
    chol: DMatrix<f64>,
    /// `-0.5 * (m log 2pi + log det V)`
    log_norm: f64,
}

impl WordLikelihood {
    pub fn new(word: &ArWord) -> Result<Self> {
        let m = word.noise_cov.nrows();
        let chol = cholesky_jittered(&word.noise_cov)
            .ok_or_else(|| {
                Error::Decomposition("noise covariance is not positive definite".into())
            })?
            .unpack();
        let log_det: f64 = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            coef: word.coef.clone(),
            chol,
            log_norm: -0.5 * (m as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn chol_l(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn loglik(&self, y: &[f64], x: &[f64]) -> f64 {
        let m = y.len();
        let k = x.len();
        // residual r = y - A x, then solve L u = r by forward substitution
        let mut u = [0.0f64; 8];
        let mut heap;
        let u: &mut [f64] = if m <= 8 {
            &mut u[..m]
        } else {
            heap = vec![0.0; m];
            &mut heap
        };
        for i in 0..m {
            let mut r = y[i];
            for j in 0..k {
                r -= self.coef[(i, j)] * x[j];
            }
            for j in 0..i {
                r -= self.chol[(i, j)] * u[j];
            }
            u[i] = r / self.chol[(i, i)];
        }
        self.log_norm - 0.5 * u.iter().map(|v| v * v).sum::<f64>()
    }
}

/// `log N(y; A x, V)`.
pub fn ar_loglik(y: &[f64], x: &[f64], word: &ArWord) -> Result<f64> {
    if y.len() != word.coef.nrows() || x.len() != word.coef.ncols() {
        return Err(Error::Shape(format!(
            "y has {} and x has {} entries for coefficients {:?}",
            y.len(),
            x.len(),
            word.coef.shape()
        )));
    }
    Ok(WordLikelihood::new(word)?.loglik(y, x))
}

pub fn mniw_update(prior: &MniwPrior, data: &DesignPair) -> Result<MniwPosterior> {
    let m = prior.dim();
    if data.y.nrows() != m || data.x.nrows() != prior.col_precision.nrows() {
        return Err(Error::Shape(format!(
            "design Y {:?}, X {:?} does not fit prior mean {:?}",
            data.y.shape(),
            data.x.shape(),
            prior.mean.shape()
        )));
    }
    mniw_update_stats(prior, &data.stats())
}

/// Conjugate update from Gram sums:
/// `Kn = K0 + XX'`, `Mn = (M0 K0 + YX') Kn^-1`,
/// `Sn = S0 + YY' + M0 K0 M0' - Mn Kn Mn'`, `nun = nu0 + n`.
pub fn mniw_update_stats(prior: &MniwPrior, stats: &RegressionStats) -> Result<MniwPosterior> {
    if stats.n == 0 {
        return Ok(prior.clone());
    }
    let kn = &prior.col_precision + &stats.xx;
    let rhs = &prior.mean * &prior.col_precision + &stats.yx;
    let chol = cholesky_jittered(&kn)
        .ok_or_else(|| Error::Conditioning("posterior column precision is singular".into()))?;
    let mean = chol.solve(&rhs.transpose()).transpose();
    let scale =
        &prior.scale + &stats.yy + &prior.mean * &prior.col_precision * prior.mean.transpose()
            - &mean * rhs.transpose();
    Ok(Mniw {
        mean,
        col_precision: symmetrize(&kn),
        scale: symmetrize(&scale),
        dof: prior.dof + stats.n as f64,
    })
}

/// Draws `V ~ IW(Sn, nun)` (Bartlett construction) then
/// `A | V ~ MN(Mn, V, Kn^-1)`.
pub fn sample_mniw<R: Rng + ?Sized>(
    post: &MniwPosterior,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = post.dim();
    let k = post.col_precision.nrows();
    if !(post.dof > m as f64 - 1.0) {
        return Err(Error::ImproperPosterior(format!(
            "dof {} must exceed m - 1 = {}",
            post.dof,
            m as f64 - 1.0
        )));
    }
    let scale_l = cholesky_jittered(&post.scale)
        .ok_or_else(|| {
            Error::Decomposition("inverse-Wishart scale is not positive definite".into())
        })?
        .unpack();
    // Bartlett factor of a standard Wishart(I, nu)
    let mut bartlett = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        bartlett[(i, i)] = dist::chi_squared(post.dof - i as f64, rng).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = dist::std_normal(rng);
        }
    }
    // V = C (B B')^-1 C' with C C' = Sn, i.e. V = G G' with G = C B^-T
    let b_inv = bartlett
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Decomposition("singular Bartlett factor".into()))?;
    let g = &scale_l * b_inv.transpose();
    let noise = symmetrize(&(&g * g.transpose()));

    let noise_l = cholesky_jittered(&noise)
        .ok_or_else(|| Error::Decomposition("sampled covariance is not positive definite".into()))?
        .unpack();
    let prec_l = cholesky_jittered(&post.col_precision)
        .ok_or_else(|| Error::Conditioning("column precision is singular".into()))?
        .unpack();
    // A = Mn + Lv Z U^-1 with U U' = Kn: each row of Z U^-1 has covariance
    // U^-T U^-1 = Kn^-1
    let z = DMatrix::from_fn(m, k, |_, _| dist::std_normal(rng));
    let zu = prec_l
        .transpose()
        .solve_upper_triangular(&z.transpose())
        .ok_or_else(|| Error::Conditioning("column precision is singular".into()))?
        .transpose();
    let coef = &post.mean + noise_l * zu;
    Ok((coef, noise))
}

/// Convenience for tests and callers holding column vectors.
pub fn design_pair_from_rows(ys: &[Vec<f64>], xs: &[Vec<f64>]) -> Result<DesignPair> {
    let m = ys.first().map_or(0, Vec::len);
    let k = xs.first().map_or(0, Vec::len);
    let y = DMatrix::from_columns(
        &ys.iter()
            .map(|c| DVector::from_column_slice(c))
            .collect::<Vec<_>>(),
    );
    let x = DMatrix::from_columns(
        &xs.iter()
            .map(|c| DVector::from_column_slice(c))
            .collect::<Vec<_>>(),
    );
    if ys.is_empty() {
        return DesignPair::new(DMatrix::zeros(m, 0), DMatrix::zeros(k, 0));
    }
    DesignPair::new(y, x)
}
