//! Seeded random streams and the conjugate-family samplers used by the
//! Gibbs updates. Gamma variates are drawn in log space so that Dirichlet
//! parameters far below one (e.g. `eta * beta_l` for a rarely used word) do
//! not underflow to an all-zero vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

pub type Stream = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a base seed with a path of tags into an independent child seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

/// Log of a Gamma(shape, 1) variate. `shape == 0` yields `-inf`.
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape >= 0.0 && shape.is_finite());
    if shape == 0.0 {
        return f64::NEG_INFINITY;
    }
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("finite positive shape");
        return g.sample(rng).ln();
    }
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    let g = Gamma::new(shape + 1.0, 1.0).expect("finite positive shape");
    let u: f64 = rng.random::<f64>();
    let u = if u > 0.0 { u } else { f64::MIN_POSITIVE };
    g.sample(rng).ln() + u.ln() / shape
}

/// Dirichlet draw. Zero entries of `alpha` receive exactly zero mass.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return Err(Error::InvalidParameter("empty Dirichlet parameter".into()));
    }
    if alpha.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "Dirichlet parameter must be finite and nonnegative: {alpha:?}"
        )));
    }
    if alpha.iter().all(|&a| a == 0.0) {
        return Err(Error::InvalidParameter(
            "Dirichlet parameter has no positive entry".into(),
        ));
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_variate(a, rng)).collect();
    Ok(normalize_log(&logs))
}

/// Exponentiates and normalizes a vector of log weights.
pub fn normalize_log(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Beta parameters must be positive: ({a}, {b})"
        )));
    }
    let la = log_gamma_variate(a, rng);
    let lb = log_gamma_variate(b, rng);
    let w = 1.0 / (1.0 + (lb - la).exp());
    // keep strictly inside (0, 1)
    Ok(w.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
}

pub fn chi_squared<R: Rng + ?Sized>(dof: f64, rng: &mut R) -> f64 {
    2.0 * Gamma::new(dof / 2.0, 1.0)
        .expect("positive dof")
        .sample(rng)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Index drawn proportionally to nonnegative `weights` (need not be normalized).
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0 && total.is_finite());
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if u < w {
                return i;
            }
            u -= w;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_zero_entries_get_no_mass() {
        let mut rng = stream(1, &[]);
        for _ in 0..100 {
            let x = dirichlet(&[0.0, 2.0, 0.0, 1e-9], &mut rng).unwrap();
            assert_eq!(x[0], 0.0);
            assert_eq!(x[2], 0.0);
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_shapes_do_not_underflow() {
        let mut rng = stream(2, &[]);
        let x = dirichlet(&[1e-300, 1e-300, 1e-300], &mut rng).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
        assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_dirichlet_is_rejected() {
        let mut rng = stream(3, &[]);
        assert!(dirichlet(&[0.0, 0.0], &mut rng).is_err());
    }

    #[test]
    fn derived_streams_differ_by_tag() {
        assert_ne!(derive_seed(7, &[0, 1]), derive_seed(7, &[1, 0]));
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = stream(4, &[]);
        for _ in 0..1000 {
            let i = categorical(&[0.0, 1.0, 0.0, 3.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
