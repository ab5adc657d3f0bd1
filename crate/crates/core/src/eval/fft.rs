use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::TimeSeries;

/// Periods in minutes: 4, 8, ..., 40.
pub const DEFAULT_PERIODS: [usize; 10] = [4, 8, 12, 16, 20, 24, 28, 32, 36, 40];

/// DFT magnitude divided by `T` at the bin nearest to frequency `1/v` for each
/// period `v`. Channels are laid out one after another.
pub fn fft_features(series: &TimeSeries, periods: &[usize]) -> Result<Vec<f64>> {
    let n = series.len();
    let longest = periods.iter().copied().max().unwrap_or(0);
    if periods.contains(&0) {
        return Err(Error::InvalidParameter("periods must be positive".into()));
    }
    if n < longest || n == 0 {
        return Err(Error::SeriesTooShort {
            len: n,
            required: longest.max(1),
        });
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut out = Vec::with_capacity(periods.len() * series.dim());
    for c in 0..series.dim() {
        let mut buf: Vec<Complex<f64>> = series
            .channel(c)
            .into_iter()
            .map(|v| Complex::new(v, 0.0))
            .collect();
        fft.process(&mut buf);
        for &v in periods {
            let k = (n as f64 / v as f64).round() as usize % n;
            out.push(buf[k].norm() / n as f64);
        }
    }
    Ok(out)
}

pub fn fft_feature_matrix(series: &[TimeSeries], periods: &[usize]) -> Result<Vec<Vec<f64>>> {
    series.iter().map(|s| fft_features(s, periods)).collect()
}
