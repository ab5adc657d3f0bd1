//! Removal of the slow baseline with a centered moving average.

use crate::error::{Error, Result};
use crate::model::{Corpus, TimeSeries};

pub const DEFAULT_BASAL_WINDOW: usize = 40;

/// Centered moving average with half-width `window / 2`. Near the ends the
/// window shrinks symmetrically so it always stays centered on `t`.
pub fn centered_moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|t| {
            let h = half.min(t).min(n - 1 - t);
            let span = &values[t - h..=t + h];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// Residual of every channel after subtracting its centered moving average.
pub fn remove_basal(series: &TimeSeries, window: usize) -> Result<TimeSeries> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "basal window must be positive".into(),
        ));
    }
    if series.len() < window {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            required: window,
        });
    }
    let m = series.dim();
    let mut out = series.values().to_vec();
    for c in 0..m {
        let chan = series.channel(c);
        let base = centered_moving_average(&chan, window);
        for (t, b) in base.iter().enumerate() {
            out[t * m + c] = chan[t] - b;
        }
    }
    TimeSeries::new(m, out)
}

/// Replaces the corpus residuals with basal-removed series.
pub fn apply_basal(corpus: &mut Corpus, window: usize) -> Result<()> {
    corpus.residuals = corpus
        .series
        .iter()
        .map(|s| remove_basal(s, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(())
}
