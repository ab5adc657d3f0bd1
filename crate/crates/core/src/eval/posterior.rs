use crate::data_io::centered_moving_average;
use crate::error::{Error, Result};
use crate::gibbs::Sample;

pub const DEFAULT_SMOOTH_WINDOW: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub struct TopicCurve {
    pub posterior: Vec<f64>,
    pub smoothed: Vec<f64>,
}

/// Fraction of samples placing `series` in `topic` at each slice, and its
/// centered moving average. Samples from several chains can be chained
/// together; each one counts once.
pub fn smooth_topic_posterior<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    series: usize,
    topic: usize,
    window: usize,
) -> Result<TopicCurve> {
    if window == 0 {
        return Err(Error::InvalidParameter(
            "smoothing window must be positive".into(),
        ));
    }
    let mut hits: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for s in samples {
        let st = s
            .states
            .get(series)
            .ok_or_else(|| Error::Shape(format!("sample has no series {series}")))?;
        if n == 0 {
            hits = vec![0.0; st.d.len()];
        } else if st.d.len() != hits.len() {
            return Err(Error::Shape("samples disagree on series length".into()));
        }
        for (h, &d) in hits.iter_mut().zip(&st.d) {
            if d == topic {
                *h += 1.0;
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("no samples".into()));
    }
    let posterior: Vec<f64> = hits.iter().map(|h| h / n as f64).collect();
    let smoothed = centered_moving_average(&posterior, window);
    Ok(TopicCurve {
        posterior,
        smoothed,
    })
}

fn proportions<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    k: usize,
    pick: impl Fn(&crate::model::SeriesState) -> &[usize],
) -> Result<Vec<Vec<f64>>> {
    let mut acc: Vec<Vec<u64>> = Vec::new();
    let mut n = 0usize;
    for s in samples {
        if n == 0 {
            acc = vec![vec![0; k]; s.states.len()];
        } else if s.states.len() != acc.len() {
            return Err(Error::Shape(
                "samples cover different numbers of series".into(),
            ));
        }
        for (row, st) in acc.iter_mut().zip(&s.states) {
            for &v in pick(st) {
                let slot = row
                    .get_mut(v)
                    .ok_or_else(|| Error::Shape(format!("index {v} out of range {k}")))?;
                *slot += 1;
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("no samples".into()));
    }
    Ok(acc
        .into_iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if total == 0 {
                        0.0
                    } else {
                        c as f64 / total as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// Per-series mean topic indicator over samples and slices.
pub fn topic_proportion_features<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    n_topics: usize,
) -> Result<Vec<Vec<f64>>> {
    proportions(samples, n_topics, |st| &st.d)
}

/// Per-series mean word indicator over samples and slices.
pub fn word_proportion_features<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    n_words: usize,
) -> Result<Vec<Vec<f64>>> {
    proportions(samples, n_words, |st| &st.z)
}
