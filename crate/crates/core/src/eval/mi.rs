use crate::error::{Error, Result};
use crate::gibbs::{collect_counts, Sample};

/// Pointwise mutual information between words and topics, plus the topic
/// distribution given each word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTopicMi {
    /// `pmi[l][d]`; `-inf` where the pair was never observed.
    pub pmi: Vec<Vec<f64>>,
    /// `topic_given_word[l][d]`; NaN rows for words that never occur.
    pub topic_given_word: Vec<Vec<f64>>,
}

/// Pools word-start counts `m[d * L + l]` across samples.
pub fn pool_counts<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    n_topics: usize,
    n_words: usize,
) -> Vec<u64> {
    let mut total = vec![0u64; n_topics * n_words];
    for s in samples {
        let stats = collect_counts(&s.states, n_topics, n_words);
        for (t, m) in total.iter_mut().zip(&stats.m_dl) {
            *t += m;
        }
    }
    total
}

pub fn word_topic_mi(counts: &[u64], n_topics: usize, n_words: usize) -> Result<WordTopicMi> {
    if counts.len() != n_topics * n_words {
        return Err(Error::Shape(format!(
            "{} counts for {n_topics} topics and {n_words} words",
            counts.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyInput(
            "joint word-topic counts are all zero".into(),
        ));
    }
    let total = total as f64;
    let at = |d: usize, l: usize| counts[d * n_words + l] as f64;
    let p_topic: Vec<f64> = (0..n_topics)
        .map(|d| (0..n_words).map(|l| at(d, l)).sum::<f64>() / total)
        .collect();
    let word_mass: Vec<f64> = (0..n_words)
        .map(|l| (0..n_topics).map(|d| at(d, l)).sum())
        .collect();
    let pmi = (0..n_words)
        .map(|l| {
            (0..n_topics)
                .map(|d| {
                    let c = at(d, l);
                    if c == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        // log[p(d,l) / (p(d) p(l))] = log[c * total / (c_d * c_l)]
                        (c / total).ln() - p_topic[d].ln() - (word_mass[l] / total).ln()
                    }
                })
                .collect()
        })
        .collect();
    let topic_given_word = (0..n_words)
        .map(|l| (0..n_topics).map(|d| at(d, l) / word_mass[l]).collect())
        .collect();
    Ok(WordTopicMi {
        pmi,
        topic_given_word,
    })
}
