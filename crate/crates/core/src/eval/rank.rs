use crate::error::{Error, Result};
use crate::gibbs::Sample;

/// Health ranks (a permutation of `1..=N`, higher meaning more healthy) paired
/// with integer severity grades.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankInput {
    health_rank: Vec<usize>,
    grades: Vec<i64>,
}

impl RankInput {
    pub fn new(health_rank: Vec<usize>, grades: Vec<i64>) -> Result<Self> {
        let n = health_rank.len();
        if grades.len() != n {
            return Err(Error::Shape(format!(
                "{n} ranks but {} grades",
                grades.len()
            )));
        }
        let mut seen = vec![false; n];
        for &r in &health_rank {
            if r == 0 || r > n || seen[r - 1] {
                return Err(Error::InvalidParameter(format!(
                    "ranks must be a permutation of 1..={n}"
                )));
            }
            seen[r - 1] = true;
        }
        Ok(Self {
            health_rank,
            grades,
        })
    }

    pub fn health_rank(&self) -> &[usize] {
        &self.health_rank
    }

    pub fn grades(&self) -> &[i64] {
        &self.grades
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankScore {
    pub score: i64,
    /// Score of the ranking that orders series by grade.
    pub max: i64,
    /// `100 * score / max`; `None` when every grade is equal.
    pub percent: Option<f64>,
}

/// Weighted sum over ordered series: once the series are sorted by ascending
/// rank, the k-th of N contributes `G * (2k - N + 1)`.
fn ordered_sum(grades_in_order: impl Iterator<Item = i64>, n: usize) -> i64 {
    grades_in_order
        .enumerate()
        .map(|(k, g)| g * (2 * k as i64 - n as i64 + 1))
        .sum()
}

/// Sum over pairs with `H(n) > H(m)` of `G_n - G_m`.
pub fn rank_score(input: &RankInput) -> RankScore {
    let n = input.len();
    let mut by_rank = vec![0i64; n];
    for (g, &r) in input.grades.iter().zip(&input.health_rank) {
        by_rank[r - 1] = *g;
    }
    let score = ordered_sum(by_rank.into_iter(), n);
    let mut sorted = input.grades.clone();
    sorted.sort_unstable();
    let max = ordered_sum(sorted.into_iter(), n);
    RankScore {
        score,
        max,
        percent: (max != 0).then(|| 100.0 * score as f64 / max as f64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HealthRanking {
    /// Fraction of archived timesteps spent in the healthy topic.
    pub frequency: Vec<f64>,
    pub ranks: Vec<usize>,
}

/// Ranks series by their frequency of `healthy` across all samples. Ties go
/// to ingestion order: the earlier series gets the lower rank.
pub fn healthy_ranking<'a>(
    samples: impl IntoIterator<Item = &'a Sample>,
    healthy: usize,
) -> Result<HealthRanking> {
    let mut hits: Vec<u64> = Vec::new();
    let mut totals: Vec<u64> = Vec::new();
    let mut n_samples = 0usize;
    for sample in samples {
        if n_samples == 0 {
            hits = vec![0; sample.states.len()];
            totals = vec![0; sample.states.len()];
        } else if sample.states.len() != hits.len() {
            return Err(Error::Shape(
                "samples cover different numbers of series".into(),
            ));
        }
        for (i, st) in sample.states.iter().enumerate() {
            hits[i] += st.d.iter().filter(|&&d| d == healthy).count() as u64;
            totals[i] += st.d.len() as u64;
        }
        n_samples += 1;
    }
    if n_samples == 0 {
        return Err(Error::EmptyInput("no samples to rank".into()));
    }
    let frequency: Vec<f64> = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
        .collect();
    let mut order: Vec<usize> = (0..frequency.len()).collect();
    order.sort_by(|&a, &b| frequency[a].total_cmp(&frequency[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; frequency.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ok(HealthRanking { frequency, ranks })
}
