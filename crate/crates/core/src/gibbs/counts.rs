use crate::model::SeriesState;

/// Count tensors aggregated from the latent assignments of every series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffStats {
    pub n_topics: usize,
    pub n_words: usize,
    /// `D x L` word starts per topic, row-major.
    pub m_dl: Vec<u64>,
    /// Per word `[stops, continues]` over topic-stable steps, keyed by the
    /// previous word.
    pub c_bar: Vec<[u64; 2]>,
    /// Per series `(D + 1) x D` transition counts, row 0 for the first step.
    pub trans_counts: Vec<Vec<u64>>,
    pub trans_totals: Vec<u64>,
}

impl SuffStats {
    pub fn zeros(n_topics: usize, n_words: usize, n_series: usize) -> Self {
        let tsize = (n_topics + 1) * n_topics;
        Self {
            n_topics,
            n_words,
            m_dl: vec![0; n_topics * n_words],
            c_bar: vec![[0; 2]; n_words],
            trans_counts: vec![vec![0; tsize]; n_series],
            trans_totals: vec![0; tsize],
        }
    }

    pub fn m(&self, d: usize, l: usize) -> u64 {
        self.m_dl[d * self.n_words + l]
    }

    /// Word starts summed over topics.
    pub fn word_totals(&self) -> Vec<u64> {
        (0..self.n_words)
            .map(|l| (0..self.n_topics).map(|d| self.m(d, l)).sum())
            .collect()
    }

    /// Adds another set of counts, appending its per-series tensors.
    pub fn merge(&mut self, other: &SuffStats) {
        assert_eq!(
            (self.n_topics, self.n_words),
            (other.n_topics, other.n_words)
        );
        self.m_dl
            .iter_mut()
            .zip(&other.m_dl)
            .for_each(|(a, b)| *a += b);
        for (a, b) in self.c_bar.iter_mut().zip(&other.c_bar) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.trans_totals
            .iter_mut()
            .zip(&other.trans_totals)
            .for_each(|(a, b)| *a += b);
        self.trans_counts.extend(other.trans_counts.iter().cloned());
    }
}

pub fn collect_counts(states: &[SeriesState], n_topics: usize, n_words: usize) -> SuffStats {
    let mut stats = SuffStats::zeros(n_topics, n_words, states.len());
    for (n, st) in states.iter().enumerate() {
        let tc = &mut stats.trans_counts[n];
        for s in 0..st.len() {
            let (d, z) = (st.d[s], st.z[s]);
            if !st.o[s] {
                stats.m_dl[d * n_words + z] += 1;
            }
            let row = if s == 0 { 0 } else { st.d[s - 1] + 1 };
            tc[row * n_topics + d] += 1;
            if s > 0 && st.d[s - 1] == d {
                stats.c_bar[st.z[s - 1]][usize::from(st.o[s])] += 1;
            }
        }
        for (t, c) in stats.trans_totals.iter_mut().zip(tc.iter()) {
            *t += c;
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Transitions;

    fn state(d: Vec<usize>, z: Vec<usize>, o: Vec<bool>, n_topics: usize) -> SeriesState {
        SeriesState {
            d,
            z,
            o,
            pi_n: Transitions::from_rows(vec![vec![1.0 / n_topics as f64; n_topics]; n_topics + 1])
                .unwrap(),
            labels: None,
        }
    }

    #[test]
    fn hand_enumerated_counts() {
        // one-based d=[1,1,2], z=[3,3,5], o=[0,1,0]
        let st = state(vec![0, 0, 1], vec![2, 2, 4], vec![false, true, false], 2);
        let s = collect_counts(&[st], 2, 5);
        assert_eq!(s.m(0, 2), 1);
        assert_eq!(s.m(1, 4), 1);
        assert_eq!(s.m_dl.iter().sum::<u64>(), 2);
        assert_eq!(s.c_bar[2], [0, 1]);
        assert_eq!(s.c_bar.iter().map(|c| c[0] + c[1]).sum::<u64>(), 1);
        let t = &s.trans_counts[0];
        assert_eq!(t[0], 1); // initial -> topic 0
        assert_eq!(t[2], 1); // topic 0 -> topic 0
        assert_eq!(t[2 + 1], 1); // topic 0 -> topic 1
        assert_eq!(t.iter().sum::<u64>(), 3);
        assert_eq!(&s.trans_totals, t);
    }

    #[test]
    fn empty_states() {
        let s = collect_counts(&[], 3, 4);
        assert!(s.m_dl.iter().all(|&c| c == 0));
        assert!(s.trans_counts.is_empty());
    }

    #[test]
    fn counts_are_additive() {
        let a = state(
            vec![0, 1, 1, 1],
            vec![0, 1, 1, 2],
            vec![false, false, true, false],
            2,
        );
        let b = state(vec![1, 1, 0], vec![2, 2, 0], vec![false, true, false], 2);
        let joint = collect_counts(&[a.clone(), b.clone()], 2, 3);
        let mut sum = collect_counts(&[a], 2, 3);
        sum.merge(&collect_counts(&[b], 2, 3));
        assert_eq!(joint, sum);
        assert_eq!(joint.trans_counts.len(), 2);
    }
}
