//! Label alignment between an inferred model and a known truth.

use crate::model::ArWord;

/// Minimum-cost assignment of each row to a distinct column (`rows <= cols`).
/// Returns the column chosen for every row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials and matching are 1-based, slot 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// For each true word, the inferred word with the closest coefficients under
/// a one-to-one matching.
pub fn match_words(truth: &[ArWord], inferred: &[ArWord]) -> Vec<usize> {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| {
            inferred
                .iter()
                .map(|w| {
                    t.coef
                        .iter()
                        .zip(w.coef.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    hungarian(&cost)
}

/// `table[a][b]` counts slices with label `a` in the first path set and `b`
/// in the second.
pub fn confusion(first: &[&[usize]], second: &[&[usize]], k1: usize, k2: usize) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; k2]; k1];
    for (x, y) in first.iter().zip(second) {
        for (&a, &b) in x.iter().zip(y.iter()) {
            table[a][b] += 1;
        }
    }
    table
}

/// For each true topic, the inferred topic it overlaps most under a
/// one-to-one matching.
pub fn match_topics(
    truth: &[&[usize]],
    inferred: &[&[usize]],
    k_true: usize,
    k_inferred: usize,
) -> Vec<usize> {
    let table = confusion(truth, inferred, k_true, k_inferred);
    let cost: Vec<Vec<f64>> = table
        .iter()
        .map(|r| r.iter().map(|&c| -(c as f64)).collect())
        .collect();
    hungarian(&cost)
}

/// Sample correlation; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
