//! Slow, obviously-correct reference computations for tests. Nothing here
//! depends on the crates under test.

/// Midrank of every value by direct counting (1-based).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|x| {
            let below = values.iter().filter(|y| *y < x).count() as f64;
            let equal = values.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedRankOracle {
    pub w_plus: f64,
    pub p_greater: f64,
    pub p_less: f64,
    pub n: usize,
}

impl SignedRankOracle {
    pub fn p_two_sided(&self) -> f64 {
        (2.0 * self.p_greater.min(self.p_less)).min(1.0)
    }
}

/// Wilcoxon signed-rank statistic and tail probabilities by enumerating all
/// 2^n sign assignments of the nonzero differences.
pub fn signed_rank(diffs: &[f64]) -> SignedRankOracle {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    assert!(n <= 20, "enumeration oracle limited to 20 differences");
    let ranks = midranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut ge, mut le) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if w >= w_plus - 1e-9 {
            ge += 1;
        }
        if w <= w_plus + 1e-9 {
            le += 1;
        }
    }
    let total = (1u64 << n) as f64;
    SignedRankOracle {
        w_plus,
        p_greater: ge as f64 / total,
        p_less: le as f64 / total,
        n,
    }
}

/// Kruskal-Wallis H as the between-group share of rank variance,
/// `(N - 1) Σ n_i (r̄_i - r̄)² / Σ (r_ij - r̄)²`, which carries the tie
/// correction implicitly. Returns 0 when all values are tied.
pub fn kruskal_h(groups: &[Vec<f64>]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = midranks(&pooled);
    let n = pooled.len() as f64;
    let grand = (n + 1.0) / 2.0;
    let total: f64 = ranks.iter().map(|r| (r - grand).powi(2)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut offset = 0;
    let mut between = 0.0;
    for g in groups {
        let m = ranks[offset..offset + g.len()].iter().sum::<f64>() / g.len() as f64;
        between += g.len() as f64 * (m - grand).powi(2);
        offset += g.len();
    }
    (n - 1.0) * between / total
}

/// Exact permutation p-value of Kruskal-Wallis H: every labeling of the
/// pooled observations with `k` group labels is enumerated and those with
/// the original group sizes are kept.
pub fn kruskal_exact_p(groups: &[Vec<f64>]) -> f64 {
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let k = sizes.len();
    let n = pooled.len();
    assert!((k as f64).powi(n as i32) <= 2e7, "enumeration too large");
    let observed = kruskal_h(groups);
    let (mut hits, mut total) = (0u64, 0u64);
    let mut labels = vec![0usize; n];
    loop {
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts == sizes {
            let regrouped: Vec<Vec<f64>> = (0..k)
                .map(|g| (0..n).filter(|&i| labels[i] == g).map(|i| pooled[i]).collect())
                .collect();
            total += 1;
            if kruskal_h(&regrouped) >= observed - 1e-9 {
                hits += 1;
            }
        }
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    hits as f64 / total as f64
}

/// Magnitude of an ideal order-`order` Butterworth high-pass at `f`.
pub fn butterworth_highpass_gain(order: u32, cutoff_hz: f64, f: f64) -> f64 {
    (1.0 / (1.0 + (cutoff_hz / f).powi(2 * order as i32))).sqrt()
}

/// Gain of a filter at `f` measured by driving it with a unit sinusoid for
/// `settle_s + measure_s` seconds and comparing output to input RMS over the
/// final `measure_s` seconds.
pub fn measured_gain(
    mut filter: impl FnMut(&mut [f64]),
    f: f64,
    sample_rate_hz: f64,
    settle_s: f64,
    measure_s: f64,
) -> f64 {
    let settle = (settle_s * sample_rate_hz) as usize;
    // A whole number of periods keeps the RMS exact.
    let periods = (measure_s * f).ceil().max(1.0);
    let measure = (periods / f * sample_rate_hz).round() as usize;
    let mut x: Vec<f64> = (0..settle + measure)
        .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / sample_rate_hz).sin())
        .collect();
    let input_rms = (x[settle..].iter().map(|v| v * v).sum::<f64>() / measure as f64).sqrt();
    filter(&mut x);
    let output_rms = (x[settle..].iter().map(|v| v * v).sum::<f64>() / measure as f64).sqrt();
    output_rms / input_rms
}

/// Label chosen by counting votes: the label with more than half of the
/// buffer, or `fallback`.
pub fn majority_label(buffer: &[usize], fallback: usize) -> usize {
    for &candidate in buffer {
        let count = buffer.iter().filter(|&&b| b == candidate).count();
        if 2 * count > buffer.len() {
            return candidate;
        }
    }
    fallback
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_sanity() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
        let o = signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(o.p_greater, 1.0 / 64.0);
        let h = kruskal_h(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert!((h - 32.0 / 7.0).abs() < 1e-12);
        assert!((kruskal_exact_p(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]) - 6.0 / 90.0).abs() < 1e-12);
        assert!((butterworth_highpass_gain(4, 120.0, 120.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(majority_label(&[1, 2, 1], 0), 1);
        assert_eq!(majority_label(&[1, 2, 3], 0), 0);
    }
}
