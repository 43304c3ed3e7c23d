//! Wilcoxon signed-rank and Kruskal-Wallis tests, and a least-squares line.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size for which the Wilcoxon p-value is computed exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Alternative: differences `after - before` tend to be positive.
    Greater,
    /// Alternative: differences tend to be negative.
    Less,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
    ChiSquared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Sample size after dropping zero differences, or the total over groups.
    pub n: usize,
    pub group_sizes: Vec<usize>,
    pub df: Option<usize>,
    pub tail: Tail,
    pub method: PMethod,
}

/// Midranks (1-based) of `values` and the sizes of tied groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Wilcoxon signed-rank test on `(before, after)` pairs.
///
/// The statistic is W+, the rank sum of positive `after - before`
/// differences. Zero differences are dropped. With at most
/// [`WILCOXON_EXACT_MAX_N`] remaining pairs the p-value comes from the exact
/// null distribution over sign assignments (midranks included); above that
/// from the tie-corrected normal approximation with continuity correction.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], tail: Tail) -> Result<TestResult> {
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::NonFinite("wilcoxon pairs"));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(b, a)| a - b).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "{n} nonzero differences, need at least 5"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let (p_greater, p_less, method) = if n <= WILCOXON_EXACT_MAX_N {
        let (ge, le) = exact_signed_rank_tails(&ranks, w_plus);
        (ge, le, PMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
        let sd = var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let ge = 1.0 - normal.cdf((w_plus - mean - 0.5) / sd);
        let le = normal.cdf((w_plus - mean + 0.5) / sd);
        (ge, le, PMethod::Normal)
    };
    let p = match tail {
        Tail::Greater => p_greater,
        Tail::Less => p_less,
        Tail::Two => 2.0 * p_greater.min(p_less),
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value: p.clamp(0.0, 1.0),
        n,
        group_sizes: vec![n],
        df: None,
        tail,
        method,
    })
}

/// `(P(W+ >= w), P(W+ <= w))` under the null, by dynamic programming over
/// doubled midranks (which are integers).
fn exact_signed_rank_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let ge: f64 = counts[w..].iter().sum();
    let le: f64 = counts[..=w].iter().sum();
    (ge / all, le / all)
}

/// Kruskal-Wallis H test with tie correction; p from chi-squared with
/// `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 groups".into()));
    }
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(Error::InsufficientData(format!("group {i} is empty")));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    if pooled.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kruskal-wallis groups"));
    }
    let n = pooled.len() as f64;
    let (ranks, ties) = midranks(&pooled);
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let df = groups.len() - 1;
    let correction = 1.0 - tie_term(&ties) / (n * n * n - n);
    let (h, p) = if correction <= 0.0 {
        (0.0, 1.0)
    } else {
        let h = ((12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0)) / correction).max(0.0);
        let chi = ChiSquared::new(df as f64).expect("positive df");
        (h, 1.0 - chi.cdf(h))
    };
    Ok(TestResult {
        statistic: h,
        p_value: p.clamp(0.0, 1.0),
        n: pooled.len(),
        group_sizes: groups.iter().map(Vec::len).collect(),
        df: Some(df),
        tail: Tail::Greater,
        method: PMethod::ChiSquared,
    })
}

/// Largest number of distinct group assignments [`kruskal_wallis_exact`]
/// will enumerate.
pub const KRUSKAL_EXACT_MAX_ASSIGNMENTS: f64 = 5e6;

/// Kruskal-Wallis H with its exact permutation p-value: the fraction of
/// distinct assignments of the pooled observations to groups of the same
/// sizes whose H is at least the observed one.
pub fn kruskal_wallis_exact(groups: &[Vec<f64>]) -> Result<TestResult> {
    let mut result = kruskal_wallis(groups)?;
    let sizes = result.group_sizes.clone();
    let mut assignments = 1.0;
    let mut left = result.n;
    for &s in &sizes {
        for i in 0..s {
            assignments *= (left - i) as f64 / (i + 1) as f64;
        }
        left -= s;
    }
    if assignments > KRUSKAL_EXACT_MAX_ASSIGNMENTS {
        return Err(Error::InvalidParameter(format!(
            "{assignments:.0} assignments exceed the exact enumeration limit"
        )));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let n = pooled.len() as f64;
    let correction = 1.0 - tie_term(&ties) / (n * n * n - n);
    if correction <= 0.0 {
        result.method = PMethod::Exact;
        return Ok(result);
    }
    // H is monotone in Σ R_i² / n_i, so compare that sum directly.
    let observed = {
        let mut offset = 0;
        let mut sum = 0.0;
        for &s in &sizes {
            let r: f64 = ranks[offset..offset + s].iter().sum();
            sum += r * r / s as f64;
            offset += s;
        }
        sum
    };
    let mut remaining = sizes.clone();
    let mut rank_sums = vec![0.0; sizes.len()];
    let (mut hits, mut total) = (0u64, 0u64);
    fn recurse(
        i: usize,
        ranks: &[f64],
        sizes: &[usize],
        remaining: &mut [usize],
        rank_sums: &mut [f64],
        observed: f64,
        hits: &mut u64,
        total: &mut u64,
    ) {
        if i == ranks.len() {
            let s: f64 = rank_sums.iter().zip(sizes).map(|(r, &n)| r * r / n as f64).sum();
            *total += 1;
            if s >= observed - 1e-9 * observed.abs().max(1.0) {
                *hits += 1;
            }
            return;
        }
        for g in 0..sizes.len() {
            if remaining[g] == 0 {
                continue;
            }
            remaining[g] -= 1;
            rank_sums[g] += ranks[i];
            recurse(i + 1, ranks, sizes, remaining, rank_sums, observed, hits, total);
            rank_sums[g] -= ranks[i];
            remaining[g] += 1;
        }
    }
    recurse(0, &ranks, &sizes, &mut remaining, &mut rank_sums, observed, &mut hits, &mut total);
    result.p_value = hits as f64 / total as f64;
    result.method = PMethod::Exact;
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

/// Ordinary least-squares line through `(x, y)` points.
pub fn linear_trend(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 points".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(LinearFit {
        intercept: my - slope * mx,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_six_pairs() {
        let pairs: Vec<_> = (1..=6).map(|i| (0.0, i as f64)).collect();
        let r = wilcoxon_signed_rank(&pairs, Tail::Greater).unwrap();
        assert_eq!(r.statistic, 21.0);
        assert!((r.p_value - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(r.method, PMethod::Exact);
    }

    #[test]
    fn symmetric_pairs_two_sided() {
        let pairs: Vec<_> = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0].iter().map(|d| (0.0, *d)).collect();
        let r = wilcoxon_signed_rank(&pairs, Tail::Two).unwrap();
        assert!(r.p_value > 0.9);
    }

    #[test]
    fn wilcoxon_errors() {
        assert!(matches!(
            wilcoxon_signed_rank(&[(1.0, 1.0); 8], Tail::Two),
            Err(Error::AllZeroDifferences)
        ));
        assert!(matches!(
            wilcoxon_signed_rank(&[(0.0, 1.0); 4], Tail::Two),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn large_sample_uses_normal() {
        let pairs: Vec<_> = (0..100).map(|i| (0.0, (i as f64) - 30.0)).collect();
        let r = wilcoxon_signed_rank(&pairs, Tail::Greater).unwrap();
        assert_eq!(r.method, PMethod::Normal);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn identical_groups() {
        let g = vec![1.0, 2.0, 3.0];
        let r = kruskal_wallis(&[g.clone(), g.clone(), g]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = kruskal_wallis(&[vec![5.0; 3], vec![5.0; 2]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn separated_groups() {
        let r = kruskal_wallis(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert!((r.statistic - 32.0 / 7.0).abs() < 1e-12);
        assert_eq!(r.df, Some(2));
        let exact = kruskal_wallis_exact(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert!((exact.p_value - 6.0 / 90.0).abs() < 1e-12);
        assert!(kruskal_wallis(&[vec![1.0], vec![]]).is_err());
        assert!(kruskal_wallis(&[vec![1.0]]).is_err());
    }

    #[test]
    fn fifty_groups_report_49_df() {
        let groups: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        assert_eq!(kruskal_wallis(&groups).unwrap().df, Some(49));
    }

    #[test]
    fn trend_line() {
        let pts: Vec<_> = (1..=50).map(|x| (x as f64, 0.97 - 4e-4 * x as f64)).collect();
        let f = linear_trend(&pts).unwrap();
        assert!((f.slope + 4e-4).abs() < 1e-12);
        assert!((f.intercept - 0.97).abs() < 1e-12);
    }
}
