//! Goodness-of-fit statistics used by the ensemble comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Bins whose expected count falls below this are pooled.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    fn new(statistic: f64, df: usize) -> Self {
        let p_value = if df == 0 {
            1.0
        } else {
            chi_square_sf(statistic, df)
        };
        Self {
            statistic,
            df,
            p_value,
        }
    }
}

/// Upper tail `P(X >= x)` of a chi-square with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(x)
}

/// Quantile of a chi-square with `df` degrees of freedom.
pub fn chi_square_quantile(p: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.inverse_cdf(p)
}

/// Assigns each bin to a retained bin. Bins with `weight >= threshold` are
/// retained; the rest go to the nearest retained bin, the lower one on ties.
/// Returns `None` when nothing reaches the threshold.
pub fn pool_bins(weights: &[f64], threshold: f64) -> Option<Vec<usize>> {
    let retained: Vec<usize> = (0..weights.len())
        .filter(|&i| weights[i] >= threshold)
        .collect();
    if retained.is_empty() {
        return None;
    }
    let assign = (0..weights.len())
        .map(|i| {
            let pos = retained.partition_point(|&r| r < i);
            match (pos.checked_sub(1).map(|p| retained[p]), retained.get(pos)) {
                (_, Some(&hi)) if hi == i => hi,
                (Some(lo), Some(&hi)) => {
                    if i - lo <= hi - i {
                        lo
                    } else {
                        hi
                    }
                }
                (Some(lo), None) => lo,
                (None, Some(&hi)) => hi,
                (None, None) => unreachable!(),
            }
        })
        .collect();
    Some(assign)
}

fn pooled(values: impl IntoIterator<Item = f64>, assign: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (v, &a) in values.into_iter().zip(assign) {
        out[a] += v;
    }
    out
}

fn as_f64(counts: &[u64]) -> impl Iterator<Item = f64> + '_ {
    counts.iter().map(|&c| c as f64)
}

/// Pearson chi-square of `observed` counts against `expected` probabilities,
/// pooling bins with expected count below [`MIN_EXPECTED_COUNT`].
/// `df = retained bins - 1`; fewer than two retained bins is an error.
pub fn pearson_chi_square(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest> {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let expected_counts: Vec<f64> = expected.iter().map(|p| p * n as f64).collect();
    let assign = pool_bins(&expected_counts, MIN_EXPECTED_COUNT).ok_or_else(|| {
        Error::InsufficientData(format!(
            "no bin reaches an expected count of {MIN_EXPECTED_COUNT}"
        ))
    })?;
    let k = observed.len();
    let obs = pooled(as_f64(observed), &assign, k);
    let exp = pooled(expected_counts.iter().copied(), &assign, k);
    let retained = (0..k).filter(|&i| assign[i] == i).count();
    if retained < 2 {
        return Err(Error::InsufficientData(
            "all expected mass falls in one bin; nothing to test".into(),
        ));
    }
    let statistic = (0..k)
        .filter(|&i| assign[i] == i)
        .map(|i| (obs[i] - exp[i]).powi(2) / exp[i])
        .sum();
    Ok(ChiSquareTest::new(statistic, retained - 1))
}

/// Two-sample chi-square homogeneity test between histograms over the same
/// bins. Bins with fewer than 10 combined counts are pooled; with a single
/// surviving bin the samples are trivially identical (`p = 1`).
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return ChiSquareTest::new(0.0, 0);
    }
    let combined: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64).collect();
    let assign = match pool_bins(&combined, 10.0) {
        Some(assign) => assign,
        None => (0..a.len()).map(|_| 0).collect(),
    };
    let k = a.len();
    let pa = pooled(as_f64(a), &assign, k);
    let pb = pooled(as_f64(b), &assign, k);
    let (ka, kb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let retained: Vec<usize> = (0..k)
        .filter(|&i| assign[i] == i && pa[i] + pb[i] > 0.0)
        .collect();
    let statistic = retained
        .iter()
        .map(|&i| (ka * pa[i] - kb * pb[i]).powi(2) / (pa[i] + pb[i]))
        .sum();
    ChiSquareTest::new(statistic, retained.len().saturating_sub(1))
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// `1 - e^{-rate x}`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = -(-rate * x).exp_m1();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).max(hi - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Asymptotic 0.1% critical value of the one-sample KS distance.
pub fn ks_critical_01pct(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}
