//! Estimation over string samples, serial correlation within sample sets,
//! coalescence summaries and the goodness-of-fit tests used by the
//! experiment suites.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::kernel::ChainState;
use crate::perfect::SampleSet;
use crate::unbiased::StringSample;

/// Summary of `g` over a collection of strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSummary {
    /// Mean of `g` at the first entry of each string.
    pub unadjusted: f64,
    /// Mean of the per-string weighted sums.
    pub adjusted: f64,
    /// Fraction of strings with more than one entry.
    pub prop_nu_gt1: f64,
    /// Holes per string.
    pub holes_per_sim: f64,
    /// Sample s.d. of the per-string weighted sums (NaN when `n = 1`).
    pub sd_weight_sum: f64,
    /// Sample s.d. of `g` at the first entries (NaN when `n = 1`).
    pub sd_unadjusted: f64,
    pub n: usize,
}

impl WeightedSummary {
    pub fn se_adjusted(&self) -> f64 {
        self.sd_weight_sum / (self.n as f64).sqrt()
    }

    pub fn se_unadjusted(&self) -> f64 {
        self.sd_unadjusted / (self.n as f64).sqrt()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn weighted_estimate<G: Fn(&ChainState) -> f64>(
    strings: &[StringSample],
    g: G,
) -> Result<WeightedSummary> {
    if strings.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = strings.iter().find(|s| s.weight_sum() != 1) {
        return Err(Error::Precondition(format!(
            "string weights sum to {}",
            bad.weight_sum()
        )));
    }
    let firsts: Vec<f64> = strings.iter().map(|s| g(s.first())).collect();
    let sums: Vec<f64> = strings.iter().map(|s| s.expectation(&g)).collect();
    let n = strings.len() as f64;
    let (unadjusted, sd_unadjusted) = mean_sd(&firsts);
    let (adjusted, sd_weight_sum) = mean_sd(&sums);
    let long = strings.iter().filter(|s| s.nu() > 1).count();
    let holes: usize = strings.iter().map(StringSample::holes).sum();
    Ok(WeightedSummary {
        unadjusted,
        adjusted: if long == 0 { unadjusted } else { adjusted },
        prop_nu_gt1: long as f64 / n,
        holes_per_sim: holes as f64 / n,
        sd_weight_sum,
        sd_unadjusted,
        n: strings.len(),
    })
}

/// Pooled lag-one correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetCorrelation {
    pub rho: f64,
    pub n_pairs: usize,
}

impl SetCorrelation {
    /// Large-sample standard error under near-independence.
    pub fn se(&self) -> f64 {
        1.0 / (self.n_pairs as f64).sqrt()
    }
}

fn pooled_correlation(series: &[Vec<f64>], pairs: &[(f64, f64)]) -> Result<SetCorrelation> {
    let count: usize = series.iter().map(Vec::len).sum();
    let mean = series.iter().flatten().sum::<f64>() / count as f64;
    let var = series.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
    if var.is_nan() || var <= 0.0 {
        return Err(Error::Undefined("correlation of constant values"));
    }
    let cov = pairs
        .iter()
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum::<f64>()
        / pairs.len() as f64;
    Ok(SetCorrelation {
        rho: (cov / var).clamp(-1.0, 1.0),
        n_pairs: pairs.len(),
    })
}

/// Lag-one correlation between consecutive values of each series, pooled
/// across series and centred at the global mean. Pairs never span series.
pub fn serial_correlation_values(series: &[Vec<f64>]) -> Result<SetCorrelation> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    if series.iter().any(|s| s.len() < 2) {
        return Err(invalid("every set needs at least two points"));
    }
    let pairs: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[0], w[1])))
        .collect();
    pooled_correlation(series, &pairs)
}

/// Correlation between the last value of each series and the first value of
/// the next one.
pub fn cross_set_correlation_values(series: &[Vec<f64>]) -> Result<SetCorrelation> {
    if series.len() < 2 {
        return Err(invalid("need at least two sets"));
    }
    if series.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput);
    }
    let pairs: Vec<(f64, f64)> = series
        .windows(2)
        .map(|w| (*w[0].last().unwrap(), w[1][0]))
        .collect();
    pooled_correlation(series, &pairs)
}

fn set_values<G: Fn(&ChainState) -> f64>(sets: &[SampleSet], g: G) -> Result<Vec<Vec<f64>>> {
    sets.iter()
        .map(|set| {
            if set.error {
                return Err(Error::Precondition(format!(
                    "set {} is error-flagged",
                    set.set_index
                )));
            }
            let points = set.single_points().ok_or_else(|| {
                Error::Precondition(format!("set {} contains strings", set.set_index))
            })?;
            Ok(points.into_iter().map(&g).collect())
        })
        .collect()
}

/// Within-set lag-one correlation of `g` over error-free sets of single points.
pub fn serial_correlation<G: Fn(&ChainState) -> f64>(
    sets: &[SampleSet],
    g: G,
) -> Result<SetCorrelation> {
    serial_correlation_values(&set_values(sets, g)?)
}

/// [`serial_correlation`] of one coordinate of continuous points.
pub fn serial_correlation_coordinate(sets: &[SampleSet], coordinate: usize) -> Result<SetCorrelation> {
    serial_correlation(sets, |s| s.coordinate(coordinate).unwrap_or(f64::NAN))
}

/// Correlation between the last point of each set and the first of the next.
pub fn cross_set_correlation<G: Fn(&ChainState) -> f64>(
    sets: &[SampleSet],
    g: G,
) -> Result<SetCorrelation> {
    cross_set_correlation_values(&set_values(sets, g)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceSummary {
    pub mean: f64,
    pub max: usize,
    /// `histogram[b]` counts chains that took `b` blocks.
    pub histogram: Vec<u64>,
    pub chains: usize,
}

/// Blocks-to-coalesce pooled over every chain of every set.
pub fn coalescence_summary(sets: &[SampleSet]) -> Result<CoalescenceSummary> {
    summarize_blocks(sets.iter().flat_map(|s| s.blocks_to_coalesce.iter().copied()))
}

pub fn summarize_blocks<I: IntoIterator<Item = usize>>(blocks: I) -> Result<CoalescenceSummary> {
    let mut histogram: Vec<u64> = Vec::new();
    let (mut total, mut chains) = (0u64, 0usize);
    for b in blocks {
        if histogram.len() <= b {
            histogram.resize(b + 1, 0);
        }
        histogram[b] += 1;
        total += b as u64;
        chains += 1;
    }
    if chains == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(CoalescenceSummary {
        mean: total as f64 / chains as f64,
        max: histogram.len() - 1,
        histogram,
        chains,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov limiting survival function `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    })
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Pearson chi-square test of observed counts against expected counts.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<TestResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(invalid("chi-square needs matching count vectors of length >= 2"));
    }
    if expected.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(invalid("expected counts must be positive"));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (*o as f64 - e) * (*o as f64 - e) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64)
        .map_err(|e| invalid(e.to_string()))?;
    Ok(TestResult {
        statistic,
        p_value: dist.sf(statistic),
    })
}

/// Standardized deviation of `successes / n` from `p`.
pub fn binomial_z(successes: u64, n: u64, p: f64) -> f64 {
    let nf = n as f64;
    (successes as f64 / nf - p) / (p * (1.0 - p) / nf).sqrt()
}
