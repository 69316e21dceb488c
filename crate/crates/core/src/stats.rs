//! Ensemble statistics of simulated returns.
//!
//! Cross-sectional quantities (moments per period, autocorrelation from a
//! base period) treat the trajectories as independent draws of the process
//! at a fixed time. Pooled quantities (histogram, log-normal fit, summary
//! means) mix all post-burn-in periods of all trajectories, which is only
//! meaningful once the return process is stationary; see [`linear_trend`].
//!
//! Every reduction runs in a fixed order, so results do not depend on the
//! number of threads.

use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, LogNormal};
use thiserror::Error;

use crate::engine::Ensemble;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} trajectories, got {got}")]
    TooFewTrajectories { need: usize, got: usize },
    #[error("period {period} is outside the simulated range (0..{n_periods})")]
    PeriodOutOfRange { period: usize, n_periods: usize },
    #[error("no samples after burn-in")]
    EmptySample,
    #[error("degenerate sample: mean {mean}, variance {variance}")]
    Degenerate { mean: f64, variance: f64 },
    #[error("histogram needs at least 2 bins, got {0}")]
    TooFewBins(usize),
}

/// Central moments `(mean, m2, m3, m4)` with `1/n` normalisation, two passes.
fn central_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (m2, m3, m4) = xs.iter().fold((0.0, 0.0, 0.0), |(m2, m3, m4), &x| {
        let d = x - mean;
        let d2 = d * d;
        (m2 + d2, m3 + d2 * d, m4 + d2 * d2)
    });
    (mean, m2 / n, m3 / n, m4 / n)
}

/// Per-period moments across the ensemble.
///
/// `variance` is the unbiased sample variance; `skewness` and `kurtosis` are
/// the standardised third and fourth moments (raw kurtosis, 3 for a
/// Gaussian). They are `None` where the period has zero spread.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentsOverTime {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub skewness: Vec<Option<f64>>,
    pub kurtosis: Vec<Option<f64>>,
}

impl MomentsOverTime {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

pub fn moments_over_time(ensemble: &Ensemble) -> Result<MomentsOverTime, StatsError> {
    let n = ensemble.n_trajectories();
    if n < 4 {
        return Err(StatsError::TooFewTrajectories { need: 4, got: n });
    }
    let per_period: Vec<_> = (0..ensemble.n_periods())
        .into_par_iter()
        .map(|t| {
            let xs: Vec<f64> = ensemble.cross_section(t).collect();
            let (mean, m2, m3, m4) = central_moments(&xs);
            let variance = m2 * n as f64 / (n - 1) as f64;
            let shape = (m2 > 0.0).then(|| (m3 / m2.powf(1.5), m4 / (m2 * m2)));
            (mean, variance, shape)
        })
        .collect();
    Ok(MomentsOverTime {
        mean: per_period.iter().map(|p| p.0).collect(),
        variance: per_period.iter().map(|p| p.1).collect(),
        skewness: per_period.iter().map(|p| p.2.map(|s| s.0)).collect(),
        kurtosis: per_period.iter().map(|p| p.2.map(|s| s.1)).collect(),
    })
}

/// Pearson correlation, `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (sxy, sxx, syy) = xs.iter().zip(ys).fold((0.0, 0.0, 0.0), |(sxy, sxx, syy), (&x, &y)| {
        let (dx, dy) = (x - mx, y - my);
        (sxy + dx * dy, sxx + dx * dx, syy + dy * dy)
    });
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfResult {
    /// 0-based period index of `log R_{n0}`.
    pub base_period: usize,
    /// Correlation across trajectories of `log R_{n0}` and `log R_{n0 + lag}`.
    pub correlations: Vec<Option<f64>>,
}

/// Ensemble autocorrelation of log-returns from `base_period`, lags `0..=max_lag`.
pub fn ensemble_acf(ensemble: &Ensemble, base_period: usize, max_lag: usize) -> Result<AcfResult, StatsError> {
    let n = ensemble.n_trajectories();
    if n < 2 {
        return Err(StatsError::TooFewTrajectories { need: 2, got: n });
    }
    let last = base_period + max_lag;
    if last >= ensemble.n_periods() {
        return Err(StatsError::PeriodOutOfRange {
            period: last,
            n_periods: ensemble.n_periods(),
        });
    }
    let log_at = |t: usize| ensemble.cross_section(t).map(f64::ln).collect::<Vec<_>>();
    let base = log_at(base_period);
    let correlations = (0..=max_lag)
        .map(|lag| pearson(&base, &log_at(base_period + lag)))
        .collect();
    Ok(AcfResult {
        base_period,
        correlations,
    })
}

/// Log-normal distribution with a prescribed mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalFit {
    pub fn mean(&self) -> f64 {
        (self.mu + 0.5 * self.sigma * self.sigma).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        s2.exp_m1() * (2.0 * self.mu + s2).exp()
    }

    fn dist(&self) -> LogNormal {
        LogNormal::new(self.mu, self.sigma).expect("sigma > 0 by construction")
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.dist().pdf(x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.dist().cdf(x)
    }
}

/// `sigma^2 = ln(1 + var/mean^2)`, `mu = ln(mean) - sigma^2/2`.
pub fn lognormal_match(mean: f64, variance: f64) -> Result<LogNormalFit, StatsError> {
    if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
        return Err(StatsError::Degenerate { mean, variance });
    }
    let s2 = (variance / (mean * mean)).ln_1p();
    Ok(LogNormalFit {
        mu: mean.ln() - 0.5 * s2,
        sigma: s2.sqrt(),
    })
}

/// One-sample Kolmogorov–Smirnov distance of a sorted sample against a
/// continuous CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample Kolmogorov–Smirnov distance between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `m4 / m2^2 - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> Option<f64> {
    let (_, m2, _, m4) = central_moments(xs);
    (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0)
}

/// Linear-interpolated quantile of a sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

const MAX_AUTO_BINS: usize = 1000;

/// Freedman–Diaconis bin count, clamped to `2..=1000`.
pub fn freedman_diaconis_bins(sorted: &[f64]) -> usize {
    let n = sorted.len();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let range = sorted[n - 1] - sorted[0];
    if iqr <= 0.0 || range <= 0.0 {
        return 2;
    }
    let width = 2.0 * iqr / (n as f64).cbrt();
    ((range / width).ceil() as usize).clamp(2, MAX_AUTO_BINS)
}

/// Every return after the first `burn_in` periods, trajectory-major.
pub fn pooled_returns(ensemble: &Ensemble, burn_in: usize) -> Vec<f64> {
    ensemble
        .series
        .iter()
        .flat_map(|s| s.returns.get(burn_in..).unwrap_or(&[]).iter().copied())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramWithFit {
    /// `counts.len() + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub sample_size: usize,
    pub mean: f64,
    pub variance: f64,
    pub fit: LogNormalFit,
    pub ks_distance: f64,
    pub excess_kurtosis_log_returns: f64,
}

impl HistogramWithFit {
    pub fn empirical_density(&self) -> Vec<f64> {
        let n = self.sample_size as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
            .collect()
    }

    pub fn lognormal_density(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|e| self.fit.pdf(0.5 * (e[0] + e[1])))
            .collect()
    }
}

/// Histogram of a pooled sample with a moment-matched log-normal overlay.
/// `n_bins = None` picks the Freedman–Diaconis count.
pub fn histogram_with_fit(mut sample: Vec<f64>, n_bins: Option<usize>) -> Result<HistogramWithFit, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::EmptySample);
    }
    if let Some(b) = n_bins.filter(|&b| b < 2) {
        return Err(StatsError::TooFewBins(b));
    }
    sample.sort_by(f64::total_cmp);
    let n = sample.len();
    let (mean, m2, _, _) = central_moments(&sample);
    let variance = m2 * n as f64 / (n - 1) as f64;
    let fit = lognormal_match(mean, variance)?;

    let bins = n_bins.unwrap_or_else(|| freedman_diaconis_bins(&sample));
    let (lo, hi) = (sample[0], sample[n - 1]);
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &x in &sample {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }

    let logs: Vec<f64> = sample.iter().map(|x| x.ln()).collect();
    Ok(HistogramWithFit {
        edges,
        counts,
        sample_size: n,
        mean,
        variance,
        ks_distance: ks_distance(&sample, |x| fit.cdf(x)),
        excess_kurtosis_log_returns: excess_kurtosis(&logs).unwrap_or(0.0),
        fit,
    })
}

/// Pool the post-burn-in returns and fit them.
pub fn pooled_histogram(
    ensemble: &Ensemble,
    burn_in: usize,
    n_bins: Option<usize>,
) -> Result<HistogramWithFit, StatsError> {
    histogram_with_fit(pooled_returns(ensemble, burn_in), n_bins)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSummary {
    pub geometric_mean: f64,
    pub arithmetic_mean: f64,
    /// Sample standard deviation of the gross returns.
    pub std: f64,
    pub sample_size: usize,
}

pub fn mean_return_summary(ensemble: &Ensemble, burn_in: usize) -> Result<ReturnSummary, StatsError> {
    let pooled = pooled_returns(ensemble, burn_in);
    let n = pooled.len();
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    let (mean, m2, _, _) = central_moments(&pooled);
    let mean_log = pooled.iter().map(|x| x.ln()).sum::<f64>() / n as f64;
    let std = if n > 1 { (m2 * n as f64 / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(ReturnSummary {
        geometric_mean: mean_log.exp(),
        arithmetic_mean: mean,
        std,
        sample_size: n,
    })
}

/// Ordinary least-squares fit of `y` against its index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_std_error: f64,
}

impl TrendFit {
    /// `|slope| < z * standard error`.
    pub fn is_flat(&self, z: f64) -> bool {
        self.slope.abs() < z * self.slope_std_error
    }
}

pub fn linear_trend(ys: &[f64]) -> Option<TrendFit> {
    let n = ys.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = (nf - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / nf;
    let (sxx, sxy) = ys.iter().enumerate().fold((0.0, 0.0), |(sxx, sxy), (i, &y)| {
        let dx = i as f64 - mx;
        (sxx + dx * dx, sxy + dx * (y - my))
    });
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| (y - intercept - slope * i as f64).powi(2))
        .sum();
    Some(TrendFit {
        intercept,
        slope,
        slope_std_error: (ssr / (nf - 2.0) / sxx).sqrt(),
    })
}

/// Trend fits of the per-period mean and variance from `from` onwards.
pub fn stationarity(moments: &MomentsOverTime, from: usize) -> Option<(TrendFit, TrendFit)> {
    let mean = linear_trend(moments.mean.get(from..)?)?;
    let variance = linear_trend(moments.variance.get(from..)?)?;
    Some((mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_per_trajectory() -> Ensemble {
        let levels = [0.9, 1.0, 1.05, 1.2, 1.3];
        Ensemble::from_returns(200, levels.iter().map(|&c| vec![c; 6]).collect())
    }

    #[test]
    fn moments_of_constant_rows_are_flat() {
        let m = moments_over_time(&constant_per_trajectory()).unwrap();
        // brute force
        let xs = [0.9, 1.0, 1.05, 1.2, 1.3];
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        let m2 = var * 4.0 / 5.0;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / 5.0;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / 5.0;
        for t in 0..6 {
            assert_relative_eq!(m.mean[t], mean, max_relative = 1e-12);
            assert_relative_eq!(m.variance[t], var, max_relative = 1e-12);
            assert_relative_eq!(m.skewness[t].unwrap(), m3 / m2.powf(1.5), max_relative = 1e-12);
            assert_relative_eq!(m.kurtosis[t].unwrap(), m4 / (m2 * m2), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_spread_period_has_undefined_shape() {
        let e = Ensemble::from_returns(200, vec![vec![1.001; 3]; 5]);
        let m = moments_over_time(&e).unwrap();
        assert!(m.variance.iter().all(|&v| v == 0.0));
        assert!(m.skewness.iter().all(Option::is_none));
        assert!(m.kurtosis.iter().all(Option::is_none));
    }

    #[test]
    fn moments_need_four_trajectories() {
        let e = Ensemble::from_returns(200, vec![vec![1.0; 3]; 3]);
        assert_eq!(
            moments_over_time(&e),
            Err(StatsError::TooFewTrajectories { need: 4, got: 3 })
        );
    }

    #[test]
    fn lognormal_match_hand_values() {
        let fit = lognormal_match(2.0, 1.0).unwrap();
        assert_relative_eq!(fit.sigma * fit.sigma, 1.25f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(fit.sigma * fit.sigma, 0.22314, epsilon = 1e-5);
        assert_relative_eq!(fit.mu, 0.58157, epsilon = 1e-5);
        assert_relative_eq!(fit.mean(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.variance(), 1.0, max_relative = 1e-12);

        let tiny = lognormal_match(1.0, 1e-20).unwrap();
        assert!(tiny.mu.abs() < 1e-15 && tiny.sigma < 1e-9);
    }

    #[test]
    fn lognormal_match_rejects_degenerate() {
        assert!(lognormal_match(1.0, 0.0).is_err());
        assert!(lognormal_match(-1.0, 1.0).is_err());
    }

    #[test]
    fn acf_lag_zero_is_one_and_range_checked() {
        let rows = (0..10)
            .map(|i| (0..20).map(|t| 1.0 + 0.01 * ((i * 7 + t * 3) % 11) as f64).collect())
            .collect();
        let e = Ensemble::from_returns(200, rows);
        let acf = ensemble_acf(&e, 2, 5).unwrap();
        assert_relative_eq!(acf.correlations[0].unwrap(), 1.0, max_relative = 1e-12);
        assert!(ensemble_acf(&e, 15, 5).is_err());
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.5, 0.5, 0.9, 2.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
    }

    #[test]
    fn ks_against_uniform_cdf() {
        // sample at the quantile midpoints: distance is exactly 1/(2n)
        let n = 10;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert_relative_eq!(ks_distance(&sample, |x| x.clamp(0.0, 1.0)), 0.05, max_relative = 1e-12);
    }

    #[test]
    fn histogram_counts_and_bins() {
        let sample: Vec<f64> = (1..=100).map(|i| 1.0 + i as f64 / 1000.0).collect();
        let h = histogram_with_fit(sample, Some(7)).unwrap();
        assert_eq!(h.counts.len(), 7);
        assert_eq!(h.edges.len(), 8);
        assert_eq!(h.counts.iter().sum::<u64>(), 100);
        let area: f64 = h
            .empirical_density()
            .iter()
            .zip(h.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum();
        assert_relative_eq!(area, 1.0, max_relative = 1e-12);
        assert!(matches!(histogram_with_fit(vec![1.0, 2.0], Some(1)), Err(StatsError::TooFewBins(1))));
    }

    #[test]
    fn freedman_diaconis_on_uniform_grid() {
        // quartiles sit on nodes 31 and 93: iqr = 93^3 - 31^3 = 774566,
        // width = 2 * iqr / 5 = 309826.4, range 124^3 -> 6.15 -> 7 bins
        let sample: Vec<f64> = (0..125).map(|i| (i * i * i) as f64).collect();
        assert_eq!(freedman_diaconis_bins(&sample), 7);
    }

    #[test]
    fn trend_recovers_exact_line() {
        let ys: Vec<f64> = (0..50).map(|i| 2.0 + 0.5 * i as f64).collect();
        let fit = linear_trend(&ys).unwrap();
        assert_relative_eq!(fit.slope, 0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 2.0, max_relative = 1e-12);
        assert!(fit.slope_std_error < 1e-10);
        assert!(!fit.is_flat(2.0));
    }

    #[test]
    fn summary_of_constant_returns() {
        let e = Ensemble::from_returns(200, vec![vec![1.001; 10]; 4]);
        let s = mean_return_summary(&e, 5).unwrap();
        assert_relative_eq!(s.geometric_mean, 1.001, max_relative = 1e-14);
        assert_relative_eq!(s.arithmetic_mean, 1.001, max_relative = 1e-14);
        assert_eq!(s.sample_size, 20);
        assert!(mean_return_summary(&e, 10).is_err());
    }
}
