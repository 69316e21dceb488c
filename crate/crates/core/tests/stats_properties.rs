use adaptive_market::engine::Ensemble;
use adaptive_market::stats;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

fn noise_ensemble(trajectories: usize, periods: usize, seed: u64) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = LogNormal::new(0.001, 0.05).unwrap();
    let rows = (0..trajectories)
        .map(|_| (0..periods).map(|_| dist.sample(&mut rng)).collect())
        .collect();
    Ensemble::from_returns(200, rows)
}

#[test]
fn moments_agree_with_naive_formulas() {
    let ens = noise_ensemble(9, 6, 1);
    let m = stats::moments_over_time(&ens).unwrap();
    for t in 0..6 {
        let xs: Vec<f64> = ens.series.iter().map(|s| s.returns[t]).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let c = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(m.mean[t], mean) < 1e-12);
        assert!(rel(m.variance[t], c(2) * n / (n - 1.0)) < 1e-12);
        assert!(rel(m.skewness[t].unwrap(), c(3) / c(2).powf(1.5)) < 1e-12);
        assert!(rel(m.kurtosis[t].unwrap(), c(4) / (c(2) * c(2))) < 1e-12);
    }
}

#[test]
fn white_noise_has_flat_autocorrelation() {
    let mc = 2000;
    let ens = noise_ensemble(mc, 60, 2);
    let acf = stats::ensemble_acf(&ens, 5, 50).unwrap();
    assert_eq!(acf.correlations[0], Some(1.0));
    let band = 4.0 / (mc as f64).sqrt();
    assert!(acf.correlations[1..].iter().all(|c| c.unwrap().abs() < band));
}

#[test]
fn autocorrelation_ignores_a_common_scale() {
    let ens = noise_ensemble(50, 20, 3);
    let a = stats::ensemble_acf(&ens, 2, 10).unwrap();
    let common: Ensemble = Ensemble {
        series: ens
            .series
            .iter()
            .map(|s| adaptive_market::engine::ReturnsSeries {
                returns: s.returns.iter().map(|r| r * 1.7).collect(),
                ..s.clone()
            })
            .collect(),
        ..ens.clone()
    };
    let c = stats::ensemble_acf(&common, 2, 10).unwrap();
    for (x, y) in a.correlations.iter().zip(&c.correlations) {
        assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn histogram_ignores_trajectory_order() {
    let ens = noise_ensemble(40, 30, 5);
    let mut shuffled = ens.clone();
    shuffled.series.reverse();
    shuffled.series.swap(3, 17);
    let a = stats::pooled_histogram(&ens, 10, Some(25)).unwrap();
    let b = stats::pooled_histogram(&shuffled, 10, Some(25)).unwrap();
    assert_eq!(a.counts, b.counts);
    assert_eq!(a.edges, b.edges);
    assert_eq!(a.counts.iter().sum::<u64>() as usize, 40 * 20);
}

#[test]
fn lognormal_sample_fits_its_moment_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dist = LogNormal::new(0.002, 0.06).unwrap();
    let sample: Vec<f64> = (0..1_000_000).map(|_| dist.sample(&mut rng)).collect();
    let hist = stats::histogram_with_fit(sample, None).unwrap();
    assert!(hist.ks_distance < 0.01, "{}", hist.ks_distance);
    assert!(hist.excess_kurtosis_log_returns.abs() < 0.02);
    assert!((hist.fit.sigma - 0.06).abs() < 1e-3 && (hist.fit.mu - 0.002).abs() < 1e-3);
    let area: f64 = hist
        .empirical_density()
        .iter()
        .zip(hist.edges.windows(2))
        .map(|(d, e)| d * (e[1] - e[0]))
        .sum();
    assert!((area - 1.0).abs() < 1e-9);
}

#[test]
fn lognormal_match_round_trips() {
    for &(mean, var) in &[(1.0, 0.01), (1.003, 3.2e-3), (2.5, 4.0), (0.9, 1e-8)] {
        let fit = stats::lognormal_match(mean, var).unwrap();
        assert!((fit.mean() - mean).abs() <= 1e-10 * mean);
        assert!((fit.variance() - var).abs() <= 1e-10 * var);
    }
}

#[test]
fn ks_distance_bounds() {
    let mut sorted: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
    sorted.sort_by(f64::total_cmp);
    let own = |x: f64| sorted.iter().filter(|&&y| y <= x).count() as f64 / sorted.len() as f64;
    // the one-sample form treats the CDF as continuous, so a step CDF leaves 1/n
    assert!((stats::ks_distance(&sorted, own) - 0.01).abs() < 1e-15);
    assert_eq!(stats::ks_distance(&sorted, |_| 0.0), 1.0);
    assert_eq!(stats::ks_two_sample(&sorted, &sorted), 0.0);
}
