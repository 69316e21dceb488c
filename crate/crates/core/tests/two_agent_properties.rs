use adaptive_market::two_agent::{self, amplification, ScanMeasure, ScanSpec, TwoAgentConfig};
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn amplification_ignores_bond_rate_and_stock_scale(
        k1 in log_uniform(0.01, 100.0),
        k2 in log_uniform(0.01, 100.0),
        s1 in 1.0f64..100.0,
        s2 in 1.0f64..100.0,
        alpha in 0.5f64..5.0,
        beta in 0.1f64..1.5,
        r in 0.9f64..1.1,
        c in log_uniform(1e-3, 1e3),
    ) {
        let a = amplification(k1, k2, s1, s2, alpha, beta, 1.001);
        let tol = 1e-10 * a;
        prop_assert!((amplification(k1, k2, s1, s2, alpha, beta, r) - a).abs() <= tol);
        prop_assert!((amplification(k1, k2, c * s1, c * s2, alpha, beta, 1.001) - a).abs() <= tol);
    }
}

#[test]
fn refined_grid_envelope_contains_coarse_one() {
    let coarse_spec = ScanSpec {
        k_axis: adaptive_market::two_agent::GridAxis { points: 12, ..ScanSpec::default_grid(4.0, 0.3).k_axis },
        s_axis: adaptive_market::two_agent::GridAxis { points: 6, ..ScanSpec::default_grid(4.0, 0.3).s_axis },
        ..ScanSpec::default_grid(4.0, 0.3)
    };
    for measure in [ScanMeasure::Amplification, ScanMeasure::TwoPeriodGain] {
        let spec = ScanSpec { measure, ..coarse_spec };
        let coarse = two_agent::scan_amplification(&spec, 1.001).unwrap();
        let fine = two_agent::scan_amplification(&spec.refined(3), 1.001).unwrap();
        assert!(fine.min <= coarse.min && fine.max >= coarse.max);
    }
}

#[test]
fn neutral_feedback_has_unit_envelope() {
    let spec = ScanSpec::default_grid(1.0, 1.0);
    let res = two_agent::scan_amplification(&spec, 1.001).unwrap();
    assert!((res.min - 1.0).abs() < 1e-12 && (res.max - 1.0).abs() < 1e-12);
}

#[test]
fn perturbed_pair_keeps_oscillating_at_the_predicted_rate() {
    let config = TwoAgentConfig::oscillation_start(600);
    let run = two_agent::iterate_two_agent(&config).unwrap();
    let rate = two_agent::rate_stock(&config.params);
    assert!((run.geometric_mean(101..601) - rate).abs() < 1e-3);
    // alternating up and down moves around the rate
    let tail = &run.returns[500..];
    assert!(tail.windows(2).all(|w| (w[0] - rate) * (w[1] - rate) < 0.0));
}
