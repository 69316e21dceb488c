//! Grid extremes of the two-agent amplification for several (alpha, beta) pairs.
//!
//! Prints the per-period amplification over k in [0.01, 100] next to the
//! two-period gain over k in [0.01, 10].

use adaptive_market::two_agent::{self, ScanSpec};

const PAIRS: [(f64, f64); 6] = [(4.0, 0.3), (1.33, 0.8), (3.01, 0.34), (2.0, 0.5), (5.0, 0.16), (2.01, 0.3)];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let r = 1.001;
    println!("{:>12} {:>7} | {:>8} {:>8} | {:>8} {:>8}", "(alpha,beta)", "ab", "min A", "max A", "min A^2", "max A^2");
    for (alpha, beta) in PAIRS {
        let per_period = two_agent::scan_amplification(&ScanSpec::default_grid(alpha, beta), r)?;
        let cycle = two_agent::scan_amplification(&ScanSpec::cycle_gain_grid(alpha, beta), r)?;
        println!(
            "{:>12} {:>7.4} | {:>8.4} {:>8.4} | {:>8.4} {:>8.4}",
            format!("({alpha},{beta})"),
            alpha * beta,
            per_period.min,
            per_period.max,
            cycle.min,
            cycle.max
        );
    }

    let best = two_agent::scan_amplification(&ScanSpec::cycle_gain_grid(4.0, 0.3), r)?;
    let [k1, k2, s1, s2] = best.argmax;
    println!("\nlargest gain for (4, 0.3) at k = ({k1:.3}, {k2:.3}), s = ({s1:.2}, {s2:.2})");
    Ok(())
}
