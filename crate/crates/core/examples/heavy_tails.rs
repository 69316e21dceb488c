//! How the participation scheme shapes the return distribution.
//!
//! A fixed or binomial number of traders gives nearly log-normal returns; a
//! uniformly random number gives heavier tails.
//!
//! `cargo run --release --example heavy_tails [trajectories]`

use adaptive_market::engine::{self, SelectionScheme, SimulationConfig};
use adaptive_market::model::MarketParams;
use adaptive_market::stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trajectories: usize = std::env::args().nth(1).map_or(Ok(500), |a| a.parse())?;
    let params = MarketParams::new(1.00035, 1.33, 0.8)?;
    let schemes = [
        SelectionScheme::Fixed { m: 40 },
        SelectionScheme::UniformRange { low: 2, high: 79 },
        SelectionScheme::Binomial { n: 500, p: 0.08 },
    ];

    println!("{:>18} {:>7} {:>8} {:>16}", "scheme", "mean m", "KS", "excess kurtosis");
    for scheme in schemes {
        let config = SimulationConfig {
            n_trajectories: trajectories,
            ..SimulationConfig::desk(params, scheme)
        };
        let ensemble = engine::simulate_ensemble(&config, None)?;
        let hist = stats::pooled_histogram(&ensemble, config.burn_in_periods(), Some(60))?;
        println!(
            "{:>18} {:>7.2} {:>8.4} {:>16.3}",
            scheme.to_string(),
            scheme.mean_active(),
            hist.ks_distance,
            hist.excess_kurtosis_log_returns
        );
    }
    Ok(())
}
