//! Mean return of the N-agent market against r * (alpha * beta)^(m / 2N).
//!
//! `cargo run --release --example fixed_m_formula [trajectories]`

use adaptive_market::engine::{self, SelectionScheme, SimulationConfig};
use adaptive_market::model::MarketParams;
use adaptive_market::stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trajectories: usize = std::env::args().nth(1).map_or(Ok(400), |a| a.parse())?;
    let params = MarketParams::new(1.00035, 1.33, 0.8)?;

    println!("{:>4} {:>10} {:>10} {:>9}", "m", "simulated", "formula", "gap");
    for m in [5, 10, 20, 40, 80] {
        let config = SimulationConfig {
            n_trajectories: trajectories,
            ..SimulationConfig::desk(params, SelectionScheme::Fixed { m })
        };
        let ensemble = engine::simulate_ensemble(&config, None)?;
        let summary = stats::mean_return_summary(&ensemble, config.burn_in_periods())?;
        let formula = engine::rate_stock_n(&params, m as f64, config.n_agents);
        println!(
            "{m:>4} {:>10.5} {formula:>10.5} {:>9.1e}",
            summary.geometric_mean,
            summary.geometric_mean - formula
        );
    }
    Ok(())
}
