//! The same seed gives bit-identical ensembles on any number of threads, and
//! a single trajectory can be regenerated on its own.

use adaptive_market::engine::{self, SelectionScheme, SimulationConfig};
use adaptive_market::model::MarketParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MarketParams::new(1.001, 4.0, 0.3)?;
    let config = SimulationConfig {
        n_trajectories: 64,
        years: 1.0,
        burn_in_years: 0.5,
        master_seed: 2024,
        ..SimulationConfig::desk(params, SelectionScheme::UniformRange { low: 2, high: 39 })
    };

    let reference = engine::simulate_ensemble(&config, Some(1))?;
    for workers in [2, 3, 8] {
        let other = engine::simulate_ensemble(&config, Some(workers))?;
        println!("{workers} workers identical to 1 worker: {}", other == reference);
    }

    let alone = engine::simulate_trajectory(&config, 17)?;
    println!("trajectory 17 regenerated alone matches: {}", alone == reference.series[17]);

    let reseeded = engine::simulate_ensemble(&SimulationConfig { master_seed: 2025, ..config }, None)?;
    println!("a different seed changes the paths: {}", reseeded != reference);
    Ok(())
}
