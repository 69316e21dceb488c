//! Ensemble moments over time, a trend test on them, and the autocorrelation
//! of log-returns after burn-in.

use adaptive_market::engine::{self, SelectionScheme, SimulationConfig};
use adaptive_market::model::MarketParams;
use adaptive_market::stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MarketParams::new(1.00035, 1.33, 0.8)?;
    let config = SimulationConfig {
        n_trajectories: 1000,
        ..SimulationConfig::desk(params, SelectionScheme::Fixed { m: 40 })
    };
    let ensemble = engine::simulate_ensemble(&config, None)?;
    let burn_in = config.burn_in_periods();

    let moments = stats::moments_over_time(&ensemble)?;
    println!("{:>6} {:>9} {:>10} {:>9} {:>9}", "period", "mean", "variance", "skew", "kurtosis");
    for t in (0..moments.len()).step_by(100) {
        println!(
            "{:>6} {:>9.5} {:>10.3e} {:>9.3} {:>9.3}",
            t + 1,
            moments.mean[t],
            moments.variance[t],
            moments.skewness[t].unwrap_or(f64::NAN),
            moments.kurtosis[t].unwrap_or(f64::NAN)
        );
    }
    if let Some((mean, var)) = stats::stationarity(&moments, burn_in) {
        println!("trend of mean:     t = {:+.2}", mean.slope / mean.slope_std_error);
        println!("trend of variance: t = {:+.2}", var.slope / var.slope_std_error);
    }

    let acf = stats::ensemble_acf(&ensemble, burn_in, 10)?;
    println!("\nlag  correlation  (noise band +-{:.3})", 4.0 / (config.n_trajectories as f64).sqrt());
    for (lag, c) in acf.correlations.iter().enumerate() {
        println!("{lag:>3}  {:+.4}", c.unwrap_or(f64::NAN));
    }
    Ok(())
}
