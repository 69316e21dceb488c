//! Two agents pumping the stock: the return oscillates around r * sqrt(alpha * beta).
//!
//! `cargo run --release --example two_agent_pump [n_periods]`

use adaptive_market::two_agent::{self, TwoAgentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let config = TwoAgentConfig::oscillation_start(n);
    let run = two_agent::iterate_two_agent(&config)?;

    println!("period  gross return");
    for (i, g) in run.returns.iter().enumerate().take(12) {
        println!("{:>6}  {g:.5}", i + 1);
    }
    println!("   ...");

    let start = (n / 10).max(1) + 1;
    let tail = &run.returns[n.saturating_sub(200)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let sd = (tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (tail.len() - 1) as f64).sqrt();
    println!("geometric mean over periods {start}..={n}: {:.5}", run.geometric_mean(start..n + 1));
    println!("r * sqrt(alpha * beta):               {:.5}", two_agent::rate_stock(&config.params));
    println!("std of the last {} returns:          {sd:.4}", tail.len());
    println!("final targets: k1 = {:.3e}, k2 = {:.3e}", run.final_agents[0].k, run.final_agents[1].k);
    Ok(())
}
