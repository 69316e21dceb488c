//! One trading period by hand: demands, clearing price, fills and new targets.

use adaptive_market::model::{self, AgentState, MarketParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = MarketParams::new(1.001, 4.0, 0.3)?;
    let agents = [
        AgentState::new(0.51, 5.0, 10.0)?,
        AgentState::new(0.79, 8.0, 10.0)?,
        AgentState::new(0.30, 4.0, 12.0)?,
    ];

    let price = model::clearing_price(&agents, &params)?;
    println!("clearing price ratio P/P0 = {price:.6}");

    let outcome = model::trading_step(&agents, &params)?;
    for (i, (before, after)) in agents.iter().zip(&outcome.updated).enumerate() {
        let fill = outcome.fills[i];
        let side = if fill > 0.0 { "buys" } else if fill < 0.0 { "sells" } else { "holds" };
        println!(
            "agent {i} {side:5} {:>8.4} of stock: k {:.3} -> {:.3}, s {:.3} -> {:.3}, b {:.3} -> {:.3}",
            fill.abs(),
            before.k,
            after.k,
            before.s,
            after.s,
            before.b,
            after.b
        );
    }
    println!("sum of fills = {:.3e}", outcome.fills.iter().sum::<f64>());
    Ok(())
}
