//! Market microstructure shared by every experiment.
//!
//! Each agent holds dollars in a single stock and in a bond and wants the
//! ratio of the two to equal its target `k`. Over one trading period the
//! active agents post linear demand curves, the price is set where the
//! signed demands sum to zero, every active agent is rebalanced to its
//! target at that price, and then the target itself moves: sellers
//! multiply `k` by `alpha`, buyers by `beta`.
//!
//! Prices are always expressed relative to the previous period's price, so
//! `price_ratio` is the gross stock return of the period.

use thiserror::Error;

/// Fills smaller than this fraction of the two terms of the agent's demand
/// count as zero.
pub const ZERO_FILL_TOLERANCE: f64 = 1e-12;

/// Relative spread of zero-demand prices below which the active set is
/// treated as having coincident demand lines.
pub const COINCIDENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{field} must be a finite positive number, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("trading requires at least one active agent")]
    EmptyActiveSet,
    #[error("fill {fill} leaves a non-positive position (stock {stock}, bond {bond})")]
    InfeasibleFill { fill: f64, stock: f64, bond: f64 },
    #[error("non-finite clearing price {0}")]
    NonFinitePrice(f64),
}

fn positive(field: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::NonPositive { field, value })
    }
}

/// Exogenous bond return and the feedback multipliers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MarketParams {
    /// Per-period gross bond return.
    pub r: f64,
    /// Multiplier applied to a seller's target ratio.
    pub alpha: f64,
    /// Multiplier applied to a buyer's target ratio.
    pub beta: f64,
}

impl MarketParams {
    pub fn new(r: f64, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        Ok(Self {
            r: positive("r", r)?,
            alpha: positive("alpha", alpha)?,
            beta: positive("beta", beta)?,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        Self::new(self.r, self.alpha, self.beta).map(|_| ())
    }

    /// `alpha * beta`, the two-period drift factor of an agent's target.
    pub fn feedback_product(&self) -> f64 {
        self.alpha * self.beta
    }
}

/// One trader: target stock-to-bond ratio and dollar holdings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgentState {
    pub k: f64,
    pub s: f64,
    pub b: f64,
}

impl AgentState {
    pub fn new(k: f64, s: f64, b: f64) -> Result<Self, ModelError> {
        Ok(Self {
            k: positive("k", k)?,
            s: positive("s", s)?,
            b: positive("b", b)?,
        })
    }

    /// An agent whose holdings already match its target.
    pub fn balanced(k: f64, b: f64) -> Result<Self, ModelError> {
        Self::new(k, k * b, b)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        Self::new(self.k, self.s, self.b).map(|_| ())
    }

    /// Current stock-to-bond ratio of the holdings.
    pub fn holdings_ratio(&self) -> f64 {
        self.s / self.b
    }

    /// Price ratio at which this agent neither buys nor sells.
    pub fn zero_demand_price(&self, params: &MarketParams) -> f64 {
        params.r * self.k * self.b / self.s
    }

    /// Wealth marked at `price_ratio` after bonds accrue one period.
    pub fn marked_wealth(&self, price_ratio: f64, params: &MarketParams) -> f64 {
        price_ratio * self.s + params.r * self.b
    }
}

/// Result of one trading period over the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeOutcome {
    pub price_ratio: f64,
    /// Dollar amount bought (positive) or sold (negative), aligned with the input.
    pub fills: Vec<f64>,
    /// Settled and ratio-updated agents, aligned with the input.
    pub updated: Vec<AgentState>,
}

/// Dollar value of stock the agent wants to buy at `price_ratio`.
pub fn demand(agent: &AgentState, price_ratio: f64, params: &MarketParams) -> f64 {
    let (stock_term, bond_term) = demand_terms(agent, price_ratio, params);
    bond_term - stock_term
}

// Both terms stay of the order of the bond holdings even when `k` is huge or
// tiny; forming `r k b - P s` first would cancel catastrophically.
fn demand_terms(agent: &AgentState, price_ratio: f64, params: &MarketParams) -> (f64, f64) {
    let stock_share = 1.0 / (1.0 + agent.k);
    let bond_share = agent.k / (1.0 + agent.k);
    (agent.s * stock_share * price_ratio, params.r * agent.b * bond_share)
}

/// Price ratio at which the signed demands of `agents` sum to zero.
pub fn clearing_price(agents: &[AgentState], params: &MarketParams) -> Result<f64, ModelError> {
    if agents.is_empty() {
        return Err(ModelError::EmptyActiveSet);
    }
    let (bond_side, stock_side) = agents.iter().fold((0.0, 0.0), |(num, den), a| {
        let w = 1.0 / (1.0 + a.k);
        (num + a.b * (a.k * w), den + a.s * w)
    });
    let price = params.r * bond_side / stock_side;
    if price.is_finite() && price > 0.0 {
        Ok(price)
    } else {
        Err(ModelError::NonFinitePrice(price))
    }
}

/// Apply a fill at `price_ratio`: stock is marked to the price, bonds accrue,
/// and `fill` dollars move from bond to stock. `k` is left unchanged.
pub fn settle(
    agent: &AgentState,
    price_ratio: f64,
    fill: f64,
    params: &MarketParams,
) -> Result<AgentState, ModelError> {
    let stock = price_ratio * agent.s + fill;
    let bond = params.r * agent.b - fill;
    if stock > 0.0 && bond > 0.0 && stock.is_finite() && bond.is_finite() {
        Ok(AgentState { k: agent.k, s: stock, b: bond })
    } else {
        Err(ModelError::InfeasibleFill { fill, stock, bond })
    }
}

/// Adaptive feedback: sellers scale `k` by `alpha`, buyers by `beta`.
pub fn update_ratio(k: f64, fill: f64, params: &MarketParams) -> f64 {
    if fill < 0.0 {
        params.alpha * k
    } else if fill > 0.0 {
        params.beta * k
    } else {
        k
    }
}

/// Rebalance to the target at `price_ratio` without forming `price*s + fill`,
/// which cancels badly when `k` is far from one.
fn rebalanced(agent: &AgentState, price_ratio: f64, params: &MarketParams) -> AgentState {
    let wealth = agent.marked_wealth(price_ratio, params);
    let bond = wealth / (1.0 + agent.k);
    AgentState {
        k: agent.k,
        s: agent.k * bond,
        b: bond,
    }
}

fn coincident_price(agents: &[AgentState], params: &MarketParams) -> Option<f64> {
    let balanced = agents
        .iter()
        .all(|a| (a.k * a.b / a.s - 1.0).abs() <= COINCIDENT_TOLERANCE);
    if balanced {
        return Some(params.r);
    }
    let (lo, hi) = agents
        .iter()
        .map(|a| a.zero_demand_price(params))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
    (hi - lo <= COINCIDENT_TOLERANCE * hi).then_some(hi)
}

/// Clear, settle and update `agents` in place. Realised fills are written to
/// `fills` (cleared first); the period's gross stock return is returned.
pub fn trade_in_place(
    agents: &mut [AgentState],
    fills: &mut Vec<f64>,
    params: &MarketParams,
) -> Result<f64, ModelError> {
    fills.clear();
    if agents.is_empty() {
        return Err(ModelError::EmptyActiveSet);
    }

    if let Some(price) = coincident_price(agents, params) {
        for agent in agents.iter_mut() {
            agent.s *= price;
            agent.b *= params.r;
            fills.push(0.0);
        }
        return Ok(price);
    }

    let price = clearing_price(agents, params)?;
    for agent in agents.iter_mut() {
        let (stock_term, bond_term) = demand_terms(agent, price, params);
        let mut fill = bond_term - stock_term;
        if fill.abs() <= ZERO_FILL_TOLERANCE * (stock_term + bond_term) {
            fill = 0.0;
        }
        let settled = rebalanced(agent, price, params);
        *agent = AgentState {
            k: update_ratio(settled.k, fill, params),
            ..settled
        };
        fills.push(fill);
    }
    Ok(price)
}

/// One trading period over the active set.
pub fn trading_step(active: &[AgentState], params: &MarketParams) -> Result<TradeOutcome, ModelError> {
    let mut updated = active.to_vec();
    let mut fills = Vec::with_capacity(active.len());
    let price_ratio = trade_in_place(&mut updated, &mut fills, params)?;
    Ok(TradeOutcome {
        price_ratio,
        fills,
        updated,
    })
}
