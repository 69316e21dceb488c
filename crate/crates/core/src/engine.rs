//! N-agent stochastic market and Monte Carlo ensembles.
//!
//! Every period a random subset of the population trades among itself; all
//! other agents keep their targets and have their holdings marked to the new
//! price. Each trajectory draws from its own ChaCha8 stream, selected by the
//! trajectory index under the master seed, so an ensemble is bit-identical
//! whatever the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, AgentState, MarketParams, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("trajectory {trajectory}, period {period}: {source}")]
    Numerical {
        trajectory: u64,
        period: usize,
        #[source]
        source: ModelError,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

fn config_error(field: &'static str, reason: impl Into<String>) -> EngineError {
    EngineError::Config { field, reason: reason.into() }
}

/// How many and which agents trade in a period.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SelectionScheme {
    /// Exactly `m` agents, chosen uniformly without replacement.
    Fixed { m: usize },
    /// `m` uniform on `low..=high`, then an `m`-subset.
    UniformRange { low: usize, high: usize },
    /// Each of the `n` agents participates independently with probability `p`.
    Binomial { n: usize, p: f64 },
}

impl SelectionScheme {
    pub fn validate(&self, n_agents: usize) -> Result<(), EngineError> {
        match *self {
            Self::Fixed { m } if m == 0 || m > n_agents => {
                Err(config_error("scheme", format!("fixed m={m} must lie in 1..={n_agents}")))
            }
            Self::UniformRange { low, high } if low < 2 || high < low || high > n_agents => Err(config_error(
                "scheme",
                format!("uniform range {low}..={high} must satisfy 2 <= low <= high <= {n_agents}"),
            )),
            Self::Binomial { n, .. } if n != n_agents => {
                Err(config_error("scheme", format!("binomial n={n} must equal n_agents={n_agents}")))
            }
            Self::Binomial { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(config_error("scheme", format!("binomial p={p} must lie in [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Expected number of active agents per period.
    pub fn mean_active(&self) -> f64 {
        match *self {
            Self::Fixed { m } => m as f64,
            Self::UniformRange { low, high } => (low + high) as f64 / 2.0,
            Self::Binomial { n, p } => n as f64 * p,
        }
    }

    /// Draw the active set for one period into `out` (sorted ascending).
    pub fn select<R: Rng + ?Sized>(&self, n_agents: usize, rng: &mut R, out: &mut Vec<usize>) {
        out.clear();
        let m = match *self {
            Self::Fixed { m } => m,
            Self::UniformRange { low, high } => rng.random_range(low..=high),
            // independent inclusion == binomial count followed by a uniform subset
            Self::Binomial { n, p } => Binomial::new(n as u64, p).expect("validated p").sample(rng) as usize,
        };
        if m == n_agents {
            out.extend(0..n_agents);
        } else {
            out.extend(index::sample(rng, n_agents, m).iter());
            out.sort_unstable();
        }
    }
}

/// `fixed:M`, `uniform:LOW:HIGH` or `binomial:N:P`.
impl fmt::Display for SelectionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed { m } => write!(f, "fixed:{m}"),
            Self::UniformRange { low, high } => write!(f, "uniform:{low}:{high}"),
            Self::Binomial { n, p } => write!(f, "binomial:{n}:{p}"),
        }
    }
}

impl FromStr for SelectionScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let int = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
        match parts.as_slice() {
            ["fixed", m] => Ok(Self::Fixed { m: int(m)? }),
            ["uniform", low, high] => Ok(Self::UniformRange { low: int(low)?, high: int(high)? }),
            ["binomial", n, p] => Ok(Self::Binomial {
                n: int(n)?,
                p: p.parse().map_err(|e| format!("{p:?}: {e}"))?,
            }),
            _ => Err(format!("expected fixed:M, uniform:LOW:HIGH or binomial:N:P, got {s:?}")),
        }
    }
}

/// Initial population near the steady state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InitSpec {
    pub k_low: f64,
    pub k_high: f64,
    /// Bond dollars per agent.
    pub b0: f64,
    /// Relative perturbation of each target away from its balanced value.
    pub epsilon: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self { k_low: 0.2, k_high: 1.0, b0: 10.0, epsilon: 0.02 }
    }
}

impl InitSpec {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.k_low > 0.0 && self.k_high >= self.k_low && self.k_high.is_finite()) {
            return Err(config_error("k_low", "need 0 < k_low <= k_high"));
        }
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(config_error("b0", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(config_error("epsilon", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulationConfig {
    pub n_agents: usize,
    pub params: MarketParams,
    pub scheme: SelectionScheme,
    pub periods_per_year: usize,
    pub years: f64,
    pub burn_in_years: f64,
    pub n_trajectories: usize,
    pub master_seed: u64,
    pub init: InitSpec,
}

impl SimulationConfig {
    /// 500 agents, 200 periods a year, 4 years with 2 discarded, 2000 trajectories.
    pub fn desk(params: MarketParams, scheme: SelectionScheme) -> Self {
        Self {
            n_agents: 500,
            params,
            scheme,
            periods_per_year: 200,
            years: 4.0,
            burn_in_years: 2.0,
            n_trajectories: 2000,
            master_seed: 0,
            init: InitSpec::default(),
        }
    }

    /// 200,000 trajectories over 10 years.
    pub fn full_scale(self) -> Self {
        Self { n_trajectories: 200_000, years: 10.0, ..self }
    }

    pub fn n_periods(&self) -> usize {
        (self.years * self.periods_per_year as f64).round() as usize
    }

    pub fn burn_in_periods(&self) -> usize {
        (self.burn_in_years * self.periods_per_year as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_agents == 0 {
            return Err(config_error("n_agents", "must be positive"));
        }
        self.params
            .validate()
            .map_err(|e| config_error("params", e.to_string()))?;
        self.scheme.validate(self.n_agents)?;
        if self.periods_per_year == 0 {
            return Err(config_error("periods_per_year", "must be positive"));
        }
        if !(self.years > 0.0 && self.years.is_finite()) || self.n_periods() == 0 {
            return Err(config_error("years", "must cover at least one period"));
        }
        if !(self.burn_in_years >= 0.0 && self.burn_in_years < self.years) {
            return Err(config_error("burn_in_years", "must lie in [0, years)"));
        }
        if self.n_trajectories == 0 {
            return Err(config_error("n_trajectories", "must be positive"));
        }
        self.init.validate()
    }
}

/// Gross returns `P_n / P_{n-1}` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    pub trajectory: u64,
    pub master_seed: u64,
    pub returns: Vec<f64>,
}

/// All trajectories of a run, ordered by trajectory index.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub periods_per_year: usize,
    pub series: Vec<ReturnsSeries>,
}

impl Ensemble {
    pub fn n_trajectories(&self) -> usize {
        self.series.len()
    }

    pub fn n_periods(&self) -> usize {
        self.series.first().map_or(0, |s| s.returns.len())
    }

    /// Returns of every trajectory at the 0-based period index `period`.
    pub fn cross_section(&self, period: usize) -> impl Iterator<Item = f64> + '_ {
        self.series.iter().map(move |s| s.returns[period])
    }

    pub fn from_returns(periods_per_year: usize, rows: Vec<Vec<f64>>) -> Self {
        Self {
            periods_per_year,
            series: rows
                .into_iter()
                .enumerate()
                .map(|(i, returns)| ReturnsSeries { trajectory: i as u64, master_seed: 0, returns })
                .collect(),
        }
    }
}

/// Random stream of one trajectory: the master seed selects the key, the
/// trajectory index the ChaCha stream.
pub fn trajectory_rng(master_seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory);
    rng
}

/// Balanced agents with `k* ~ U[k_low, k_high]`, `b = b0`, `s = k* b0`, and
/// the target then perturbed to `k* (1 + d)` with `d ~ U[-epsilon, epsilon]`.
pub fn init_population<R: Rng + ?Sized>(n_agents: usize, init: &InitSpec, rng: &mut R) -> Vec<AgentState> {
    (0..n_agents)
        .map(|_| {
            let k_star = rng.random_range(init.k_low..=init.k_high);
            let delta = if init.epsilon > 0.0 {
                rng.random_range(-init.epsilon..=init.epsilon)
            } else {
                0.0
            };
            AgentState {
                k: k_star * (1.0 + delta),
                s: k_star * init.b0,
                b: init.b0,
            }
        })
        .collect()
}

/// `r * (alpha beta)^(m / 2N)`, the predicted stationary stock return.
pub fn rate_stock_n(params: &MarketParams, mean_active: f64, n_agents: usize) -> f64 {
    params.r * params.feedback_product().powf(mean_active / (2.0 * n_agents as f64))
}

/// Population of one trajectory.
///
/// Holdings are stored as stock units and bond units against the running
/// price and bond indices, so agents that sit out a period need no update.
#[derive(Debug, Clone)]
pub struct Market {
    params: MarketParams,
    scheme: SelectionScheme,
    targets: Vec<f64>,
    stock_units: Vec<f64>,
    bond_units: Vec<f64>,
    price: f64,
    bond_index: f64,
    period: usize,
    rng: ChaCha8Rng,
    active: Vec<usize>,
    scratch: Vec<AgentState>,
    fills: Vec<f64>,
}

impl Market {
    pub fn new(config: &SimulationConfig, trajectory: u64) -> Self {
        let mut rng = trajectory_rng(config.master_seed, trajectory);
        let agents = init_population(config.n_agents, &config.init, &mut rng);
        Self::from_agents(config.params, config.scheme, agents, rng)
    }

    pub fn from_agents(
        params: MarketParams,
        scheme: SelectionScheme,
        agents: Vec<AgentState>,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            params,
            scheme,
            targets: agents.iter().map(|a| a.k).collect(),
            stock_units: agents.iter().map(|a| a.s).collect(),
            bond_units: agents.iter().map(|a| a.b).collect(),
            price: 1.0,
            bond_index: 1.0,
            period: 0,
            rng,
            active: Vec::new(),
            scratch: Vec::new(),
            fills: Vec::new(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.targets.len()
    }

    /// Price relative to the initial price.
    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Agents who traded in the last period.
    pub fn last_active(&self) -> &[usize] {
        &self.active
    }

    pub fn agent(&self, i: usize) -> AgentState {
        AgentState {
            k: self.targets[i],
            s: self.stock_units[i] * self.price,
            b: self.bond_units[i] * self.bond_index,
        }
    }

    /// Current state of every agent, marked to the latest price.
    pub fn snapshot(&self) -> Vec<AgentState> {
        (0..self.n_agents()).map(|i| self.agent(i)).collect()
    }

    /// Run one trading period and return its gross stock return.
    pub fn step(&mut self) -> Result<f64, ModelError> {
        let n = self.n_agents();
        self.scheme.select(n, &mut self.rng, &mut self.active);

        let ratio = if self.active.is_empty() {
            self.params.r
        } else {
            self.scratch.clear();
            self.scratch.extend(self.active.iter().map(|&i| AgentState {
                k: self.targets[i],
                s: self.stock_units[i] * self.price,
                b: self.bond_units[i] * self.bond_index,
            }));
            model::trade_in_place(&mut self.scratch, &mut self.fills, &self.params)?
        };

        self.price *= ratio;
        self.bond_index *= self.params.r;
        self.period += 1;
        for (&i, agent) in self.active.iter().zip(&self.scratch) {
            self.targets[i] = agent.k;
            self.stock_units[i] = agent.s / self.price;
            self.bond_units[i] = agent.b / self.bond_index;
        }
        Ok(ratio)
    }
}

pub fn simulate_trajectory(config: &SimulationConfig, trajectory: u64) -> Result<ReturnsSeries, EngineError> {
    let mut market = Market::new(config, trajectory);
    let returns = (0..config.n_periods())
        .map(|period| {
            market.step().map_err(|source| EngineError::Numerical {
                trajectory,
                period: period + 1,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReturnsSeries {
        trajectory,
        master_seed: config.master_seed,
        returns,
    })
}

/// Simulate every trajectory on `workers` threads (all cores when `None`).
pub fn simulate_ensemble(config: &SimulationConfig, workers: Option<usize>) -> Result<Ensemble, EngineError> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| EngineError::Pool(e.to_string()))?;
    let series = pool.install(|| {
        (0..config.n_trajectories as u64)
            .into_par_iter()
            .map(|i| simulate_trajectory(config, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Ensemble {
        periods_per_year: config.periods_per_year,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> MarketParams {
        MarketParams::new(1.001, 4.0, 0.3).unwrap()
    }

    fn small(scheme: SelectionScheme) -> SimulationConfig {
        SimulationConfig {
            n_agents: 50,
            years: 1.0,
            burn_in_years: 0.5,
            n_trajectories: 8,
            ..SimulationConfig::desk(params(), scheme)
        }
    }

    #[test]
    fn scheme_round_trips_through_text() {
        for s in [
            SelectionScheme::Fixed { m: 40 },
            SelectionScheme::UniformRange { low: 2, high: 79 },
            SelectionScheme::Binomial { n: 500, p: 0.1 },
        ] {
            assert_eq!(s.to_string().parse::<SelectionScheme>().unwrap(), s);
        }
        assert!("fixed".parse::<SelectionScheme>().is_err());
        assert!("poisson:3".parse::<SelectionScheme>().is_err());
    }

    #[test]
    fn scheme_validation() {
        assert!(SelectionScheme::Fixed { m: 501 }.validate(500).is_err());
        assert!(SelectionScheme::Fixed { m: 0 }.validate(500).is_err());
        assert!(SelectionScheme::UniformRange { low: 1, high: 9 }.validate(500).is_err());
        assert!(SelectionScheme::UniformRange { low: 9, high: 2 }.validate(500).is_err());
        assert!(SelectionScheme::Binomial { n: 400, p: 0.1 }.validate(500).is_err());
        assert!(SelectionScheme::Binomial { n: 500, p: 1.5 }.validate(500).is_err());
        assert!(SelectionScheme::UniformRange { low: 2, high: 500 }.validate(500).is_ok());
    }

    #[test]
    fn fixed_full_population_selects_everyone() {
        let mut rng = trajectory_rng(1, 0);
        let mut out = Vec::new();
        SelectionScheme::Fixed { m: 30 }.select(30, &mut rng, &mut out);
        assert_eq!(out, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn selection_is_distinct() {
        let mut rng = trajectory_rng(2, 0);
        let mut out = Vec::new();
        for scheme in [
            SelectionScheme::Fixed { m: 17 },
            SelectionScheme::UniformRange { low: 2, high: 79 },
            SelectionScheme::Binomial { n: 500, p: 0.2 },
        ] {
            for _ in 0..100 {
                scheme.select(500, &mut rng, &mut out);
                assert!(out.windows(2).all(|w| w[0] < w[1]));
                assert!(out.iter().all(|&i| i < 500));
            }
        }
    }

    #[test]
    fn init_respects_perturbation_bound() {
        let init = InitSpec::default();
        let mut rng = trajectory_rng(3, 0);
        for a in init_population(1000, &init, &mut rng) {
            a.validate().unwrap();
            assert!((a.k / a.holdings_ratio() - 1.0).abs() <= 0.02 + 1e-12);
            assert!(a.holdings_ratio() >= 0.2 && a.holdings_ratio() <= 1.0);
            assert_eq!(a.b, 10.0);
        }
    }

    #[test]
    fn steady_state_population_returns_bond_rate() {
        let mut config = small(SelectionScheme::Fixed { m: 5 });
        config.init.epsilon = 0.0;
        let series = simulate_trajectory(&config, 0).unwrap();
        assert!(series.returns.iter().all(|&r| r == 1.001));
    }

    #[test]
    fn trajectories_depend_only_on_seed_and_index() {
        let config = small(SelectionScheme::Fixed { m: 5 });
        let a = simulate_trajectory(&config, 3).unwrap();
        let b = simulate_trajectory(&config, 3).unwrap();
        let c = simulate_trajectory(&config, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.returns, c.returns);
    }

    #[test]
    fn empty_active_set_grows_at_bond_rate() {
        let config = SimulationConfig {
            scheme: SelectionScheme::Binomial { n: 50, p: 0.0 },
            ..small(SelectionScheme::Fixed { m: 1 })
        };
        let series = simulate_trajectory(&config, 0).unwrap();
        assert!(series.returns.iter().all(|&r| r == 1.001));
    }

    #[test]
    fn rate_stock_n_values() {
        let p = params();
        assert_relative_eq!(rate_stock_n(&p, 500.0, 500), crate::two_agent::rate_stock(&p), max_relative = 1e-15);
        let neutral = MarketParams::new(1.002, 1.0, 1.0).unwrap();
        assert_eq!(rate_stock_n(&neutral, 37.0, 500), 1.002);
        let table2 = MarketParams::new(1.00035, 1.33, 0.8).unwrap();
        assert_relative_eq!(rate_stock_n(&table2, 40.0, 500), 1.00283, epsilon = 1e-4);
        assert_relative_eq!(rate_stock_n(&table2, 80.0, 500), 1.00532, epsilon = 1e-4);
    }

    #[test]
    fn config_validation() {
        let good = small(SelectionScheme::Fixed { m: 5 });
        assert!(good.validate().is_ok());
        assert!(SimulationConfig { burn_in_years: 1.0, ..good.clone() }.validate().is_err());
        assert!(SimulationConfig { n_trajectories: 0, ..good.clone() }.validate().is_err());
        assert!(SimulationConfig { scheme: SelectionScheme::Fixed { m: 51 }, ..good }.validate().is_err());
    }
}
