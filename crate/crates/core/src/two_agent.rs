//! Deterministic two-agent market.
//!
//! Iterating the map from an unbalanced start produces a return series that
//! oscillates around `r * sqrt(alpha * beta)`. The amplification function
//! measures the two-period return of one buy/sell cycle relative to the
//! bond, and [`scan_amplification`] takes its extremes over a grid.

use rayon::prelude::*;

use crate::model::{self, AgentState, MarketParams, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAgentConfig {
    pub agents: [AgentState; 2],
    pub params: MarketParams,
    pub n_periods: usize,
    /// Initial stock price.
    pub p0: f64,
}

impl TwoAgentConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        for a in &self.agents {
            a.validate()?;
        }
        if !(self.p0.is_finite() && self.p0 > 0.0) {
            return Err(ModelError::NonPositive { field: "p0", value: self.p0 });
        }
        if self.n_periods == 0 {
            return Err(ModelError::NonPositive { field: "n_periods", value: 0.0 });
        }
        Ok(())
    }

    /// Steady state `k = (0.5, 0.8)`, `b = 10`, `s = k b`, with the targets
    /// nudged by `+0.01` and `-0.01`; `r = 1.001`, `alpha = 4`, `beta = 0.3`.
    pub fn oscillation_start(n_periods: usize) -> Self {
        Self {
            agents: [
                AgentState { k: 0.51, s: 5.0, b: 10.0 },
                AgentState { k: 0.79, s: 8.0, b: 10.0 },
            ],
            params: MarketParams { r: 1.001, alpha: 4.0, beta: 0.3 },
            n_periods,
            p0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoAgentRun {
    /// `P_1 ..= P_n`.
    pub prices: Vec<f64>,
    /// `P_n / P_{n-1}` for each period.
    pub returns: Vec<f64>,
    pub final_agents: [AgentState; 2],
}

impl TwoAgentRun {
    /// Geometric mean of the returns in `periods` (1-based, inclusive start,
    /// exclusive end as with ranges).
    pub fn geometric_mean(&self, periods: std::ops::Range<usize>) -> f64 {
        let window = &self.returns[periods.start - 1..periods.end - 1];
        let mean_log = window.iter().map(|r| r.ln()).sum::<f64>() / window.len() as f64;
        mean_log.exp()
    }
}

pub fn iterate_two_agent(config: &TwoAgentConfig) -> Result<TwoAgentRun, ModelError> {
    config.validate()?;
    let mut agents = config.agents;
    let mut fills = Vec::with_capacity(2);
    let mut price = config.p0;
    let mut prices = Vec::with_capacity(config.n_periods);
    let mut returns = Vec::with_capacity(config.n_periods);
    for _ in 0..config.n_periods {
        let ratio = model::trade_in_place(&mut agents, &mut fills, &config.params)?;
        price *= ratio;
        prices.push(price);
        returns.push(ratio);
    }
    Ok(TwoAgentRun {
        prices,
        returns,
        final_agents: agents,
    })
}

/// Stationary per-period stock return of the two-agent market, `r * sqrt(alpha * beta)`.
pub fn rate_stock(params: &MarketParams) -> f64 {
    params.r * params.feedback_product().sqrt()
}

/// Two-period mean return relative to `r`, starting from balanced portfolios
/// (`b_i = s_i / k_i`). Agent 1 buys then sells, agent 2 the reverse.
pub fn amplification(k1: f64, k2: f64, s1: f64, s2: f64, alpha: f64, beta: f64, r: f64) -> f64 {
    // first period: targets already moved to (alpha k1, beta k2)
    let ka1 = alpha * k1;
    let ka2 = beta * k2;
    let w1 = s1 / (1.0 + ka1);
    let w2 = s2 / (1.0 + ka2);
    let p1 = r * (alpha * w1 + beta * w2) / (w1 + w2);

    let x1 = w1 * (r * alpha - p1);
    let sh1 = p1 * s1 + x1;
    let sh2 = p1 * s2 - x1;

    // second period: agent 1 now at beta*ka1, agent 2 at alpha*ka2
    let v1 = sh1 / (1.0 + beta * ka1);
    let v2 = sh2 / (1.0 + alpha * ka2);
    let p2 = r * (beta * v1 + alpha * v2) / (v1 + v2);

    (p1 * p2).sqrt() / r
}

/// Two-period price gain relative to the bond, `P~ / (P0 r^2)`; the square
/// of [`amplification`].
pub fn two_period_gain(k1: f64, k2: f64, s1: f64, s2: f64, alpha: f64, beta: f64, r: f64) -> f64 {
    amplification(k1, k2, s1, s2, alpha, beta, r).powi(2)
}

/// Quantity extremised by [`scan_amplification`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMeasure {
    /// Per-period mean return relative to `r`.
    #[default]
    Amplification,
    /// Return over the whole two-period cycle relative to `r^2`.
    TwoPeriodGain,
}

impl ScanMeasure {
    #[allow(clippy::too_many_arguments)]
    pub fn eval(self, k1: f64, k2: f64, s1: f64, s2: f64, alpha: f64, beta: f64, r: f64) -> f64 {
        match self {
            Self::Amplification => amplification(k1, k2, s1, s2, alpha, beta, r),
            Self::TwoPeriodGain => two_period_gain(k1, k2, s1, s2, alpha, beta, r),
        }
    }
}

impl std::str::FromStr for ScanMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "amplification" => Ok(Self::Amplification),
            "two_period_gain" => Ok(Self::TwoPeriodGain),
            other => Err(format!("expected amplification or two_period_gain, got {other:?}")),
        }
    }
}

impl std::fmt::Display for ScanMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Amplification => "amplification",
            Self::TwoPeriodGain => "two_period_gain",
        })
    }
}

/// Closed interval sampled at `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub low: f64,
    pub high: f64,
    pub points: usize,
    pub log_spaced: bool,
}

impl GridAxis {
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == 0 {
                    self.low
                } else if i == n - 1 {
                    self.high
                } else if self.log_spaced {
                    (self.low.ln() + t * (self.high.ln() - self.low.ln())).exp()
                } else {
                    self.low + t * (self.high - self.low)
                }
            })
            .collect()
    }

    /// Same interval with `factor - 1` extra nodes inserted in every gap, so
    /// that the original nodes are kept.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points: (self.points - 1) * factor.max(1) + 1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub k_axis: GridAxis,
    pub s_axis: GridAxis,
    pub alpha: f64,
    pub beta: f64,
    pub measure: ScanMeasure,
}

impl ScanSpec {
    /// `k` log-spaced over `[0.01, 100]` (60 nodes), `s` uniform over `[1, 100]` (30 nodes).
    pub fn default_grid(alpha: f64, beta: f64) -> Self {
        Self {
            k_axis: GridAxis { low: 0.01, high: 100.0, points: 60, log_spaced: true },
            s_axis: GridAxis { low: 1.0, high: 100.0, points: 30, log_spaced: false },
            alpha,
            beta,
            measure: ScanMeasure::Amplification,
        }
    }

    /// Two-period gain over `k` in `[0.01, 10]`, `s` in `[1, 100]`, same node counts.
    pub fn cycle_gain_grid(alpha: f64, beta: f64) -> Self {
        let base = Self::default_grid(alpha, beta);
        Self {
            k_axis: GridAxis { high: 10.0, ..base.k_axis },
            measure: ScanMeasure::TwoPeriodGain,
            ..base
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            k_axis: self.k_axis.refined(factor),
            s_axis: self.s_axis.refined(factor),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, axis) in [("k_range", self.k_axis), ("s_range", self.s_axis)] {
            if !(axis.low > 0.0 && axis.high >= axis.low && axis.high.is_finite()) {
                return Err(ModelError::NonPositive { field: name, value: axis.low });
            }
            if axis.points < 2 {
                return Err(ModelError::NonPositive { field: name, value: axis.points as f64 });
            }
        }
        MarketParams::new(1.0, self.alpha, self.beta).map(|_| ())
    }
}

/// Grid coordinates `(k1, k2, s1, s2)` of a scan extreme.
pub type ScanPoint = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanResult {
    pub min: f64,
    pub max: f64,
    pub argmin: ScanPoint,
    pub argmax: ScanPoint,
}

#[derive(Clone, Copy)]
struct Extremes {
    min: (f64, [usize; 4]),
    max: (f64, [usize; 4]),
}

impl Extremes {
    // ties go to the lexicographically smallest index tuple, which is also
    // the smallest coordinate tuple since the axes are increasing
    fn merge(self, other: Self) -> Self {
        let min = if other.min.0 < self.min.0 || (other.min.0 == self.min.0 && other.min.1 < self.min.1) {
            other.min
        } else {
            self.min
        };
        let max = if other.max.0 > self.max.0 || (other.max.0 == self.max.0 && other.max.1 < self.max.1) {
            other.max
        } else {
            self.max
        };
        Self { min, max }
    }
}

/// Exhaustive min/max of `spec.measure` over the grid.
pub fn scan_amplification(spec: &ScanSpec, r: f64) -> Result<ScanResult, ModelError> {
    spec.validate()?;
    let ks = spec.k_axis.nodes();
    let ss = spec.s_axis.nodes();
    let identity = Extremes {
        min: (f64::INFINITY, [usize::MAX; 4]),
        max: (f64::NEG_INFINITY, [usize::MAX; 4]),
    };
    let best = (0..ks.len())
        .into_par_iter()
        .map(|i1| {
            let mut acc = identity;
            for (i2, &k2) in ks.iter().enumerate() {
                for (j1, &s1) in ss.iter().enumerate() {
                    for (j2, &s2) in ss.iter().enumerate() {
                        let a = spec.measure.eval(ks[i1], k2, s1, s2, spec.alpha, spec.beta, r);
                        let idx = [i1, i2, j1, j2];
                        acc = acc.merge(Extremes { min: (a, idx), max: (a, idx) });
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(identity, Extremes::merge);

    let coords = |idx: [usize; 4]| [ks[idx[0]], ks[idx[1]], ss[idx[2]], ss[idx[3]]];
    Ok(ScanResult {
        min: best.min.0,
        max: best.max.0,
        argmin: coords(best.min.1),
        argmax: coords(best.max.1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steady_state_returns_bond_rate() {
        let config = TwoAgentConfig {
            agents: [AgentState::balanced(0.5, 10.0).unwrap(), AgentState::balanced(0.8, 10.0).unwrap()],
            n_periods: 50,
            ..TwoAgentConfig::oscillation_start(50)
        };
        let run = iterate_two_agent(&config).unwrap();
        assert!(run.returns.iter().all(|&r| r == 1.001));
    }

    #[test]
    fn neutral_feedback_balances_after_one_trade() {
        let config = TwoAgentConfig {
            params: MarketParams::new(1.001, 1.0, 1.0).unwrap(),
            ..TwoAgentConfig::oscillation_start(20)
        };
        let run = iterate_two_agent(&config).unwrap();
        assert_ne!(run.returns[0], 1.001);
        for r in &run.returns[1..] {
            assert_relative_eq!(*r, 1.001, max_relative = 1e-12);
        }
    }

    #[test]
    fn rate_stock_values() {
        assert_relative_eq!(
            rate_stock(&MarketParams::new(1.001, 4.0, 0.3).unwrap()),
            1.09654,
            epsilon = 1e-5
        );
        assert_eq!(rate_stock(&MarketParams::new(1.01, 1.0, 1.0).unwrap()), 1.01);
        assert_relative_eq!(
            rate_stock(&MarketParams::new(1.0, 5.0, 0.16).unwrap()),
            0.8f64.sqrt(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn neutral_amplification_is_one() {
        for &(k1, k2, s1, s2) in &[(0.5, 0.8, 5.0, 8.0), (0.01, 100.0, 1.0, 100.0), (3.0, 3.0, 7.0, 2.0)] {
            assert_relative_eq!(amplification(k1, k2, s1, s2, 1.0, 1.0, 1.003), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn amplification_matches_model_route() {
        // Chain the two periods through clearing_price/demand/settle with the
        // target assignments forced as in the derivation.
        let (k1, k2, s1, s2, alpha, beta, r) = (0.7, 2.5, 12.0, 40.0, 3.01, 0.34, 1.02);
        let params = MarketParams::new(r, alpha, beta).unwrap();
        let a1 = AgentState { k: alpha * k1, s: s1, b: s1 / k1 };
        let a2 = AgentState { k: beta * k2, s: s2, b: s2 / k2 };
        let p1 = model::clearing_price(&[a1, a2], &params).unwrap();
        let x1 = model::demand(&a1, p1, &params);
        let x2 = model::demand(&a2, p1, &params);
        assert!(x1 > 0.0);
        let mut h1 = model::settle(&a1, p1, x1, &params).unwrap();
        let mut h2 = model::settle(&a2, p1, x2, &params).unwrap();
        h1.k *= beta;
        h2.k *= alpha;
        let p2 = model::clearing_price(&[h1, h2], &params).unwrap();
        let expected = (p1 * p2).sqrt() / r;
        assert_relative_eq!(amplification(k1, k2, s1, s2, alpha, beta, r), expected, max_relative = 1e-12);
    }

    #[test]
    fn refined_axis_keeps_original_nodes() {
        let axis = GridAxis { low: 0.01, high: 100.0, points: 7, log_spaced: true };
        let fine = axis.refined(3).nodes();
        assert_eq!(fine.len(), 19);
        for (i, x) in axis.nodes().iter().enumerate() {
            assert_relative_eq!(fine[3 * i], *x, max_relative = 1e-14);
        }
    }

    #[test]
    fn neutral_scan_is_flat() {
        let spec = ScanSpec {
            k_axis: GridAxis { low: 0.01, high: 100.0, points: 8, log_spaced: true },
            s_axis: GridAxis { low: 1.0, high: 100.0, points: 5, log_spaced: false },
            alpha: 1.0,
            beta: 1.0,
            measure: ScanMeasure::Amplification,
        };
        let out = scan_amplification(&spec, 1.0).unwrap();
        assert_relative_eq!(out.min, 1.0, max_relative = 1e-14);
        assert_relative_eq!(out.max, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn scan_rejects_degenerate_grid() {
        let mut spec = ScanSpec::default_grid(4.0, 0.3);
        spec.s_axis.points = 1;
        assert!(scan_amplification(&spec, 1.0).is_err());
    }
}
