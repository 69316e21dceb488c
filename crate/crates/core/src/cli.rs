//! Command-line experiments: `two-agent`, `scan-a` and `simulate`.
//!
//! Each subcommand reads an optional `key = value` file, then applies
//! `--paper-scale`, then any `--<key> VALUE` flag, then the common `--seed`
//! and `--trajectories` shortcuts. The fully resolved configuration is written
//! next to the outputs as `resolved.conf` and inside `manifest.json`, so either
//! file alone reproduces the run.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure during the run.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};
use thiserror::Error;

use crate::config::{ConfigError, KvConfig};
use crate::engine::{self, EngineError, InitSpec, SelectionScheme, SimulationConfig};
use crate::model::{AgentState, MarketParams, ModelError};
use crate::output::{self, RunManifest, ScanRow, SummaryRow};
use crate::stats::{self, StatsError};
use crate::two_agent::{self, GridAxis, ScanMeasure, ScanSpec, TwoAgentConfig};

pub const TWO_AGENT_KEYS: &[(&str, &str)] = &[
    ("r", "bond gross return per period (required)"),
    ("alpha", "target multiplier after selling stock (required)"),
    ("beta", "target multiplier after buying stock (required)"),
    ("k1", "agent 1 target ratio (required)"),
    ("s1", "agent 1 stock dollars (required)"),
    ("b1", "agent 1 bond dollars (required)"),
    ("k2", "agent 2 target ratio (required)"),
    ("s2", "agent 2 stock dollars (required)"),
    ("b2", "agent 2 bond dollars (required)"),
    ("p0", "initial price [1]"),
    ("n_periods", "periods to iterate [1000]"),
    ("transient", "periods excluded from the reported mean [100]"),
];

pub const SCAN_KEYS: &[(&str, &str)] = &[
    ("r", "bond gross return; the measure does not depend on it [1.001]"),
    ("alpha", "single alpha, used with beta when pairs is absent"),
    ("beta", "single beta"),
    ("pairs", "semicolon-separated alpha:beta list, e.g. `4:0.3; 2:0.5`"),
    ("k_low", "lower end of the k axis [0.01]"),
    ("k_high", "upper end of the k axis [100]"),
    ("k_points", "log-spaced nodes on the k axis [60]"),
    ("s_low", "lower end of the s axis [1]"),
    ("s_high", "upper end of the s axis [100]"),
    ("s_points", "uniform nodes on the s axis [30]"),
    ("refine", "insert refine-1 extra nodes between grid nodes [1]"),
    ("measure", "amplification or two_period_gain [amplification]"),
];

pub const SIMULATE_KEYS: &[(&str, &str)] = &[
    ("n_agents", "population size (required)"),
    ("r", "bond gross return per period (required)"),
    ("alpha", "target multiplier after selling stock (required)"),
    ("beta", "target multiplier after buying stock (required)"),
    ("scheme", "fixed:M, uniform:LOW:HIGH or binomial:N:P (required)"),
    ("periods_per_year", "trading periods per year [200]"),
    ("years", "simulated years [4]"),
    ("burn_in_years", "years discarded before statistics [2]"),
    ("n_trajectories", "Monte Carlo trajectories [2000]"),
    ("master_seed", "seed of all random streams [0]"),
    ("k_low", "lower end of the initial target range [0.2]"),
    ("k_high", "upper end of the initial target range [1]"),
    ("b0", "initial bond dollars per agent [10]"),
    ("epsilon", "relative perturbation of initial targets [0.02]"),
    ("n_bins", "histogram bins [Freedman-Diaconis]"),
    ("acf_max_lag", "largest autocorrelation lag [50]"),
    ("acf_base_period", "1-based base period of the autocorrelation [first after burn-in]"),
];

const FULL_TRAJECTORIES: usize = 200_000;
const FULL_YEARS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self::Io(std::io::Error::other(e.to_string())),
            other => Self::Config(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config { .. } => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

fn invalid(field: &str, value: impl ToString, reason: impl ToString) -> CliError {
    CliError::Config(
        ConfigError::Invalid {
            field: field.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
        .to_string(),
    )
}

fn model_config_error(e: ModelError) -> CliError {
    CliError::Config(e.to_string())
}

fn keyed(name: &'static str, about: &'static str, keys: &'static [(&'static str, &'static str)]) -> Command {
    let mut cmd = Command::new(name)
        .about(about)
        .arg(Arg::new("config").long("config").value_name("PATH").help("key = value configuration file"))
        .arg(Arg::new("seed").long("seed").value_name("U64").help("master seed, overrides master_seed"))
        .arg(Arg::new("out").long("out").value_name("DIR").default_value("out").help("output directory"))
        .arg(Arg::new("workers").long("workers").value_name("N").help("worker threads [all cores]"))
        .arg(Arg::new("trajectories").long("trajectories").value_name("N").help("overrides n_trajectories"))
        .arg(
            Arg::new("paper-scale")
                .long("paper-scale")
                .action(ArgAction::SetTrue)
                .help("200000 trajectories over 10 years"),
        )
        .arg(
            Arg::new("dump-returns")
                .long("dump-returns")
                .action(ArgAction::SetTrue)
                .help("also write every gross return to returns.csv"),
        );
    for &(key, help) in keys {
        cmd = cmd.arg(Arg::new(key).long(key).value_name("VALUE").help(help));
    }
    cmd
}

pub fn command() -> Command {
    Command::new("adaptive-market")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Adaptive stock-to-bond ratio market experiments")
        .subcommand_required(true)
        .subcommand(keyed("two-agent", "Iterate the deterministic two-agent market", TWO_AGENT_KEYS))
        .subcommand(keyed("scan-a", "Grid extremes of the amplification function", SCAN_KEYS))
        .subcommand(keyed("simulate", "Monte Carlo ensemble of the N-agent market", SIMULATE_KEYS))
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let started = output::unix_now();
    let common = Common::from_matches(sub)?;
    let (kv, seed, outputs) = match name {
        "two-agent" => cmd_two_agent(sub, &common)?,
        "scan-a" => cmd_scan_a(sub, &common)?,
        "simulate" => cmd_simulate(sub, &common)?,
        _ => unreachable!("unknown subcommand {name}"),
    };
    let resolved = kv.to_text();
    output::write_atomic(&common.out.join("resolved.conf"), resolved.as_bytes())?;
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: seed,
        config: kv.entries().clone(),
        started_unix: started,
        finished_unix: output::unix_now(),
        outputs: outputs.into_iter().chain(["resolved.conf".to_string()]).collect(),
    };
    output::write_manifest(&common.out.join("manifest.json"), &manifest)?;
    Ok(())
}

struct Common {
    out: PathBuf,
    workers: Option<usize>,
    full_scale: bool,
    dump_returns: bool,
}

impl Common {
    fn from_matches(m: &ArgMatches) -> Result<Self, CliError> {
        let workers = match m.get_one::<String>("workers") {
            Some(w) => match w.parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(invalid("workers", w, "expected a positive integer")),
            },
            None => None,
        };
        Ok(Self {
            out: PathBuf::from(m.get_one::<String>("out").expect("has default")),
            workers,
            full_scale: m.get_flag("paper-scale"),
            dump_returns: m.get_flag("dump-returns"),
        })
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(w) = self.workers {
            b = b.num_threads(w);
        }
        b.build().map_err(|e| CliError::Numerical(e.to_string()))
    }
}

/// File, then `--paper-scale` (when it applies), then `--<key>` flags, then shortcuts.
fn resolve(
    m: &ArgMatches,
    keys: &[(&str, &str)],
    full_scale: Option<&[(&str, String)]>,
) -> Result<KvConfig, CliError> {
    let mut kv = match m.get_one::<String>("config") {
        Some(path) => KvConfig::load(Path::new(path))?,
        None => KvConfig::default(),
    };
    let names: Vec<&str> = keys.iter().map(|k| k.0).collect();
    kv.check_keys(&names)?;
    for (k, v) in full_scale.unwrap_or_default() {
        kv.set(k, v);
    }
    for &key in &names {
        if let Some(v) = m.get_one::<String>(key) {
            kv.set(key, v);
        }
    }
    if names.contains(&"master_seed") {
        if let Some(seed) = m.get_one::<String>("seed") {
            kv.set("master_seed", seed);
        }
    }
    if names.contains(&"n_trajectories") {
        if let Some(n) = m.get_one::<String>("trajectories") {
            kv.set("n_trajectories", n);
        }
    }
    Ok(kv)
}

type Outcome = (KvConfig, Option<u64>, Vec<String>);

pub fn two_agent_config(kv: &KvConfig) -> Result<(TwoAgentConfig, usize), CliError> {
    let agent = |i: u8| -> Result<AgentState, CliError> {
        Ok(AgentState {
            k: kv.required(&format!("k{i}"))?,
            s: kv.required(&format!("s{i}"))?,
            b: kv.required(&format!("b{i}"))?,
        })
    };
    let config = TwoAgentConfig {
        agents: [agent(1)?, agent(2)?],
        params: MarketParams {
            r: kv.required("r")?,
            alpha: kv.required("alpha")?,
            beta: kv.required("beta")?,
        },
        n_periods: kv.or("n_periods", 1000)?,
        p0: kv.or("p0", 1.0)?,
    };
    config.validate().map_err(model_config_error)?;
    let transient: usize = kv.or("transient", 100)?;
    if transient >= config.n_periods {
        return Err(invalid("transient", transient, "must be smaller than n_periods"));
    }
    Ok((config, transient))
}

fn cmd_two_agent(m: &ArgMatches, common: &Common) -> Result<Outcome, CliError> {
    let mut kv = resolve(m, TWO_AGENT_KEYS, None)?;
    let (config, transient) = two_agent_config(&kv)?;
    kv.set("n_periods", config.n_periods);
    kv.set("p0", config.p0);
    kv.set("transient", transient);
    common.prepare_out()?;

    let run = two_agent::iterate_two_agent(&config).map_err(|e| CliError::Numerical(e.to_string()))?;
    let rate = two_agent::rate_stock(&config.params);
    output::write_two_agent(&common.out.join("returns.csv"), &run, rate)?;
    println!(
        "geometric mean over periods {}..={}: {:.6} (rate_stock {:.6})",
        transient + 1,
        config.n_periods,
        run.geometric_mean(transient + 1..config.n_periods + 1),
        rate
    );
    Ok((kv, None, vec!["returns.csv".into()]))
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |why: &str| invalid("pairs", text, why);
    let pairs = text
        .split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| bad("expected alpha:beta entries"))?;
            let a = a.trim().parse::<f64>().map_err(|e| bad(&e.to_string()))?;
            let b = b.trim().parse::<f64>().map_err(|e| bad(&e.to_string()))?;
            Ok((a, b))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if pairs.is_empty() {
        return Err(bad("no pairs given"));
    }
    Ok(pairs)
}

/// Grid specs, one per `(alpha, beta)`, plus `r`.
pub fn scan_config(kv: &KvConfig) -> Result<(Vec<ScanSpec>, f64), CliError> {
    let pairs = match kv.raw("pairs") {
        Some(p) => parse_pairs(p)?,
        None => vec![(kv.required("alpha")?, kv.required("beta")?)],
    };
    let base = ScanSpec::default_grid(1.0, 1.0);
    let k_axis = GridAxis {
        low: kv.or("k_low", base.k_axis.low)?,
        high: kv.or("k_high", base.k_axis.high)?,
        points: kv.or("k_points", base.k_axis.points)?,
        log_spaced: true,
    };
    let s_axis = GridAxis {
        low: kv.or("s_low", base.s_axis.low)?,
        high: kv.or("s_high", base.s_axis.high)?,
        points: kv.or("s_points", base.s_axis.points)?,
        log_spaced: false,
    };
    let measure: ScanMeasure = kv.or("measure", ScanMeasure::Amplification)?;
    let refine: usize = kv.or("refine", 1)?;
    if refine == 0 {
        return Err(invalid("refine", 0, "must be at least 1"));
    }
    let r: f64 = kv.or("r", 1.001)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("r", r, "must be positive"));
    }
    let specs = pairs
        .into_iter()
        .map(|(alpha, beta)| {
            let spec = ScanSpec { k_axis, s_axis, alpha, beta, measure }.refined(refine);
            spec.validate().map_err(model_config_error)?;
            Ok(spec)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((specs, r))
}

fn cmd_scan_a(m: &ArgMatches, common: &Common) -> Result<Outcome, CliError> {
    let mut kv = resolve(m, SCAN_KEYS, None)?;
    let (specs, r) = scan_config(&kv)?;
    let s = &specs[0];
    kv.set("r", r);
    kv.set("k_low", s.k_axis.low);
    kv.set("k_high", s.k_axis.high);
    kv.set("s_low", s.s_axis.low);
    kv.set("s_high", s.s_axis.high);
    // the refined point counts are stored, so refine resets to 1
    kv.set("k_points", s.k_axis.points);
    kv.set("s_points", s.s_axis.points);
    kv.set("refine", 1);
    kv.set("measure", s.measure);
    common.prepare_out()?;

    let pool = common.pool()?;
    let rows = pool.install(|| {
        specs
            .iter()
            .map(|spec| {
                let result = two_agent::scan_amplification(spec, r).map_err(|e| CliError::Numerical(e.to_string()))?;
                Ok(ScanRow { alpha: spec.alpha, beta: spec.beta, result })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    output::write_scan(&common.out.join("scan.csv"), &rows)?;
    output::write_scan_summary(&common.out.join("scan_summary.csv"), &s.measure.to_string(), &rows)?;
    for row in &rows {
        println!(
            "alpha={} beta={}: min {:.4} max {:.4}",
            row.alpha, row.beta, row.result.min, row.result.max
        );
    }
    Ok((kv, None, vec!["scan.csv".into(), "scan_summary.csv".into()]))
}

/// Settings of the statistics pipeline that are not part of the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub n_bins: Option<usize>,
    pub acf_max_lag: usize,
    /// 0-based.
    pub acf_base_period: usize,
}

pub fn simulate_config(kv: &KvConfig) -> Result<(SimulationConfig, PipelineConfig), CliError> {
    let init = InitSpec::default();
    let scheme: SelectionScheme = kv.required("scheme")?;
    let config = SimulationConfig {
        n_agents: kv.required("n_agents")?,
        params: MarketParams {
            r: kv.required("r")?,
            alpha: kv.required("alpha")?,
            beta: kv.required("beta")?,
        },
        scheme,
        periods_per_year: kv.or("periods_per_year", 200)?,
        years: kv.or("years", 4.0)?,
        burn_in_years: kv.or("burn_in_years", 2.0)?,
        n_trajectories: kv.or("n_trajectories", 2000)?,
        master_seed: kv.or("master_seed", 0)?,
        init: InitSpec {
            k_low: kv.or("k_low", init.k_low)?,
            k_high: kv.or("k_high", init.k_high)?,
            b0: kv.or("b0", init.b0)?,
            epsilon: kv.or("epsilon", init.epsilon)?,
        },
    };
    config.validate()?;
    if config.n_trajectories < 4 {
        return Err(invalid("n_trajectories", config.n_trajectories, "need at least 4"));
    }
    let n_bins: Option<usize> = kv.get("n_bins")?;
    if let Some(b) = n_bins.filter(|&b| b < 2) {
        return Err(invalid("n_bins", b, "need at least 2 bins"));
    }
    let base_1: usize = kv.or("acf_base_period", config.burn_in_periods() + 1)?;
    if base_1 == 0 {
        return Err(invalid("acf_base_period", 0, "periods are 1-based"));
    }
    let available = config.n_periods() - base_1.min(config.n_periods());
    let default_lag = 50.min(available.saturating_sub(1));
    let acf_max_lag: usize = kv.or("acf_max_lag", default_lag)?;
    if base_1 + acf_max_lag > config.n_periods() {
        return Err(invalid(
            "acf_max_lag",
            acf_max_lag,
            format!("base period {base_1} plus lag exceeds {} periods", config.n_periods()),
        ));
    }
    Ok((
        config,
        PipelineConfig {
            n_bins,
            acf_max_lag,
            acf_base_period: base_1 - 1,
        },
    ))
}

fn stats_failure(e: StatsError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn cmd_simulate(m: &ArgMatches, common: &Common) -> Result<Outcome, CliError> {
    let full = [
        ("n_trajectories", FULL_TRAJECTORIES.to_string()),
        ("years", FULL_YEARS.to_string()),
    ];
    let mut kv = resolve(m, SIMULATE_KEYS, common.full_scale.then_some(&full[..]))?;
    let (config, pipe) = simulate_config(&kv)?;
    kv.set("scheme", config.scheme);
    kv.set("periods_per_year", config.periods_per_year);
    kv.set("years", config.years);
    kv.set("burn_in_years", config.burn_in_years);
    kv.set("n_trajectories", config.n_trajectories);
    kv.set("master_seed", config.master_seed);
    kv.set("k_low", config.init.k_low);
    kv.set("k_high", config.init.k_high);
    kv.set("b0", config.init.b0);
    kv.set("epsilon", config.init.epsilon);
    kv.set("acf_max_lag", pipe.acf_max_lag);
    kv.set("acf_base_period", pipe.acf_base_period + 1);
    common.prepare_out()?;

    let ensemble = engine::simulate_ensemble(&config, common.workers)?;
    let burn_in = config.burn_in_periods();
    let pool = common.pool()?;
    let (moments, acf, hist, summary) = pool.install(|| -> Result<_, CliError> {
        Ok((
            stats::moments_over_time(&ensemble).map_err(stats_failure)?,
            stats::ensemble_acf(&ensemble, pipe.acf_base_period, pipe.acf_max_lag).map_err(stats_failure)?,
            stats::pooled_histogram(&ensemble, burn_in, pipe.n_bins).map_err(stats_failure)?,
            stats::mean_return_summary(&ensemble, burn_in).map_err(stats_failure)?,
        ))
    })?;

    if let Some((mean, var)) = stats::stationarity(&moments, burn_in) {
        if !mean.is_flat(2.0) || !var.is_flat(2.0) {
            eprintln!(
                "warning: post-burn-in moments trend (mean slope {:.3e} +- {:.1e}, variance slope {:.3e} +- {:.1e}); pooled histogram assumes stationarity",
                mean.slope, mean.slope_std_error, var.slope, var.slope_std_error
            );
        }
    }

    let mean_active = config.scheme.mean_active();
    let row = SummaryRow {
        scheme: config.scheme.to_string(),
        mean_active,
        geometric_mean_return: summary.geometric_mean,
        arithmetic_mean_return: summary.arithmetic_mean,
        std_return: summary.std,
        predicted_rs: engine::rate_stock_n(&config.params, mean_active, config.n_agents),
        ks_distance: hist.ks_distance,
        excess_kurtosis_log_returns: hist.excess_kurtosis_log_returns,
    };
    let out = &common.out;
    output::write_moments(&out.join("moments.csv"), &moments, config.periods_per_year)?;
    output::write_acf(&out.join("acf.csv"), &acf)?;
    output::write_hist(&out.join("hist.csv"), &hist)?;
    output::write_summary(&out.join("summary.csv"), std::slice::from_ref(&row))?;
    let mut files: Vec<String> = ["moments.csv", "acf.csv", "hist.csv", "summary.csv"].map(String::from).into();
    if common.dump_returns {
        output::write_returns(&out.join("returns.csv"), &ensemble)?;
        files.push("returns.csv".into());
    }
    println!(
        "{}: geometric mean {:.6}, predicted {:.6}, KS {:.4}, excess kurtosis {:.3}",
        row.scheme, row.geometric_mean_return, row.predicted_rs, row.ks_distance, row.excess_kurtosis_log_returns
    );
    Ok((kv, Some(config.master_seed), files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_parse_with_spaces_and_trailing_separator() {
        assert_eq!(parse_pairs(" 4:0.3; 1.33 : 0.8 ;").unwrap(), vec![(4.0, 0.3), (1.33, 0.8)]);
        assert!(parse_pairs("4-0.3").is_err());
        assert!(parse_pairs(" ; ").is_err());
    }

    #[test]
    fn missing_field_is_a_config_error_naming_it() {
        let kv = KvConfig::parse("r = 1.001\nalpha = 4\nbeta = 0.3\nk1 = 0.5\ns1 = 5\nb1 = 10\nk2 = 0.8\ns2 = 8").unwrap();
        let err = two_agent_config(&kv).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`b2`"), "{err}");
    }

    #[test]
    fn simulate_defaults_follow_the_desk_setting() {
        let kv = KvConfig::parse("n_agents = 500\nr = 1.001\nalpha = 4\nbeta = 0.3\nscheme = fixed:40").unwrap();
        let (config, pipe) = simulate_config(&kv).unwrap();
        let desk = SimulationConfig::desk(config.params, config.scheme);
        assert_eq!(config, desk);
        assert_eq!(pipe.acf_base_period, 400);
        assert_eq!(pipe.acf_max_lag, 50);
    }

    #[test]
    fn every_key_is_a_flag() {
        let cmd = command();
        for (sub, keys) in [("two-agent", TWO_AGENT_KEYS), ("scan-a", SCAN_KEYS), ("simulate", SIMULATE_KEYS)] {
            let sc = cmd.find_subcommand(sub).unwrap();
            for (k, _) in keys {
                assert!(sc.get_arguments().any(|a| a.get_long() == Some(k)), "{sub} --{k}");
            }
        }
        cmd.debug_assert();
    }
}
