//! Adaptive stock-to-bond ratio trading model.
//!
//! - [`model`]: demand, market clearing, settlement and the feedback rule.
//! - [`two_agent`]: the deterministic two-agent map and the amplification scan.
//! - [`engine`]: the N-agent stochastic market and Monte Carlo ensembles.
//! - [`stats`]: ensemble moments, autocorrelation, pooled histograms and log-normal fits.
//! - [`cli`] with [`config`] and [`output`]: the command-line experiments and their files.

pub mod model;
pub mod two_agent;
pub mod engine;
pub mod stats;
pub mod config;
pub mod output;
pub mod cli;
