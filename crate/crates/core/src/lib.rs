//! Agent-based model of a rental housing market.
//!
//! Tenants and landlords act on their own flat's rent alone: occupied
//! flats get periodic raises and their tenants look for cheaper vacant
//! flats, vacant flats get cut until someone moves in. The resulting rent
//! distribution settles to a stationary, close to lognormal, law.
//!
//! - [`market`]: state and per-step dynamics on a log10 rent lattice.
//! - [`stats`]: time-averaged histograms, fits and burn-in detection.
//! - [`analytics`]: mean-field closed forms, Fokker-Planck stationary
//!   densities and a mean-field random walk.
//! - [`experiments`]: scenarios, sweeps and report files.

pub mod analytics;
pub mod error;
pub mod experiments;
pub mod market;
pub mod parallel;
pub mod params;
pub mod rng;
pub mod stats;

pub use error::{AnalyticsError, ConfigError, StatsError};
pub use market::{init_state, run, step, InitialDistribution, MarketState};
pub use params::ModelParams;
