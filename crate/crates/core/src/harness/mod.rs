//! Configurable Monte Carlo experiments.
//!
//! An [`ExperimentConfig`] describes a sweep over blocklength, rate rule and
//! typicality slack for one scheme, the jam sets and strategies to apply, and
//! the detector James uses. [`run_experiment`] turns it into one
//! [`MetricsRow`] per (code point, strategy), ready for CSV or JSON export.
//! [`stealth_scan`] and [`oracle_scan`] walk the same sweep with the exact
//! oracles instead of sampling.
//!
//! Randomness is keyed by `(master_seed, code point, hypothesis, trial)`.
//! Every strategy and every jam set of a code point sees the same codebook and
//! the same transmissions, so strategies are compared on paired samples and
//! the output never depends on thread count.

mod config;
mod export;
mod metrics;
mod run;
mod scan;

use thiserror::Error;

pub use config::{
    AdversaryConfig, CodeDesign, CodeSweep, ExperimentConfig, ExperimentScheme, JamRule, RateRule, CONFIG_SCHEMA, DEFAULT_TRIALS,
};
pub use export::{export, read_rows_json, write_csv, write_json, write_records, Format, CSV_COLUMNS};
pub use metrics::{binomial_half_width, sum_half_width, MetricsRow};
pub use run::{rate_rule_resolve, run_experiment, trial_seed, ExperimentOutput, TrialRecord};
pub use scan::{oracle_scan, stealth_scan, OracleRow, ScanRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("model is infeasible for the rate bound")]
    Infeasible,
    #[error("{path}: {cause}")]
    Io { path: String, cause: String },
    #[error("runtime failure: {0}")]
    Runtime(String),
}
