//! Core engine for mining exchange trade ledgers for triangular arbitrage.
//!
//! The crate is organized as a pipeline over immutable in-memory data:
//!
//! - [`ledger`]: domain types and parsers for the leaked-log format families,
//!   the public aggregate trade file, and hourly official-rate files.
//! - [`clean`]: deduplication (four methods), sanity filters, identifier
//!   remapping, same-second aggregation, and the public-dataset merge.
//! - [`matcher`]: detection of triangular arbitrage actions as same-user,
//!   cross-currency buy/sell leg pairs inside a time/volume window.
//! - [`pricing`]: official and implied exchange rates, spreads under three
//!   fee regimes, hourly rate variation, and USD-equivalent volumes.
//! - [`fees`]: actual fee percentages, 720-hour rolling volumes, the
//!   expected-fee OLS model, and the zero-fee logit.
//! - [`profiles`]: per-user expertise indicators, metaorder detection,
//!   aggressiveness, and the first-principal-component ability score.
//! - [`econ`]: least squares with multi-way fixed effects, user-clustered
//!   standard errors, and the two regression families built on them.
//! - [`synth`]: deterministic synthetic ledger/rate generation with planted
//!   ground truth, plus a brute-force matcher used as a test oracle.
//!
//! Everything here is `no_std` + `alloc`: no IO, no clocks, no threads.
//! File handling, the CLI, and the stage-file formats live in the companion
//! `triarb-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod clean;
pub mod currency;
pub mod econ;
pub mod fees;
pub mod ledger;
pub mod linalg;
pub mod matcher;
pub mod pricing;
pub mod profiles;
pub mod stats;
pub mod synth;
pub mod time;

pub use rust_decimal::Decimal;

/// Lossy conversion used wherever exact decimal amounts feed the float
/// estimators and reports.
pub fn decimal_to_f64(d: Decimal) -> f64 {
    use rust_decimal::prelude::ToPrimitive;
    d.to_f64().unwrap_or(f64::NAN)
}
