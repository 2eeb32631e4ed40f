//! Distribution-shift detection for streams of model confidence scores.
//!
//! A detector is fitted once on a detection-training sample: for a grid of
//! target coverages it finds score thresholds whose coverage carries an
//! exact binomial lower bound. Each incoming window is then checked for
//! bound violations, and a one-sided t-test on the violation magnitudes
//! yields a p-value. The comparison baselines (KS, MMD, single-instance
//! t-tests), threshold-curve metrics and a synthetic evaluation harness live
//! alongside.

pub mod baselines;
pub mod bounds;
pub mod cli;
pub mod detector;
pub mod error;
pub mod eval;
pub mod scores;
pub mod sgc;
pub mod stats;

pub use error::{Error, Result};
