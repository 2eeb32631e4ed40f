//! Statistical kernel shared by the detector and the baselines.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

mod ks;
mod mmd;
pub mod special;
mod ttest;

pub use ks::ks_two_sample;
pub use mmd::{
    median_heuristic_bandwidth, mmd2_unbiased, permutation_test_mmd, DEFAULT_PERMUTATIONS,
};
pub use special::{incomplete_beta, log_gamma, student_t_cdf, student_t_sf};
pub use ttest::{t_test_one_sample, t_test_two_sample_welch, Alternative};

/// Output of any hypothesis test in this crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Always within `[0, 1]`.
    pub p_value: f64,
    pub method: String,
    #[serde(default)]
    pub detail: BTreeMap<String, serde_json::Value>,
}

impl TestResult {
    pub(crate) fn new(method: &str, statistic: f64, p_value: f64) -> Self {
        TestResult {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method: method.to_string(),
            detail: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.detail.insert(key.to_string(), value.into());
        self
    }
}

/// Seeded random source.
///
/// Backed by ChaCha20 (a counter-based stream cipher generator), so a given
/// seed yields the same stream on every platform. Independent sub-streams
/// for parallel work are obtained with [`Rng::derive`], which selects a
/// ChaCha stream id instead of drawing from the parent.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sub-generator for work item `index`; depends only on `(seed, index)`.
    pub fn derive(&self, index: u64) -> Rng {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(index.wrapping_add(1));
        Rng {
            seed: self.seed,
            inner,
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
