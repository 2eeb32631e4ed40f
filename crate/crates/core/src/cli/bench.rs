//! Wall-clock benchmark of fit and per-window detection cost against the
//! training-set size.
//!
//! Synthetic softmax rows (uniform Dirichlet) serve as the training sample;
//! the coverage detector consumes their entropy scores, KS and MMD the rows
//! themselves. Each cell is the median of `repeats` timings after one
//! warm-up call. A timing repeats the operation until at least
//! [`MIN_SAMPLE`] has elapsed and divides, so sub-microsecond calls are not
//! lost in timer resolution.

use std::fmt;
use std::time::{Duration, Instant};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::baselines::{detect_ks, detect_mmd, detect_single_instance, Estimator, DEFAULT_MMD_CAP};
use crate::detector::{self, DEFAULT_COVERAGE_COUNT, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::eval::{gen_vectors, VectorDist};
use crate::scores::ConfidenceFunction;
use crate::stats::{Rng, DEFAULT_PERMUTATIONS};

pub const MIN_SAMPLE: Duration = Duration::from_millis(20);
pub const BENCH_CSV_HEADER: &str = "method,m,k,fit_seconds,detect_seconds";

const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum BenchMethod {
    Ours,
    Ks,
    Mmd,
    SingleSr,
    SingleEnt,
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub window_size: usize,
    pub methods: Vec<BenchMethod>,
    pub dim: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.methods.is_empty() {
            return Err(Error::invalid(
                "bench needs at least one size and one method",
            ));
        }
        if !self.sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("--sizes must be strictly ascending"));
        }
        if self.sizes[0] < 2 {
            return Err(Error::invalid("sizes must be >= 2"));
        }
        if self.window_size < 2 {
            return Err(Error::invalid("--window-size must be >= 2"));
        }
        if self.dim < 2 {
            return Err(Error::invalid("--dim must be >= 2"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("--repeats must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub m: usize,
    pub k: usize,
    /// Zero for the lazy baselines, which have nothing to fit.
    pub fit_seconds: f64,
    pub detect_seconds: f64,
}

/// Seconds per call of `f`, from one sample of at least [`MIN_SAMPLE`].
fn seconds_per_call(f: &mut dyn FnMut() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        f()?;
        calls += 1;
        let elapsed = start.elapsed();
        if elapsed >= MIN_SAMPLE {
            return Ok(elapsed.as_secs_f64() / calls as f64);
        }
    }
}

/// Median over `repeats` samples after one warm-up call.
fn median_seconds(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let mut samples = (0..repeats)
        .map(|_| seconds_per_call(&mut f))
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    Ok(if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    })
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let dist = VectorDist::Dirichlet {
        alpha: vec![1.0; cfg.dim],
    };
    let base = Rng::new(cfg.seed);
    let k = cfg.window_size;
    let mut rows = Vec::new();
    for &m in &cfg.sizes {
        let mut rng = base.derive(m as u64);
        let train = gen_vectors(&dist, m, &mut rng)?;
        let window = gen_vectors(&dist, k, &mut rng)?;
        for &method in &cfg.methods {
            let (fit_seconds, detect_seconds) = match method {
                BenchMethod::Ours => {
                    let cf = ConfidenceFunction::OneMinusEntropy;
                    let train_s = train.to_scores(cf, "bench")?;
                    let window_s = window.to_scores(cf, "bench")?;
                    let fit = median_seconds(cfg.repeats, || {
                        detector::fit(&train_s, DEFAULT_DELTA, DEFAULT_COVERAGE_COUNT).map(drop)
                    })?;
                    let model = detector::fit(&train_s, DEFAULT_DELTA, DEFAULT_COVERAGE_COUNT)?;
                    let det = median_seconds(cfg.repeats, || {
                        detector::detect(&model, &window_s, ALPHA).map(drop)
                    })?;
                    (fit, det)
                }
                BenchMethod::Ks => (
                    0.0,
                    median_seconds(cfg.repeats, || detect_ks(&train, &window, ALPHA).map(drop))?,
                ),
                BenchMethod::Mmd => {
                    let mut i = 0u64;
                    (
                        0.0,
                        median_seconds(cfg.repeats, || {
                            i += 1;
                            let rng = Rng::new(cfg.seed ^ i);
                            detect_mmd(
                                &train,
                                &window,
                                ALPHA,
                                DEFAULT_PERMUTATIONS,
                                DEFAULT_MMD_CAP,
                                &rng,
                            )
                            .map(drop)
                        })?,
                    )
                }
                BenchMethod::SingleSr | BenchMethod::SingleEnt => {
                    let est = if method == BenchMethod::SingleSr {
                        Estimator::Sr
                    } else {
                        Estimator::Entropy
                    };
                    let cf = est.confidence_function();
                    let train_s = train.to_scores(cf, "bench")?;
                    let window_s = window.to_scores(cf, "bench")?;
                    (
                        0.0,
                        median_seconds(cfg.repeats, || {
                            detect_single_instance(&train_s, &window_s, ALPHA, est).map(drop)
                        })?,
                    )
                }
            };
            rows.push(BenchRow {
                method,
                m,
                k,
                fit_seconds,
                detect_seconds,
            });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6e},{:.6e}\n",
            r.method, r.m, r.k, r.fit_seconds, r.detect_seconds
        ));
    }
    out
}
