//! Selection with guaranteed coverage: a binary search over the sorted
//! detection-training scores for the threshold whose coverage lower bound
//! lands at a target coverage.
//!
//! Every iteration spends `δ/k` of the confidence budget (`k = ⌈log₂ m⌉`),
//! so all `k` intermediate bounds hold simultaneously with probability at
//! least `1 - δ`.

use serde::{Deserialize, Serialize};

use crate::bounds::{solve_bound, BoundQuery};
use crate::error::{Error, Result};
use crate::scores::ScoreSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgcConfig {
    /// Confidence parameter in `(0, 1)`.
    pub delta: f64,
    /// Target coverage in `(0, 1]`.
    pub target_coverage: f64,
}

impl SgcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.target_coverage > 0.0 && self.target_coverage <= 1.0) {
            return Err(Error::invalid(format!(
                "target coverage must lie in (0,1], got {}",
                self.target_coverage
            )));
        }
        Ok(())
    }
}

/// One fitted (target, bound, threshold) triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageBound {
    pub c_target: f64,
    pub b_star: f64,
    pub theta: f64,
    /// Number of binary-search iterations, `⌈log₂ m⌉`.
    pub iterations: u32,
    pub empirical_coverage_at_fit: f64,
}

/// State of a single binary-search step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgcIteration {
    /// Search window at the start of the step (1-based, inclusive).
    pub z_min: usize,
    pub z_max: usize,
    /// Probed position in the ascending order (1-based).
    pub z: usize,
    pub theta: f64,
    pub successes: u64,
    pub empirical_coverage: f64,
    pub b_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgcTrace {
    pub steps: Vec<SgcIteration>,
    pub result: CoverageBound,
}

/// Fraction of `sample` with score `>= theta`.
pub fn empirical_coverage(theta: f64, sample: &ScoreSample) -> f64 {
    let selected = sample.scores().iter().filter(|&&s| s >= theta).count();
    selected as f64 / sample.len() as f64
}

/// Count of `>= theta` in an ascending slice.
pub(crate) fn count_at_or_above(sorted: &[f64], theta: f64) -> usize {
    sorted.len() - sorted.partition_point(|&s| s < theta)
}

/// `m · ĉ` rounded to the nearest integer.
pub fn m_times_c(m: u64, c_hat: f64) -> u64 {
    (m as f64 * c_hat).round() as u64
}

/// `⌈log₂ m⌉` for `m >= 1`.
pub(crate) fn ceil_log2(m: usize) -> u32 {
    usize::BITS - (m - 1).leading_zeros()
}

/// Run the search and return the final iteration's bound and threshold.
pub fn run_sgc(sample: &ScoreSample, cfg: &SgcConfig) -> Result<CoverageBound> {
    run_sgc_traced(sample, cfg).map(|t| t.result)
}

/// As [`run_sgc`], also returning every intermediate step.
pub fn run_sgc_traced(sample: &ScoreSample, cfg: &SgcConfig) -> Result<SgcTrace> {
    let mut sorted = sample.scores().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    run_sgc_sorted(&sorted, cfg)
}

pub(crate) fn run_sgc_sorted(sorted: &[f64], cfg: &SgcConfig) -> Result<SgcTrace> {
    cfg.validate()?;
    let m = sorted.len();
    if m < 2 {
        return Err(Error::invalid(format!("m must be ≥ 2, got {m}")));
    }
    let k = ceil_log2(m);
    let delta_step = cfg.delta / k as f64;

    let (mut z_min, mut z_max) = (1usize, m);
    let mut steps = Vec::with_capacity(k as usize);
    for _ in 0..k {
        let z = (z_min + z_max).div_ceil(2);
        let theta = sorted[z - 1];
        let empirical_coverage = count_at_or_above(sorted, theta) as f64 / m as f64;
        let successes = m_times_c(m as u64, empirical_coverage);
        let b_star = solve_bound(BoundQuery {
            m: m as u64,
            successes,
            delta: delta_step,
        })?
        .b_star;
        steps.push(SgcIteration {
            z_min,
            z_max,
            z,
            theta,
            successes,
            empirical_coverage,
            b_star,
        });
        if b_star <= cfg.target_coverage {
            z_max = z;
        } else {
            z_min = z;
        }
    }

    let last = *steps.last().expect("k >= 1 for m >= 2");
    Ok(SgcTrace {
        steps,
        result: CoverageBound {
            c_target: cfg.target_coverage,
            b_star: last.b_star,
            theta: last.theta,
            iterations: k,
            empirical_coverage_at_fit: last.empirical_coverage,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64]) -> ScoreSample {
        ScoreSample::new(v.to_vec(), "raw_passthrough", "test").unwrap()
    }

    #[test]
    fn coverage_examples() {
        let s = sample(&[0.1, 0.5, 0.9]);
        assert_eq!(empirical_coverage(-1.0, &s), 1.0);
        assert!((empirical_coverage(0.5, &s) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_coverage(0.2, &sample(&[0.2, 0.2, 0.8])), 1.0);
    }

    #[test]
    fn rounding_of_counts() {
        assert_eq!(m_times_c(3, 2.0 / 3.0), 2);
        assert_eq!(m_times_c(1000, 0.0), 0);
        assert_eq!(m_times_c(7, 5.0 / 7.0), 5);
    }

    #[test]
    fn log2_ceiling() {
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1000), 10);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn two_point_trace() {
        let cfg = SgcConfig {
            delta: 0.1,
            target_coverage: 0.5,
        };
        let t = run_sgc_traced(&sample(&[0.7, 0.3]), &cfg).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].z, 2);
        let r = t.result;
        assert_eq!(r.theta, 0.7);
        assert_eq!(r.empirical_coverage_at_fit, 0.5);
        assert_eq!(r.iterations, 1);
        assert!((r.b_star - 0.1f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn ties_force_full_coverage() {
        for c in [0.1, 0.5, 0.9] {
            let cfg = SgcConfig {
                delta: 0.1,
                target_coverage: c,
            };
            let t = run_sgc_traced(&sample(&[0.5; 4]), &cfg).unwrap();
            assert!(t
                .steps
                .iter()
                .all(|s| s.theta == 0.5 && s.empirical_coverage == 1.0));
            let expected = (0.1f64 / 2.0).powf(0.25);
            assert!((t.result.b_star - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = SgcConfig {
            delta: 0.1,
            target_coverage: 0.5,
        };
        assert!(run_sgc(&sample(&[0.5]), &cfg).is_err());
        let bad = SgcConfig {
            delta: 0.0,
            target_coverage: 0.5,
        };
        assert!(run_sgc(&sample(&[0.1, 0.2]), &bad).is_err());
        let bad = SgcConfig {
            delta: 0.1,
            target_coverage: 1.5,
        };
        assert!(run_sgc(&sample(&[0.1, 0.2]), &bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn search_window_stays_ordered(
            xs in prop::collection::vec(0.0f64..1.0, 2..300),
            c in 0.1f64..0.95,
        ) {
            let cfg = SgcConfig { delta: 0.05, target_coverage: c };
            let t = run_sgc_traced(&sample(&xs), &cfg).unwrap();
            prop_assert_eq!(t.steps.len() as u32, ceil_log2(xs.len()));
            for s in &t.steps {
                prop_assert!(s.z_min < s.z_max);
                prop_assert!(s.z >= 1 && s.z <= xs.len());
            }
        }

        #[test]
        fn deterministic_and_monotone_invariant(
            xs in prop::collection::vec(-3.0f64..3.0, 2..200),
            c in 0.1f64..0.95,
        ) {
            let cfg = SgcConfig { delta: 0.01, target_coverage: c };
            let a = run_sgc_traced(&sample(&xs), &cfg).unwrap();
            let b = run_sgc_traced(&sample(&xs), &cfg).unwrap();
            prop_assert_eq!(&a, &b);

            // exact in floating point, so order and ties are preserved
            let phi = |x: f64| 4.0 * x;
            let mapped: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
            let t = run_sgc_traced(&sample(&mapped), &cfg).unwrap();
            for (u, v) in a.steps.iter().zip(&t.steps) {
                prop_assert_eq!(u.z, v.z);
                prop_assert_eq!(u.successes, v.successes);
                prop_assert_eq!(u.b_star, v.b_star);
            }
            prop_assert_eq!(phi(a.result.theta), t.result.theta);
        }
    }
}
