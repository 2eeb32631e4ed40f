//! Exact binomial-tail lower bound on coverage.
//!
//! Given `successes` accepted instances out of `m`, the bound `b*` is the
//! smallest `b` with `P[Bin(m, b) ≤ successes] ≤ 1 - δ`. Any true coverage
//! below `b*` would make the observed count at least this large with
//! probability under `δ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::{beta_inc_xy, dbinom_raw};

/// Bisection stops once the bracket on `b` is narrower than this.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

/// Largest `m` evaluated by direct summation; above it the incomplete-beta
/// identity is used.
pub const SUMMATION_MAX_M: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub m: u64,
    pub successes: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub b_star: f64,
    /// `false` when `successes == m`; the CDF is then identically 1 and
    /// `b_star` falls back to the exact lower limit `δ^(1/m)`.
    pub satisfiable: bool,
}

/// `P[Bin(m, b) ≤ x]`.
pub fn binomial_cdf(x: u64, m: u64, b: f64) -> Result<f64> {
    if x > m {
        return Err(Error::invalid(format!("binomial_cdf: x={x} exceeds m={m}")));
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::invalid(format!("binomial_cdf: b={b} outside [0,1]")));
    }
    Ok(binomial_cdf_unchecked(x, m, b))
}

pub(crate) fn binomial_cdf_unchecked(x: u64, m: u64, b: f64) -> f64 {
    if m <= SUMMATION_MAX_M {
        cdf_by_summation(x, m, b)
    } else {
        cdf_by_beta(x, m, b)
    }
}

/// Sum of pmf terms walking away from the distribution mean, anchored by a
/// saddle-point pmf evaluation. Terms shrink monotonically in the walk
/// direction, so the loop can stop once they no longer register.
pub(crate) fn cdf_by_summation(x: u64, m: u64, p: f64) -> f64 {
    if x >= m || p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let mf = m as f64;
    if (x as f64) < mf * p {
        // lower tail: j = x, x-1, ..., 0
        let mut term = dbinom_raw(x as f64, mf, p, q);
        let mut sum = term;
        let ratio = q / p;
        let mut j = x;
        while j > 0 && term > sum * 1e-17 {
            term *= j as f64 / (m - j + 1) as f64 * ratio;
            sum += term;
            j -= 1;
        }
        sum.min(1.0)
    } else {
        // upper tail: j = x+1, ..., m
        let mut j = x + 1;
        let mut term = dbinom_raw(j as f64, mf, p, q);
        let mut upper = term;
        let ratio = p / q;
        while j < m && term > upper * 1e-17 {
            term *= (m - j) as f64 / (j + 1) as f64 * ratio;
            upper += term;
            j += 1;
        }
        (1.0 - upper).max(0.0)
    }
}

/// `P[Bin(m, b) ≤ x] = I_{1-b}(m - x, x + 1)`.
pub(crate) fn cdf_by_beta(x: u64, m: u64, b: f64) -> f64 {
    if x >= m {
        return 1.0;
    }
    beta_inc_xy((m - x) as f64, (x + 1) as f64, 1.0 - b, b)
}

/// Minimal `b` with `BinomialCDF(successes; m, b) ≤ 1 - δ`, by bisection.
pub fn solve_bound(q: BoundQuery) -> Result<BoundResult> {
    if q.m == 0 {
        return Err(Error::invalid("bound requires m >= 1"));
    }
    if q.successes > q.m {
        return Err(Error::invalid(format!(
            "successes={} exceeds m={}",
            q.successes, q.m
        )));
    }
    if !(q.delta > 0.0 && q.delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0,1), got {}",
            q.delta
        )));
    }
    if q.successes == q.m {
        return Ok(BoundResult {
            b_star: q.delta.powf(1.0 / q.m as f64),
            satisfiable: false,
        });
    }
    let level = 1.0 - q.delta;
    // cdf(0) = 1 > level, cdf(1) = 0 <= level
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if binomial_cdf_unchecked(q.successes, q.m, mid) <= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BoundResult {
        b_star: hi,
        satisfiable: true,
    })
}
