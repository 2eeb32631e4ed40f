use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::student_t_sf_unchecked;
use crate::stats::TestResult;

/// Direction of the alternative hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

fn p_from_t(t: f64, df: f64, side: Alternative) -> f64 {
    match side {
        Alternative::Greater => student_t_sf_unchecked(t, df),
        Alternative::Less => student_t_sf_unchecked(-t, df),
        Alternative::TwoSided => (2.0 * student_t_sf_unchecked(t.abs(), df)).min(1.0),
    }
}

/// p-value when the standard error is zero: the data sit exactly at their
/// mean, so the test reduces to the sign of the mean difference.
fn degenerate_p(diff: f64, side: Alternative) -> f64 {
    let supports = match side {
        Alternative::Greater => diff > 0.0,
        Alternative::Less => diff < 0.0,
        Alternative::TwoSided => diff != 0.0,
    };
    if supports {
        0.0
    } else {
        1.0
    }
}

/// One-sample Student t-test of `mean(values) = popmean`.
pub fn t_test_one_sample(values: &[f64], popmean: f64, side: Alternative) -> Result<TestResult> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "one-sample t-test needs n >= 2, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let (mean, var) = mean_var(values);
    let se = (var / n).sqrt();
    let diff = mean - popmean;
    let df = n - 1.0;
    let (t, p) = if se == 0.0 {
        let t = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        (t, degenerate_p(diff, side))
    } else {
        let t = diff / se;
        (t, p_from_t(t, df, side))
    };
    Ok(TestResult::new("t_test_1samp", t, p)
        .with("df", df)
        .with("mean", mean))
}

/// Welch's unequal-variance two-sample t-test.
pub fn t_test_two_sample_welch(a: &[f64], b: &[f64], side: Alternative) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "Welch t-test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let diff = ma - mb;
    if se2 == 0.0 {
        let t = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        return Ok(TestResult::new("welch_t_test", t, degenerate_p(diff, side)));
    }
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let t = diff / se2.sqrt();
    Ok(TestResult::new("welch_t_test", t, p_from_t(t, df, side)).with("df", df))
}
