use crate::error::{Error, Result};
use crate::stats::TestResult;

const SERIES_MAX_TERMS: usize = 100;
const SERIES_TERM_EPS: f64 = 1e-12;

/// Two-sample Kolmogorov–Smirnov test.
///
/// The statistic is the exact supremum of the difference between the two
/// empirical CDFs. The p-value uses the asymptotic Kolmogorov distribution
/// with the Stephens small-sample correction on the effective size
/// `n_e = n·m/(n+m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid(
            "ks_two_sample requires two nonempty samples",
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("ks_two_sample input contains NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let z = ks_statistic_sorted(&a, &b);

    let (n, m) = (a.len() as f64, b.len() as f64);
    let ne = n * m / (n + m);
    let p = kolmogorov_sf((ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * z);
    Ok(TestResult::new("ks", z, p)
        .with("n_a", a.len())
        .with("n_b", b.len()))
}

/// Supremum distance between empirical CDFs of two ascending samples.
/// Every copy of a tied value is consumed before the CDFs are compared.
pub(crate) fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        let d = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        sup = sup.max(d);
    }
    // Once one side is exhausted the gap can only shrink toward zero.
    sup
}

/// `Q_KS(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² λ²)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=SERIES_MAX_TERMS {
        let term = sign * 2.0 * (a2 * (j * j) as f64).exp();
        sum += term;
        if term.abs() < SERIES_TERM_EPS {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    // Series did not settle: λ is tiny and the tail mass is essentially 1.
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_supports_give_one() {
        let r = ks_two_sample(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn shifted_integers_give_one_third() {
        // F_a steps: 1→1/3, 2→2/3, 3→1; F_b: 2→1/3, 3→2/3, 4→1.
        // |diff| at x=1,2,3,4: 1/3, 1/3, 1/3, 0.
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let a = [0.3, 0.1, 0.1, 0.9, 0.5];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn ties_across_samples() {
        // a: {1,1,2}, b: {1,2,2}. After x=1: 2/3 vs 1/3.
        let r = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // Q_KS(1.0) and Q_KS(1.36) from the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_354_56).abs() < 1e-10);
        assert!((kolmogorov_sf(1.358_098_639_322_550_7) - 0.05).abs() < 1e-11);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert_eq!(kolmogorov_sf(0.01), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
    }
}
