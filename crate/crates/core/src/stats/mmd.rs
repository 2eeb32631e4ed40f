use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{Rng, TestResult};

pub const DEFAULT_PERMUTATIONS: usize = 100;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn check_dims(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<usize> {
    let d = x
        .first()
        .or_else(|| y.first())
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty sample"))?;
    if d == 0 {
        return Err(Error::invalid("vectors must have at least one dimension"));
    }
    if let Some(bad) = x.iter().chain(y).find(|v| v.len() != d) {
        return Err(Error::invalid(format!(
            "dimension mismatch: expected {d}, found {}",
            bad.len()
        )));
    }
    Ok(d)
}

/// Unbiased estimate of squared MMD under an RBF kernel
/// `K(u, v) = exp(-‖u - v‖² / (2σ²))`.
pub fn mmd2_unbiased(x: &[Vec<f64>], y: &[Vec<f64>], bandwidth: f64) -> Result<f64> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid(
            "mmd2_unbiased requires at least 2 points per sample",
        ));
    }
    check_dims(x, y)?;
    if bandwidth.is_nan() || bandwidth <= 0.0 || !bandwidth.is_finite() {
        return Err(Error::invalid(format!(
            "bandwidth must be > 0, got {bandwidth}"
        )));
    }
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let k = |a: &[f64], b: &[f64]| (-gamma * sq_dist(a, b)).exp();

    let within = |s: &[Vec<f64>]| {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                acc += k(&s[i], &s[j]);
            }
        }
        2.0 * acc / (s.len() * (s.len() - 1)) as f64
    };
    let cross: f64 = x
        .iter()
        .map(|a| y.iter().map(|b| k(a, b)).sum::<f64>())
        .sum();
    Ok(within(x) + within(y) - 2.0 * cross / (x.len() * y.len()) as f64)
}

/// RBF bandwidth σ with `2σ² = median` of the pooled pairwise Euclidean distances.
pub fn median_heuristic_bandwidth(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    check_dims(x, y)?;
    let pooled: Vec<&[f64]> = x.iter().chain(y).map(Vec::as_slice).collect();
    if pooled.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 points"));
    }
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    let mut median = median_in_place(&mut dists);
    if median == 0.0 {
        median = dists
            .iter()
            .copied()
            .filter(|&d| d > 0.0)
            .min_by(f64::total_cmp)
            .ok_or_else(|| Error::invalid("all points identical; bandwidth undefined"))?;
    }
    Ok((median / 2.0).sqrt())
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().max_by(f64::total_cmp).unwrap();
        0.5 * (lower + upper)
    }
}

/// Unbiased MMD² for a split of a precomputed pooled kernel matrix.
fn mmd2_from_kernel(kernel: &[f64], n: usize, xs: &[usize], ys: &[usize]) -> f64 {
    let block = |a: &[usize], b: &[usize], skip_diag: bool| -> f64 {
        let mut acc = 0.0;
        for &i in a {
            let row = &kernel[i * n..(i + 1) * n];
            for &j in b {
                if !(skip_diag && i == j) {
                    acc += row[j];
                }
            }
        }
        acc
    };
    let (m, k) = (xs.len() as f64, ys.len() as f64);
    block(xs, xs, true) / (m * (m - 1.0)) + block(ys, ys, true) / (k * (k - 1.0))
        - 2.0 * block(xs, ys, false) / (m * k)
}

/// Permutation test on the pooled RBF kernel matrix.
///
/// Each permutation draws from `rng.derive(index)`, so the result depends only
/// on the seed regardless of how permutations are scheduled across threads.
pub fn permutation_test_mmd(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    n_permutations: usize,
    rng: &Rng,
) -> Result<TestResult> {
    if n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be >= 1"));
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid(
            "MMD test requires at least 2 points per sample",
        ));
    }
    let sigma = median_heuristic_bandwidth(x, y)?;
    let gamma = 1.0 / (2.0 * sigma * sigma);

    let pooled: Vec<&[f64]> = x.iter().chain(y).map(Vec::as_slice).collect();
    let n = pooled.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let v = (-gamma * sq_dist(pooled[i], pooled[j])).exp();
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    let idx: Vec<usize> = (0..n).collect();
    let observed = mmd2_from_kernel(&kernel, n, &idx[..x.len()], &idx[x.len()..]);
    let exceed = (0..n_permutations as u64)
        .into_par_iter()
        .filter(|&p| {
            let mut perm = idx.clone();
            perm.shuffle(&mut rng.derive(p));
            let (px, py) = perm.split_at(x.len());
            mmd2_from_kernel(&kernel, n, px, py) >= observed
        })
        .count();

    let p = (1 + exceed) as f64 / (1 + n_permutations) as f64;
    Ok(TestResult::new("mmd", observed, p)
        .with("bandwidth", sigma)
        .with("permutations", n_permutations)
        .with("seed", rng.seed()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<Vec<f64>> {
        v.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn duplicated_point_gives_zero() {
        let x = pts(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let y = x.clone();
        assert_eq!(mmd2_unbiased(&x, &y, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_multisets() {
        // The cross term keeps the K(x_i, x_i) = 1 pairs that the within
        // terms drop, so for y = x the estimate is 2(A - 1)/n with A the mean
        // off-diagonal kernel value, not zero.
        let x = pts(&[&[0.0], &[1.0], &[3.0]]);
        let y = pts(&[&[3.0], &[0.0], &[1.0]]);
        let s: f64 = 0.7;
        let k = |d: f64| (-d * d / (2.0 * s * s)).exp();
        let a = (k(1.0) + k(3.0) + k(2.0)) / 3.0;
        let got = mmd2_unbiased(&x, &y, s).unwrap();
        assert!((got - 2.0 * (a - 1.0) / 3.0).abs() < 1e-14);
        // symmetric under swapping the samples
        assert_eq!(got, mmd2_unbiased(&y, &x, s).unwrap());
    }

    #[test]
    fn kernel_matrix_route_matches_direct() {
        let x = pts(&[&[0.0, 1.0], &[0.5, 0.2], &[1.5, -0.3]]);
        let y = pts(&[&[2.0, 1.0], &[0.1, 0.1], &[-1.0, 0.4], &[0.3, 0.3]]);
        let sigma = 0.8;
        let pooled: Vec<&Vec<f64>> = x.iter().chain(&y).collect();
        let n = pooled.len();
        let mut kern = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kern[i * n + j] = (-sq_dist(pooled[i], pooled[j]) / (2.0 * sigma * sigma)).exp();
            }
        }
        let idx: Vec<usize> = (0..n).collect();
        let via_matrix = mmd2_from_kernel(&kern, n, &idx[..3], &idx[3..]);
        let direct = mmd2_unbiased(&x, &y, sigma).unwrap();
        assert!((via_matrix - direct).abs() < 1e-14);
    }

    #[test]
    fn median_heuristic_fixtures() {
        let s = median_heuristic_bandwidth(&pts(&[&[0.0]]), &pts(&[&[2.0]])).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        let s = median_heuristic_bandwidth(&pts(&[&[0.0], &[1.0]]), &pts(&[&[2.0]])).unwrap();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        // even count: distances {1,2,3,1,2,1} over {0,1,2,3} → sorted 1,1,1,2,2,3 → 1.5
        let s =
            median_heuristic_bandwidth(&pts(&[&[0.0], &[1.0]]), &pts(&[&[2.0], &[3.0]])).unwrap();
        assert!((s - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(median_heuristic_bandwidth(&pts(&[&[1.0], &[1.0]]), &pts(&[&[1.0]])).is_err());
        // zero median falls back to smallest positive distance
        let s =
            median_heuristic_bandwidth(&pts(&[&[0.0], &[0.0], &[0.0], &[0.0]]), &pts(&[&[4.0]]))
                .unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = pts(&[&[0.0, 1.0], &[1.0, 1.0]]);
        let y = pts(&[&[0.0], &[1.0]]);
        assert!(mmd2_unbiased(&x, &y, 1.0).is_err());
    }

    #[test]
    fn single_permutation_on_identical_samples() {
        let x = pts(&[&[0.0], &[1.0], &[2.5]]);
        for seed in 0..5 {
            let r = permutation_test_mmd(&x, &x, 1, &Rng::new(seed)).unwrap();
            assert!(r.p_value == 0.5 || r.p_value == 1.0, "{}", r.p_value);
        }
    }
}
