//! Comparison detectors that test each window against the retained
//! detection-training sample: per-dimension KS with Bonferroni aggregation,
//! kernel MMD with a permutation test, and Welch t-tests on single-instance
//! confidence scores.
//!
//! These are lazy: every call recomputes over the full reference sample
//! (MMD subsamples it down to a fixed cap first).

use std::borrow::Cow;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::{
    compute_kappa, parse_csv_rows, ConfidenceFunction, ScoreSample, SoftmaxVector,
};
use crate::stats::{
    ks_two_sample, permutation_test_mmd, t_test_two_sample_welch, Alternative, Rng, TestResult,
    DEFAULT_PERMUTATIONS,
};

/// Reference-size cap for MMD.
pub const DEFAULT_MMD_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    Softmax,
    Embedding,
}

/// Rows of equal dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSample {
    vectors: Vec<Vec<f64>>,
    kind: VectorKind,
}

impl VectorSample {
    pub fn new(vectors: Vec<Vec<f64>>, kind: VectorKind) -> Result<Self> {
        let d = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("vector sample is empty"))?;
        if d == 0 {
            return Err(Error::invalid("vectors must have at least one dimension"));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::invalid(format!(
                    "row {i} has dimension {}, expected {d}",
                    v.len()
                )));
            }
            match kind {
                VectorKind::Softmax => {
                    SoftmaxVector::new(v.clone())?;
                }
                VectorKind::Embedding => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::invalid(format!("row {i} has non-finite entries")));
                    }
                }
            }
        }
        Ok(VectorSample { vectors, kind })
    }

    /// A one-dimensional embedding sample holding the scores.
    pub fn from_scores(scores: &ScoreSample) -> Self {
        VectorSample {
            vectors: scores.scores().iter().map(|&s| vec![s]).collect(),
            kind: VectorKind::Embedding,
        }
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn kind(&self) -> VectorKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[j]).collect()
    }

    pub fn select(&self, idx: &[usize]) -> VectorSample {
        VectorSample {
            vectors: idx.iter().map(|&i| self.vectors[i].clone()).collect(),
            kind: self.kind,
        }
    }

    /// Apply a confidence function to every (softmax) row.
    pub fn to_scores(&self, cf: ConfidenceFunction, source_id: &str) -> Result<ScoreSample> {
        if self.kind != VectorKind::Softmax {
            return Err(Error::invalid("confidence scores need softmax rows"));
        }
        let scores = self
            .vectors
            .iter()
            .map(|v| compute_kappa(&SoftmaxVector::new(v.clone())?, cf))
            .collect::<Result<Vec<_>>>()?;
        ScoreSample::new(scores, cf.name(), source_id)
    }
}

/// Read a comma-separated vector file (softmax rows are checked to sum to 1).
pub fn load_vectors(path: &Path, kind: VectorKind, header: bool) -> Result<VectorSample> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = parse_csv_rows(&text, path, header)?;
    let mut vectors = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if kind == VectorKind::Softmax {
            SoftmaxVector::new(row.clone()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.to_string(),
            })?;
        }
        vectors.push(row);
    }
    VectorSample::new(vectors, kind)
}

fn check_same_dim(a: &VectorSample, b: &VectorSample) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: reference d={}, window d={}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Per-dimension KS tests aggregated with a Bonferroni correction.
pub fn detect_ks(
    reference: &VectorSample,
    window: &VectorSample,
    alpha: f64,
) -> Result<TestResult> {
    check_same_dim(reference, window)?;
    let d = reference.dim();
    let per_dim = (0..d)
        .into_par_iter()
        .map(|j| ks_two_sample(&reference.column(j), &window.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let (argmin, best) = per_dim
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.p_value.total_cmp(&b.p_value).then(i.cmp(j)))
        .expect("d >= 1");
    let aggregate = (d as f64 * best.p_value).min(1.0);
    Ok(TestResult::new("ks_bonferroni", best.statistic, aggregate)
        .with("argmin_dim", argmin)
        .with("min_p", best.p_value)
        .with("dims", d)
        .with("reject", best.p_value < alpha / d as f64))
}

/// MMD permutation test against a (capped) reference.
pub fn detect_mmd(
    reference: &VectorSample,
    window: &VectorSample,
    alpha: f64,
    n_permutations: usize,
    cap: usize,
    rng: &Rng,
) -> Result<TestResult> {
    check_same_dim(reference, window)?;
    if cap < 2 {
        return Err(Error::invalid("MMD reference cap must be >= 2"));
    }
    let capped;
    let reference = if reference.len() > cap {
        // the base stream is reserved for subsampling; permutations use derived streams
        let mut sub = rng.clone();
        let mut idx = sample_indices(&mut sub, reference.len(), cap).into_vec();
        idx.sort_unstable();
        capped = reference.select(&idx);
        &capped
    } else {
        reference
    };
    let r = permutation_test_mmd(reference.vectors(), window.vectors(), n_permutations, rng)?;
    let reject = r.p_value < alpha;
    Ok(r.with("reference_used", reference.len())
        .with("reject", reject))
}

/// Single-instance estimator whose scores are compared with a Welch t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Sr,
    Entropy,
}

impl Estimator {
    pub fn confidence_function(self) -> ConfidenceFunction {
        match self {
            Estimator::Sr => ConfidenceFunction::SoftmaxResponse,
            Estimator::Entropy => ConfidenceFunction::OneMinusEntropy,
        }
    }
}

/// Welch t-test between reference and window single-instance scores.
pub fn detect_single_instance(
    reference: &ScoreSample,
    window: &ScoreSample,
    alpha: f64,
    estimator: Estimator,
) -> Result<TestResult> {
    let expected = estimator.confidence_function().name();
    for s in [reference, window] {
        if s.kappa_name() != expected {
            return Err(Error::KappaMismatch {
                model: expected.to_string(),
                window: s.kappa_name().to_string(),
            });
        }
    }
    let r = t_test_two_sample_welch(reference.scores(), window.scores(), Alternative::TwoSided)?;
    let reject = r.p_value < alpha;
    Ok(r.with("reject", reject))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ks,
    Mmd,
    SingleSr,
    SingleEntropy,
}

/// Retained data a baseline compares windows against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Vectors(VectorSample),
    Scores(ScoreSample),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub n_permutations: usize,
    pub mmd_cap: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            n_permutations: DEFAULT_PERMUTATIONS,
            mmd_cap: DEFAULT_MMD_CAP,
            seed: 0,
        }
    }
}

/// A baseline bound to its reference sample.
#[derive(Debug, Clone)]
pub struct BaselineDetector {
    method: BaselineMethod,
    reference: Reference,
    config: BaselineConfig,
}

impl BaselineDetector {
    pub fn new(method: BaselineMethod, reference: Reference, config: BaselineConfig) -> Self {
        BaselineDetector {
            method,
            reference,
            config,
        }
    }

    pub fn method(&self) -> BaselineMethod {
        self.method
    }

    /// Test a window. `window_index` picks the random stream for MMD so
    /// repeated calls are reproducible and independent.
    pub fn detect(&self, window: &Reference, alpha: f64, window_index: u64) -> Result<TestResult> {
        match self.method {
            BaselineMethod::Ks => {
                let (r, w) = (as_vectors(&self.reference), as_vectors(window));
                detect_ks(&r, &w, alpha)
            }
            BaselineMethod::Mmd => {
                let (r, w) = (as_vectors(&self.reference), as_vectors(window));
                // derived streams do not nest, so each window gets a fresh seed
                let seed = rng_seed(&Rng::new(self.config.seed).derive(window_index));
                detect_mmd(
                    &r,
                    &w,
                    alpha,
                    self.config.n_permutations,
                    self.config.mmd_cap,
                    &Rng::new(seed),
                )
            }
            BaselineMethod::SingleSr | BaselineMethod::SingleEntropy => {
                let est = if self.method == BaselineMethod::SingleSr {
                    Estimator::Sr
                } else {
                    Estimator::Entropy
                };
                let cf = est.confidence_function();
                let (r, w) = (as_scores(&self.reference, cf)?, as_scores(window, cf)?);
                detect_single_instance(&r, &w, alpha, est)
            }
        }
    }
}

fn rng_seed(rng: &Rng) -> u64 {
    use rand::RngCore;
    rng.clone().next_u64()
}

fn as_vectors(r: &Reference) -> Cow<'_, VectorSample> {
    match r {
        Reference::Vectors(v) => Cow::Borrowed(v),
        Reference::Scores(s) => Cow::Owned(VectorSample::from_scores(s)),
    }
}

fn as_scores(r: &Reference, cf: ConfidenceFunction) -> Result<Cow<'_, ScoreSample>> {
    Ok(match r {
        Reference::Scores(s) => Cow::Borrowed(s),
        Reference::Vectors(v) => Cow::Owned(v.to_scores(cf, "vectors")?),
    })
}
