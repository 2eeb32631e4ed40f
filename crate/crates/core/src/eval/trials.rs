//! Repeated-window evaluation: for each window size, draw balanced sets of
//! in-distribution and shifted windows, collect each method's p-values and
//! summarise them with the threshold metrics.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineDetector, Reference, VectorSample};
use crate::detector::{self, DetectorModel};
use crate::error::{Error, Result};
use crate::eval::metrics::{
    aupr, auroc, detection_error_and_fpr_at_95tpr, LabeledPValues, Positive,
};
use crate::scores::ScoreSample;
use crate::stats::Rng;

pub const DEFAULT_WINDOW_SIZES: [usize; 7] = [10, 20, 50, 100, 200, 500, 1000];
pub const DEFAULT_TRIALS: usize = 15;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub window_sizes: Vec<usize>,
    pub n_trials: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrialPlan {
    fn default() -> Self {
        TrialPlan {
            window_sizes: DEFAULT_WINDOW_SIZES.to_vec(),
            n_trials: DEFAULT_TRIALS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

impl TrialPlan {
    pub fn validate(&self) -> Result<()> {
        if self.window_sizes.is_empty() {
            return Err(Error::invalid("plan needs at least one window size"));
        }
        if let Some(k) = self.window_sizes.iter().find(|&&k| k < 2) {
            return Err(Error::invalid(format!(
                "window sizes must be >= 2, got {k}"
            )));
        }
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn max_window(&self) -> usize {
        self.window_sizes.iter().copied().max().unwrap_or(0)
    }
}

/// A detector under evaluation.
#[derive(Debug, Clone)]
pub enum EvalMethod {
    Ours(DetectorModel),
    Baseline(BaselineDetector),
}

/// Command-line method names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    Ours,
    Ks,
    Mmd,
    SingleSr,
    SingleEnt,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Ours => "ours",
            MethodName::Ks => "ks",
            MethodName::Mmd => "mmd",
            MethodName::SingleSr => "single-sr",
            MethodName::SingleEnt => "single-ent",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ours" => MethodName::Ours,
            "ks" => MethodName::Ks,
            "mmd" => MethodName::Mmd,
            "single-sr" => MethodName::SingleSr,
            "single-ent" => MethodName::SingleEnt,
            other => return Err(Error::invalid(format!("unknown method `{other}`"))),
        })
    }
}

impl EvalMethod {
    pub fn name(&self) -> MethodName {
        use crate::baselines::BaselineMethod as B;
        match self {
            EvalMethod::Ours(_) => MethodName::Ours,
            EvalMethod::Baseline(b) => match b.method() {
                B::Ks => MethodName::Ks,
                B::Mmd => MethodName::Mmd,
                B::SingleSr => MethodName::SingleSr,
                B::SingleEntropy => MethodName::SingleEnt,
            },
        }
    }

    /// p-value for one window; `window_index` keys any randomness.
    pub fn p_value(&self, window: &Reference, alpha: f64, window_index: u64) -> Result<f64> {
        match self {
            EvalMethod::Ours(model) => {
                let scores = match window {
                    Reference::Scores(s) => s,
                    Reference::Vectors(_) => {
                        return Err(Error::invalid("the coverage detector needs score windows"))
                    }
                };
                Ok(detector::detect(model, scores, alpha)?.p_value)
            }
            EvalMethod::Baseline(b) => Ok(b.detect(window, alpha, window_index)?.p_value),
        }
    }
}

/// Metrics for one window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub window_size: usize,
    pub auroc: f64,
    pub aupr_in: f64,
    pub aupr_out: f64,
    pub detection_error: f64,
    pub fpr_at_95tpr: f64,
    pub n_trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutput {
    pub rows: Vec<MetricRow>,
    /// Raw p-values per window size, in plan order.
    pub p_values: Vec<(usize, LabeledPValues)>,
}

fn pool_len(p: &Reference) -> usize {
    match p {
        Reference::Scores(s) => s.len(),
        Reference::Vectors(v) => v.len(),
    }
}

fn select(p: &Reference, idx: &[usize]) -> Result<Reference> {
    Ok(match p {
        Reference::Scores(s) => {
            Reference::Scores(s.with_scores(idx.iter().map(|&i| s.scores()[i]).collect())?)
        }
        Reference::Vectors(v) => Reference::Vectors(v.select(idx)),
    })
}

/// Sub-seed for trial `trial` of window size number `size_index`.
fn trial_stream(size_index: usize, trial: usize) -> u64 {
    ((size_index as u64) << 32) | trial as u64
}

/// Evaluate `method` on windows drawn from the two pools.
pub fn run_trials(
    id_pool: &Reference,
    shifted_pool: &Reference,
    method: &EvalMethod,
    plan: &TrialPlan,
) -> Result<TrialOutput> {
    plan.validate()?;
    if std::mem::discriminant(id_pool) != std::mem::discriminant(shifted_pool) {
        return Err(Error::invalid("pools must be of the same kind"));
    }
    let need = plan.max_window();
    for (name, pool) in [("in-distribution", id_pool), ("shifted", shifted_pool)] {
        if pool_len(pool) < need {
            return Err(Error::invalid(format!(
                "{name} pool has {} entries, fewer than the largest window ({need})",
                pool_len(pool)
            )));
        }
    }

    let base = Rng::new(plan.seed);
    let mut rows = Vec::with_capacity(plan.window_sizes.len());
    let mut p_values = Vec::with_capacity(plan.window_sizes.len());
    for (si, &k) in plan.window_sizes.iter().enumerate() {
        let per_trial = (0..plan.n_trials)
            .into_par_iter()
            .map(|t| {
                let stream = trial_stream(si, t);
                let mut rng = base.derive(stream);
                let id_idx = sample_indices(&mut rng, pool_len(id_pool), k).into_vec();
                let sh_idx = sample_indices(&mut rng, pool_len(shifted_pool), k).into_vec();
                let id_w = select(id_pool, &id_idx)?;
                let sh_w = select(shifted_pool, &sh_idx)?;
                let key = rng.next_u64();
                let p_id = method.p_value(&id_w, plan.alpha, key)?;
                let p_sh = method.p_value(&sh_w, plan.alpha, key ^ 1)?;
                Ok([(p_id, false), (p_sh, true)])
            })
            .collect::<Result<Vec<_>>>()?;
        let data = LabeledPValues::new(per_trial.into_iter().flatten().collect())?;
        let (detection_error, fpr_at_95tpr) = detection_error_and_fpr_at_95tpr(&data)?;
        rows.push(MetricRow {
            method: method.name().to_string(),
            window_size: k,
            auroc: auroc(&data)?,
            aupr_in: aupr(&data, Positive::In)?,
            aupr_out: aupr(&data, Positive::Out)?,
            detection_error,
            fpr_at_95tpr,
            n_trials: plan.n_trials,
            seed: plan.seed,
        });
        p_values.push((k, data));
    }
    Ok(TrialOutput { rows, p_values })
}

pub const METRICS_CSV_HEADER: &str =
    "method,window_size,auroc,aupr_in,aupr_out,detection_error,fpr_at_95tpr,n_trials,seed";

/// Metrics table as CSV text.
pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.window_size,
            r.auroc,
            r.aupr_in,
            r.aupr_out,
            r.detection_error,
            r.fpr_at_95tpr,
            r.n_trials,
            r.seed
        ));
    }
    out
}

/// Training sample for a method: fitted model for `ours`, reference for
/// the baselines.
pub fn split_pool(pool: &Reference, seed: u64) -> Result<(Reference, Reference)> {
    let n = pool_len(pool);
    if n < 4 {
        return Err(Error::invalid(format!(
            "pool of {n} entries is too small to split"
        )));
    }
    let mut rng = Rng::new(seed);
    let perm = sample_indices(&mut rng, n, n).into_vec();
    let (a, b) = perm.split_at(n / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((select(pool, &a)?, select(pool, &b)?))
}

/// Convert a pool to scores when it holds softmax rows.
pub fn scores_of(
    pool: &Reference,
    kappa: crate::scores::ConfidenceFunction,
) -> Result<ScoreSample> {
    match pool {
        Reference::Scores(s) => Ok(s.clone()),
        Reference::Vectors(v) => v.to_scores(kappa, "pool"),
    }
}

/// Vector view of a pool.
pub fn vectors_of(pool: &Reference) -> VectorSample {
    match pool {
        Reference::Vectors(v) => v.clone(),
        Reference::Scores(s) => VectorSample::from_scores(s),
    }
}
