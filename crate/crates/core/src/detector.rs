//! Coverage-based shift detector.
//!
//! Fitting runs SGC once per target coverage on the detection-training
//! sample and keeps only the resulting `(b*, θ)` pairs. Detection on a
//! window of `k` scores touches nothing but those pairs, so each call is
//! `O(k · C_target)` regardless of how large the training sample was.
//!
//! A window violates coverage `j` when its empirical coverage at `θ_j` is at
//! most `b*_j`. The violation statistic is
//!
//! ```text
//! V = (1/C) Σ_j (b*_j - ĉ_j) · 1[ĉ_j ≤ b*_j]
//! ```
//!
//! and a one-sided one-sample t-test on the `k · C` per-instance terms
//! `(b*_j - 1[x_i ≥ θ_j]) · 1[ĉ_j ≤ b*_j]` decides whether `V > 0`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::ScoreSample;
use crate::sgc::{run_sgc_sorted, CoverageBound, SgcConfig};
use crate::stats::{t_test_one_sample, Alternative};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_COVERAGE_COUNT: usize = 10;

const GRID_LOW: f64 = 0.1;

/// Fitted detector: one coverage bound per target coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub format_version: u32,
    pub kappa_name: String,
    pub m: usize,
    pub delta: f64,
    pub c_target_count: usize,
    pub pairs: Vec<CoverageBound>,
}

/// Outcome for one target coverage on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCheck {
    pub c_target: f64,
    pub b_star: f64,
    pub theta: f64,
    pub empirical_coverage: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub v_statistic: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub shift_detected: bool,
    pub window_size: usize,
    pub per_coverage: Vec<CoverageCheck>,
}

/// Target coverages `0.1 + (j-1)·0.9/C` for `j = 1..=C`.
pub fn coverage_grid(count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| GRID_LOW + j as f64 * (1.0 - GRID_LOW) / count as f64)
        .collect()
}

/// Fit the detector on a detection-training sample.
pub fn fit(sample: &ScoreSample, delta: f64, c_target_count: usize) -> Result<DetectorModel> {
    if c_target_count == 0 {
        return Err(Error::invalid("c_target_count must be >= 1"));
    }
    if sample.len() < 2 {
        return Err(Error::invalid(format!(
            "m must be ≥ 2, got {}",
            sample.len()
        )));
    }
    let mut sorted = sample.scores().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let pairs = coverage_grid(c_target_count)
        .into_iter()
        .map(|target_coverage| {
            run_sgc_sorted(
                &sorted,
                &SgcConfig {
                    delta,
                    target_coverage,
                },
            )
            .map(|t| t.result)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectorModel {
        format_version: MODEL_FORMAT_VERSION,
        kappa_name: sample.kappa_name().to_string(),
        m: sample.len(),
        delta,
        c_target_count,
        pairs,
    })
}

fn check_kappa(model: &DetectorModel, window: &ScoreSample) -> Result<()> {
    if model.kappa_name != window.kappa_name() {
        return Err(Error::KappaMismatch {
            model: model.kappa_name.clone(),
            window: window.kappa_name().to_string(),
        });
    }
    Ok(())
}

fn coverage_checks(model: &DetectorModel, window: &ScoreSample) -> Vec<CoverageCheck> {
    let k = window.len() as f64;
    model
        .pairs
        .iter()
        .map(|p| {
            let selected = window.scores().iter().filter(|&&s| s >= p.theta).count();
            let empirical_coverage = selected as f64 / k;
            CoverageCheck {
                c_target: p.c_target,
                b_star: p.b_star,
                theta: p.theta,
                empirical_coverage,
                violated: empirical_coverage <= p.b_star,
            }
        })
        .collect()
}

fn terms_from_checks(
    model: &DetectorModel,
    checks: &[CoverageCheck],
    window: &ScoreSample,
) -> Vec<f64> {
    let mut terms = Vec::with_capacity(window.len() * model.pairs.len());
    for c in checks {
        if c.violated {
            terms.extend(window.scores().iter().map(|&s| {
                let g = if s >= c.theta { 1.0 } else { 0.0 };
                c.b_star - g
            }));
        } else {
            terms.extend(std::iter::repeat_n(0.0, window.len()));
        }
    }
    terms
}

/// The `k · C_target` per-instance violation terms; their mean is `V`.
pub fn violation_terms(model: &DetectorModel, window: &ScoreSample) -> Result<Vec<f64>> {
    check_kappa(model, window)?;
    let checks = coverage_checks(model, window);
    Ok(terms_from_checks(model, &checks, window))
}

/// Test one window for shift at significance `alpha`.
pub fn detect(model: &DetectorModel, window: &ScoreSample, alpha: f64) -> Result<DetectionReport> {
    check_kappa(model, window)?;
    if window.len() < 2 {
        return Err(Error::invalid(format!(
            "window size must be >= 2, got {}",
            window.len()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must lie in [0,1), got {alpha}"
        )));
    }
    let checks = coverage_checks(model, window);
    let v_statistic = checks
        .iter()
        .filter(|c| c.violated)
        .map(|c| c.b_star - c.empirical_coverage)
        .sum::<f64>()
        / checks.len() as f64;
    assert!(
        v_statistic >= 0.0,
        "violation statistic must be nonnegative"
    );

    let terms = terms_from_checks(model, &checks, window);
    let test = t_test_one_sample(&terms, 0.0, Alternative::Greater)?;
    Ok(DetectionReport {
        v_statistic,
        t_statistic: test.statistic,
        p_value: test.p_value,
        alpha,
        shift_detected: test.p_value < alpha,
        window_size: window.len(),
        per_coverage: checks,
    })
}

impl DetectorModel {
    /// Structural checks applied after loading.
    pub fn validate(&self) -> Result<()> {
        if self.pairs.len() != self.c_target_count {
            return Err(Error::Model(format!(
                "{} pairs but c_target_count = {}",
                self.pairs.len(),
                self.c_target_count
            )));
        }
        if self.pairs.is_empty() {
            return Err(Error::Model("model has no coverage pairs".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Model(format!("delta {} outside (0,1)", self.delta)));
        }
        if self.m < 2 {
            return Err(Error::Model(format!("m = {} < 2", self.m)));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if !(GRID_LOW..1.0).contains(&p.c_target) {
                return Err(Error::Model(format!(
                    "c_target {} outside [0.1, 1)",
                    p.c_target
                )));
            }
            if !(0.0..=1.0).contains(&p.b_star) {
                return Err(Error::Model(format!("b_star {} outside [0, 1]", p.b_star)));
            }
            if !p.theta.is_finite() {
                return Err(Error::Model("non-finite threshold".into()));
            }
            if i > 0 && p.c_target <= self.pairs[i - 1].c_target {
                return Err(Error::Model(
                    "c_target values must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_sig17(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Model("missing format_version".into()))?;
        if found != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::Version {
                found: found.try_into().unwrap_or(u32::MAX),
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let model: DetectorModel = serde_json::from_value(raw)?;
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model(model: &DetectorModel, path: &Path) -> Result<()> {
    let text = model.to_json()?;
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<DetectorModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DetectorModel::from_json(&text)
}

/// Write through a sibling temp file and rename into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Pretty JSON with every float printed to 17 significant digits.
pub(crate) fn to_json_sig17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[derive(Default)]
struct Sig17<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}
