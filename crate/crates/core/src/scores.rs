//! Per-instance confidence scores and the files they come from.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a softmax row sum from 1 (fits 4-decimal exports).
pub const SOFTMAX_SUM_TOLERANCE: f64 = 1e-4;

/// A probability vector over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxVector(Vec<f64>);

impl SoftmaxVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("softmax vector is empty"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("softmax entry {p} outside [0,1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SOFTMAX_SUM_TOLERANCE {
            return Err(Error::invalid(format!(
                "softmax entries sum to {sum}, expected 1 ± {SOFTMAX_SUM_TOLERANCE}"
            )));
        }
        Ok(SoftmaxVector(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// An embedding row; all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("embedding vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding vector has non-finite entries"));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Confidence-rate function mapping a model output to a scalar score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceFunction {
    /// Maximum softmax probability.
    SoftmaxResponse,
    /// `1 - H(p)` with natural-log entropy and `0·ln 0 = 0`.
    OneMinusEntropy,
    /// Scores supplied directly, already computed upstream.
    RawPassthrough,
}

impl ConfidenceFunction {
    pub fn name(self) -> &'static str {
        match self {
            ConfidenceFunction::SoftmaxResponse => "softmax_response",
            ConfidenceFunction::OneMinusEntropy => "one_minus_entropy",
            ConfidenceFunction::RawPassthrough => "raw_passthrough",
        }
    }
}

impl fmt::Display for ConfidenceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfidenceFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sr" | "softmax_response" => Ok(ConfidenceFunction::SoftmaxResponse),
            "entropy" | "one_minus_entropy" => Ok(ConfidenceFunction::OneMinusEntropy),
            "raw" | "raw_passthrough" => Ok(ConfidenceFunction::RawPassthrough),
            other => Err(Error::invalid(format!(
                "unknown confidence function `{other}`"
            ))),
        }
    }
}

/// Apply a confidence function to one softmax output.
pub fn compute_kappa(vec: &SoftmaxVector, cf: ConfidenceFunction) -> Result<f64> {
    let p = vec.probs();
    match cf {
        ConfidenceFunction::SoftmaxResponse => {
            Ok(p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        }
        ConfidenceFunction::OneMinusEntropy => {
            let entropy: f64 = p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum();
            Ok(1.0 - entropy)
        }
        ConfidenceFunction::RawPassthrough => Err(Error::invalid(
            "raw_passthrough cannot be computed from a softmax vector",
        )),
    }
}

/// Ordered confidence scores with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    scores: Vec<f64>,
    kappa_name: String,
    source_id: String,
}

impl ScoreSample {
    pub fn new(
        scores: Vec<f64>,
        kappa_name: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("score sample is empty"));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!(
                "score {i} is not finite ({})",
                scores[i]
            )));
        }
        Ok(ScoreSample {
            scores,
            kappa_name: kappa_name.into(),
            source_id: source_id.into(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn kappa_name(&self) -> &str {
        &self.kappa_name
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Same provenance, new scores (e.g. a window cut from this sample).
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        ScoreSample::new(scores, self.kappa_name.clone(), self.source_id.clone())
    }
}

/// On-disk layout of a score file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    /// One decimal float per line.
    RawScores,
    /// Comma-separated softmax rows, converted with a confidence function.
    SoftmaxCsv,
}

impl FromStr for ScoreFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "raw_scores" => Ok(ScoreFormat::RawScores),
            "softmax" | "softmax_csv" => Ok(ScoreFormat::SoftmaxCsv),
            other => Err(Error::invalid(format!("unknown score format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub format: ScoreFormat,
    /// For raw files this labels the function that produced the scores;
    /// for softmax files it is applied to every row.
    pub kappa: ConfidenceFunction,
    /// Skip the first line of a CSV file.
    pub header: bool,
}

/// Read a score file from disk.
pub fn load_scores(path: &Path, opts: &LoadOptions) -> Result<ScoreSample> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match opts.format {
        ScoreFormat::RawScores => parse_raw_scores(&text, path, opts.kappa),
        ScoreFormat::SoftmaxCsv => {
            let rows = parse_csv_rows(&text, path, opts.header)?;
            softmax_rows_to_scores(rows, path, opts.kappa)
        }
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_finite(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("not a number: `{}`", tok.trim())))?;
    if !v.is_finite() {
        return Err(parse_error(
            path,
            line,
            format!("non-finite value `{}`", tok.trim()),
        ));
    }
    Ok(v)
}

pub(crate) fn parse_raw_scores(
    text: &str,
    path: &Path,
    kappa: ConfidenceFunction,
) -> Result<ScoreSample> {
    let scores = text
        .lines()
        .enumerate()
        .map(|(i, line)| parse_finite(line, path, i + 1))
        .collect::<Result<Vec<_>>>()?;
    if scores.is_empty() {
        return Err(parse_error(path, 0, "file contains no scores"));
    }
    ScoreSample::new(scores, kappa.name(), path.display().to_string())
}

/// Parse a headerless (or `header`-skipping) numeric CSV with uniform row width.
/// Returns `(line_number, row)` pairs.
pub(crate) fn parse_csv_rows(
    text: &str,
    path: &Path,
    header: bool,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate().skip(usize::from(header)) {
        let lineno = i + 1;
        let row = line
            .split(',')
            .map(|tok| parse_finite(tok, path, lineno))
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("row has {} columns, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push((lineno, row));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, "file contains no rows"));
    }
    Ok(rows)
}

fn softmax_rows_to_scores(
    rows: Vec<(usize, Vec<f64>)>,
    path: &Path,
    kappa: ConfidenceFunction,
) -> Result<ScoreSample> {
    let scores = rows
        .into_iter()
        .map(|(line, row)| {
            SoftmaxVector::new(row)
                .and_then(|v| compute_kappa(&v, kappa))
                .map_err(|e| parse_error(path, line, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreSample::new(scores, kappa.name(), path.display().to_string())
}
