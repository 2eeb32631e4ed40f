//! Threshold-curve metrics over labelled window p-values.
//!
//! A window's detection score is `1 - p`; shifted windows are the positive
//! class for AUROC, AUPR-Out and FPR@95TPR, in-distribution windows for
//! AUPR-In. Scores are ordered by comparing p-values directly, which avoids
//! collapsing distinct small p-values when forming `1 - p`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(p_value, is_shifted)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPValues {
    entries: Vec<(f64, bool)>,
}

impl LabeledPValues {
    pub fn new(entries: Vec<(f64, bool)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("no labelled p-values"));
        }
        if let Some((p, _)) = entries.iter().find(|(p, _)| !p.is_finite()) {
            return Err(Error::invalid(format!("non-finite p-value {p}")));
        }
        Ok(LabeledPValues { entries })
    }

    pub fn entries(&self) -> &[(f64, bool)] {
        &self.entries
    }

    /// Counts of (shifted, in-distribution) entries.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.1).count();
        (pos, self.entries.len() - pos)
    }

    fn require_both(&self) -> Result<()> {
        match self.class_counts() {
            (0, _) | (_, 0) => Err(Error::invalid(
                "threshold metrics need both shifted and in-distribution entries",
            )),
            _ => Ok(()),
        }
    }

    /// Same p-values, labels swapped.
    pub fn flipped(&self) -> Self {
        LabeledPValues {
            entries: self.entries.iter().map(|&(p, s)| (p, !s)).collect(),
        }
    }
}

/// Which class counts as positive for AUPR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positive {
    In,
    Out,
}

/// Entries grouped into tie blocks in descending score order; each block
/// holds `(positives, negatives)`.
fn tie_blocks(
    items: &mut [(f64, bool)],
    desc: impl Fn(f64, f64) -> Ordering,
) -> Vec<(usize, usize)> {
    items.sort_by(|a, b| desc(a.0, b.0));
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<f64> = None;
    for &(s, pos) in items.iter() {
        if prev.is_none_or(|q| desc(q, s) != Ordering::Equal) {
            blocks.push((0, 0));
        }
        let b = blocks.last_mut().expect("pushed above");
        if pos {
            b.0 += 1;
        } else {
            b.1 += 1;
        }
        prev = Some(s);
    }
    blocks
}

/// Shifted-first ordering: smaller p is a higher detection score.
fn by_p_ascending(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

fn by_p_descending(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

/// Mann–Whitney AUROC of `(score, positive)` pairs; higher scores should
/// mark positives. Ties count one half.
pub fn auroc_from_scores(items: &[(f64, bool)]) -> Result<f64> {
    let mut v = items.to_vec();
    if v.iter().any(|e| e.0.is_nan()) {
        return Err(Error::invalid("NaN detection score"));
    }
    let blocks = tie_blocks(&mut v, by_p_descending);
    auroc_from_blocks(&blocks)
}

fn auroc_from_blocks(blocks: &[(usize, usize)]) -> Result<f64> {
    let pos: usize = blocks.iter().map(|b| b.0).sum();
    let neg: usize = blocks.iter().map(|b| b.1).sum();
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUROC needs both classes"));
    }
    // doubled win count: 2 per strict win, 1 per tie
    let mut neg_below = neg as u128;
    let mut twice_wins: u128 = 0;
    for &(p, n) in blocks {
        neg_below -= n as u128;
        twice_wins += p as u128 * (2 * neg_below + n as u128);
    }
    Ok(twice_wins as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// AUROC with shifted windows as positives.
pub fn auroc(data: &LabeledPValues) -> Result<f64> {
    data.require_both()?;
    let mut v = data.entries.clone();
    auroc_from_blocks(&tie_blocks(&mut v, by_p_ascending))
}

/// Area under the precision–recall curve, step interpolated: the sum over
/// descending-score thresholds of recall increment times precision.
pub fn aupr(data: &LabeledPValues, positive: Positive) -> Result<f64> {
    data.require_both()?;
    let mut v: Vec<(f64, bool)> = match positive {
        Positive::Out => data.entries.clone(),
        Positive::In => data.entries.iter().map(|&(p, s)| (p, !s)).collect(),
    };
    let order = match positive {
        Positive::Out => by_p_ascending,
        Positive::In => by_p_descending,
    };
    let blocks = tie_blocks(&mut v, order);
    let total_pos: usize = blocks.iter().map(|b| b.0).sum();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for &(p, n) in &blocks {
        tp += p;
        fp += n;
        if p > 0 {
            area += (p as f64 / total_pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(area)
}

/// Detection error and FPR at the largest threshold with TPR ≥ 0.95.
/// Returns `(detection_error, fpr)`, with detection error
/// `0.5·(1 - TPR) + 0.5·FPR` at the achieved TPR.
pub fn detection_error_and_fpr_at_95tpr(data: &LabeledPValues) -> Result<(f64, f64)> {
    data.require_both()?;
    let mut v = data.entries.clone();
    let blocks = tie_blocks(&mut v, by_p_ascending);
    let (pos, neg) = data.class_counts();
    let (mut tp, mut fp) = (0usize, 0usize);
    for &(p, n) in &blocks {
        tp += p;
        fp += n;
        if 20 * tp >= 19 * pos {
            break;
        }
    }
    let tpr = tp as f64 / pos as f64;
    let fpr = fp as f64 / neg as f64;
    Ok((0.5 * (1.0 - tpr) + 0.5 * fpr, fpr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp(shifted: &[f64], id: &[f64]) -> LabeledPValues {
        let mut e: Vec<(f64, bool)> = shifted.iter().map(|&p| (p, true)).collect();
        e.extend(id.iter().map(|&p| (p, false)));
        LabeledPValues::new(e).unwrap()
    }

    #[test]
    fn auroc_fixtures() {
        assert_eq!(auroc(&lp(&[0.01, 0.02], &[0.6, 0.9])).unwrap(), 1.0);
        assert_eq!(auroc(&lp(&[0.3, 0.3], &[0.3, 0.3, 0.3])).unwrap(), 0.5);
        assert_eq!(auroc(&lp(&[0.01, 0.5], &[0.2, 0.8])).unwrap(), 0.75);
        assert_eq!(auroc(&lp(&[0.2], &[0.2, 0.1])).unwrap(), 0.25);
    }

    #[test]
    fn single_class_is_an_error() {
        let d = lp(&[0.1, 0.2], &[]);
        assert!(auroc(&d).is_err());
        assert!(aupr(&d, Positive::In).is_err());
        assert!(detection_error_and_fpr_at_95tpr(&d).is_err());
        assert!(LabeledPValues::new(vec![]).is_err());
    }

    #[test]
    fn aupr_fixtures() {
        let perfect = lp(&[0.01, 0.02], &[0.6, 0.9]);
        assert_eq!(aupr(&perfect, Positive::In).unwrap(), 1.0);
        assert_eq!(aupr(&perfect, Positive::Out).unwrap(), 1.0);

        let constant = lp(&[0.5; 3], &[0.5; 7]);
        assert!((aupr(&constant, Positive::Out).unwrap() - 0.3).abs() < 1e-15);
        assert!((aupr(&constant, Positive::In).unwrap() - 0.7).abs() < 1e-15);

        // ID positives: ranking 0.9(+) 0.6(-) 0.4(+) 0.1(-)
        // staircase: recall 1/2 at precision 1, recall 1 at precision 2/3
        let inter = lp(&[0.6, 0.1], &[0.9, 0.4]);
        let want = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((aupr(&inter, Positive::In).unwrap() - want).abs() < 1e-15);
        // shifted positives: ranking 0.1(+) 0.4(-) 0.6(+) 0.9(-), same shape
        assert!((aupr(&inter, Positive::Out).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn fpr_fixtures() {
        let perfect = lp(&[0.01, 0.02], &[0.6, 0.9]);
        let (pe, fpr) = detection_error_and_fpr_at_95tpr(&perfect).unwrap();
        assert_eq!(fpr, 0.0);
        assert!(pe <= 0.025);

        let same = lp(&[0.4; 5], &[0.4; 5]);
        assert_eq!(detection_error_and_fpr_at_95tpr(&same).unwrap(), (0.5, 1.0));

        // 20 positives at p = 0.001·i; 20 negatives at 0.5 + 0.01·j except one
        // negative at 0.0185, between the 18th and 19th positive.
        // TPR reaches 19/20 at the 19th positive, after one false positive.
        let shifted: Vec<f64> = (1..=20).map(|i| 0.001 * i as f64).collect();
        let mut id: Vec<f64> = (1..20).map(|j| 0.5 + 0.01 * j as f64).collect();
        id.push(0.0185);
        let (pe, fpr) = detection_error_and_fpr_at_95tpr(&lp(&shifted, &id)).unwrap();
        assert_eq!(fpr, 1.0 / 20.0);
        assert!((pe - (0.5 * 0.05 + 0.5 * 0.05)).abs() < 1e-15);
    }

    fn labelled() -> impl Strategy<Value = Vec<(f64, bool)>> {
        prop::collection::vec(
            ((0u8..20).prop_map(|k| k as f64 / 20.0), any::<bool>()),
            2..60,
        )
        .prop_filter("both classes", |v| {
            v.iter().any(|e| e.1) && v.iter().any(|e| !e.1)
        })
    }

    proptest! {
        #[test]
        fn rank_symmetry(e in labelled()) {
            let d = LabeledPValues::new(e).unwrap();
            prop_assert_eq!(auroc(&d).unwrap() + auroc(&d.flipped()).unwrap(), 1.0);
        }

        #[test]
        fn negating_scores_and_flipping_labels_preserves_auroc(e in labelled()) {
            let a = auroc_from_scores(&e).unwrap();
            let neg: Vec<(f64, bool)> = e.iter().map(|&(s, l)| (-s, !l)).collect();
            prop_assert_eq!(a, auroc_from_scores(&neg).unwrap());
        }

        #[test]
        fn invariant_under_monotone_transform(e in labelled()) {
            let d = LabeledPValues::new(e.clone()).unwrap();
            let t = LabeledPValues::new(e.iter().map(|&(p, l)| (p.powi(3) * 0.5, l)).collect()).unwrap();
            prop_assert_eq!(auroc(&d).unwrap(), auroc(&t).unwrap());
            prop_assert_eq!(aupr(&d, Positive::In).unwrap(), aupr(&t, Positive::In).unwrap());
            prop_assert_eq!(aupr(&d, Positive::Out).unwrap(), aupr(&t, Positive::Out).unwrap());
            prop_assert_eq!(
                detection_error_and_fpr_at_95tpr(&d).unwrap(),
                detection_error_and_fpr_at_95tpr(&t).unwrap()
            );
        }
    }
}
