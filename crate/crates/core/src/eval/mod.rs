//! Classification and regression metrics, leniency curves and
//! cross-validation summaries.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{confusion_csv, folds_csv, leniency_csv, leniency_svg, per_class_csv, SvgOptions};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions, {1} truths")]
    Length(usize, usize),
    #[error("label {label} is out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("radii must be non-negative and ascending")]
    Radii,
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    pub fn false_positives(&self, c: usize) -> usize {
        (0..self.classes()).filter(|&t| t != c).map(|t| self.counts[t][c]).sum()
    }

    pub fn false_negatives(&self, c: usize) -> usize {
        (0..self.classes()).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }
}

pub fn confusion(preds: &[usize], truths: &[usize], classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::Length(preds.len(), truths.len()));
    }
    let mut counts = vec![vec![0; classes]; classes];
    for (&p, &t) in preds.iter().zip(truths) {
        for label in [p, t] {
            if label >= classes {
                return Err(EvalError::Label { label, classes });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True samples of this class.
    pub support: usize,
    /// Set when TP + FP = 0; precision is then scored 0.
    pub precision_undefined: bool,
    /// Set when TP + FN = 0; recall is then scored 0.
    pub recall_undefined: bool,
    /// No predictions and no samples: left out of the macro average.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub per_class: Vec<PerClass>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Equal to micro precision, recall and F1 for single-label data.
    pub accuracy: f64,
}

impl ClassMetrics {
    /// Classes whose precision or recall fell back to the zero convention.
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.per_class.len())
            .filter(|&c| {
                let p = &self.per_class[c];
                !p.excluded && (p.precision_undefined || p.recall_undefined)
            })
            .collect()
    }
}

/// Precision `TP/(TP+FP)`, recall `TP/(TP+FN)` and F1 per class, plus
/// their macro averages. A zero denominator scores 0 and is flagged;
/// F1 is `2TP/(2TP+FP+FN)`, which is 0 whenever precision + recall is.
pub fn metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<PerClass> = (0..cm.classes())
        .map(|c| {
            let (tp, fp, fnn) = (cm.true_positives(c), cm.false_positives(c), cm.false_negatives(c));
            PerClass {
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fnn),
                f1: ratio(2 * tp, 2 * tp + fp + fnn),
                support: tp + fnn,
                precision_undefined: tp + fp == 0,
                recall_undefined: tp + fnn == 0,
                excluded: tp + fp + fnn == 0,
            }
        })
        .collect();
    let included: Vec<&PerClass> = per_class.iter().filter(|p| !p.excluded).collect();
    let avg = |f: fn(&PerClass) -> f64| included.iter().map(|p| f(p)).sum::<f64>() / included.len() as f64;
    Ok(ClassMetrics {
        macro_precision: avg(|p| p.precision),
        macro_recall: avg(|p| p.recall),
        macro_f1: avg(|p| p.f1),
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionError {
    /// Mean over samples and both coordinates, m^2.
    pub mse: f64,
    /// Euclidean error per sample, m.
    pub distances: Vec<f64>,
}

impl RegressionError {
    pub fn mean_distance(&self) -> f64 {
        self.distances.iter().sum::<f64>() / self.distances.len().max(1) as f64
    }
}

pub fn regression_error(preds: &[[f64; 2]], truths: &[[f64; 2]]) -> Result<RegressionError, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::Length(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sq = 0.0;
    let distances = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let (dx, dy) = (p[0] - t[0], p[1] - t[1]);
            sq += dx * dx + dy * dy;
            dx.hypot(dy)
        })
        .collect();
    Ok(RegressionError { mse: sq / (2 * preds.len()) as f64, distances })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeniencyCurve {
    pub radii: Vec<f64>,
    pub accuracy: Vec<f64>,
}

/// Fraction of `distances` at or below each radius.
pub fn leniency_curve(distances: &[f64], radii: &[f64]) -> Result<LeniencyCurve, EvalError> {
    if distances.is_empty() {
        return Err(EvalError::Empty);
    }
    if radii.iter().any(|r| !(*r >= 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EvalError::Radii);
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let accuracy = radii.iter().map(|&r| sorted.partition_point(|&d| d <= r) as f64 / n).collect();
    Ok(LeniencyCurve { radii: radii.to_vec(), accuracy })
}

/// `0, step, 2 step, ...` up to the first multiple of `step` at or beyond
/// the largest distance.
pub fn radii_covering(distances: &[f64], step: f64) -> Vec<f64> {
    let max = distances.iter().copied().fold(0.0, f64::max);
    let n = (max / step - 1e-9).ceil().max(0.0) as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Smallest radius at which the accuracy reaches `level`: the
/// `ceil(level * n)`-th smallest distance.
pub fn radius_at_accuracy(distances: &[f64], level: f64) -> Result<f64, EvalError> {
    if distances.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[k - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary, EvalError> {
    let n = values.len();
    if n < 2 {
        return Err(EvalError::TooFewFolds(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Summary { mean, std: var.sqrt(), n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub accuracy: Summary,
}

/// Mean and sample standard deviation of the macro metrics across folds.
pub fn cv_summary(folds: &[ClassMetrics]) -> Result<CvSummary, EvalError> {
    let pick = |f: fn(&ClassMetrics) -> f64| summarize(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(CvSummary {
        precision: pick(|m| m.macro_precision)?,
        recall: pick(|m| m.macro_recall)?,
        f1: pick(|m| m.macro_f1)?,
        accuracy: pick(|m| m.accuracy)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_two_two() {
        // Class 0: 8 right, 2 predicted as 1, and 2 of class 1 predicted as 0.
        let mut preds = vec![0; 8];
        let mut truths = vec![0; 8];
        preds.extend([1, 1, 0, 0]);
        truths.extend([0, 0, 1, 1]);
        let cm = confusion(&preds, &truths, 2).unwrap();
        assert_eq!((cm.true_positives(0), cm.false_positives(0), cm.false_negatives(0)), (8, 2, 2));
        let m = metrics(&cm).unwrap();
        assert_eq!(m.per_class[0].precision, 0.8);
        assert_eq!(m.per_class[0].recall, 0.8);
        assert_eq!(m.per_class[0].f1, 0.8);
    }

    #[test]
    fn perfect_and_hopeless() {
        let cm = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let m = metrics(&cm).unwrap();
        assert_eq!((m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));

        let cm = confusion(&[1], &[0], 2).unwrap();
        assert_eq!(cm.counts[0][1], 1);
        let m = metrics(&cm).unwrap();
        assert_eq!(m.per_class[0].f1, 0.0);
        assert!(m.per_class[0].precision_undefined);
        assert_eq!(m.flagged(), vec![0, 1]);
    }

    #[test]
    fn absent_class_is_excluded_from_macro() {
        let m = metrics(&confusion(&[0, 1], &[0, 1], 3).unwrap()).unwrap();
        assert!(m.per_class[2].excluded);
        assert_eq!(m.macro_f1, 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(confusion(&[0], &[0, 1], 2), Err(EvalError::Length(1, 2)));
        assert!(matches!(confusion(&[3], &[0], 2), Err(EvalError::Label { .. })));
        assert_eq!(metrics(&confusion(&[], &[], 2).unwrap()), Err(EvalError::Empty));
        assert_eq!(leniency_curve(&[1.0], &[2.0, 1.0]), Err(EvalError::Radii));
        assert_eq!(summarize(&[0.5]), Err(EvalError::TooFewFolds(1)));
    }

    #[test]
    fn regression() {
        let r = regression_error(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap();
        assert_eq!(r.distances, vec![5.0]);
        assert_eq!(r.mse, 12.5);
        let r = regression_error(&[[1.0, 2.0], [3.0, 4.0]], &[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!((r.mse, r.distances.clone()), (0.0, vec![0.0, 0.0]));
    }

    #[test]
    fn leniency() {
        let c = leniency_curve(&[1.0, 3.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(c.accuracy, vec![0.0, 0.5, 1.0]);
        let c = leniency_curve(&[0.0; 4], &[0.0, 1.0]).unwrap();
        assert_eq!(c.accuracy, vec![1.0, 1.0]);
        assert_eq!(radius_at_accuracy(&[1.0, 3.0], 0.5).unwrap(), 1.0);
        assert_eq!(radius_at_accuracy(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.0);
        assert_eq!(radii_covering(&[0.9, 2.05], 0.5), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn two_fold_summary() {
        let s = summarize(&[0.5, 0.7]).unwrap();
        assert!((s.mean - 0.6).abs() < 1e-15);
        assert!((s.std - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[0.3, 0.3, 0.3]).unwrap().std, 0.0);
    }
}
