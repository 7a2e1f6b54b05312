//! Confusion matrices, precision/recall/F, accuracy and ROC area.

use serde::{Deserialize, Serialize};

use super::dataset::Prediction;
use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic
/// `U / (n_pos * n_neg)`, ties counting one half.
pub fn auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Parameter(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate("AUC needs both classes present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // mid-ranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if truth[k] {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedConfusion {
    pub matrix: Vec<Vec<f64>>,
    /// Rows with no instances, rendered as zeros.
    pub absent_rows: Vec<usize>,
}

/// Divides each row by its total.
pub fn normalized_confusion(confusion: &[Vec<usize>]) -> NormalizedConfusion {
    let mut absent_rows = Vec::new();
    let matrix = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: usize = row.iter().sum();
            if total == 0 {
                absent_rows.push(i);
                vec![0.0; row.len()]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    NormalizedConfusion {
        matrix,
        absent_rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub instances: usize,
    /// Positive-class value for two classes, macro average otherwise.
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub accuracy_pct: f64,
    /// Harmonic mean of `precision` and `recall`.
    pub f_measure: f64,
    /// `None` when a class needed for the ROC is missing.
    pub auc: Option<f64>,
    /// `confusion[truth][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub normalized_confusion: NormalizedConfusion,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Weighted one-vs-rest AUC over classes present in `truth`; the plain
/// positive-class AUC when there are two classes.
fn report_auc(truth: &[usize], preds: &[Prediction], n_classes: usize) -> Option<f64> {
    let score = |c: usize| preds.iter().map(|p| p.scores[c]).collect::<Vec<_>>();
    if n_classes == 2 {
        let t: Vec<bool> = truth.iter().map(|&l| l == 1).collect();
        return auc(&score(1), &t).ok();
    }
    let n = truth.len() as f64;
    let mut total = 0.0;
    let mut weight = 0.0;
    for c in 0..n_classes {
        let t: Vec<bool> = truth.iter().map(|&l| l == c).collect();
        let support = t.iter().filter(|&&b| b).count();
        if support == 0 {
            continue;
        }
        let a = auc(&score(c), &t).ok()?;
        total += support as f64 / n * a;
        weight += support as f64 / n;
    }
    (weight > 0.0).then(|| total / weight)
}

impl EvalReport {
    pub fn from_predictions(classes: &[String], truth: &[usize], preds: &[Prediction]) -> Self {
        let c = classes.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, p) in truth.iter().zip(preds) {
            confusion[t][p.label] += 1;
        }
        let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
        let total = truth.len();
        let col = |j: usize| confusion.iter().map(|r| r[j]).sum::<usize>();
        let row = |i: usize| confusion[i].iter().sum::<usize>();
        let (precision, recall) = if c == 2 {
            (ratio(confusion[1][1], col(1)), ratio(confusion[1][1], row(1)))
        } else {
            let present: Vec<usize> = (0..c).filter(|&i| row(i) > 0).collect();
            let k = present.len().max(1) as f64;
            (
                present.iter().map(|&i| ratio(confusion[i][i], col(i))).sum::<f64>() / k,
                present.iter().map(|&i| ratio(confusion[i][i], row(i))).sum::<f64>() / k,
            )
        };
        let accuracy = ratio(correct, total);
        Self {
            classes: classes.to_vec(),
            instances: total,
            precision,
            recall,
            accuracy,
            accuracy_pct: 100.0 * accuracy,
            f_measure: f_measure(precision, recall),
            auc: report_auc(truth, preds, c),
            normalized_confusion: normalized_confusion(&confusion),
            confusion,
        }
    }

    /// One row in `Precision Recall Accuracy(%) F-Measure AUC` order.
    pub fn table_row(&self) -> String {
        format!(
            "{:>9.3} {:>9.3} {:>12.2} {:>9.3} {:>9}",
            self.precision,
            self.recall,
            self.accuracy_pct,
            self.f_measure,
            self.auc.map_or("-".to_string(), |a| format!("{a:.3}"))
        )
    }

    pub fn table_header() -> &'static str {
        "Precision    Recall  Accuracy(%) F-Measure       AUC"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if truth[i] && !truth[j] {
                    den += 1.0;
                    num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        let s = [0.9, 0.8, 0.7];
        let t = [true, false, true];
        assert_eq!(pair_auc(&s, &t), 0.5);
        assert_eq!(auc(&s, &t).unwrap(), 0.5);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn auc_matches_pair_enumeration_with_ties() {
        let s = [0.1, 0.4, 0.4, 0.35, 0.8, 0.8, 0.8, 0.05, 0.6];
        let t = [false, true, false, true, true, false, true, false, false];
        assert!((auc(&s, &t).unwrap() - pair_auc(&s, &t)).abs() < 1e-15);
    }

    #[test]
    fn normalization() {
        let id = normalized_confusion(&[vec![3, 0], vec![0, 5]]);
        assert_eq!(id.matrix, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let m = normalized_confusion(&[vec![8, 2], vec![3, 7]]);
        assert_eq!(m.matrix, vec![vec![0.8, 0.2], vec![0.3, 0.7]]);
        let u = normalized_confusion(&[vec![2, 2, 2], vec![1, 1, 1], vec![0, 0, 0]]);
        assert_eq!(u.absent_rows, vec![2]);
        for row in &u.matrix[..2] {
            assert!(row.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_class_report() {
        let classes = vec!["Base".to_string(), "Distracted".to_string()];
        let truth = [0, 0, 1, 1, 1];
        let labels = [0, 1, 1, 1, 0];
        let preds: Vec<Prediction> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Prediction {
                label: l,
                scores: vec![1.0 - i as f64 / 10.0, i as f64 / 10.0],
            })
            .collect();
        let r = EvalReport::from_predictions(&classes, &truth, &preds);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![1, 2]]);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        assert!((r.f_measure - f_measure(r.precision, r.recall)).abs() < 1e-12);
        assert_eq!(r.auc, Some(1.0));
    }
}
