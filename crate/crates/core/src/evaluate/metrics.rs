use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::train::{argmax, LossCurves};
use crate::data::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub support: usize,
    /// Share of this class's test samples classified correctly (its recall).
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest AUC; absent when the class has no positives or no negatives.
    pub auc: Option<f64>,
}

/// One-vs-rest ROC curve as `[false positive rate, true positive rate]` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: ClassLabel,
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    /// Overall fraction classified correctly.
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    /// Means over the classes present in the test set.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub macro_auc: Option<f64>,
    pub roc: Vec<RocCurve>,
    pub loss: LossCurves,
}

/// Points of the ROC curve swept over every distinct score, and the
/// trapezoidal AUC. Ties between a positive and a negative count one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<(Vec<[f64; 2]>, f64)> {
    if scores.len() != positive.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    let p = positive.iter().filter(|&&y| y).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::Config("ROC needs at least one positive and one negative".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { layer: "roc scores".into() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![[0.0, 0.0]];
    // twice the area, in units of one positive by one negative
    let mut area2: u64 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == threshold {
            if positive[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push([fp as f64 / n as f64, tp as f64 / p as f64]);
    }
    Ok((points, area2 as f64 / (2 * p * n) as f64))
}

/// Metrics of predicted class probabilities against true class indices.
pub fn evaluate_predictions(labels: &[usize], probs: &[Vec<f64>], loss: LossCurves) -> Result<MetricsReport> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != probs.len() {
        return Err(Error::Shape(format!(
            "{} labels for {} predictions",
            labels.len(),
            probs.len()
        )));
    }
    if let Some(p) = probs.iter().find(|p| p.len() != NUM_CLASSES) {
        return Err(Error::Shape(format!("prediction of width {}", p.len())));
    }
    let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
    for (&y, p) in labels.iter().zip(probs) {
        if y >= NUM_CLASSES {
            return Err(Error::Shape(format!("label {y} outside {NUM_CLASSES} classes")));
        }
        confusion[y][argmax(p)] += 1;
    }
    let correct: usize = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();

    let mut per_class = BTreeMap::new();
    let mut roc = Vec::new();
    for class in ClassLabel::ALL {
        let c = class.index();
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let hits = confusion[c][c] as f64;
        let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
        let recall = ratio(hits, support);
        let precision = ratio(hits, predicted);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let positive: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        let auc = match roc_auc(&scores, &positive) {
            Ok((points, auc)) => {
                roc.push(RocCurve { class, points, auc });
                Some(auc)
            }
            Err(_) => None,
        };
        per_class.insert(
            class,
            ClassMetrics {
                support,
                accuracy: recall,
                precision,
                recall,
                f1,
                auc,
            },
        );
    }

    let present: Vec<&ClassMetrics> = per_class.values().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64;
    let aucs: Vec<f64> = present.iter().filter_map(|m| m.auc).collect();
    Ok(MetricsReport {
        samples: labels.len(),
        accuracy: correct as f64 / labels.len() as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        macro_auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        confusion,
        per_class,
        roc,
        loss,
    })
}

/// Column header matching [`accuracy_row`].
pub fn accuracy_header() -> String {
    let mut s = format!("{:<22}", "Method");
    for c in ClassLabel::ALL {
        s.push_str(&format!("{:>22}", c.display_name()));
    }
    s.push_str(&format!("{:>10}", "Average"));
    s
}

/// Per-class accuracy and overall accuracy in percent, two decimals.
pub fn accuracy_row(method: &str, report: &MetricsReport) -> String {
    let mut s = format!("{method:<22}");
    for c in ClassLabel::ALL {
        s.push_str(&format!("{:>22.2}", 100.0 * report.per_class[&c].accuracy));
    }
    s.push_str(&format!("{:>10.2}", 100.0 * report.accuracy));
    s
}
