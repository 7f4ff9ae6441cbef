use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grad_logits: Vec<f64>,
}

/// Numerically stable softmax (max subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `L = -sum_i y_i ln p_i` with `p = softmax(logits)`; gradient `p - y`.
pub fn softmax_cross_entropy(logits: &[f64], target: &[f64]) -> Result<CrossEntropy> {
    if logits.len() != target.len() {
        return Err(Error::Shape(format!(
            "{} logits for a {}-class target",
            logits.len(),
            target.len()
        )));
    }
    let ones = target.iter().filter(|&&y| y == 1.0).count();
    if ones != 1 || target.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Shape(format!("target {target:?} is not one-hot")));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let probs = softmax(logits);
    let hot = target.iter().position(|&y| y == 1.0).expect("one-hot");
    // -ln p_hot computed in log space so large margins stay exact-ish
    let loss = -(logits[hot] - max - log_sum);
    let grad_logits = probs.iter().zip(target).map(|(p, y)| p - y).collect();
    Ok(CrossEntropy {
        loss,
        probs,
        grad_logits,
    })
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[class] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// Mean over the batch.
    pub loss: f64,
    pub probs: Vec<Vec<f64>>,
    /// Gradient of the mean loss, same dims as the logits.
    pub grad: Tensor,
}

/// Mean cross-entropy of `(N, 1, 1, E)` logits against class indices.
pub fn batch_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<BatchLoss> {
    let n = logits.batch();
    if labels.len() != n || n == 0 {
        return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let classes = logits.item_len();
    let mut grad = Vec::with_capacity(logits.len());
    let mut probs = Vec::with_capacity(n);
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::Shape(format!("label {y} outside {classes} classes")));
        }
        let ce = softmax_cross_entropy(logits.item(i), &one_hot(y, classes))?;
        total += ce.loss;
        grad.extend(ce.grad_logits.iter().map(|g| g / n as f64));
        probs.push(ce.probs);
    }
    Ok(BatchLoss {
        loss: total / n as f64,
        probs,
        grad: Tensor::from_vec(logits.dims(), grad)?,
    })
}
