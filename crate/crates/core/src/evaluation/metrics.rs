use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F1 of the positive class (`1`). Zero when precision + recall is zero.
pub fn f1_score(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::dim("f1_score", &[predictions.len()], &[labels.len()]));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("f1_score"));
    }
    let c = Confusion::count(predictions, labels);
    let precision_denominator = c.tp + c.fp;
    let recall_denominator = c.tp + c.fn_;
    if c.tp == 0 || precision_denominator == 0 || recall_denominator == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::dim("accuracy", &[predictions.len()], &[labels.len()]));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn count(predictions: &[usize], labels: &[usize]) -> Self {
        let mut c = Confusion::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive scores above a random negative, ties counting half.
/// Computed from rank sums with tied groups sharing their mean rank.
pub fn auc_score(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dim("auc_score", &[scores.len()], &[labels.len()]));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes present".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("AUC scores contain NaN".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps tied mid-ranks integral.
    let mut rank_sum_x2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share mean (i + j + 2) / 2.
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        rank_sum_x2 += pos_in_group * (i + j + 2) as u128;
        i = j + 1;
    }
    let p = positives as u128;
    // U = R - p(p+1)/2, doubled.
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * positives * negatives) as f64)
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for n = 1).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub f1: f64,
    pub auc: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(f1_score(&[0, 0, 0], &[1, 0, 1]).unwrap(), 0.0);
        // TP=2, FP=1, FN=1.
        let f1 = f1_score(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0]).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1_score(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_score(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc_score(&[0.3; 4], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc_score(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(matches!(auc_score(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }
}
