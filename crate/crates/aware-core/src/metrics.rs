//! Evaluation metrics: accuracy, rank-based ROC-AUC, RMSE and MAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Acc,
    RocAuc,
    Rmse,
    Mae,
}

impl Metric {
    /// Higher is better for classification metrics, lower for errors.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, Metric::Acc | Metric::RocAuc)
    }

    pub fn compatible_with(&self, task: TaskKind) -> bool {
        match self {
            Metric::Acc => task != TaskKind::Regression,
            Metric::RocAuc => task == TaskKind::BinaryClassification,
            Metric::Rmse | Metric::Mae => task == TaskKind::Regression,
        }
    }

    pub fn default_for(task: TaskKind) -> Metric {
        match task {
            TaskKind::BinaryClassification | TaskKind::MulticlassClassification => Metric::Acc,
            TaskKind::Regression => Metric::Rmse,
        }
    }
}

/// Fraction of predictions matching the integer labels.
pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64> {
    if predicted.len() != labels.len() || predicted.is_empty() {
        return Err(Error::Metric("accuracy needs matched non-empty inputs".into()));
    }
    let hits = predicted
        .iter()
        .zip(labels.iter())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// ROC-AUC as the Mann-Whitney rank statistic: the probability a random
/// positive outranks a random negative, ties counted half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Metric("roc_auc needs matched non-empty inputs".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(
            "roc_auc is undefined for a single-class label set".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("finite scores")
    });
    // Midranks over tied score groups.
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let positive_rank_sum: f64 = labels
        .iter()
        .zip(ranks.iter())
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let u = positive_rank_sum - (positives * (positives + 1)) as f64 / 2.0;
    Ok(u / (positives * negatives) as f64)
}

pub fn rmse(predicted: &[f64], targets: &[f64]) -> Result<f64> {
    if predicted.len() != targets.len() || predicted.is_empty() {
        return Err(Error::Metric("rmse needs matched non-empty inputs".into()));
    }
    let mse: f64 = predicted
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predicted.len() as f64;
    Ok(mse.sqrt())
}

pub fn mae(predicted: &[f64], targets: &[f64]) -> Result<f64> {
    if predicted.len() != targets.len() || predicted.is_empty() {
        return Err(Error::Metric("mae needs matched non-empty inputs".into()));
    }
    Ok(predicted
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / predicted.len() as f64)
}
