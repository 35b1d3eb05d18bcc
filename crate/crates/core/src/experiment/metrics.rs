use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::label::LabelId;
use crate::skeptic::PolicyKind;

/// Unweighted mean of per-class F1 over `classes`.
///
/// A class with no true positives scores 0, including a class that appears
/// in neither list.
pub fn macro_f1(predictions: &[LabelId], truths: &[LabelId], classes: &[LabelId]) -> Result<f64, ExperimentError> {
    if predictions.len() != truths.len() {
        return Err(ExperimentError::InvalidConfig(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() || classes.is_empty() {
        return Err(ExperimentError::EmptyData);
    }
    let total: f64 = classes
        .iter()
        .map(|&c| {
            let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
            for (&p, &t) in predictions.iter().zip(truths) {
                match (p == c, t == c) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    Ok(total / classes.len() as f64)
}

/// One evaluation point of one episode. Counters are cumulative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: PolicyKind,
    pub seed: u64,
    pub fold: usize,
    pub round: u64,
    pub active_queries: u64,
    pub contradiction_queries: u64,
    pub mistakes_found: u64,
    pub macro_f1: f64,
    /// Wall time of the round in seconds; 0 unless timing is enabled.
    pub update_seconds: f64,
}

impl MetricsRow {
    /// Labeling plus contradiction queries, charged at equal cost.
    pub fn total_queries(&self) -> u64 {
        self.active_queries + self.contradiction_queries
    }
}

/// End-of-episode totals, including ground-truth diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub policy: PolicyKind,
    pub seed: u64,
    pub fold: usize,
    pub rounds: u64,
    pub final_f1: f64,
    pub active_queries: u64,
    pub contradiction_queries: u64,
    pub mistakes_found: u64,
    /// Annotator labels that differed from the truth.
    pub noisy_labels: u64,
    /// Challenges where the contested label was wrong.
    pub wrong_labels_challenged: u64,
    /// ... of which the consensus ended up correct.
    pub wrong_labels_corrected: u64,
    /// Consensus labels that differ from the truth.
    pub wrong_consensus: u64,
    pub known_classes: usize,
    pub universe_size: usize,
}

/// Mean and standard error across episodes for one (policy, round).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: PolicyKind,
    pub round: u64,
    pub episodes: usize,
    pub f1_mean: f64,
    pub f1_se: f64,
    pub active_mean: f64,
    pub active_se: f64,
    pub contradiction_mean: f64,
    pub contradiction_se: f64,
    pub mistakes_mean: f64,
    pub mistakes_se: f64,
}

/// (mean, standard error) with the sample standard deviation.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(rows: &[MetricsRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(PolicyKind, u64), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.policy, r.round)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((policy, round), group)| {
            let stat = |f: &dyn Fn(&MetricsRow) -> f64| mean_se(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (f1_mean, f1_se) = stat(&|r| r.macro_f1);
            let (active_mean, active_se) = stat(&|r| r.active_queries as f64);
            let (contradiction_mean, contradiction_se) = stat(&|r| r.contradiction_queries as f64);
            let (mistakes_mean, mistakes_se) = stat(&|r| r.mistakes_found as f64);
            AggregateRow {
                policy,
                round,
                episodes: group.len(),
                f1_mean,
                f1_se,
                active_mean,
                active_se,
                contradiction_mean,
                contradiction_se,
                mistakes_mean,
                mistakes_se,
            }
        })
        .collect()
}
