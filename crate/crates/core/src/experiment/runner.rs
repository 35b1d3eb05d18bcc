use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, macro_f1, make_folds, Dataset, EpisodeSummary, ExperimentConfig, ExperimentError, Fold, MetricsRow,
};
use crate::imgp::ImgpModel;
use crate::label::LabelId;
use crate::oracle::{OracleConfig, SimulatedOracle};
use crate::skeptic::{InteractionRecord, Learner, PolicyKind, StepError};

const ORACLE_TAG: u64 = 0x0AC1E;
const COIN_TAG: u64 = 0xC014;

/// Identifies one episode. Episodes are ordered by (seed, fold, policy).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpisodeKey {
    pub seed: u64,
    pub fold: usize,
    pub policy: PolicyKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub key: EpisodeKey,
    pub round: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub key: EpisodeKey,
    pub rows: Vec<MetricsRow>,
    pub summary: EpisodeSummary,
    pub records: Vec<InteractionRecord>,
}

/// Output of [`run_experiment`]. Failed episodes contribute nothing to
/// `rows` or `episodes` and are listed in `failures`.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricsRow>,
    pub episodes: Vec<EpisodeResult>,
    pub failures: Vec<EpisodeFailure>,
}

impl ExperimentOutcome {
    pub fn summaries(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.episodes.iter().map(|e| &e.summary)
    }
}

/// Runs every (seed, fold, policy) episode of `cfg`.
///
/// Episodes run in parallel; results are merged in key order, so the outcome
/// depends only on `cfg`. Relative CSV paths resolve against `base`.
pub fn run_experiment_in(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    let dataset = cfg.data.load(base)?;
    let universe = dataset.classes();
    let mut jobs = Vec::new();
    for &seed in &cfg.seeds {
        for fold in make_folds(&dataset.labels, cfg.folds, cfg.ordering, seed)? {
            for &policy in &cfg.policies {
                jobs.push((
                    EpisodeKey {
                        seed,
                        fold: fold.index,
                        policy,
                    },
                    fold.clone(),
                ));
            }
        }
    }
    jobs.sort_by_key(|(key, _)| *key);

    let results: Vec<Result<EpisodeResult, EpisodeFailure>> = jobs
        .par_iter()
        .map(|(key, fold)| run_one(cfg, &dataset, &universe, *key, fold))
        .collect();

    let mut outcome = ExperimentOutcome::default();
    for result in results {
        match result {
            Ok(ep) => {
                outcome.rows.extend(ep.rows.iter().cloned());
                outcome.episodes.push(ep);
            }
            Err(failure) => {
                log::warn!(
                    "episode seed={} fold={} policy={} failed at round {}: {}",
                    failure.key.seed,
                    failure.key.fold,
                    failure.key.policy,
                    failure.round,
                    failure.message
                );
                outcome.failures.push(failure);
            }
        }
    }
    Ok(outcome)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    run_experiment_in(cfg, None)
}

fn run_one(
    cfg: &ExperimentConfig,
    data: &Dataset,
    universe: &[LabelId],
    key: EpisodeKey,
    fold: &Fold,
) -> Result<EpisodeResult, EpisodeFailure> {
    let fail = |round: u64, message: String| EpisodeFailure { key, round, message };
    let first = *fold
        .train
        .first()
        .ok_or_else(|| fail(0, "empty training stream".into()))?;
    let model =
        ImgpModel::new(cfg.kernel.clone(), cfg.rho, [data.labels[first]]).map_err(|e| fail(0, e.to_string()))?;
    let mut oracle = SimulatedOracle::new(OracleConfig {
        eta: cfg.eta,
        class_universe: universe.to_vec(),
        seed: derive_seed(key.seed, &[ORACLE_TAG, key.fold as u64]),
        clean_contradictions: cfg.clean_contradictions,
    })
    .map_err(|e| fail(0, e.to_string()))?;
    let coins = ChaCha8Rng::seed_from_u64(derive_seed(key.seed, &[COIN_TAG, key.fold as u64]));
    let mut learner = Learner::new(model, key.policy, coins);

    let test_truth: Vec<LabelId> = fold.test.iter().map(|&i| data.labels[i]).collect();
    let evaluate = |model: &ImgpModel| -> Result<f64, StepError> {
        let preds = fold
            .test
            .iter()
            .map(|&i| model.predict(&data.features[i]).map(|(l, _)| l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(macro_f1(&preds, &test_truth, universe).expect("non-empty test fold"))
    };

    let mut summary = EpisodeSummary {
        policy: key.policy,
        seed: key.seed,
        fold: key.fold,
        rounds: 0,
        final_f1: 0.0,
        active_queries: 0,
        contradiction_queries: 0,
        mistakes_found: 0,
        noisy_labels: 0,
        wrong_labels_challenged: 0,
        wrong_labels_corrected: 0,
        wrong_consensus: 0,
        known_classes: 0,
        universe_size: universe.len(),
    };
    let mut rows = Vec::new();
    let mut records = Vec::with_capacity(fold.train.len());
    let n = fold.train.len();
    for (pos, &i) in fold.train.iter().enumerate() {
        let truth = data.labels[i];
        let started = cfg.record_timing.then(Instant::now);
        let record = learner
            .step(&data.features[i], truth, &mut oracle)
            .map_err(|e| fail(pos as u64 + 1, e.to_string()))?;
        let seconds = started.map_or(0.0, |s| s.elapsed().as_secs_f64());

        summary.rounds = record.round;
        if record.active_coin {
            summary.active_queries += 1;
        }
        if let Some(answer) = record.annotator_label {
            if answer != truth {
                summary.noisy_labels += 1;
            }
            if record.challenged() {
                summary.contradiction_queries += 1;
                if record.mistake_uncovered() {
                    summary.mistakes_found += 1;
                }
                if answer != truth {
                    summary.wrong_labels_challenged += 1;
                    if record.consensus_label == Some(truth) {
                        summary.wrong_labels_corrected += 1;
                    }
                }
            }
        }
        if record.consensus_label.is_some_and(|c| c != truth) {
            summary.wrong_consensus += 1;
        }

        let last = pos + 1 == n;
        if (pos + 1) % cfg.eval_stride == 0 || last {
            let f1 = evaluate(learner.model()).map_err(|e| fail(record.round, e.to_string()))?;
            summary.final_f1 = f1;
            rows.push(MetricsRow {
                policy: key.policy,
                seed: key.seed,
                fold: key.fold,
                round: record.round,
                active_queries: summary.active_queries,
                contradiction_queries: summary.contradiction_queries,
                mistakes_found: summary.mistakes_found,
                macro_f1: f1,
                update_seconds: seconds,
            });
        }
        records.push(record);
    }
    summary.known_classes = learner.model().known_classes().len();
    Ok(EpisodeResult {
        key,
        rows,
        summary,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{StreamOrder, SyntheticSpec};

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            data: crate::experiment::DataSource::Synthetic(SyntheticSpec {
                n_instances: 40,
                n_classes: 4,
                ..Default::default()
            }),
            folds: 4,
            seeds: vec![3],
            eta: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn episode_count_and_order() {
        let cfg = small_cfg();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.episodes.len() + out.failures.len(), 3 * 4);
        let keys: Vec<_> = out.episodes.iter().map(|e| e.key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn accounting_identities() {
        let cfg = ExperimentConfig {
            ordering: StreamOrder::SequentialClusters,
            ..small_cfg()
        };
        let out = run_experiment(&cfg).unwrap();
        for ep in &out.episodes {
            let s = &ep.summary;
            let updates = ep.records.iter().filter(|r| r.consensus_label.is_some()).count() as u64;
            assert_eq!(updates, s.active_queries);
            assert!(s.mistakes_found <= s.contradiction_queries);
            assert!(s.contradiction_queries <= s.active_queries);
            for w in ep.rows.windows(2) {
                assert!(w[0].active_queries <= w[1].active_queries);
                assert!(w[0].contradiction_queries <= w[1].contradiction_queries);
                assert!(w[0].mistakes_found <= w[1].mistakes_found);
            }
            if s.policy == PolicyKind::GpNever {
                assert_eq!(s.contradiction_queries, 0);
            }
        }
    }

    #[test]
    fn stride_controls_rows() {
        let cfg = ExperimentConfig {
            eval_stride: 7,
            policies: vec![PolicyKind::Isgp],
            ..small_cfg()
        };
        let out = run_experiment(&cfg).unwrap();
        for ep in &out.episodes {
            // 30 training rounds: 7, 14, 21, 28, 30
            let rounds: Vec<u64> = ep.rows.iter().map(|r| r.round).collect();
            assert_eq!(rounds, vec![7, 14, 21, 28, 30]);
        }
    }

    #[test]
    fn timing_off_by_default() {
        let out = run_experiment(&small_cfg()).unwrap();
        assert!(out.rows.iter().all(|r| r.update_seconds == 0.0));
        let timed = ExperimentConfig {
            record_timing: true,
            ..small_cfg()
        };
        let out = run_experiment(&timed).unwrap();
        assert!(out.rows.iter().any(|r| r.update_seconds > 0.0));
    }
}
