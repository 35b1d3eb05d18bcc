//! Cross-validation splits and training-stream orderings.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::label::LabelId;

/// Order in which training instances reach the learner.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    /// Uniform random permutation.
    #[default]
    RandomShuffle,
    /// Class blocks in ascending class id, shuffled within each block. New
    /// classes keep appearing as the stream advances.
    SequentialClusters,
}

impl std::str::FromStr for StreamOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random_shuffle" | "random" | "shuffle" => Ok(StreamOrder::RandomShuffle),
            "sequential_clusters" | "sequential" => Ok(StreamOrder::SequentialClusters),
            other => Err(format!("unknown ordering `{other}`")),
        }
    }
}

impl std::fmt::Display for StreamOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StreamOrder::RandomShuffle => "random_shuffle",
            StreamOrder::SequentialClusters => "sequential_clusters",
        })
    }
}

/// Permutes `indices` (positions into `labels`) according to `order`.
pub fn order_instances<R: Rng + ?Sized>(
    labels: &[LabelId],
    indices: &[usize],
    order: StreamOrder,
    rng: &mut R,
) -> Vec<usize> {
    match order {
        StreamOrder::RandomShuffle => {
            let mut out = indices.to_vec();
            out.shuffle(rng);
            out
        }
        StreamOrder::SequentialClusters => {
            let mut blocks: BTreeMap<LabelId, Vec<usize>> = BTreeMap::new();
            for &i in indices {
                blocks.entry(labels[i]).or_default().push(i);
            }
            blocks
                .into_values()
                .flat_map(|mut block| {
                    block.shuffle(rng);
                    block
                })
                .collect()
        }
    }
}

/// SplitMix64 finalizer; mixes a base seed with stream tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    /// Training stream, already ordered.
    pub train: Vec<usize>,
    /// Held-out indices, ascending.
    pub test: Vec<usize>,
}

const FOLD_TAG: u64 = 0xF01D;
const ORDER_TAG: u64 = 0x0DE5;

/// Stratified k-fold split with ordered training streams.
///
/// Members of each class are shuffled and dealt round-robin over the folds,
/// continuing the deal across classes, so fold sizes differ by at most one
/// and every class is spread within ±1 of proportional. A class with fewer
/// than `k` members cannot be stratified; the split then falls back to a
/// plain shuffled deal and logs a warning.
pub fn make_folds(labels: &[LabelId], k: usize, order: StreamOrder, seed: u64) -> Result<Vec<Fold>, ExperimentError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(ExperimentError::InvalidConfig(format!(
            "cannot make {k} folds from {n} instances"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[FOLD_TAG]));
    let mut by_class: BTreeMap<LabelId, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let deal: Vec<usize> = if by_class.values().any(|members| members.len() < k) {
        log::warn!("a class has fewer than {k} members; folds are not stratified");
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        all
    } else {
        by_class
            .into_values()
            .flat_map(|mut members| {
                members.shuffle(&mut rng);
                members
            })
            .collect()
    };
    let mut assignment = vec![0usize; n];
    for (pos, &i) in deal.iter().enumerate() {
        assignment[i] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let rest: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[ORDER_TAG, f as u64]));
            Fold {
                index: f,
                train: order_instances(labels, &rest, order, &mut order_rng),
                test,
            }
        })
        .collect())
}
