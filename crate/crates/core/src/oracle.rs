//! Simulated noisy annotator.
//!
//! Labeling queries are answered correctly with probability `1 − η`;
//! otherwise the answer is drawn uniformly from the other classes of the
//! universe. Contradiction queries follow the same rule, except that a
//! correct contested label is always re-asserted.
//!
//! Wrong answers range over the whole class universe, not only the classes
//! the learner has seen. Noise can therefore introduce classes early, which
//! is exactly the situation a skeptical learner has to cope with.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::LabelId;

/// Noise rates above this value trigger a warning.
pub const HIGH_NOISE_WARNING: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("noise rate must lie in [0, 0.5), got {0}")]
    InvalidEta(f64),
    #[error("class universe is empty")]
    EmptyUniverse,
    #[error("class universe contains {0} more than once")]
    DuplicateClass(LabelId),
    #[error("no wrong label exists in a single-class universe with a non-zero noise rate")]
    NoWrongLabel,
    #[error("label {0} is not in the class universe")]
    NotInUniverse(LabelId),
    #[error("contested label {0} equals the machine label; only disagreements are challenged")]
    NotADisagreement(LabelId),
    #[error("annotator unavailable: {0}")]
    Unavailable(String),
}

/// A source of labels for the interaction loop.
///
/// `truth` is the ground-truth label of `x`, which simulated annotators use
/// to decide whether to answer correctly.
pub trait Annotator {
    fn label_query(&mut self, x: &[f64], truth: LabelId) -> Result<LabelId, OracleError>;

    /// Asked when the learner disputes `contested` in favour of `machine`.
    fn contradiction_query(
        &mut self,
        x: &[f64],
        truth: LabelId,
        contested: LabelId,
        machine: LabelId,
    ) -> Result<LabelId, OracleError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Noise rate η.
    pub eta: f64,
    pub class_universe: Vec<LabelId>,
    pub seed: u64,
    /// When set, contradiction queries are always answered with the truth.
    #[serde(default)]
    pub clean_contradictions: bool,
}

impl OracleConfig {
    pub fn new(eta: f64, class_universe: Vec<LabelId>, seed: u64) -> Self {
        OracleConfig {
            eta,
            class_universe,
            seed,
            clean_contradictions: false,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(0.0..0.5).contains(&self.eta) {
            return Err(OracleError::InvalidEta(self.eta));
        }
        if self.class_universe.is_empty() {
            return Err(OracleError::EmptyUniverse);
        }
        let mut sorted = self.class_universe.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(OracleError::DuplicateClass(w[0]));
        }
        if self.eta > 0.0 && self.class_universe.len() == 1 {
            return Err(OracleError::NoWrongLabel);
        }
        Ok(())
    }
}

/// Annotator that answers from ground truth with η-rate noise.
#[derive(Clone, Debug)]
pub struct SimulatedOracle {
    config: OracleConfig,
    rng: ChaCha8Rng,
}

impl SimulatedOracle {
    pub fn new(config: OracleConfig) -> Result<Self, OracleError> {
        config.validate()?;
        if config.eta > HIGH_NOISE_WARNING {
            log::warn!("noise rate {} is close to the 0.5 learnability limit", config.eta);
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(SimulatedOracle { config, rng })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    fn check_member(&self, label: LabelId) -> Result<(), OracleError> {
        if self.config.class_universe.contains(&label) {
            Ok(())
        } else {
            Err(OracleError::NotInUniverse(label))
        }
    }

    fn noisy_answer(&mut self, truth: LabelId, eta: f64) -> LabelId {
        // always consume one draw so the stream does not depend on η
        let u: f64 = self.rng.random();
        if u >= eta {
            return truth;
        }
        let wrong = self.config.class_universe.len() - 1;
        let k = self.rng.random_range(0..wrong);
        self.config
            .class_universe
            .iter()
            .copied()
            .filter(|&l| l != truth)
            .nth(k)
            .expect("k < number of wrong labels")
    }
}

impl Annotator for SimulatedOracle {
    fn label_query(&mut self, _x: &[f64], truth: LabelId) -> Result<LabelId, OracleError> {
        self.check_member(truth)?;
        Ok(self.noisy_answer(truth, self.config.eta))
    }

    fn contradiction_query(
        &mut self,
        _x: &[f64],
        truth: LabelId,
        contested: LabelId,
        machine: LabelId,
    ) -> Result<LabelId, OracleError> {
        self.check_member(truth)?;
        if contested == machine {
            return Err(OracleError::NotADisagreement(contested));
        }
        if contested == truth {
            return Ok(truth);
        }
        let eta = if self.config.clean_contradictions {
            0.0
        } else {
            self.config.eta
        };
        Ok(self.noisy_answer(truth, eta))
    }
}
