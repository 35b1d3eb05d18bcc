//! The skeptical interaction loop.
//!
//! Each round the learner predicts `ŷ = argmax_ℓ μ_ℓ(x)`, then
//!
//! 1. requests a label with probability `α = 1 − Φ(μ_ŷ(x) / σ(x))`;
//! 2. if the annotator's label `ỹ` disagrees with `ŷ`, challenges it with
//!    probability `γ = Φ((μ_ŷ(x) − μ_ỹ(x)) / σ(x))` (zero on agreement);
//! 3. stores the consensus label, which is never disputed again.
//!
//! A class the model has never seen has mean 0, the GP prior.
//!
//! Two baselines share the same query rule: [`PolicyKind::GpNever`] never
//! challenges and [`PolicyKind::GpAlways`] challenges every disagreement.
//!
//! Every round consumes exactly two uniform draws from the learner's RNG,
//! recorded in [`InteractionRecord::rng_draws`]: the first decides the
//! label request, the second the challenge. Policies run over the same seed
//! therefore see identical coin streams.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgp::{ImgpError, ImgpModel, Posterior};
use crate::kernels::KernelSpec;
use crate::label::LabelId;
use crate::normal::std_normal_cdf;
use crate::oracle::{Annotator, OracleError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Isgp,
    GpNever,
    GpAlways,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Isgp, PolicyKind::GpNever, PolicyKind::GpAlways];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Isgp => "isgp",
            PolicyKind::GpNever => "gp_never",
            PolicyKind::GpAlways => "gp_always",
        }
    }

    /// Challenge probability for this policy.
    pub fn challenge_probability(
        self,
        posterior: &Posterior,
        prediction: LabelId,
        annotator_label: LabelId,
    ) -> Result<f64, ImgpError> {
        if annotator_label == prediction {
            return Ok(0.0);
        }
        match self {
            PolicyKind::Isgp => skeptic_probability(posterior, prediction, annotator_label),
            PolicyKind::GpNever => Ok(0.0),
            PolicyKind::GpAlways => Ok(1.0),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "isgp" => Ok(PolicyKind::Isgp),
            "gp_never" | "never" => Ok(PolicyKind::GpNever),
            "gp_always" | "always" => Ok(PolicyKind::GpAlways),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// α: probability of requesting a label for the predicted class.
pub fn active_probability(posterior: &Posterior, prediction: LabelId) -> Result<f64, ImgpError> {
    let mean = posterior.mean(prediction).ok_or(ImgpError::UnknownLabel(prediction))?;
    if posterior.sigma <= 0.0 {
        return Err(ImgpError::ZeroSigma);
    }
    // Φ(−z) is 1 − Φ(z) without cancellation in the upper tail.
    Ok(std_normal_cdf(-mean / posterior.sigma))
}

/// γ: probability of challenging the annotator's label.
pub fn skeptic_probability(
    posterior: &Posterior,
    prediction: LabelId,
    annotator_label: LabelId,
) -> Result<f64, ImgpError> {
    let predicted = posterior.mean(prediction).ok_or(ImgpError::UnknownLabel(prediction))?;
    if annotator_label == prediction {
        return Ok(0.0);
    }
    if posterior.sigma <= 0.0 {
        return Err(ImgpError::ZeroSigma);
    }
    let claimed = posterior.mean(annotator_label).unwrap_or(0.0);
    Ok(std_normal_cdf((predicted - claimed) / posterior.sigma))
}

/// One round of interaction, with every random draw and answer recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub round: u64,
    pub instance: Vec<f64>,
    pub prediction: LabelId,
    pub alpha: f64,
    pub active_coin: bool,
    pub annotator_label: Option<LabelId>,
    pub gamma: Option<f64>,
    pub skeptic_coin: Option<bool>,
    pub challenge_answer: Option<LabelId>,
    pub consensus_label: Option<LabelId>,
    /// Uniform draws behind `active_coin` and `skeptic_coin`.
    pub rng_draws: [f64; 2],
    /// Ground truth, when the stream carries it (simulations only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<LabelId>,
}

impl InteractionRecord {
    pub fn challenged(&self) -> bool {
        self.challenge_answer.is_some()
    }

    /// The challenge changed the annotator's answer.
    pub fn mistake_uncovered(&self) -> bool {
        matches!(
            (self.challenge_answer, self.annotator_label),
            (Some(answer), Some(contested)) if answer != contested
        )
    }
}

/// The first half of a round: prediction and the label-request decision.
#[derive(Clone, Debug)]
pub struct OpenRound {
    pub round: u64,
    pub instance: Vec<f64>,
    pub prediction: LabelId,
    pub posterior: Posterior,
    pub alpha: f64,
    pub draws: [f64; 2],
}

impl OpenRound {
    pub fn open(model: &ImgpModel, round: u64, x: &[f64], draws: [f64; 2]) -> Result<Self, ImgpError> {
        let (prediction, posterior) = model.predict(x)?;
        let alpha = active_probability(&posterior, prediction)?;
        Ok(OpenRound {
            round,
            instance: x.to_vec(),
            prediction,
            posterior,
            alpha,
            draws,
        })
    }

    pub fn active_coin(&self) -> bool {
        self.draws[0] < self.alpha
    }

    /// Record for the round as it stands before any annotator answer.
    pub fn record(&self) -> InteractionRecord {
        InteractionRecord {
            round: self.round,
            instance: self.instance.clone(),
            prediction: self.prediction,
            alpha: self.alpha,
            active_coin: self.active_coin(),
            annotator_label: None,
            gamma: None,
            skeptic_coin: None,
            challenge_answer: None,
            consensus_label: None,
            rng_draws: self.draws,
            true_label: None,
        }
    }

    /// γ and the skeptic coin for the annotator's label.
    pub fn challenge(&self, policy: PolicyKind, annotator_label: LabelId) -> Result<(f64, bool), ImgpError> {
        let gamma = policy.challenge_probability(&self.posterior, self.prediction, annotator_label)?;
        Ok((gamma, self.draws[1] < gamma))
    }
}

pub fn draw_round<R: Rng + ?Sized>(rng: &mut R) -> [f64; 2] {
    [rng.random(), rng.random()]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Model(#[from] ImgpError),
    #[error(transparent)]
    Annotator(#[from] OracleError),
}

/// Runs one round against `annotator` and updates `model` on a query.
///
/// On error the model is unchanged.
#[allow(clippy::too_many_arguments)]
pub fn step<R, A>(
    model: &mut ImgpModel,
    round: u64,
    x: &[f64],
    truth: LabelId,
    annotator: &mut A,
    policy: PolicyKind,
    rng: &mut R,
) -> Result<InteractionRecord, StepError>
where
    R: Rng + ?Sized,
    A: Annotator + ?Sized,
{
    let open = OpenRound::open(model, round, x, draw_round(rng))?;
    let mut record = open.record();
    record.true_label = Some(truth);
    if !record.active_coin {
        return Ok(record);
    }
    let answer = annotator.label_query(x, truth)?;
    let (gamma, skeptic_coin) = open.challenge(policy, answer)?;
    record.annotator_label = Some(answer);
    record.gamma = Some(gamma);
    record.skeptic_coin = Some(skeptic_coin);
    let consensus = if skeptic_coin {
        let reply = annotator.contradiction_query(x, truth, answer, open.prediction)?;
        record.challenge_answer = Some(reply);
        reply
    } else {
        answer
    };
    model.add_example(x, consensus)?;
    record.consensus_label = Some(consensus);
    Ok(record)
}

/// A model, a policy and its coin source, stepping through a stream.
#[derive(Clone, Debug)]
pub struct Learner<R> {
    model: ImgpModel,
    policy: PolicyKind,
    rng: R,
    round: u64,
}

impl<R: Rng> Learner<R> {
    pub fn new(model: ImgpModel, policy: PolicyKind, rng: R) -> Self {
        Learner {
            model,
            policy,
            rng,
            round: 0,
        }
    }

    pub fn model(&self) -> &ImgpModel {
        &self.model
    }

    pub fn into_model(self) -> ImgpModel {
        self.model
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    /// Rounds completed so far.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    pub fn step<A: Annotator + ?Sized>(
        &mut self,
        x: &[f64],
        truth: LabelId,
        annotator: &mut A,
    ) -> Result<InteractionRecord, StepError> {
        let record = step(
            &mut self.model,
            self.round + 1,
            x,
            truth,
            annotator,
            self.policy,
            &mut self.rng,
        )?;
        self.round += 1;
        Ok(record)
    }
}

#[derive(Debug, Error)]
#[error("episode aborted at round {round}: {source}")]
pub struct EpisodeError {
    pub round: u64,
    pub records: Vec<InteractionRecord>,
    #[source]
    pub source: StepError,
}

/// Steps through `stream` in order, one record per element.
pub fn run_episode<R, A>(
    model: &mut ImgpModel,
    stream: &[(Vec<f64>, LabelId)],
    annotator: &mut A,
    policy: PolicyKind,
    rng: &mut R,
) -> Result<Vec<InteractionRecord>, EpisodeError>
where
    R: Rng + ?Sized,
    A: Annotator + ?Sized,
{
    let mut records = Vec::with_capacity(stream.len());
    for (i, (x, truth)) in stream.iter().enumerate() {
        let round = i as u64 + 1;
        match step(model, round, x, *truth, annotator, policy, rng) {
            Ok(record) => records.push(record),
            Err(source) => return Err(EpisodeError { round, records, source }),
        }
    }
    Ok(records)
}

/// Rebuilds a model from the consensus examples in `records`.
pub fn replay_model(
    kernel: KernelSpec,
    rho: f64,
    initial_classes: impl IntoIterator<Item = LabelId>,
    records: &[InteractionRecord],
) -> Result<ImgpModel, ImgpError> {
    let mut model = ImgpModel::new(kernel, rho, initial_classes)?;
    for r in records {
        if let Some(label) = r.consensus_label {
            model.add_example(&r.instance, label)?;
        }
    }
    Ok(model)
}

/// Writes one JSON record per line.
pub fn write_records<W: Write>(mut out: W, records: &[InteractionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<B: BufRead>(input: B) -> std::io::Result<Vec<InteractionRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|line| {
            let line = line?;
            serde_json::from_str(&line).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{OracleConfig, SimulatedOracle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A: LabelId = LabelId(0);
    const B: LabelId = LabelId(1);

    fn posterior(pairs: &[(LabelId, f64)], sigma: f64) -> Posterior {
        Posterior {
            means: pairs.iter().copied().collect(),
            sigma,
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(active_probability(&posterior(&[(A, 0.0)], 1.3), A).unwrap(), 0.5);
        let a = active_probability(&posterior(&[(A, 2.0)], 1.0), A).unwrap();
        assert!((a - 0.022750131948179195).abs() < 1e-15);
        let a = active_probability(&posterior(&[(A, 1e3)], 1.0), A).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn gamma_values() {
        let p = posterior(&[(A, 0.9), (B, 0.9)], 0.2);
        assert_eq!(skeptic_probability(&p, A, A).unwrap(), 0.0);
        assert_eq!(skeptic_probability(&p, A, B).unwrap(), 0.5);
        let p = posterior(&[(A, 0.6), (B, 0.0)], 0.2);
        let g = skeptic_probability(&p, A, B).unwrap();
        assert!((g - 0.9986501019683699).abs() < 1e-12);
        // unseen class falls back to the prior mean
        let g_new = skeptic_probability(&p, A, LabelId(9)).unwrap();
        assert_eq!(g_new, g);
    }

    #[test]
    fn policy_overrides() {
        let p = posterior(&[(A, 0.2), (B, 0.1)], 0.5);
        assert_eq!(PolicyKind::GpNever.challenge_probability(&p, A, B).unwrap(), 0.0);
        assert_eq!(PolicyKind::GpAlways.challenge_probability(&p, A, B).unwrap(), 1.0);
        assert_eq!(PolicyKind::GpAlways.challenge_probability(&p, A, A).unwrap(), 0.0);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("gp-never".parse::<PolicyKind>().unwrap(), PolicyKind::GpNever);
        assert_eq!("ISGP".parse::<PolicyKind>().unwrap(), PolicyKind::Isgp);
        assert!("srf".parse::<PolicyKind>().is_err());
    }

    /// Coin source that always draws 0.0, forcing a query whenever α > 0.
    struct Zeros;

    impl rand::RngCore for Zeros {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0)
        }
    }

    /// Annotator with scripted answers that fails once the script runs out.
    struct Scripted(Vec<LabelId>);

    impl Annotator for Scripted {
        fn label_query(&mut self, _: &[f64], _: LabelId) -> Result<LabelId, OracleError> {
            self.0.pop().ok_or(OracleError::Unavailable("script exhausted".into()))
        }
        fn contradiction_query(
            &mut self,
            x: &[f64],
            t: LabelId,
            _: LabelId,
            _: LabelId,
        ) -> Result<LabelId, OracleError> {
            self.label_query(x, t)
        }
    }

    #[test]
    fn annotator_failure_leaves_model_intact() {
        let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
        let mut ann = Scripted(vec![]);
        // draws below 0.5 force a query on the empty model
        let mut rng = Zeros;
        let err = step(&mut model, 1, &[0.0, 0.0], A, &mut ann, PolicyKind::Isgp, &mut rng).unwrap_err();
        assert!(matches!(err, StepError::Annotator(_)));
        assert!(model.is_empty());
    }

    #[test]
    fn gp_never_keeps_annotator_label() {
        let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
        let mut rng = Zeros;
        let mut ann = Scripted(vec![B]);
        let r = step(&mut model, 1, &[0.0, 0.0], A, &mut ann, PolicyKind::GpNever, &mut rng).unwrap();
        assert!(r.active_coin);
        assert_eq!(r.annotator_label, Some(B));
        assert_eq!(r.gamma, Some(0.0));
        assert_eq!(r.consensus_label, Some(B));
        assert!(model.known_classes().contains(&B));
    }

    #[test]
    fn agreement_is_never_challenged() {
        let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
        let mut rng = Zeros;
        let mut ann = Scripted(vec![A]);
        let r = step(&mut model, 1, &[0.0, 0.0], A, &mut ann, PolicyKind::GpAlways, &mut rng).unwrap();
        assert_eq!(r.gamma, Some(0.0));
        assert_eq!(r.skeptic_coin, Some(false));
        assert!(!r.challenged());
    }

    #[test]
    fn empty_model_round_is_decided_by_recorded_draw() {
        let oracle_cfg = OracleConfig::new(0.2, vec![A, B], 5);
        let run = || {
            let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
            let mut oracle = SimulatedOracle::new(oracle_cfg.clone()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            step(&mut model, 1, &[0.3, 0.1], B, &mut oracle, PolicyKind::Isgp, &mut rng).unwrap()
        };
        let r = run();
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.active_coin, r.rng_draws[0] < 0.5);
        assert_eq!(r, run());
    }

    #[test]
    fn episode_round_numbers_and_partial_records() {
        let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
        let stream: Vec<_> = (0..4).map(|i| (vec![i as f64 * 5.0], A)).collect();
        let mut rng = Zeros;
        // one scripted answer: round 1 succeeds, round 2 fails
        let mut ann = Scripted(vec![A]);
        let err = run_episode(&mut model, &stream, &mut ann, PolicyKind::Isgp, &mut rng).unwrap_err();
        assert_eq!(err.round, 2);
        assert_eq!(err.records.len(), 1);
        assert_eq!(err.records[0].round, 1);
        assert_eq!(model.len(), 1);
    }

    #[test]
    fn records_round_trip_as_json_lines() {
        let mut model = ImgpModel::new(KernelSpec::default(), 1e-8, [A]).unwrap();
        let mut oracle = SimulatedOracle::new(OracleConfig::new(0.3, vec![A, B], 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let stream: Vec<_> = (0..30)
            .map(|i| (vec![(i % 7) as f64, (i % 3) as f64 * 2.5], LabelId(i % 2)))
            .collect();
        let records = run_episode(&mut model, &stream, &mut oracle, PolicyKind::Isgp, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), records.len());
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        let rebuilt = replay_model(KernelSpec::default(), 1e-8, [A], &back).unwrap();
        assert_eq!(rebuilt.snapshot(), model.snapshot());
    }
}
