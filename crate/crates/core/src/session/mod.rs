//! Turn-based live sessions with a human annotator.
//!
//! A [`Session`] runs the skeptical loop one step at a time. The client
//! calls `advance` to pull the next instance; when the learner asks for a
//! label the session holds a pending query until `submit_label` arrives,
//! and a challenged label waits for `resolve_challenge`. At most one query
//! is pending and every out-of-turn call is rejected with no state change.
//!
//! State is defined by the configuration plus the list of accepted
//! commands: replaying the commands rebuilds the session exactly, coins
//! included. [`SessionStore`] persists that pair on disk.
//!
//! ```
//! use isgp::session::{Event, InstanceSource, Session, SessionConfig};
//!
//! let config = SessionConfig::new(
//!     InstanceSource::Points { points: vec![vec![0.0, 0.0], vec![4.0, 4.0]] },
//!     ["indoor", "outdoor"],
//! );
//! let mut session = Session::new("demo", config)?;
//! // Nothing is known yet, so the learner asks with probability 1/2.
//! match session.advance()? {
//!     Event::LabelRequest { alpha, .. } | Event::Predicted { alpha, .. } => assert_eq!(alpha, 0.5),
//!     other => unreachable!("{other:?}"),
//! }
//! # Ok::<(), isgp::session::SessionError>(())
//! ```

mod store;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{
    derive_seed, generate_synthetic, order_instances, ExperimentError, StreamOrder, SyntheticSpec,
};
use crate::imgp::{ImgpError, ImgpModel, ModelSnapshot};
use crate::kernels::KernelSpec;
use crate::label::{LabelId, LabelVocabulary};
use crate::skeptic::{draw_round, InteractionRecord, OpenRound, PolicyKind};

pub use store::{SessionStore, CONFIG_FILE, LOG_FILE};

pub const SESSION_CONFIG_VERSION: u32 = 1;

const STREAM_TAG: u64 = 0x57_2EA1;
const COIN_TAG: u64 = 0xC014;

/// Where a session's instances come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    /// A generated dataset, streamed in `ordering`. The generator's labels
    /// are discarded.
    Synthetic {
        #[serde(default)]
        spec: SyntheticSpec,
        #[serde(default)]
        ordering: StreamOrder,
    },
    /// Explicit points, streamed in the given order.
    Points { points: Vec<Vec<f64>> },
}

fn default_version() -> u32 {
    SESSION_CONFIG_VERSION
}

fn default_rho() -> f64 {
    1e-8
}

fn default_policy() -> PolicyKind {
    PolicyKind::Isgp
}

/// Session configuration, persisted as `config.json`.
///
/// ```json
/// {
///   "version": 1,
///   "kernel": { "type": "squared_exponential", "length_scale": 2.0 },
///   "rho": 1e-8,
///   "source": { "kind": "synthetic", "ordering": "random_shuffle" },
///   "initial_classes": ["kitchen"],
///   "seed": 7,
///   "policy": "isgp"
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub source: InstanceSource,
    pub initial_classes: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: PolicyKind,
}

impl SessionConfig {
    /// Defaults for everything except the source and the starting classes.
    pub fn new<I, S>(source: InstanceSource, initial_classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SessionConfig {
            version: SESSION_CONFIG_VERSION,
            kernel: KernelSpec::default(),
            rho: default_rho(),
            source,
            initial_classes: initial_classes.into_iter().map(Into::into).collect(),
            seed: 0,
            policy: PolicyKind::Isgp,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |msg: String| Err(SessionError::InvalidConfig(msg));
        if self.version != SESSION_CONFIG_VERSION {
            return bad(format!("unsupported session config version {}", self.version));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad(format!("rho must be non-negative, got {}", self.rho));
        }
        self.kernel
            .validate()
            .map_err(|e| SessionError::InvalidConfig(e.to_string()))?;
        if self.initial_classes.is_empty() {
            return bad("at least one initial class is required".into());
        }
        for (i, name) in self.initial_classes.iter().enumerate() {
            if name.trim().is_empty() {
                return bad("class names must not be blank".into());
            }
            if self.initial_classes[..i].contains(name) {
                return bad(format!("duplicate class name `{name}`"));
            }
        }
        match &self.source {
            InstanceSource::Synthetic { spec, .. } => spec
                .validate()
                .map_err(|e| SessionError::InvalidConfig(e.to_string()))?,
            InstanceSource::Points { points } => {
                let Some(first) = points.first() else {
                    return bad("point list is empty".into());
                };
                if first.is_empty() {
                    return bad("points must have at least one coordinate".into());
                }
                for (i, p) in points.iter().enumerate() {
                    if p.len() != first.len() {
                        return bad(format!(
                            "point {i} has {} coordinates, expected {}",
                            p.len(),
                            first.len()
                        ));
                    }
                    if p.iter().any(|v| !v.is_finite()) {
                        return bad(format!("point {i} is not finite"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The instance stream, in presentation order.
    pub fn stream(&self) -> Result<Vec<Vec<f64>>, SessionError> {
        match &self.source {
            InstanceSource::Points { points } => Ok(points.clone()),
            InstanceSource::Synthetic { spec, ordering } => {
                let data = generate_synthetic(spec)
                    .map_err(|e: ExperimentError| SessionError::InvalidConfig(e.to_string()))?;
                let indices: Vec<usize> = (0..data.len()).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &[STREAM_TAG]));
                let order = order_instances(&data.labels, &indices, *ordering, &mut rng);
                Ok(order.into_iter().map(|i| data.features[i].clone()).collect())
            }
        }
    }
}

/// A mutating call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Advance,
    SubmitLabel {
        label: String,
        #[serde(default)]
        allow_new: bool,
    },
    ResolveChallenge {
        final_label: String,
    },
}

/// A command plus its delivery metadata; one line of the session log.
///
/// A request whose `request_id` was already applied returns the original
/// event and changes nothing. A request carrying `expected_version` is
/// rejected unless it matches the session's current version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_version: Option<u64>,
    #[serde(flatten)]
    pub command: Command,
}

impl From<Command> for Request {
    fn from(command: Command) -> Self {
        Request {
            request_id: None,
            expected_version: None,
            command,
        }
    }
}

/// Outcome of a command. Labels are reported by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// No query this round; the model is unchanged.
    Predicted {
        round: u64,
        x: Vec<f64>,
        prediction: String,
        alpha: f64,
    },
    /// A label is requested; answer with `submit_label`.
    LabelRequest {
        round: u64,
        x: Vec<f64>,
        prediction: String,
        alpha: f64,
    },
    /// The label was stored without a challenge.
    Accepted {
        round: u64,
        x: Vec<f64>,
        consensus: String,
        gamma: f64,
        new_class: bool,
    },
    /// The label is challenged; answer with `resolve_challenge`.
    Challenge {
        round: u64,
        x: Vec<f64>,
        contested: String,
        machine: String,
        gamma: f64,
    },
    /// The final answer to a challenge was stored.
    Resolved {
        round: u64,
        x: Vec<f64>,
        consensus: String,
        contested: String,
        machine: String,
        mistake_uncovered: bool,
        new_class: bool,
    },
}

/// The query the session is waiting on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PendingQuery {
    LabelRequest {
        round: u64,
        x: Vec<f64>,
        prediction: String,
        alpha: f64,
    },
    Challenge {
        round: u64,
        x: Vec<f64>,
        contested_label: String,
        machine_label: String,
        gamma: f64,
    },
}

/// Totals over closed rounds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub rounds: u64,
    pub label_requests: u64,
    pub challenges: u64,
    pub mistakes_uncovered: u64,
    pub instances: u64,
}

impl Counters {
    pub fn from_log(log: &[InteractionRecord]) -> Self {
        let mut c = Counters::default();
        for r in log {
            c.rounds += 1;
            c.label_requests += u64::from(r.active_coin);
            c.challenges += u64::from(r.challenged());
            c.mistakes_uncovered += u64::from(r.mistake_uncovered());
            c.instances += u64::from(r.consensus_label.is_some());
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassView {
    pub id: LabelId,
    pub name: String,
    /// The model has stored at least one example of this class, or it was
    /// an initial class.
    pub in_model: bool,
}

/// Posterior at one client-supplied point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPosterior {
    pub x: Vec<f64>,
    pub means: BTreeMap<String, f64>,
    pub sigma: f64,
}

/// Read-only snapshot returned by `get_state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    /// Number of commands applied; bumps on every state change.
    pub version: u64,
    pub policy: PolicyKind,
    pub dim: usize,
    pub remaining: usize,
    pub pending: Option<PendingQuery>,
    pub counters: Counters,
    pub classes: Vec<ClassView>,
    pub grid: Vec<GridPosterior>,
    pub log: Vec<InteractionRecord>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("a query is pending; answer it before advancing")]
    QueryPending,
    #[error("no label request is pending")]
    NoLabelRequest,
    #[error("no challenge is pending")]
    NoChallenge,
    #[error("the instance stream is exhausted")]
    Exhausted,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("stale request: expected version {expected}, session is at {current}")]
    Stale { expected: u64, current: u64 },
    #[error(transparent)]
    Model(#[from] ImgpError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("replay failed at command {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: Box<SessionError>,
    },
}

impl SessionError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::QueryPending => "query_pending",
            SessionError::NoLabelRequest => "no_label_request",
            SessionError::NoChallenge => "no_challenge",
            SessionError::Exhausted => "exhausted",
            SessionError::UnknownClass(_) => "unknown_class",
            SessionError::Stale { .. } => "stale",
            SessionError::Model(_) => "model",
            SessionError::Io { .. } => "io",
            SessionError::Corrupt { .. } => "corrupt",
            SessionError::Replay { .. } => "replay",
        }
    }
}

#[derive(Clone, Debug)]
enum Stage {
    Label,
    Challenge { contested: LabelId, gamma: f64 },
}

#[derive(Clone, Debug)]
struct Pending {
    open: OpenRound,
    record: InteractionRecord,
    stage: Stage,
}

/// One live session.
#[derive(Clone, Debug)]
pub struct Session {
    id: String,
    config: SessionConfig,
    stream: Vec<Vec<f64>>,
    next: usize,
    model: ImgpModel,
    vocabulary: LabelVocabulary,
    rng: ChaCha8Rng,
    pending: Option<Pending>,
    log: Vec<InteractionRecord>,
    commands: Vec<Request>,
    replies: HashMap<String, Event>,
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let stream = config.stream()?;
        let vocabulary = LabelVocabulary::from_names(config.initial_classes.iter().cloned());
        let model = ImgpModel::new(config.kernel.clone(), config.rho, vocabulary.ids())?;
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[COIN_TAG]));
        Ok(Session {
            id: id.into(),
            config,
            stream,
            next: 0,
            model,
            vocabulary,
            rng,
            pending: None,
            log: Vec::new(),
            commands: Vec::new(),
            replies: HashMap::new(),
        })
    }

    /// Rebuilds a session by re-applying `commands` in order.
    pub fn replay(id: impl Into<String>, config: SessionConfig, commands: &[Request]) -> Result<Self, SessionError> {
        let mut session = Session::new(id, config)?;
        for (index, req) in commands.iter().enumerate() {
            session.apply(req.clone()).map_err(|e| SessionError::Replay {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn model(&self) -> &ImgpModel {
        &self.model
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        self.model.snapshot()
    }

    pub fn vocabulary(&self) -> &LabelVocabulary {
        &self.vocabulary
    }

    pub fn log(&self) -> &[InteractionRecord] {
        &self.log
    }

    /// Commands applied so far, in order.
    pub fn commands(&self) -> &[Request] {
        &self.commands
    }

    pub fn version(&self) -> u64 {
        self.commands.len() as u64
    }

    pub fn pending(&self) -> Option<PendingQuery> {
        let p = self.pending.as_ref()?;
        Some(match p.stage {
            Stage::Label => PendingQuery::LabelRequest {
                round: p.open.round,
                x: p.open.instance.clone(),
                prediction: self.name(p.open.prediction),
                alpha: p.open.alpha,
            },
            Stage::Challenge { contested, gamma } => PendingQuery::Challenge {
                round: p.open.round,
                x: p.open.instance.clone(),
                contested_label: self.name(contested),
                machine_label: self.name(p.open.prediction),
                gamma,
            },
        })
    }

    pub fn advance(&mut self) -> Result<Event, SessionError> {
        self.apply(Command::Advance.into())
    }

    pub fn submit_label(&mut self, label: &str, allow_new: bool) -> Result<Event, SessionError> {
        self.apply(
            Command::SubmitLabel {
                label: label.to_owned(),
                allow_new,
            }
            .into(),
        )
    }

    pub fn resolve_challenge(&mut self, final_label: &str) -> Result<Event, SessionError> {
        self.apply(
            Command::ResolveChallenge {
                final_label: final_label.to_owned(),
            }
            .into(),
        )
    }

    /// Applies a request. On error nothing changes.
    pub fn apply(&mut self, request: Request) -> Result<Event, SessionError> {
        if let Some(event) = request.request_id.as_ref().and_then(|id| self.replies.get(id)) {
            return Ok(event.clone());
        }
        if let Some(expected) = request.expected_version {
            if expected != self.version() {
                return Err(SessionError::Stale {
                    expected,
                    current: self.version(),
                });
            }
        }
        let event = match &request.command {
            Command::Advance => self.do_advance()?,
            Command::SubmitLabel { label, allow_new } => self.do_submit(label, *allow_new)?,
            Command::ResolveChallenge { final_label } => self.do_resolve(final_label)?,
        };
        if let Some(id) = &request.request_id {
            self.replies.insert(id.clone(), event.clone());
        }
        self.commands.push(request);
        Ok(event)
    }

    /// Whether `request` would be answered from the idempotency cache.
    pub fn is_duplicate(&self, request: &Request) -> bool {
        request
            .request_id
            .as_ref()
            .is_some_and(|id| self.replies.contains_key(id))
    }

    pub fn state(&self, grid: &[Vec<f64>]) -> Result<StateView, SessionError> {
        let known = self.model.known_classes();
        let grid = grid
            .iter()
            .map(|x| {
                let p = self.model.posterior(x)?;
                Ok(GridPosterior {
                    x: x.clone(),
                    means: p.means.iter().map(|(&l, &m)| (self.name(l), m)).collect(),
                    sigma: p.sigma,
                })
            })
            .collect::<Result<Vec<_>, SessionError>>()?;
        Ok(StateView {
            session_id: self.id.clone(),
            version: self.version(),
            policy: self.config.policy,
            dim: self.stream.first().map_or(0, Vec::len),
            remaining: self.stream.len() - self.next,
            pending: self.pending(),
            counters: Counters::from_log(&self.log),
            classes: self
                .vocabulary
                .iter()
                .map(|(id, name)| ClassView {
                    id,
                    name: name.to_owned(),
                    in_model: known.contains(&id),
                })
                .collect(),
            grid,
            log: self.log.clone(),
        })
    }

    fn name(&self, id: LabelId) -> String {
        self.vocabulary.name(id).map_or_else(|| id.to_string(), str::to_owned)
    }

    fn do_advance(&mut self) -> Result<Event, SessionError> {
        if self.pending.is_some() {
            return Err(SessionError::QueryPending);
        }
        let x = self.stream.get(self.next).ok_or(SessionError::Exhausted)?;
        // draw on a copy so a failed round leaves the coin stream untouched
        let mut rng = self.rng.clone();
        let draws = draw_round(&mut rng);
        let open = OpenRound::open(&self.model, self.log.len() as u64 + 1, x, draws)?;
        self.rng = rng;
        self.next += 1;
        let (round, x, prediction, alpha) = (
            open.round,
            open.instance.clone(),
            self.name(open.prediction),
            open.alpha,
        );
        if open.active_coin() {
            self.pending = Some(Pending {
                record: open.record(),
                open,
                stage: Stage::Label,
            });
            Ok(Event::LabelRequest {
                round,
                x,
                prediction,
                alpha,
            })
        } else {
            self.log.push(open.record());
            Ok(Event::Predicted {
                round,
                x,
                prediction,
                alpha,
            })
        }
    }

    fn do_submit(&mut self, label: &str, allow_new: bool) -> Result<Event, SessionError> {
        let Some(pending) = self.pending.as_ref().filter(|p| matches!(p.stage, Stage::Label)) else {
            return Err(SessionError::NoLabelRequest);
        };
        let label = label.trim();
        let mut vocabulary = self.vocabulary.clone();
        let id = match vocabulary.get(label) {
            Some(id) => id,
            None if allow_new && !label.is_empty() => vocabulary.intern(label),
            None => return Err(SessionError::UnknownClass(label.to_owned())),
        };
        let (gamma, coin) = pending.open.challenge(self.config.policy, id)?;
        let mut record = pending.record.clone();
        record.annotator_label = Some(id);
        record.gamma = Some(gamma);
        record.skeptic_coin = Some(coin);
        let (round, x) = (pending.open.round, pending.open.instance.clone());
        if coin {
            let machine = pending.open.prediction;
            self.vocabulary = vocabulary;
            let pending = self.pending.as_mut().expect("checked above");
            pending.record = record;
            pending.stage = Stage::Challenge { contested: id, gamma };
            return Ok(Event::Challenge {
                round,
                x,
                contested: self.name(id),
                machine: self.name(machine),
                gamma,
            });
        }
        let new_class = !self.model.known_classes().contains(&id);
        self.model.add_example(&x, id)?;
        self.vocabulary = vocabulary;
        record.consensus_label = Some(id);
        self.log.push(record);
        self.pending = None;
        Ok(Event::Accepted {
            round,
            x,
            consensus: self.name(id),
            gamma,
            new_class,
        })
    }

    fn do_resolve(&mut self, final_label: &str) -> Result<Event, SessionError> {
        let Some(pending) = self.pending.as_ref() else {
            return Err(SessionError::NoChallenge);
        };
        let Stage::Challenge { contested, .. } = pending.stage else {
            return Err(SessionError::NoChallenge);
        };
        let final_label = final_label.trim();
        let id = self
            .vocabulary
            .get(final_label)
            .ok_or_else(|| SessionError::UnknownClass(final_label.to_owned()))?;
        let (round, x, machine) = (
            pending.open.round,
            pending.open.instance.clone(),
            pending.open.prediction,
        );
        let new_class = !self.model.known_classes().contains(&id);
        self.model.add_example(&x, id)?;
        let mut record = self.pending.take().expect("checked above").record;
        record.challenge_answer = Some(id);
        record.consensus_label = Some(id);
        let mistake_uncovered = record.mistake_uncovered();
        self.log.push(record);
        Ok(Event::Resolved {
            round,
            x,
            consensus: self.name(id),
            contested: self.name(contested),
            machine: self.name(machine),
            mistake_uncovered,
            new_class,
        })
    }
}
