//! Incremental skeptical Gaussian processes.
//!
//! An interactive multi-class classifier that learns from a stream of
//! instances while querying a possibly unreliable annotator. Each class is a
//! Gaussian process; the processes share one precision matrix, which grows
//! in O(t²) per example. The posterior drives two randomized decisions:
//! whether to ask for a label, and whether to challenge the label received.
//!
//! ```
//! use isgp::{ImgpModel, KernelSpec, LabelId};
//!
//! let mut model = ImgpModel::new(KernelSpec::squared_exponential(2.0), 1e-8, [LabelId(0)])?;
//! model.add_example(&[0.0, 0.0], LabelId(0))?;
//! model.add_example(&[5.0, 5.0], LabelId(1))?;
//!
//! let (label, posterior) = model.predict(&[4.5, 5.2])?;
//! assert_eq!(label, LabelId(1));
//! assert!(posterior.sigma > 0.0);
//! # Ok::<(), isgp::ImgpError>(())
//! ```
//!
//! Modules:
//!
//! - [`kernels`]: covariance functions;
//! - [`imgp`]: the incremental multi-class GP;
//! - [`skeptic`]: query and challenge decisions, the interaction loop;
//! - [`oracle`]: a simulated noisy annotator;
//! - [`experiment`]: the cross-validated benchmark harness;
//! - [`session`]: turn-based live sessions with a human annotator.

pub mod experiment;
pub mod imgp;
pub mod kernels;
pub mod label;
pub mod normal;
pub mod oracle;
pub mod session;
pub mod skeptic;

pub use imgp::{ImgpError, ImgpModel, ModelSnapshot, Posterior};
pub use kernels::{KernelError, KernelSpec};
pub use label::{LabelId, LabelVocabulary};
pub use oracle::{Annotator, OracleConfig, OracleError, SimulatedOracle};
pub use session::{Session, SessionConfig, SessionError, SessionStore};
pub use skeptic::{active_probability, skeptic_probability, InteractionRecord, Learner, PolicyKind};
