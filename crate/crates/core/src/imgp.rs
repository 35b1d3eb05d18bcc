//! Incremental multi-class Gaussian process.
//!
//! One GP per class, all sharing the precision matrix
//! `Γ_t = (K_t + ρ² I)⁻¹` and differing only in their one-vs-all label
//! vectors. For a query point `x` with `k = k_t(x)`:
//!
//! ```text
//! μ_ℓ(x) = kᵀ Γ y_ℓ
//! σ(x)²  = k(x, x) − kᵀ Γ k + ρ²
//! ```
//!
//! Adding an example grows `Γ` by one row and column through the block
//! (Schur complement) form of the inverse, in O(t²) operations and without
//! any factorization:
//!
//! ```text
//! b = k_t(x),  c = k(x, x) + ρ²,  u = Γ b,  s = c − bᵀu
//!
//! Γ' = | Γ + u uᵀ / s   −u / s |
//!      | −uᵀ / s         1 / s |
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{check_finite, KernelError, KernelSpec};
use crate::label::LabelId;
use crate::normal::std_normal_cdf;

/// Relative Schur-complement floor: updates with `s < SCHUR_FLOOR * c` are
/// rejected.
pub const SCHUR_FLOOR: f64 = 1e-12;

/// Latent variances in `[-VARIANCE_SLACK * max(1, k(x,x)), 0)` are clamped
/// to zero; anything more negative means the precision matrix is corrupt.
pub const VARIANCE_SLACK: f64 = 1e-9;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImgpError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("rho must be finite and non-negative, got {0}")]
    InvalidRho(f64),
    #[error("a model needs at least one initial class")]
    NoClasses,
    #[error("near-singular update: Schur complement {schur:e} below {threshold:e}")]
    NearSingular { schur: f64, threshold: f64 },
    #[error("negative posterior variance {0:e}: precision matrix is corrupted")]
    NegativeVariance(f64),
    #[error("label {0} is not a known class")]
    UnknownLabel(LabelId),
    #[error("posterior standard deviation is zero")]
    ZeroSigma,
    #[error("unsupported snapshot version {0}")]
    SnapshotVersion(u32),
    #[error("inconsistent snapshot: {0}")]
    Snapshot(String),
}

/// Symmetric matrix that grows by one row and column at a time.
///
/// Only the lower triangle is stored, packed row by row, so appending a row
/// is a push at the end and every update touches t(t+1)/2 entries.
#[derive(Clone, Debug, Default)]
pub struct Precision {
    dim: usize,
    data: Vec<f64>,
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl Precision {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim, "index out of bounds");
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        self.data[row_start(i) + j]
    }

    /// Entries `(i, 0..=i)` of the lower triangle.
    pub fn lower_row(&self, i: usize) -> &[f64] {
        assert!(i < self.dim, "row out of bounds");
        &self.data[row_start(i)..row_start(i + 1)]
    }

    /// Row-major copy of the full matrix.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for (j, &v) in self.lower_row(i).iter().enumerate() {
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    /// Builds from a row-major square matrix, averaging it with its transpose.
    pub fn from_row_major(dim: usize, values: &[f64]) -> Option<Self> {
        if values.len() != dim * dim {
            return None;
        }
        let mut data = Vec::with_capacity(row_start(dim));
        for i in 0..dim {
            for j in 0..=i {
                data.push(0.5 * (values[i * dim + j] + values[j * dim + i]));
            }
        }
        Some(Precision { dim, data })
    }

    /// Γv in one pass over the packed triangle.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = self.lower_row(i);
            let (below, diag) = row.split_at(i);
            let vi = v[i];
            let mut acc = diag[0] * vi;
            for ((&g, &vj), oj) in below.iter().zip(v).zip(out.iter_mut()) {
                acc += g * vj;
                *oj += g * vi;
            }
            out[i] += acc;
        }
        out
    }

    /// Block update given `u = Γ b` and the Schur complement `s`.
    fn grow(&mut self, u: &[f64], s: f64) {
        let t = self.dim;
        debug_assert_eq!(u.len(), t);
        let inv_s = 1.0 / s;
        for (i, &ui) in u.iter().enumerate() {
            let start = row_start(i);
            for (g, &uj) in self.data[start..start + i + 1].iter_mut().zip(u) {
                *g += (ui * uj) * inv_s;
            }
        }
        self.data.extend(u.iter().map(|&ui| -ui * inv_s));
        self.data.push(inv_s);
        self.dim = t + 1;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Posterior of every class GP at one query point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    /// μ_ℓ(x) for every known class.
    pub means: BTreeMap<LabelId, f64>,
    /// Shared posterior standard deviation σ(x).
    pub sigma: f64,
}

impl Posterior {
    pub fn mean(&self, label: LabelId) -> Option<f64> {
        self.means.get(&label).copied()
    }

    /// P_ℓ(1 | x) = Φ(μ_ℓ(x) / σ(x)).
    pub fn prob_positive(&self, label: LabelId) -> Result<f64, ImgpError> {
        let mean = self.mean(label).ok_or(ImgpError::UnknownLabel(label))?;
        if self.sigma <= 0.0 {
            return Err(ImgpError::ZeroSigma);
        }
        Ok(std_normal_cdf(mean / self.sigma))
    }

    /// Soft-max over the per-class positive probabilities.
    pub fn class_posterior(&self) -> Result<BTreeMap<LabelId, f64>, ImgpError> {
        let mut weights = BTreeMap::new();
        let mut total = 0.0;
        for &label in self.means.keys() {
            let w = self.prob_positive(label)?.exp();
            total += w;
            weights.insert(label, w);
        }
        for w in weights.values_mut() {
            *w /= total;
        }
        Ok(weights)
    }

    /// Class with the largest posterior mean; ties go to the lowest id.
    pub fn argmax(&self) -> Option<LabelId> {
        let mut best: Option<(LabelId, f64)> = None;
        for (&label, &mean) in &self.means {
            match best {
                Some((_, m)) if mean <= m => {}
                _ => best = Some((label, mean)),
            }
        }
        best.map(|(label, _)| label)
    }
}

/// The incremental multi-class GP state.
#[derive(Clone, Debug)]
pub struct ImgpModel {
    kernel: KernelSpec,
    rho: f64,
    instances: Vec<Vec<f64>>,
    labels: Vec<LabelId>,
    classes: BTreeSet<LabelId>,
    precision: Precision,
}

impl ImgpModel {
    pub fn new(
        kernel: KernelSpec,
        rho: f64,
        initial_classes: impl IntoIterator<Item = LabelId>,
    ) -> Result<Self, ImgpError> {
        kernel.validate()?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(ImgpError::InvalidRho(rho));
        }
        let classes: BTreeSet<LabelId> = initial_classes.into_iter().collect();
        if classes.is_empty() {
            return Err(ImgpError::NoClasses);
        }
        Ok(ImgpModel {
            kernel,
            rho,
            instances: Vec::new(),
            labels: Vec::new(),
            classes,
            precision: Precision::default(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    /// Consensus label of each stored instance, in insertion order.
    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    pub fn known_classes(&self) -> &BTreeSet<LabelId> {
        &self.classes
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    /// Feature dimension, or `None` while the model is empty.
    pub fn dim(&self) -> Option<usize> {
        self.instances.first().map(Vec::len)
    }

    /// One-vs-all vector for `label`: 1 where the stored label matches.
    pub fn label_vector(&self, label: LabelId) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == label { 1.0 } else { 0.0 })
            .collect()
    }

    /// Registers a class without adding an example.
    pub fn add_class(&mut self, label: LabelId) -> bool {
        self.classes.insert(label)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ImgpError> {
        check_finite(x)?;
        match self.dim() {
            Some(d) if d != x.len() => Err(KernelError::DimensionMismatch {
                left: d,
                right: x.len(),
            }
            .into()),
            _ => Ok(()),
        }
    }

    pub fn posterior(&self, x: &[f64]) -> Result<Posterior, ImgpError> {
        self.check_dim(x)?;
        let prior = self.kernel.eval_unchecked(x, x);
        let mut means: BTreeMap<LabelId, f64> = self.classes.iter().map(|&l| (l, 0.0)).collect();
        let mut latent = prior;
        if !self.is_empty() {
            let b = self.kernel.gram_vector(&self.instances, x)?;
            let w = self.precision.mul_vec(&b);
            for (&label, &wi) in self.labels.iter().zip(&w) {
                *means.get_mut(&label).expect("stored labels are known classes") += wi;
            }
            latent -= dot(&b, &w);
        }
        if latent < 0.0 {
            if latent < -VARIANCE_SLACK * prior.max(1.0) {
                return Err(ImgpError::NegativeVariance(latent));
            }
            latent = 0.0;
        }
        Ok(Posterior {
            means,
            sigma: (latent + self.rho * self.rho).sqrt(),
        })
    }

    /// Predicted class (argmax of the posterior means) together with the
    /// posterior it was read from.
    pub fn predict(&self, x: &[f64]) -> Result<(LabelId, Posterior), ImgpError> {
        let posterior = self.posterior(x)?;
        let label = posterior.argmax().expect("models always have a class");
        Ok((label, posterior))
    }

    /// Appends `(x, label)`, registering `label` as a class if it is new.
    ///
    /// The model is left untouched when an error is returned.
    pub fn add_example(&mut self, x: &[f64], label: LabelId) -> Result<(), ImgpError> {
        self.check_dim(x)?;
        let c = self.kernel.eval_unchecked(x, x) + self.rho * self.rho;
        let (u, s) = if self.is_empty() {
            (Vec::new(), c)
        } else {
            let b = self.kernel.gram_vector(&self.instances, x)?;
            let u = self.precision.mul_vec(&b);
            let s = c - dot(&b, &u);
            (u, s)
        };
        let threshold = SCHUR_FLOOR * c;
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(s >= threshold) || s <= 0.0 {
            return Err(ImgpError::NearSingular { schur: s, threshold });
        }
        self.precision.grow(&u, s);
        self.instances.push(x.to_vec());
        self.labels.push(label);
        self.classes.insert(label);
        Ok(())
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            kernel: self.kernel.clone(),
            rho: self.rho,
            classes: self.classes.iter().copied().collect(),
            instances: self.instances.clone(),
            labels: self.labels.clone(),
            precision: self.precision.to_row_major(),
        }
    }

    pub fn from_snapshot(snapshot: ModelSnapshot) -> Result<Self, ImgpError> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(ImgpError::SnapshotVersion(snapshot.version));
        }
        let mut model = ImgpModel::new(snapshot.kernel, snapshot.rho, snapshot.classes)?;
        let t = snapshot.instances.len();
        if snapshot.labels.len() != t {
            return Err(ImgpError::Snapshot(format!(
                "{} labels for {t} instances",
                snapshot.labels.len()
            )));
        }
        if let Some(first) = snapshot.instances.first() {
            if snapshot.instances.iter().any(|x| x.len() != first.len()) {
                return Err(ImgpError::Snapshot("ragged instances".into()));
            }
        }
        if let Some(l) = snapshot.labels.iter().find(|l| !model.classes.contains(l)) {
            return Err(ImgpError::Snapshot(format!("label {l} missing from classes")));
        }
        model.precision = Precision::from_row_major(t, &snapshot.precision).ok_or_else(|| {
            ImgpError::Snapshot(format!(
                "precision has {} entries, expected {}",
                snapshot.precision.len(),
                t * t
            ))
        })?;
        model.instances = snapshot.instances;
        model.labels = snapshot.labels;
        Ok(model)
    }
}

/// Serializable model state. JSON is the documented on-disk form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub version: u32,
    pub kernel: KernelSpec,
    pub rho: f64,
    pub classes: Vec<LabelId>,
    pub instances: Vec<Vec<f64>>,
    pub labels: Vec<LabelId>,
    /// Row-major t×t precision matrix.
    pub precision: Vec<f64>,
}
