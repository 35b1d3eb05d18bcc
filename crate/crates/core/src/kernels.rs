//! Covariance functions.
//!
//! A [`KernelSpec`] is a small expression tree over four stationary base
//! kernels and their sums. Every variant is positive semi-definite, and sums
//! of PSD kernels stay PSD, so any valid spec can back a GP.
//!
//! Parameterizations:
//!
//! | variant | k(x, x') with r² = ‖x − x'‖² |
//! |---|---|
//! | `SquaredExponential { length_scale: ℓ }` | exp(−r² / (2ℓ²)) |
//! | `RationalQuadratic { length_scale: ℓ, alpha: a }` | (1 + r² / (2aℓ²))^(−a) |
//! | `Constant { value: c }` | c |
//! | `WhiteNoise { level: w }` | w if x and x' are bit-identical, else 0 |
//! | `Sum { terms }` | Σ terms |

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite input component at index {index}")]
    NonFinite { index: usize },
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
}

/// Description of a covariance function.
///
/// Serialized with an internal `type` tag, e.g.
/// `{ type = "squared_exponential", length_scale = 2.0 }` in TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    SquaredExponential {
        length_scale: f64,
    },
    RationalQuadratic {
        length_scale: f64,
        #[serde(default = "default_rq_alpha")]
        alpha: f64,
    },
    Constant {
        value: f64,
    },
    WhiteNoise {
        level: f64,
    },
    Sum {
        terms: Vec<KernelSpec>,
    },
}

fn default_rq_alpha() -> f64 {
    1.0
}

impl Default for KernelSpec {
    /// Squared exponential with length scale 2, the synthetic benchmark kernel.
    fn default() -> Self {
        KernelSpec::squared_exponential(2.0)
    }
}

impl KernelSpec {
    pub fn squared_exponential(length_scale: f64) -> Self {
        KernelSpec::SquaredExponential { length_scale }
    }

    pub fn rational_quadratic(length_scale: f64, alpha: f64) -> Self {
        KernelSpec::RationalQuadratic { length_scale, alpha }
    }

    pub fn constant(value: f64) -> Self {
        KernelSpec::Constant { value }
    }

    pub fn white_noise(level: f64) -> Self {
        KernelSpec::WhiteNoise { level }
    }

    pub fn sum(terms: Vec<KernelSpec>) -> Self {
        KernelSpec::Sum { terms }
    }

    /// Constant + rational quadratic + squared exponential + white noise.
    ///
    /// A starting point for tabular data with standardized features. The
    /// weights are not tuned for any particular dataset.
    pub fn mixed_default() -> Self {
        KernelSpec::sum(vec![
            KernelSpec::constant(0.1),
            KernelSpec::rational_quadratic(1.0, 1.0),
            KernelSpec::squared_exponential(1.0),
            KernelSpec::white_noise(0.01),
        ])
    }

    /// Checks parameter ranges recursively.
    pub fn validate(&self) -> Result<(), KernelError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(KernelError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(KernelError::InvalidParameter(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        match self {
            KernelSpec::SquaredExponential { length_scale } => positive("length_scale", *length_scale),
            KernelSpec::RationalQuadratic { length_scale, alpha } => {
                positive("length_scale", *length_scale)?;
                positive("alpha", *alpha)
            }
            KernelSpec::Constant { value } => non_negative("value", *value),
            KernelSpec::WhiteNoise { level } => non_negative("level", *level),
            KernelSpec::Sum { terms } => {
                if terms.is_empty() {
                    return Err(KernelError::InvalidParameter(
                        "sum kernel needs at least one term".into(),
                    ));
                }
                terms.iter().try_for_each(KernelSpec::validate)
            }
        }
    }

    /// Evaluates k(x, y), checking dimensions and finiteness.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        check_pair(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    /// k(x_i, x) for every stored point x_i.
    pub fn gram_vector(&self, xs: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>, KernelError> {
        check_finite(x)?;
        xs.iter()
            .map(|xi| {
                if xi.len() != x.len() {
                    return Err(KernelError::DimensionMismatch {
                        left: xi.len(),
                        right: x.len(),
                    });
                }
                Ok(self.eval_unchecked(xi, x))
            })
            .collect()
    }

    /// Evaluates without input checks. Callers must guarantee equal lengths.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Sum { terms } => terms.iter().map(|t| t.eval_unchecked(x, y)).sum(),
            KernelSpec::Constant { value } => *value,
            KernelSpec::WhiteNoise { level } => {
                if bit_identical(x, y) {
                    *level
                } else {
                    0.0
                }
            }
            KernelSpec::SquaredExponential { length_scale } => {
                let r2 = squared_distance(x, y);
                (-r2 / (2.0 * length_scale * length_scale)).exp()
            }
            KernelSpec::RationalQuadratic { length_scale, alpha } => {
                let r2 = squared_distance(x, y);
                (1.0 + r2 / (2.0 * alpha * length_scale * length_scale)).powf(-alpha)
            }
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    spec.eval(x, y)
}

/// Free-function form of [`KernelSpec::gram_vector`].
pub fn gram_vector(spec: &KernelSpec, xs: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>, KernelError> {
    spec.gram_vector(xs, x)
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn bit_identical(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits())
}

pub(crate) fn check_finite(x: &[f64]) -> Result<(), KernelError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(KernelError::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_at_zero_distance_is_one() {
        let k = KernelSpec::squared_exponential(2.0);
        assert_eq!(k.eval(&[0.3, -1.2], &[0.3, -1.2]).unwrap(), 1.0);
    }

    #[test]
    fn se_hand_value() {
        let k = KernelSpec::squared_exponential(2.0);
        let got = k.eval(&[0.0, 0.0], &[2.0, 0.0]).unwrap();
        // exp(-4 / (2 * 4))
        assert!((got - 0.6065306597126334).abs() < 1e-15);
    }

    #[test]
    fn white_noise_vanishes_off_diagonal() {
        let k = KernelSpec::sum(vec![KernelSpec::constant(0.5), KernelSpec::white_noise(0.1)]);
        assert_eq!(k.eval(&[0.0, 1.0], &[0.0, 1.0 + 1e-15]).unwrap(), 0.5);
        assert_eq!(k.eval(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.6);
    }

    #[test]
    fn rational_quadratic_hand_value() {
        // r² = 1, ℓ = 1, a = 1 → (1 + 1/2)^-1
        let k = KernelSpec::rational_quadratic(1.0, 1.0);
        let got = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let k = KernelSpec::default();
        assert_eq!(
            k.eval(&[0.0], &[0.0, 1.0]),
            Err(KernelError::DimensionMismatch { left: 1, right: 2 })
        );
        assert_eq!(
            k.eval(&[0.0, f64::NAN], &[0.0, 1.0]),
            Err(KernelError::NonFinite { index: 1 })
        );
        assert!(k.gram_vector(&[vec![0.0]], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gram_vector_edge_cases() {
        let k = KernelSpec::default();
        assert!(k.gram_vector(&[], &[1.0, 2.0]).unwrap().is_empty());
        assert_eq!(k.gram_vector(&[vec![1.0, 2.0]], &[1.0, 2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::squared_exponential(0.0).validate().is_err());
        assert!(KernelSpec::rational_quadratic(1.0, -1.0).validate().is_err());
        assert!(KernelSpec::constant(0.0).validate().is_ok());
        assert!(KernelSpec::white_noise(-0.1).validate().is_err());
        assert!(KernelSpec::sum(vec![]).validate().is_err());
        assert!(KernelSpec::mixed_default().validate().is_ok());
    }

    #[test]
    fn toml_form() {
        #[derive(Deserialize)]
        struct Wrapper {
            kernel: KernelSpec,
        }
        let w: Wrapper = toml::from_str(
            r#"
            [kernel]
            type = "sum"
            terms = [
                { type = "constant", value = 0.5 },
                { type = "rational_quadratic", length_scale = 1.5 },
            ]
            "#,
        )
        .unwrap();
        assert_eq!(
            w.kernel,
            KernelSpec::sum(vec![
                KernelSpec::constant(0.5),
                KernelSpec::rational_quadratic(1.5, 1.0)
            ])
        );
    }
}
