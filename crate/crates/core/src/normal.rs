//! Standard normal distribution helpers.

use libm::erfc;

/// Standard normal cumulative distribution function Φ(z).
///
/// Evaluated through `erfc` so both tails keep full relative precision.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
