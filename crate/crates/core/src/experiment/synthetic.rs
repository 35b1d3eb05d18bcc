//! Gaussian-blob benchmark data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, ExperimentError};
use crate::label::{LabelId, LabelVocabulary};

/// How class centers are placed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterPlacement {
    /// Evenly spaced on a circle in the first two coordinates, class 0 at
    /// angle 0. Remaining coordinates are zero.
    Circle {
        radius: f64,
    },
    Explicit {
        centers: Vec<Vec<f64>>,
    },
}

impl Default for CenterPlacement {
    fn default() -> Self {
        CenterPlacement::Circle { radius: 6.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    /// Total number of points across all classes.
    pub n_instances: usize,
    pub dim: usize,
    pub class_std: f64,
    pub centers: CenterPlacement,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 6,
            n_instances: 100,
            dim: 2,
            class_std: 1.5,
            centers: CenterPlacement::default(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if self.n_instances < self.n_classes {
            return bad(format!(
                "n_instances ({}) must be at least n_classes ({})",
                self.n_instances, self.n_classes
            ));
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.class_std.is_finite() && self.class_std >= 0.0) {
            return bad(format!("class_std must be non-negative, got {}", self.class_std));
        }
        match &self.centers {
            CenterPlacement::Circle { radius } if !radius.is_finite() => {
                bad(format!("circle radius must be finite, got {radius}"))
            }
            CenterPlacement::Explicit { centers }
                if centers.len() != self.n_classes || centers.iter().any(|c| c.len() != self.dim) =>
            {
                bad(format!(
                    "explicit centers must be {} vectors of dimension {}",
                    self.n_classes, self.dim
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn class_centers(&self) -> Vec<Vec<f64>> {
        match &self.centers {
            CenterPlacement::Explicit { centers } => centers.clone(),
            CenterPlacement::Circle { radius } => (0..self.n_classes)
                .map(|c| {
                    let angle = std::f64::consts::TAU * c as f64 / self.n_classes as f64;
                    let mut center = vec![0.0; self.dim];
                    center[0] = radius * angle.cos();
                    if self.dim > 1 {
                        center[1] = radius * angle.sin();
                    }
                    center
                })
                .collect(),
        }
    }
}

/// Samples `n_instances` points; point `i` belongs to class `i mod n_classes`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, ExperimentError> {
    spec.validate()?;
    let centers = spec.class_centers();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n_instances);
    let mut labels = Vec::with_capacity(spec.n_instances);
    for i in 0..spec.n_instances {
        let class = i % spec.n_classes;
        let x = centers[class]
            .iter()
            .map(|&c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + spec.class_std * z
            })
            .collect();
        features.push(x);
        labels.push(LabelId(class as u32));
    }
    Ok(Dataset {
        features,
        labels,
        vocabulary: LabelVocabulary::from_names((0..spec.n_classes).map(|c| c.to_string())),
        standardization: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.dim(), 2);
        let counts: Vec<usize> = ds.class_counts().values().copied().collect();
        assert_eq!(counts, vec![17, 17, 17, 17, 16, 16]);
    }

    #[test]
    fn zero_std_collapses_to_centers() {
        let spec = SyntheticSpec {
            class_std: 0.0,
            ..SyntheticSpec::default()
        };
        let centers = spec.class_centers();
        let ds = generate_synthetic(&spec).unwrap();
        for (x, l) in ds.features.iter().zip(&ds.labels) {
            assert_eq!(x, &centers[l.index()]);
        }
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec::default();
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(
            generate_synthetic(&spec).unwrap().features,
            generate_synthetic(&other).unwrap().features
        );
    }

    #[test]
    fn validation() {
        let bad = [
            SyntheticSpec {
                n_classes: 1,
                ..Default::default()
            },
            SyntheticSpec {
                n_instances: 3,
                ..Default::default()
            },
            SyntheticSpec {
                dim: 0,
                ..Default::default()
            },
            SyntheticSpec {
                class_std: -1.0,
                ..Default::default()
            },
            SyntheticSpec {
                centers: CenterPlacement::Explicit {
                    centers: vec![vec![0.0, 0.0]],
                },
                ..Default::default()
            },
        ];
        for spec in bad {
            assert!(generate_synthetic(&spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn circle_centers_radius() {
        let spec = SyntheticSpec {
            dim: 3,
            ..Default::default()
        };
        for c in spec.class_centers() {
            let r = (c[0] * c[0] + c[1] * c[1]).sqrt();
            assert!((r - 6.0).abs() < 1e-12);
            assert_eq!(c[2], 0.0);
        }
    }
}
