//! Counterfactual queries: feature spaces, bounds, and the range-normalized
//! distance.

use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::forecast::FittedModel;

/// Domain of one feature: EMA answers are integers, sensors and scores are
/// bounded reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Integer { lo: i64, hi: i64 },
    Continuous { lo: f64, hi: f64 },
}

impl FeatureKind {
    pub fn lo(&self) -> f64 {
        match self {
            FeatureKind::Integer { lo, .. } => *lo as f64,
            FeatureKind::Continuous { lo, .. } => *lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            FeatureKind::Integer { hi, .. } => *hi as f64,
            FeatureKind::Continuous { hi, .. } => *hi,
        }
    }

    pub fn range(&self) -> f64 {
        self.hi() - self.lo()
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, FeatureKind::Integer { .. })
    }

    /// Snap a raw value into the domain (round integers, clamp bounds).
    pub fn snap(&self, v: f64) -> f64 {
        match self {
            FeatureKind::Integer { lo, hi } => v.round().clamp(*lo as f64, *hi as f64),
            FeatureKind::Continuous { lo, hi } => v.clamp(*lo, *hi),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            FeatureKind::Integer { lo, hi } => {
                v.fract() == 0.0 && (*lo as f64..=*hi as f64).contains(&v)
            }
            FeatureKind::Continuous { lo, hi } => (*lo..=*hi).contains(&v),
        }
    }

    /// Two values count as different under the changed-feature rule.
    pub fn differs(&self, a: f64, b: f64) -> bool {
        if self.is_integer() {
            a != b
        } else {
            (a - b).abs() > 1e-9
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

/// The plausibility-and-feasibility search box: per-feature domains after
/// intersecting domain constraints with any per-instance bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSpace {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.kind.range()).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.len() && self.features.iter().zip(x).all(|(f, &v)| f.kind.contains(v))
    }

    pub fn snap(&self, x: &mut [f64]) {
        for (f, v) in self.features.iter().zip(x.iter_mut()) {
            *v = f.kind.snap(*v);
        }
    }

    /// Plausibility box for a fitted model's lag-feature space: EMA answers
    /// are integers in 0..=3, sum-score lags live in the score domain (they
    /// may hold non-integer fed-back predictions), sensor lags stay inside
    /// their training-range bounds.
    pub fn for_model(model: &FittedModel) -> FeatureSpace {
        let features = match model.feature_set {
            FeatureSet::AllEmas => model
                .feature_names
                .iter()
                .map(|name| FeatureSpec {
                    name: name.clone(),
                    kind: FeatureKind::Integer { lo: 0, hi: 3 },
                })
                .collect(),
            FeatureSet::SumScore => model
                .feature_names
                .iter()
                .map(|name| FeatureSpec {
                    name: name.clone(),
                    kind: FeatureKind::Continuous { lo: 0.0, hi: 30.0 },
                })
                .collect(),
            FeatureSet::Sensors => model
                .feature_names
                .iter()
                .zip(&model.feature_bounds)
                .map(|(name, &(lo, hi))| FeatureSpec {
                    name: name.clone(),
                    kind: FeatureKind::Continuous { lo, hi: if hi > lo { hi } else { lo } },
                })
                .collect(),
        };
        FeatureSpace { features }
    }

    /// Intersect with per-instance feasibility bounds `x_i +/- width * range_i`.
    pub fn restrict_around(&self, x: &[f64], width: f64) -> FeatureSpace {
        let features = self
            .features
            .iter()
            .zip(x)
            .map(|(f, &v)| {
                let half = width * f.kind.range();
                let kind = match f.kind {
                    FeatureKind::Integer { lo, hi } => FeatureKind::Integer {
                        lo: ((v - half).ceil() as i64).max(lo),
                        hi: ((v + half).floor() as i64).min(hi),
                    },
                    FeatureKind::Continuous { lo, hi } => FeatureKind::Continuous {
                        lo: (v - half).max(lo),
                        hi: (v + half).min(hi),
                    },
                };
                FeatureSpec { name: f.name.clone(), kind }
            })
            .collect();
        FeatureSpace { features }
    }
}

/// Range-normalized L1 distance, mean-aggregated over features. A feature
/// with zero range contributes 0 when unchanged and 1 otherwise.
pub fn distance(x: &[f64], x_cf: &[f64], feature_ranges: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), x_cf.len());
    debug_assert_eq!(x.len(), feature_ranges.len());
    let mut total = 0.0;
    for ((&a, &b), &range) in x.iter().zip(x_cf).zip(feature_ranges) {
        if range > 0.0 {
            total += (a - b).abs() / range;
        } else if a != b {
            total += 1.0;
        }
    }
    total / x.len() as f64
}

/// Per-feature change in one counterfactual (only changed features listed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub name: String,
    pub before: f64,
    pub after: f64,
    pub change: f64,
}

/// One counterfactual instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counterfactual {
    pub x_cf: Vec<f64>,
    /// Model prediction at `x_cf` (score scale).
    pub predicted: f64,
    pub deltas: Vec<FeatureDelta>,
}

impl Counterfactual {
    pub fn from_vector(x: &[f64], x_cf: Vec<f64>, predicted: f64, space: &FeatureSpace) -> Self {
        let deltas = space
            .features
            .iter()
            .enumerate()
            .filter(|(i, f)| f.kind.differs(x[*i], x_cf[*i]))
            .map(|(i, f)| FeatureDelta {
                name: f.name.clone(),
                before: x[i],
                after: x_cf[i],
                change: x_cf[i] - x[i],
            })
            .collect();
        Self { x_cf, predicted, deltas }
    }

    /// Indices of changed features relative to `x`.
    pub fn changed_indices(&self, x: &[f64], space: &FeatureSpace) -> Vec<usize> {
        space
            .features
            .iter()
            .enumerate()
            .filter(|(i, f)| f.kind.differs(x[*i], self.x_cf[*i]))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Counterfactual search request.
#[derive(Debug, Clone)]
pub struct CfQuery {
    /// The instance being explained (must lie in `space`).
    pub x: Vec<f64>,
    /// Closed interval of acceptable model outputs.
    pub desired_range: (f64, f64),
    /// Number of counterfactuals requested.
    pub k: usize,
    /// Search box (plausibility intersected with feasibility).
    pub space: FeatureSpace,
}

impl CfQuery {
    pub fn validate(&self) -> Result<()> {
        if self.desired_range.0 > self.desired_range.1 {
            return Err(Error::InvalidParam(format!(
                "empty desired range [{}, {}]",
                self.desired_range.0, self.desired_range.1
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be >= 1".into()));
        }
        if self.x.len() != self.space.len() {
            return Err(Error::InvalidParam(format!(
                "query vector has {} features, space has {}",
                self.x.len(),
                self.space.len()
            )));
        }
        Ok(())
    }

    pub fn accepts(&self, predicted: f64) -> bool {
        (self.desired_range.0..=self.desired_range.1).contains(&predicted)
    }
}

/// Result of one generation method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfSet {
    pub counterfactuals: Vec<Counterfactual>,
    /// True when fewer than `k` valid candidates were found.
    pub shortfall: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_identity_is_zero() {
        assert_eq!(distance(&[1.0, 2.0], &[1.0, 2.0], &[3.0, 3.0]), 0.0);
    }

    #[test]
    fn full_range_move_is_one() {
        assert_eq!(distance(&[0.0], &[3.0], &[3.0]), 1.0);
    }

    #[test]
    fn hand_example() {
        assert_eq!(distance(&[0.0, 3.0], &[3.0, 3.0], &[3.0, 3.0]), 0.5);
    }

    #[test]
    fn zero_range_feature_rule() {
        assert_eq!(distance(&[1.0, 5.0], &[1.0, 5.0], &[0.0, 10.0]), 0.0);
        assert_eq!(distance(&[1.0, 5.0], &[2.0, 5.0], &[0.0, 10.0]), 0.5);
    }

    #[test]
    fn distance_is_symmetric_and_triangular() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(13, 0);
        let ranges = [3.0, 1.0, 0.0, 7.5];
        for _ in 0..200 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<f64>>()
            };
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let dab = distance(&a, &b, &ranges);
            assert_eq!(dab, distance(&b, &a, &ranges));
            let dac = distance(&a, &c, &ranges);
            let dcb = distance(&c, &b, &ranges);
            assert!(dab <= dac + dcb + 1e-12);
        }
    }

    #[test]
    fn snapping_and_membership() {
        let space = FeatureSpace {
            features: vec![
                FeatureSpec { name: "a".into(), kind: FeatureKind::Integer { lo: 0, hi: 3 } },
                FeatureSpec { name: "b".into(), kind: FeatureKind::Continuous { lo: -1.0, hi: 1.0 } },
            ],
        };
        let mut x = vec![2.7, 4.0];
        space.snap(&mut x);
        assert_eq!(x, vec![3.0, 1.0]);
        assert!(space.contains(&x));
        assert!(!space.contains(&[1.5, 0.0]));
    }

    #[test]
    fn restrict_around_narrows_bounds() {
        let space = FeatureSpace {
            features: vec![FeatureSpec { name: "a".into(), kind: FeatureKind::Integer { lo: 0, hi: 3 } }],
        };
        let narrowed = space.restrict_around(&[1.0], 0.4); // +/- 1.2
        match narrowed.features[0].kind {
            FeatureKind::Integer { lo, hi } => {
                assert_eq!((lo, hi), (0, 2));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn deltas_list_exactly_changed_features() {
        let space = FeatureSpace {
            features: (0..3)
                .map(|i| FeatureSpec {
                    name: format!("f{i}"),
                    kind: FeatureKind::Integer { lo: 0, hi: 3 },
                })
                .collect(),
        };
        let x = vec![1.0, 2.0, 3.0];
        let cf = Counterfactual::from_vector(&x, vec![1.0, 0.0, 3.0], 20.0, &space);
        assert_eq!(cf.deltas.len(), 1);
        assert_eq!(cf.deltas[0].name, "f1");
        assert_eq!(cf.deltas[0].change, -2.0);
        assert_eq!(cf.changed_indices(&x, &space), vec![1]);
    }
}
