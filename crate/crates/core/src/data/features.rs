//! Lagged feature construction for forecasting.
//!
//! Each supervised sample at block step `i` pairs the sum score at `i` with
//! the `n_lags` most recent past observations of the chosen feature set.

use serde::{Deserialize, Serialize};

use crate::data::block::{aligned_sensor_names, Block, ALIGNED_SENSOR_DIM};
use crate::data::records::{EMA_ITEMS, EMA_ITEM_NAMES};
use crate::error::{Error, Result};

/// Which observations feed the lag window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// All 10 EMA item answers (10 x n_lags columns).
    AllEmas,
    /// The sum score alone (n_lags columns).
    SumScore,
    /// Aligned daily sensor aggregates (36 x n_lags columns).
    Sensors,
}

impl FeatureSet {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::AllEmas => "all_emas",
            FeatureSet::SumScore => "sum_score",
            FeatureSet::Sensors => "sensors",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all_emas" => Ok(FeatureSet::AllEmas),
            "sum_score" => Ok(FeatureSet::SumScore),
            "sensors" => Ok(FeatureSet::Sensors),
            other => Err(Error::InvalidParam(format!("unknown feature set {other:?}"))),
        }
    }

    /// Dimension of the per-step observation vector (before lag stacking).
    pub fn base_dim(self) -> usize {
        match self {
            FeatureSet::AllEmas => EMA_ITEMS,
            FeatureSet::SumScore => 1,
            FeatureSet::Sensors => ALIGNED_SENSOR_DIM,
        }
    }
}

/// Design matrix of `d` features over `n` supervised time steps.
///
/// Columns are time steps; column `i` stacks the lagged observations
/// lag-major (lag 1 block first). `values` is column-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub n_features: usize,
    pub n_samples: usize,
    pub values: Vec<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub t_index: Vec<f64>,
}

impl FeatureMatrix {
    /// Feature vector of sample `i` (one column of X).
    pub fn col(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn iter_samples(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        (0..self.n_samples).map(move |i| (self.col(i), self.y[i]))
    }

    /// Per-feature (min, max) over all samples.
    pub fn feature_bounds(&self) -> Vec<(f64, f64)> {
        let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n_features];
        for i in 0..self.n_samples {
            for (j, &v) in self.col(i).iter().enumerate() {
                bounds[j].0 = bounds[j].0.min(v);
                bounds[j].1 = bounds[j].1.max(v);
            }
        }
        bounds
    }
}

fn median_of(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 0 {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    } else {
        values[n / 2]
    }
}

/// Per-step observation vectors for `feature_set`, with sensor gaps filled by
/// the per-feature median over block points `[0, median_upto)`.
pub(crate) fn observation_rows(
    block: &Block,
    feature_set: FeatureSet,
    median_upto: Option<usize>,
) -> Vec<Vec<f64>> {
    let n = block.len();
    match feature_set {
        FeatureSet::SumScore => block.points.iter().map(|p| vec![p.score.value()]).collect(),
        FeatureSet::AllEmas => block
            .points
            .iter()
            .map(|p| p.ema.answers.iter().map(|&a| f64::from(a)).collect())
            .collect(),
        FeatureSet::Sensors => {
            let upto = median_upto.unwrap_or(n).min(n);
            let mut medians = vec![0.0; ALIGNED_SENSOR_DIM];
            for (j, m) in medians.iter_mut().enumerate() {
                let observed: Vec<f64> = block.points[..upto]
                    .iter()
                    .filter_map(|p| p.sensors.as_ref())
                    .map(|s| s[j])
                    .filter(|v| v.is_finite())
                    .collect();
                *m = median_of(observed);
            }
            block
                .points
                .iter()
                .map(|p| match &p.sensors {
                    Some(s) => s
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| if v.is_finite() { v } else { medians[j] })
                        .collect(),
                    None => medians.clone(),
                })
                .collect()
        }
    }
}

fn base_feature_names(feature_set: FeatureSet) -> Vec<String> {
    match feature_set {
        FeatureSet::SumScore => vec!["sum_score".to_string()],
        FeatureSet::AllEmas => EMA_ITEM_NAMES.iter().map(|s| s.to_string()).collect(),
        FeatureSet::Sensors => aligned_sensor_names(),
    }
}

/// Build the lagged design matrix for a block.
///
/// Sample `i` (for block steps `n_lags..n`) has target `y[i] =` score at step
/// `i` and features `[obs(i-1), obs(i-2), ..., obs(i-n_lags)]`.
pub fn build_lag_features(
    block: &Block,
    n_lags: usize,
    feature_set: FeatureSet,
) -> Result<FeatureMatrix> {
    build_lag_features_filled(block, n_lags, feature_set, None)
}

/// As [`build_lag_features`], with sensor medians computed over
/// `[0, median_upto)` only (leakage control for train/validation splits).
pub fn build_lag_features_filled(
    block: &Block,
    n_lags: usize,
    feature_set: FeatureSet,
    median_upto: Option<usize>,
) -> Result<FeatureMatrix> {
    let n = block.len();
    if n_lags == 0 {
        return Err(Error::InvalidParam("n_lags must be >= 1".into()));
    }
    if n <= n_lags {
        return Err(Error::InsufficientData(format!(
            "block has {n} points, need more than {n_lags} lags"
        )));
    }
    let rows = observation_rows(block, feature_set, median_upto);
    let base_dim = feature_set.base_dim();
    let n_features = base_dim * n_lags;
    let n_samples = n - n_lags;

    let mut values = Vec::with_capacity(n_features * n_samples);
    let mut y = Vec::with_capacity(n_samples);
    let mut t_index = Vec::with_capacity(n_samples);
    for i in n_lags..n {
        for lag in 1..=n_lags {
            values.extend_from_slice(&rows[i - lag]);
        }
        y.push(block.points[i].score.value());
        t_index.push(block.points[i].t);
    }

    let mut feature_names = Vec::with_capacity(n_features);
    for lag in 1..=n_lags {
        for base in base_feature_names(feature_set) {
            feature_names.push(format!("{base}_lag{lag}"));
        }
    }

    if values.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lag feature matrix".into()));
    }

    Ok(FeatureMatrix { n_features, n_samples, values, y, feature_names, t_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::block::{segment_blocks, SegmentParams};
    use crate::data::records::EmaRecord;

    fn block_of(n: usize) -> Block {
        let recs: Vec<EmaRecord> = (0..n)
            .map(|i| {
                let mut answers = [1u8; EMA_ITEMS];
                answers[0] = (i % 4) as u8;
                answers[3] = ((i / 2) % 4) as u8;
                EmaRecord::new("p1", i as f64 * 2.5, answers).unwrap()
            })
            .collect();
        segment_blocks(&recs, &SegmentParams::default()).unwrap().remove(0)
    }

    #[test]
    fn sum_score_shape() {
        let fm = build_lag_features(&block_of(16), 3, FeatureSet::SumScore).unwrap();
        assert_eq!(fm.n_features, 3);
        assert_eq!(fm.n_samples, 13);
        assert_eq!(fm.y.len(), 13);
    }

    #[test]
    fn all_emas_shape() {
        let fm = build_lag_features(&block_of(16), 3, FeatureSet::AllEmas).unwrap();
        assert_eq!(fm.n_features, 30);
        assert_eq!(fm.n_samples, 13);
    }

    #[test]
    fn targets_and_lags_match_block() {
        let block = block_of(20);
        let fm = build_lag_features(&block, 3, FeatureSet::SumScore).unwrap();
        for (s, i) in (3..20).enumerate() {
            assert_eq!(fm.y[s], block.points[i].score.value());
            let col = fm.col(s);
            assert_eq!(col[0], block.points[i - 1].score.value());
            assert_eq!(col[1], block.points[i - 2].score.value());
            assert_eq!(col[2], block.points[i - 3].score.value());
        }
    }

    #[test]
    fn lag_entries_round_trip_for_all_emas() {
        let block = block_of(18);
        let fm = build_lag_features(&block, 3, FeatureSet::AllEmas).unwrap();
        for (s, i) in (3..18).enumerate() {
            let col = fm.col(s);
            for lag in 1..=3usize {
                for q in 0..EMA_ITEMS {
                    assert_eq!(col[(lag - 1) * EMA_ITEMS + q], f64::from(block.points[i - lag].ema.answers[q]));
                }
            }
        }
    }

    #[test]
    fn too_short_block_is_an_error() {
        let block = block_of(16);
        assert!(build_lag_features(&block.slice(0..3), 3, FeatureSet::SumScore).is_err());
    }

    #[test]
    fn sensor_gaps_are_median_filled() {
        let mut block = block_of(17);
        for (i, p) in block.points.iter_mut().enumerate() {
            let mut v = vec![1.0 + i as f64; ALIGNED_SENSOR_DIM];
            if i == 5 {
                v[0] = f64::NAN;
            }
            p.sensors = if i == 9 { None } else { Some(v) };
        }
        let fm = build_lag_features(&block, 3, FeatureSet::Sensors).unwrap();
        assert_eq!(fm.n_features, ALIGNED_SENSOR_DIM * 3);
        assert!(fm.values.iter().all(|v| v.is_finite()));
    }
}
