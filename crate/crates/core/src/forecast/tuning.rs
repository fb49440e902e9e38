//! Hyperparameter grids, forward cross-validation, and rolling-origin
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::data::{build_lag_features_filled, split_block, Block, FeatureMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::forecast::gbrt::Loss;
use crate::forecast::model::{fit_model, forecast, ForecastRequest, HyperParams, ModelFamily};
use crate::seeds;

/// Minimum training prefix for forward folds and rolling origins.
pub const MIN_FOLD_TRAIN: usize = 15;
pub const DEFAULT_MIN_TRAIN: usize = 12;

const LASSO_ALPHAS: [f64; 99] = {
    let mut a = [0.0; 99];
    let mut k = 1;
    while k < 100 {
        a[k - 1] = k as f64 / 100.0;
        k += 1;
    }
    a
};
const ENET_ALPHAS: [f64; 10] = [0.00001, 0.0001, 0.001, 0.01, 0.1, 0.0, 0.5, 1.0, 10.0, 100.0];
const RF_DEPTHS: [usize; 5] = [5, 10, 20, 50, 100];
const RF_TREES: [usize; 6] = [5, 10, 50, 100, 500, 1000];
const RF_MIN_SPLIT: [usize; 3] = [1, 2, 5];
const RF_MIN_LEAF: [usize; 3] = [1, 3, 5];
const GBRT_RATES: [f64; 6] = [0.001, 0.01, 0.05, 0.1, 0.2, 1.0];
const GBRT_STAGES: [usize; 6] = [5, 10, 50, 100, 500, 1000];
const GBRT_DEPTHS: [usize; 4] = [2, 3, 5, 10];
const GBRT_MIN_LEAF: [usize; 4] = [1, 5, 10, 20];
const GBRT_MIN_SPLIT: [usize; 4] = [2, 5, 10, 20];

fn is_hundredth(v: f64) -> bool {
    let k = (v * 100.0).round();
    (1.0..=99.0).contains(&k) && (v * 100.0 - k).abs() < 1e-9
}

fn in_f64(set: &[f64], v: f64) -> bool {
    set.iter().any(|&s| (s - v).abs() < 1e-12)
}

/// Candidate hyperparameter lists for one family. Every listed value must
/// belong to the family's documented search set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperGrid {
    Lasso { alpha: Vec<f64> },
    ElasticNet { alpha: Vec<f64>, l1_ratio: Vec<f64> },
    RandomForest {
        n_trees: Vec<usize>,
        max_depth: Vec<usize>,
        min_split: Vec<usize>,
        min_leaf: Vec<usize>,
        bootstrap: Vec<bool>,
    },
    Gbrt {
        loss: Vec<Loss>,
        learning_rate: Vec<f64>,
        n_stages: Vec<usize>,
        max_depth: Vec<usize>,
        min_leaf: Vec<usize>,
        min_split: Vec<usize>,
    },
}

impl HyperGrid {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperGrid::Lasso { .. } => ModelFamily::Lasso,
            HyperGrid::ElasticNet { .. } => ModelFamily::ElasticNet,
            HyperGrid::RandomForest { .. } => ModelFamily::RandomForest,
            HyperGrid::Gbrt { .. } => ModelFamily::Gbrt,
        }
    }

    /// The full documented search space for a family.
    pub fn full(family: ModelFamily) -> Result<HyperGrid> {
        match family {
            ModelFamily::Lasso => Ok(HyperGrid::Lasso { alpha: LASSO_ALPHAS.to_vec() }),
            ModelFamily::ElasticNet => Ok(HyperGrid::ElasticNet {
                alpha: ENET_ALPHAS.to_vec(),
                l1_ratio: LASSO_ALPHAS.to_vec(),
            }),
            ModelFamily::RandomForest => Ok(HyperGrid::RandomForest {
                n_trees: RF_TREES.to_vec(),
                max_depth: RF_DEPTHS.to_vec(),
                min_split: RF_MIN_SPLIT.to_vec(),
                min_leaf: RF_MIN_LEAF.to_vec(),
                bootstrap: vec![true, false],
            }),
            ModelFamily::Gbrt => Ok(HyperGrid::Gbrt {
                loss: vec![Loss::Huber, Loss::SquaredError],
                learning_rate: GBRT_RATES.to_vec(),
                n_stages: GBRT_STAGES.to_vec(),
                max_depth: GBRT_DEPTHS.to_vec(),
                min_leaf: GBRT_MIN_LEAF.to_vec(),
                min_split: GBRT_MIN_SPLIT.to_vec(),
            }),
            ModelFamily::MeanBaseline => {
                Err(Error::InvalidParam("mean baseline has no hyperparameters".into()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: String| {
            Err(Error::InvalidParam(format!("{what} value {v} outside the documented search set")))
        };
        match self {
            HyperGrid::Lasso { alpha } => {
                for &a in alpha {
                    if !is_hundredth(a) {
                        return bad("lasso alpha", a.to_string());
                    }
                }
            }
            HyperGrid::ElasticNet { alpha, l1_ratio } => {
                for &a in alpha {
                    if !in_f64(&ENET_ALPHAS, a) {
                        return bad("elastic_net alpha", a.to_string());
                    }
                }
                for &r in l1_ratio {
                    if !is_hundredth(r) {
                        return bad("elastic_net l1_ratio", r.to_string());
                    }
                }
            }
            HyperGrid::RandomForest { n_trees, max_depth, min_split, min_leaf, .. } => {
                for &v in n_trees {
                    if !RF_TREES.contains(&v) {
                        return bad("random_forest n_trees", v.to_string());
                    }
                }
                for &v in max_depth {
                    if !RF_DEPTHS.contains(&v) {
                        return bad("random_forest max_depth", v.to_string());
                    }
                }
                for &v in min_split {
                    if !RF_MIN_SPLIT.contains(&v) {
                        return bad("random_forest min_split", v.to_string());
                    }
                }
                for &v in min_leaf {
                    if !RF_MIN_LEAF.contains(&v) {
                        return bad("random_forest min_leaf", v.to_string());
                    }
                }
            }
            HyperGrid::Gbrt { learning_rate, n_stages, max_depth, min_leaf, min_split, .. } => {
                for &v in learning_rate {
                    if !in_f64(&GBRT_RATES, v) {
                        return bad("gbrt learning_rate", v.to_string());
                    }
                }
                for &v in n_stages {
                    if !GBRT_STAGES.contains(&v) {
                        return bad("gbrt n_stages", v.to_string());
                    }
                }
                for &v in max_depth {
                    if !GBRT_DEPTHS.contains(&v) {
                        return bad("gbrt max_depth", v.to_string());
                    }
                }
                for &v in min_leaf {
                    if !GBRT_MIN_LEAF.contains(&v) {
                        return bad("gbrt min_leaf", v.to_string());
                    }
                }
                for &v in min_split {
                    if !GBRT_MIN_SPLIT.contains(&v) {
                        return bad("gbrt min_split", v.to_string());
                    }
                }
            }
        }
        Ok(())
    }

    /// Cartesian product of the candidate lists.
    pub fn points(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        match self {
            HyperGrid::Lasso { alpha } => {
                for &a in alpha {
                    out.push(HyperParams::Lasso { alpha: a });
                }
            }
            HyperGrid::ElasticNet { alpha, l1_ratio } => {
                for &a in alpha {
                    for &r in l1_ratio {
                        out.push(HyperParams::ElasticNet { alpha: a, l1_ratio: r });
                    }
                }
            }
            HyperGrid::RandomForest { n_trees, max_depth, min_split, min_leaf, bootstrap } => {
                for &t in n_trees {
                    for &d in max_depth {
                        for &ms in min_split {
                            for &ml in min_leaf {
                                for &b in bootstrap {
                                    out.push(HyperParams::RandomForest {
                                        n_trees: t,
                                        max_depth: Some(d),
                                        min_split: ms,
                                        min_leaf: ml,
                                        bootstrap: b,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            HyperGrid::Gbrt { loss, learning_rate, n_stages, max_depth, min_leaf, min_split } => {
                for &l in loss {
                    for &lr in learning_rate {
                        for &s in n_stages {
                            for &d in max_depth {
                                for &ml in min_leaf {
                                    for &ms in min_split {
                                        out.push(HyperParams::Gbrt {
                                            loss: l,
                                            learning_rate: lr,
                                            n_stages: s,
                                            max_depth: d,
                                            min_leaf: ml,
                                            min_split: ms,
                                            huber_alpha: 0.9,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One grid point's cross-validation outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvRow {
    pub params: HyperParams,
    pub fold_maes: Vec<f64>,
    pub mean_mae: f64,
}

/// Full cross-validation table for one block and grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    pub n_folds: usize,
    /// True when the block was too short for the requested fold count.
    pub folds_reduced: bool,
    /// Per-fold (max train time, min validation time) leakage metadata.
    pub fold_bounds: Vec<(f64, f64)>,
}

impl CvTable {
    pub fn to_csv_string(&self, block_id: &str) -> String {
        let mut out = String::from("block_id,family,params,mean_mae,fold_maes,folds_reduced\n");
        for row in &self.rows {
            let params = serde_json::to_string(&row.params).unwrap_or_default().replace(',', ";");
            let folds = row
                .fold_maes
                .iter()
                .map(|m| format!("{m:.6}"))
                .collect::<Vec<_>>()
                .join("|");
            out.push_str(&format!(
                "{},{},{},{:.6},{},{}\n",
                block_id,
                row.params.family().as_str(),
                params,
                row.mean_mae,
                folds,
                self.folds_reduced
            ));
        }
        out
    }
}

struct Folds {
    /// (train_end, val_end) in block-point indices of the training side.
    bounds: Vec<(usize, usize)>,
    reduced: bool,
}

fn forward_folds(n: usize, k_folds: usize) -> Result<Folds> {
    let mut k = k_folds.max(2);
    let mut reduced = false;
    if n < MIN_FOLD_TRAIN + k {
        k = n.saturating_sub(MIN_FOLD_TRAIN);
        reduced = true;
        if k < 2 {
            return Err(Error::InsufficientData(format!(
                "training side of {n} points cannot support 2 forward folds"
            )));
        }
    } else if k < k_folds {
        reduced = true;
    }
    let s = (n - MIN_FOLD_TRAIN) / k;
    let bounds = (0..k)
        .map(|j| {
            let train_end = MIN_FOLD_TRAIN + j * s;
            (train_end, train_end + s)
        })
        .collect();
    Ok(Folds { bounds, reduced: reduced || k != k_folds })
}

fn fold_mae(
    features: &FeatureMatrix,
    feature_set: FeatureSet,
    n_lags: usize,
    params: &HyperParams,
    seed: u64,
    train_end: usize,
    val_end: usize,
) -> Result<f64> {
    // Sample s corresponds to block step s + n_lags.
    let train_samples = train_end - n_lags;
    let val_samples = val_end - n_lags;
    let train = features.subset(0..train_samples);
    let model = fit_model(&train, feature_set, n_lags, params, seed)?;
    let mut err = 0.0;
    for s in train_samples..val_samples {
        err += (model.predict_score(features.col(s)) - features.y[s]).abs();
    }
    Ok(err / (val_samples - train_samples) as f64)
}

impl FeatureMatrix {
    /// Copy of the samples in `range`.
    pub fn subset(&self, range: std::ops::Range<usize>) -> FeatureMatrix {
        FeatureMatrix {
            n_features: self.n_features,
            n_samples: range.len(),
            values: self.values[range.start * self.n_features..range.end * self.n_features].to_vec(),
            y: self.y[range.clone()].to_vec(),
            feature_names: self.feature_names.clone(),
            t_index: self.t_index[range].to_vec(),
        }
    }
}

/// Grid search over forward (expanding-origin) folds on the chronological
/// 80% training side of `block`. Validation is single-step with true lag
/// features; every validation timestamp exceeds all training timestamps.
/// Ties prefer the smaller model.
pub fn grid_search(
    block: &Block,
    grid: &HyperGrid,
    k_folds: usize,
    feature_set: FeatureSet,
    n_lags: usize,
    seed: u64,
) -> Result<(HyperParams, CvTable)> {
    grid.validate()?;
    let (train_side, _) = split_block(block, 0.8)?;
    let folds = forward_folds(train_side.len(), k_folds)?;

    // Per-fold feature matrices: sensor medians come from the fold's training
    // prefix only.
    let mut fold_features = Vec::with_capacity(folds.bounds.len());
    let mut fold_bounds_t = Vec::with_capacity(folds.bounds.len());
    for &(train_end, val_end) in &folds.bounds {
        let upto = train_side.slice(0..val_end);
        let fm = build_lag_features_filled(&upto, n_lags, feature_set, Some(train_end))?;
        fold_bounds_t.push((fm.t_index[train_end - n_lags - 1], fm.t_index[train_end - n_lags]));
        fold_features.push(fm);
    }

    let mut rows = Vec::new();
    for (p_idx, params) in grid.points().into_iter().enumerate() {
        let mut fold_maes = Vec::with_capacity(folds.bounds.len());
        for (f_idx, &(train_end, val_end)) in folds.bounds.iter().enumerate() {
            let mae = fold_mae(
                &fold_features[f_idx],
                feature_set,
                n_lags,
                &params,
                seeds::derive(seed, (p_idx * 31 + f_idx) as u64),
                train_end,
                val_end,
            )?;
            fold_maes.push(mae);
        }
        let mean_mae = fold_maes.iter().sum::<f64>() / fold_maes.len() as f64;
        rows.push(CvRow { params, fold_maes, mean_mae });
    }

    let best = rows
        .iter()
        .min_by(|a, b| {
            a.mean_mae
                .partial_cmp(&b.mean_mae)
                .unwrap()
                .then_with(|| {
                    let (ka, kb) = (a.params.complexity_key(), b.params.complexity_key());
                    ka.partial_cmp(&kb).unwrap()
                })
        })
        .expect("grid has at least one point")
        .params
        .clone();

    Ok((
        best,
        CvTable {
            rows,
            n_folds: folds.bounds.len(),
            folds_reduced: folds.reduced,
            fold_bounds: fold_bounds_t,
        },
    ))
}

/// One rolling-origin fit/predict cycle's leakage metadata.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FoldMeta {
    pub origin: usize,
    pub max_train_t: f64,
    pub min_test_t: f64,
}

/// Rolling-origin evaluation result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub fold_maes: Vec<f64>,
    pub train_maes: Vec<f64>,
    pub mean_mae: f64,
    pub mean_train_mae: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub fold_meta: Vec<FoldMeta>,
}

/// Expanding-origin evaluation: refit on each prefix, forecast the next
/// `horizon` points, record the MAE against the later-observed truth.
pub fn rolling_origin_evaluate(
    block: &Block,
    params: &HyperParams,
    feature_set: FeatureSet,
    n_lags: usize,
    horizon: usize,
    min_train: usize,
    seed: u64,
) -> Result<EvalResult> {
    let n = block.len();
    if n < min_train + horizon {
        return Err(Error::InsufficientData(format!(
            "block of {n} points too short for min_train {min_train} + horizon {horizon}"
        )));
    }
    let scores = block.scores();
    let mut fold_maes = Vec::new();
    let mut train_maes = Vec::new();
    let mut fold_meta = Vec::new();

    let mut origin = min_train;
    while origin + horizon <= n {
        let sub = block.slice(0..origin);
        let fm = build_lag_features_filled(&sub, n_lags, feature_set, None)?;
        let model = fit_model(&fm, feature_set, n_lags, params, seeds::derive(seed, origin as u64))?;
        let preds = forecast(&model, &sub, &ForecastRequest { horizon })?;
        let mae = preds
            .iter()
            .zip(&scores[origin..origin + horizon])
            .map(|(p, t)| (p - t).abs())
            .sum::<f64>()
            / horizon as f64;
        fold_maes.push(mae);
        let train_mae = (0..fm.n_samples)
            .map(|s| (model.predict_score(fm.col(s)) - fm.y[s]).abs())
            .sum::<f64>()
            / fm.n_samples as f64;
        train_maes.push(train_mae);
        fold_meta.push(FoldMeta {
            origin,
            max_train_t: sub.points.last().unwrap().t,
            min_test_t: block.points[origin].t,
        });
        origin += horizon;
    }

    let mean_mae = fold_maes.iter().sum::<f64>() / fold_maes.len() as f64;
    let mean_train_mae = train_maes.iter().sum::<f64>() / train_maes.len() as f64;
    let (ci_low, ci_high) = bootstrap_ci(&fold_maes, 1000, 0.95, seeds::derive(seed, 0xB007))?;
    Ok(EvalResult {
        fold_maes,
        train_maes,
        mean_mae,
        mean_train_mae,
        ci_low,
        ci_high,
        ci_level: 0.95,
        fold_meta,
    })
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Percentile bootstrap CI of the mean; deterministic given the seed.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    use rand::Rng;
    if values.is_empty() {
        return Err(Error::InsufficientData("bootstrap_ci needs at least one value".into()));
    }
    if values.len() == 1 {
        return Ok((values[0], values[0]));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidParam(format!("level must be in (0,1), got {level}")));
    }
    let mut rng = seeds::rng(seed, 0xC1);
    let n = values.len();
    let mut means: Vec<f64> = (0..n_resamples.max(1))
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    Ok((percentile(&means, tail), percentile(&means, 1.0 - tail)))
}

/// Mean absolute error of paired predictions.
pub fn mae(predictions: &[f64], truth: &[f64]) -> f64 {
    predictions.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / truth.len() as f64
}
