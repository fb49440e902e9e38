//! Fitted forecasting models and the multi-step forecast operation.

use serde::{Deserialize, Serialize};

use crate::data::features::observation_rows;
use crate::data::{Block, FeatureMatrix, FeatureSet, MAX_SCORE};
use crate::error::{Error, Result};
use crate::forecast::forest::{ForestParams, RandomForest};
use crate::forecast::gbrt::{Gbrt, GbrtParams, Loss};
use crate::forecast::linear::{coordinate_descent, LinearModel};

/// Default number of lagged observations per feature.
pub const DEFAULT_LAGS: usize = 3;
/// Default forecast horizon: one week of points.
pub const DEFAULT_HORIZON: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    MeanBaseline,
    Lasso,
    ElasticNet,
    RandomForest,
    Gbrt,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::MeanBaseline,
        ModelFamily::Lasso,
        ModelFamily::ElasticNet,
        ModelFamily::RandomForest,
        ModelFamily::Gbrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::MeanBaseline => "mean_baseline",
            ModelFamily::Lasso => "lasso",
            ModelFamily::ElasticNet => "elastic_net",
            ModelFamily::RandomForest => "random_forest",
            ModelFamily::Gbrt => "gbrt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean_baseline" => Ok(ModelFamily::MeanBaseline),
            "lasso" => Ok(ModelFamily::Lasso),
            "elastic_net" => Ok(ModelFamily::ElasticNet),
            "random_forest" => Ok(ModelFamily::RandomForest),
            "gbrt" => Ok(ModelFamily::Gbrt),
            other => Err(Error::InvalidParam(format!("unknown model family {other:?}"))),
        }
    }
}

/// Concrete hyperparameter assignment for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HyperParams {
    MeanBaseline,
    Lasso { alpha: f64 },
    ElasticNet { alpha: f64, l1_ratio: f64 },
    RandomForest { n_trees: usize, max_depth: Option<usize>, min_split: usize, min_leaf: usize, bootstrap: bool },
    Gbrt { loss: Loss, learning_rate: f64, n_stages: usize, max_depth: usize, min_leaf: usize, min_split: usize, huber_alpha: f64 },
}

impl HyperParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperParams::MeanBaseline => ModelFamily::MeanBaseline,
            HyperParams::Lasso { .. } => ModelFamily::Lasso,
            HyperParams::ElasticNet { .. } => ModelFamily::ElasticNet,
            HyperParams::RandomForest { .. } => ModelFamily::RandomForest,
            HyperParams::Gbrt { .. } => ModelFamily::Gbrt,
        }
    }

    /// Reported best settings per family (used when tuning is skipped).
    pub fn tuned_default(family: ModelFamily) -> HyperParams {
        match family {
            ModelFamily::MeanBaseline => HyperParams::MeanBaseline,
            ModelFamily::Lasso => HyperParams::Lasso { alpha: 0.74 },
            ModelFamily::ElasticNet => HyperParams::ElasticNet { alpha: 10.0, l1_ratio: 0.14 },
            ModelFamily::RandomForest => HyperParams::RandomForest {
                n_trees: 10,
                max_depth: Some(5),
                min_split: 2,
                min_leaf: 3,
                bootstrap: true,
            },
            ModelFamily::Gbrt => HyperParams::Gbrt {
                loss: Loss::Huber,
                learning_rate: 0.05,
                n_stages: 10,
                max_depth: 3,
                min_leaf: 5,
                min_split: 5,
                huber_alpha: 0.9,
            },
        }
    }

    /// Tie-break key for grid search: lexicographically smaller is the
    /// "smaller model" (fewer stages/trees, shallower, more regularized).
    pub fn complexity_key(&self) -> Vec<f64> {
        match self {
            HyperParams::MeanBaseline => vec![0.0],
            HyperParams::Lasso { alpha } => vec![-alpha],
            HyperParams::ElasticNet { alpha, l1_ratio } => vec![-alpha, -l1_ratio],
            HyperParams::RandomForest { n_trees, max_depth, min_split, min_leaf, bootstrap } => vec![
                *n_trees as f64,
                max_depth.map_or(f64::INFINITY, |d| d as f64),
                -(*min_leaf as f64),
                -(*min_split as f64),
                if *bootstrap { 0.0 } else { 1.0 },
            ],
            HyperParams::Gbrt { learning_rate, n_stages, max_depth, min_leaf, min_split, .. } => vec![
                *n_stages as f64,
                *max_depth as f64,
                *learning_rate,
                -(*min_leaf as f64),
                -(*min_split as f64),
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ModelKind {
    MeanBaseline { mean: f64 },
    Linear(LinearModel),
    Forest(RandomForest),
    Gbrt(Gbrt),
}

/// A trained forecasting function plus the metadata needed to apply it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: ModelFamily,
    pub hyperparams: HyperParams,
    pub feature_set: FeatureSet,
    pub n_lags: usize,
    pub feature_names: Vec<String>,
    /// Per-feature (min, max) observed in training data.
    pub feature_bounds: Vec<(f64, f64)>,
    kind: ModelKind,
}

impl FittedModel {
    /// Raw model output for a feature vector in the model's lag space.
    pub fn predict_raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::MeanBaseline { mean } => *mean,
            ModelKind::Linear(m) => m.predict(x),
            ModelKind::Forest(m) => m.predict(x),
            ModelKind::Gbrt(m) => m.predict(x),
        }
    }

    /// Model output clipped to the score domain [0, 30].
    pub fn predict_score(&self, x: &[f64]) -> f64 {
        self.predict_raw(x).clamp(0.0, MAX_SCORE)
    }

    pub fn gbrt(&self) -> Option<&Gbrt> {
        match &self.kind {
            ModelKind::Gbrt(g) => Some(g),
            _ => None,
        }
    }

    pub fn linear(&self) -> Option<&LinearModel> {
        match &self.kind {
            ModelKind::Linear(m) => Some(m),
            _ => None,
        }
    }
}

/// Fit one model on a prepared design matrix.
pub fn fit_model(
    fm: &FeatureMatrix,
    feature_set: FeatureSet,
    n_lags: usize,
    params: &HyperParams,
    seed: u64,
) -> Result<FittedModel> {
    if fm.n_samples == 0 {
        return Err(Error::InsufficientData("empty design matrix".into()));
    }
    let kind = match params {
        HyperParams::MeanBaseline => {
            ModelKind::MeanBaseline { mean: fm.y.iter().sum::<f64>() / fm.n_samples as f64 }
        }
        HyperParams::Lasso { alpha } => ModelKind::Linear(coordinate_descent(fm, *alpha, 1.0)?.model),
        HyperParams::ElasticNet { alpha, l1_ratio } => {
            ModelKind::Linear(coordinate_descent(fm, *alpha, *l1_ratio)?.model)
        }
        HyperParams::RandomForest { n_trees, max_depth, min_split, min_leaf, bootstrap } => {
            let samples: Vec<&[f64]> = (0..fm.n_samples).map(|i| fm.col(i)).collect();
            ModelKind::Forest(RandomForest::fit(
                &samples,
                &fm.y,
                &ForestParams {
                    n_trees: *n_trees,
                    max_depth: *max_depth,
                    min_split: *min_split,
                    min_leaf: *min_leaf,
                    bootstrap: *bootstrap,
                    seed,
                },
            ))
        }
        HyperParams::Gbrt { loss, learning_rate, n_stages, max_depth, min_leaf, min_split, huber_alpha } => {
            let samples: Vec<&[f64]> = (0..fm.n_samples).map(|i| fm.col(i)).collect();
            ModelKind::Gbrt(Gbrt::fit(
                &samples,
                &fm.y,
                &GbrtParams {
                    loss: *loss,
                    learning_rate: *learning_rate,
                    n_stages: *n_stages,
                    max_depth: *max_depth,
                    min_leaf: *min_leaf,
                    min_split: *min_split,
                    huber_alpha: *huber_alpha,
                    seed,
                },
            )?)
        }
    };
    Ok(FittedModel {
        family: params.family(),
        hyperparams: params.clone(),
        feature_set,
        n_lags,
        feature_names: fm.feature_names.clone(),
        feature_bounds: fm.feature_bounds(),
        kind,
    })
}

/// Convenience: build lag features from a block and fit.
pub fn fit_on_block(
    block: &Block,
    feature_set: FeatureSet,
    n_lags: usize,
    params: &HyperParams,
    seed: u64,
) -> Result<FittedModel> {
    let fm = crate::data::build_lag_features(block, n_lags, feature_set)?;
    fit_model(&fm, feature_set, n_lags, params, seed)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForecastRequest {
    pub horizon: usize,
}

impl Default for ForecastRequest {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON }
    }
}

/// The lag-feature vector the model would see when predicting the step right
/// after the block's last observation.
pub fn latest_feature_vector(model: &FittedModel, block: &Block) -> Result<Vec<f64>> {
    if block.len() < model.n_lags {
        return Err(Error::InsufficientData(format!(
            "block has {} points, need at least {} lags",
            block.len(),
            model.n_lags
        )));
    }
    if model.feature_set == FeatureSet::Sensors
        && block.points.iter().all(|p| p.sensors.is_none())
    {
        return Err(Error::FeatureMismatch {
            expected: "sensors".into(),
            got: "block without sensor data".into(),
        });
    }
    let rows = observation_rows(block, model.feature_set, None);
    let n = block.len();
    let mut x = Vec::with_capacity(model.feature_names.len());
    for lag in 1..=model.n_lags {
        x.extend_from_slice(&rows[n - lag]);
    }
    Ok(x)
}

/// Multi-step forecast from the end of `block`.
///
/// Sum-score lag models are applied recursively (predictions become lags);
/// for EMA- and sensor-lag models the last observed window is frozen and
/// reused for every step, since future exogenous values are unobservable.
/// All outputs are clipped to [0, 30].
pub fn forecast(model: &FittedModel, block: &Block, req: &ForecastRequest) -> Result<Vec<f64>> {
    if req.horizon == 0 {
        return Err(Error::InvalidParam("horizon must be >= 1".into()));
    }
    let expected_dim = model.feature_names.len();
    match model.feature_set {
        FeatureSet::SumScore => {
            let mut window: Vec<f64> = latest_feature_vector(model, block)?;
            debug_assert_eq!(window.len(), expected_dim);
            let mut out = Vec::with_capacity(req.horizon);
            for _ in 0..req.horizon {
                let pred = model.predict_score(&window);
                out.push(pred);
                // shift: newest prediction becomes lag 1
                window.rotate_right(1);
                window[0] = pred;
            }
            Ok(out)
        }
        FeatureSet::AllEmas | FeatureSet::Sensors => {
            let x = latest_feature_vector(model, block)?;
            if x.len() != expected_dim {
                return Err(Error::FeatureMismatch {
                    expected: format!("{expected_dim} features"),
                    got: format!("{}", x.len()),
                });
            }
            let pred = model.predict_score(&x);
            Ok(vec![pred; req.horizon])
        }
    }
}

/// Versioned persistence wrapper for model artifacts.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub const CURRENT_VERSION: u32 = 1;

    pub fn wrap(model: FittedModel) -> Self {
        Self { version: Self::CURRENT_VERSION, model }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParam(format!("serialize model: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParam(format!("parse model artifact: {e}")))?;
        if artifact.version != Self::CURRENT_VERSION {
            return Err(Error::InvalidParam(format!(
                "unsupported model artifact version {}",
                artifact.version
            )));
        }
        Ok(artifact)
    }
}
