//! Turn a clinical alert into a counterfactual explanation report.

use serde::{Deserialize, Serialize};

use crate::changepoint::ChangePoint;
use crate::counterfactual::genetic::{generate_genetic, GeneticParams};
use crate::counterfactual::kdtree::generate_kdtree;
use crate::counterfactual::metrics::{score_set, CfMetrics};
use crate::counterfactual::query::{CfQuery, CfSet, Counterfactual, FeatureSpace};
use crate::counterfactual::random::{generate_random, DEFAULT_BUDGET};
use crate::data::{build_lag_features, Block, FeatureSet, MAX_SCORE};
use crate::error::{Error, Result};
use crate::forecast::{latest_feature_vector, FittedModel, DEFAULT_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfMethod {
    Random,
    Kdtree,
    Genetic,
}

impl CfMethod {
    pub const ALL: [CfMethod; 3] = [CfMethod::Random, CfMethod::Kdtree, CfMethod::Genetic];

    pub fn as_str(self) -> &'static str {
        match self {
            CfMethod::Random => "random",
            CfMethod::Kdtree => "kdtree",
            CfMethod::Genetic => "genetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(CfMethod::Random),
            "kdtree" => Ok(CfMethod::Kdtree),
            "genetic" => Ok(CfMethod::Genetic),
            other => Err(Error::InvalidParam(format!("unknown counterfactual method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfConfig {
    pub method: CfMethod,
    /// Counterfactuals per alert.
    pub k: usize,
    /// Sampling budget of the random method.
    pub budget: usize,
    pub genetic: GeneticParams,
    /// Slack below the pre-change mean when anchoring the desired range.
    pub desired_slack: f64,
    /// Optional per-instance feasibility: max move per feature as a fraction
    /// of its range. None allows the full plausible domain.
    pub feasibility_width: Option<f64>,
}

impl Default for CfConfig {
    fn default() -> Self {
        Self {
            method: CfMethod::Genetic,
            k: 5,
            budget: DEFAULT_BUDGET,
            genetic: GeneticParams::default(),
            desired_slack: 0.5,
            feasibility_width: None,
        }
    }
}

/// Explanation of one alerted weekly prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub block_id: String,
    /// Merged-series index of the alerted change point.
    pub alert_index: usize,
    pub method: CfMethod,
    pub k: usize,
    /// Which of the week's predictions was explained (0-based offset).
    pub prediction_offset: usize,
    pub predicted_at_alert: f64,
    pub desired_range: (f64, f64),
    pub feature_names: Vec<String>,
    pub query_x: Vec<f64>,
    pub metrics: Option<CfMetrics>,
    pub counterfactuals: Vec<Counterfactual>,
    pub shortfall: bool,
}

impl ExplanationReport {
    /// Flat delta rows for the companion CSV (one row per changed feature per
    /// counterfactual).
    pub fn delta_rows(&self) -> Vec<(usize, String, f64, f64, f64)> {
        let mut rows = Vec::new();
        for (i, cf) in self.counterfactuals.iter().enumerate() {
            for d in &cf.deltas {
                rows.push((i, d.name.clone(), d.before, d.after, d.change));
            }
        }
        rows
    }
}

/// The lag vector the model consumed for prediction step `offset` (0-based)
/// after the end of `history`. Recursive sum-score lags replay earlier
/// predictions; frozen feature sets reuse the last observed window.
fn feature_vector_at_step(
    model: &FittedModel,
    history: &Block,
    predictions: &[f64],
    offset: usize,
) -> Result<Vec<f64>> {
    let mut x = latest_feature_vector(model, history)?;
    if model.feature_set == FeatureSet::SumScore {
        for &pred in predictions.iter().take(offset) {
            x.rotate_right(1);
            x[0] = pred;
        }
    }
    Ok(x)
}

/// Build and answer a counterfactual query for an alerted change point.
///
/// The query sits at the first predicted point at or after the change point;
/// the desired range asks for recovery to the pre-change historical mean
/// (minus a small slack).
pub fn explain_alert(
    history: &Block,
    model: &FittedModel,
    predictions: &[f64],
    alert_cp: &ChangePoint,
    cfg: &CfConfig,
    seed: u64,
) -> Result<ExplanationReport> {
    if predictions.len() != DEFAULT_HORIZON {
        return Err(Error::InvalidParam(format!(
            "expected {DEFAULT_HORIZON} weekly predictions, got {}",
            predictions.len()
        )));
    }
    let n_hist = history.len();
    let offset = alert_cp.index.saturating_sub(n_hist).min(predictions.len() - 1);

    let scores = history.scores();
    let pre_end = alert_cp.index.min(n_hist);
    let pre_slice = if pre_end >= 2 { &scores[..pre_end] } else { &scores[..] };
    let pre_mean = pre_slice.iter().sum::<f64>() / pre_slice.len() as f64;
    let desired_range = ((pre_mean - cfg.desired_slack).clamp(0.0, MAX_SCORE), MAX_SCORE);

    let mut x = feature_vector_at_step(model, history, predictions, offset)?;
    let mut space = FeatureSpace::for_model(model);
    space.snap(&mut x);
    if let Some(width) = cfg.feasibility_width {
        space = space.restrict_around(&x, width);
    }
    let query = CfQuery { x, desired_range, k: cfg.k, space };

    let set: CfSet = match cfg.method {
        CfMethod::Random => generate_random(&query, model, seed, cfg.budget)?,
        CfMethod::Genetic => generate_genetic(&query, model, &cfg.genetic, seed)?,
        CfMethod::Kdtree => {
            let reference = build_lag_features(history, model.n_lags, model.feature_set)?;
            generate_kdtree(&query, model, &reference, seed)?
        }
    };

    let metrics = if set.counterfactuals.is_empty() {
        None
    } else {
        Some(score_set(&query, &set.counterfactuals, model)?)
    };

    Ok(ExplanationReport {
        block_id: history.block_id.clone(),
        alert_index: alert_cp.index,
        method: cfg.method,
        k: cfg.k,
        prediction_offset: offset,
        predicted_at_alert: predictions[offset],
        desired_range,
        feature_names: query.space.features.iter().map(|f| f.name.clone()).collect(),
        query_x: query.x,
        metrics,
        counterfactuals: set.counterfactuals,
        shortfall: set.shortfall,
    })
}
