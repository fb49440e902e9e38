//! Sliding-window monitoring over the merged historical+predicted series,
//! plus the simpler whole-series, robust, and threshold-baseline detectors.

use serde::{Deserialize, Serialize};

use crate::changepoint::cusum::{cusum_iterate, mean, ChangePoint, Direction, Segment};
use crate::data::block::sample_std;
use crate::error::{Error, Result};
use crate::forecast::DEFAULT_HORIZON;

/// Sliding-window protocol parameters (counts are in data points).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// Historical window length.
    pub hist_window: usize,
    /// Scan window length ahead of the historical window.
    pub scan_window: usize,
    /// Placement step.
    pub step: usize,
    /// Alert when the most recent significant decrease falls in the final
    /// this-many points (1 week of history + 1 week of predictions).
    pub alert_window: usize,
    /// Significance level of the log-likelihood ratio test.
    pub alpha: f64,
    /// Iteration budget of the CUSUM re-estimation loop.
    pub max_iterations: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { hist_window: 12, scan_window: 6, step: 1, alert_window: 6, alpha: 0.05, max_iterations: 10 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hist_window == 0 || self.scan_window == 0 || self.step == 0 || self.alert_window == 0 {
            return Err(Error::InvalidParam("monitor windows and step must be positive".into()));
        }
        if self.alert_window > self.hist_window {
            return Err(Error::InvalidParam(format!(
                "alert_window {} must not exceed hist_window {}",
                self.alert_window, self.hist_window
            )));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidParam(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParam("max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.hist_window + self.scan_window
    }
}

/// Result of one detector invocation over history + weekly predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorOutcome {
    /// Deduplicated candidates, sorted by index (merged coordinates).
    pub change_points: Vec<ChangePoint>,
    pub alert: bool,
    pub alert_cp: Option<ChangePoint>,
}

impl MonitorOutcome {
    fn empty() -> Self {
        Self { change_points: Vec::new(), alert: false, alert_cp: None }
    }
}

fn merge(history: &[f64], predictions: &[f64], cfg: &MonitorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if history.len() < cfg.hist_window {
        return Err(Error::InsufficientData(format!(
            "history of {} points is shorter than the {}-point historical window",
            history.len(),
            cfg.hist_window
        )));
    }
    if predictions.len() != DEFAULT_HORIZON {
        return Err(Error::InvalidParam(format!(
            "expected {} weekly predictions, got {}",
            DEFAULT_HORIZON,
            predictions.len()
        )));
    }
    let mut merged = Vec::with_capacity(history.len() + predictions.len());
    merged.extend_from_slice(history);
    merged.extend_from_slice(predictions);
    Ok(merged)
}

/// All window placements: step through the series; a series shorter than one
/// full window yields a single truncated placement.
fn placements(len: usize, cfg: &MonitorConfig) -> Vec<(usize, usize)> {
    let window = cfg.window_len();
    if len < window {
        return vec![(0, len)];
    }
    (0..=len - window).step_by(cfg.step).map(|s| (s, s + window)).collect()
}

/// Run iterative CUSUM on every placement, deduplicate candidates by index
/// (keep the strongest statistic), sort by index.
fn sliding_cusum(series: &[f64], cfg: &MonitorConfig) -> Result<Vec<ChangePoint>> {
    let mut by_index: std::collections::BTreeMap<usize, ChangePoint> = std::collections::BTreeMap::new();
    for (start, end) in placements(series.len(), cfg) {
        let seg = Segment::new(&series[start..end], start)?;
        let cp = cusum_iterate(&seg, cfg.max_iterations, cfg.alpha)?;
        match by_index.get(&cp.index) {
            Some(existing) if existing.statistic >= cp.statistic => {}
            _ => {
                by_index.insert(cp.index, cp);
            }
        }
    }
    Ok(by_index.into_values().collect())
}

/// Alert rule: the most recent significant decrease must fall within the
/// final `alert_window` points of the merged series.
fn finalize(change_points: Vec<ChangePoint>, len: usize, cfg: &MonitorConfig) -> MonitorOutcome {
    let recent_decrease = change_points
        .iter()
        .rev()
        .find(|cp| cp.significant && cp.direction == Direction::Decrease)
        .cloned();
    let alert = recent_decrease
        .as_ref()
        .is_some_and(|cp| cp.index + cfg.alert_window >= len);
    MonitorOutcome {
        change_points,
        alert_cp: if alert { recent_decrease } else { None },
        alert,
    }
}

/// Sliding-window CUSUM over history + weekly predictions.
pub fn monitor_sliding(history: &[f64], predictions: &[f64], cfg: &MonitorConfig) -> Result<MonitorOutcome> {
    let merged = merge(history, predictions, cfg)?;
    let cps = sliding_cusum(&merged, cfg)?;
    Ok(finalize(cps, merged.len(), cfg))
}

/// Whole-series CUSUM: one iterative search over the merged series, no
/// window sliding.
pub fn cusum_detect(history: &[f64], predictions: &[f64], cfg: &MonitorConfig) -> Result<MonitorOutcome> {
    let merged = merge(history, predictions, cfg)?;
    let seg = Segment::new(&merged, 0)?;
    let cp = cusum_iterate(&seg, cfg.max_iterations, cfg.alpha)?;
    Ok(finalize(vec![cp], merged.len(), cfg))
}

fn median_of(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 0 {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    } else {
        sorted[n / 2]
    }
}

/// Consistency factor making the MAD estimate Gaussian-comparable.
const MAD_SCALE: f64 = 1.4826;
/// Winsorization width in robust standard deviations.
const ROBUST_CLIP: f64 = 3.0;

/// Robust variant: winsorize the merged series at median +/- 3 robust sigmas
/// (sigma = 1.4826 * MAD, falling back to the standard deviation when the MAD
/// vanishes), then run the sliding protocol. A plain affine standardization
/// would leave both the CUSUM argmax and the LLR verdict unchanged, so the
/// clipping is what blunts isolated outliers.
pub fn robust_detect(history: &[f64], predictions: &[f64], cfg: &MonitorConfig) -> Result<MonitorOutcome> {
    let merged = merge(history, predictions, cfg)?;
    let location = median_of(&merged);
    let mad = median_of(&merged.iter().map(|v| (v - location).abs()).collect::<Vec<_>>());
    let mut scale = MAD_SCALE * mad;
    if scale <= 1e-12 {
        scale = sample_std(&merged);
    }
    if scale <= 1e-12 {
        return Ok(MonitorOutcome::empty());
    }
    let clipped: Vec<f64> = merged
        .iter()
        .map(|v| v.clamp(location - ROBUST_CLIP * scale, location + ROBUST_CLIP * scale))
        .collect();
    let cps = sliding_cusum(&clipped, cfg)?;
    Ok(finalize(cps, merged.len(), cfg))
}

/// Threshold baseline, no hypothesis test: a placement fires when its scan
/// window mean drops below the historical window mean minus one historical
/// standard deviation. Only the first placement of each firing run emits a
/// change point, stamped at the window end (the detection time).
pub fn baseline_zero(history: &[f64], predictions: &[f64], cfg: &MonitorConfig) -> Result<MonitorOutcome> {
    let merged = merge(history, predictions, cfg)?;
    let window = cfg.window_len();
    let mut cps = Vec::new();
    let mut firing = false;
    if merged.len() >= window {
        for (start, end) in placements(merged.len(), cfg) {
            let hist = &merged[start..start + cfg.hist_window];
            let scan = &merged[start + cfg.hist_window..end];
            let hist_mean = mean(hist);
            let hist_std = sample_std(hist);
            let scan_mean = mean(scan);
            let fired = scan_mean < hist_mean - hist_std;
            if fired && !firing {
                cps.push(ChangePoint {
                    index: end - 1,
                    pre_mean: hist_mean,
                    post_mean: scan_mean,
                    statistic: (hist_mean - hist_std) - scan_mean,
                    significant: true,
                    direction: Direction::Decrease,
                });
            }
            firing = fired;
        }
    }
    Ok(finalize(cps, merged.len(), cfg))
}
