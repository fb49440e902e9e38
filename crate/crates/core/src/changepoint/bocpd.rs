//! Bayesian online change-point detection with a constant hazard and a
//! Normal-Inverse-Gamma observation model.
//!
//! The run-length posterior is propagated in log space and normalized at
//! every step; a change point is emitted when the MAP run length collapses
//! by more than half after an established run.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::changepoint::cusum::{mean, ChangePoint, Direction};
use crate::error::{Error, Result};

/// Normal-Inverse-Gamma prior over (mean, variance).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NigPrior {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl NigPrior {
    /// Empirical prior from the first `window` points: mean there, variance
    /// there (floored), kappa0 = alpha0 = 1.
    pub fn from_series_head(series: &[f64], window: usize) -> Self {
        let head = &series[..window.min(series.len())];
        let mu0 = mean(head);
        let var = head.iter().map(|v| (v - mu0).powi(2)).sum::<f64>() / head.len() as f64;
        Self { mu0, kappa0: 1.0, alpha0: 1.0, beta0: var.max(1e-4) }
    }
}

/// Welford-style sufficient statistics of one run-length hypothesis.
#[derive(Debug, Clone, Copy)]
struct RunStats {
    n: f64,
    mean: f64,
    sum_sq: f64,
}

impl RunStats {
    fn empty() -> Self {
        Self { n: 0.0, mean: 0.0, sum_sq: 0.0 }
    }

    fn push(self, x: f64) -> Self {
        let n = self.n + 1.0;
        let delta = x - self.mean;
        let mean = self.mean + delta / n;
        Self { n, mean, sum_sq: self.sum_sq + delta * (x - mean) }
    }

    /// Posterior-predictive log density: Student-t with 2*alpha_n dof.
    fn log_predictive(&self, x: f64, prior: &NigPrior) -> f64 {
        let kappa_n = prior.kappa0 + self.n;
        let mu_n = (prior.kappa0 * prior.mu0 + self.n * self.mean) / kappa_n;
        let alpha_n = prior.alpha0 + self.n / 2.0;
        let beta_n = prior.beta0
            + 0.5 * self.sum_sq
            + prior.kappa0 * self.n * (self.mean - prior.mu0).powi(2) / (2.0 * kappa_n);
        let df = 2.0 * alpha_n;
        let scale_sq = beta_n * (kappa_n + 1.0) / (alpha_n * kappa_n);
        student_t_log_pdf(x, mu_n, scale_sq, df)
    }
}

fn student_t_log_pdf(x: f64, loc: f64, scale_sq: f64, df: f64) -> f64 {
    let z_sq = (x - loc).powi(2) / (df * scale_sq);
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI * scale_sq).ln()
        - 0.5 * (df + 1.0) * z_sq.ln_1p()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Full BOCPD pass over a series.
#[derive(Debug, Clone)]
pub struct BocpdResult {
    /// Run-length posterior after each step; row `t` has `t + 2` entries.
    pub run_length_posterior: Vec<Vec<f64>>,
    /// MAP run length after each step.
    pub map_run_lengths: Vec<usize>,
    pub change_points: Vec<ChangePoint>,
}

/// A run must have reached this length before a collapse counts as a change.
const MIN_ESTABLISHED_RUN: usize = 4;
/// Window used to estimate pre/post means around an emitted change point.
const MEAN_WINDOW: usize = 12;

/// Run BOCPD with constant hazard `1 / hazard_lambda`.
pub fn bocpd(series: &[f64], hazard_lambda: f64, prior: Option<NigPrior>) -> Result<BocpdResult> {
    if series.len() < 2 {
        return Err(Error::InsufficientData("bocpd needs at least 2 points".into()));
    }
    if hazard_lambda <= 1.0 {
        return Err(Error::InvalidParam(format!(
            "hazard_lambda must exceed 1, got {hazard_lambda}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bocpd input series".into()));
    }
    let prior = prior.unwrap_or_else(|| NigPrior::from_series_head(series, MEAN_WINDOW));
    let hazard = 1.0 / hazard_lambda;
    let log_h = hazard.ln();
    let log_1mh = (1.0 - hazard).ln();

    // log posterior over run lengths; starts as P(r = 0) = 1
    let mut log_p = vec![0.0f64];
    let mut stats = vec![RunStats::empty()];

    let mut posterior_rows = Vec::with_capacity(series.len());
    let mut map_runs = Vec::with_capacity(series.len());
    let mut change_points = Vec::new();
    let mut prev_map = 0usize;

    for (t, &x) in series.iter().enumerate() {
        let log_pred: Vec<f64> = stats.iter().map(|s| s.log_predictive(x, &prior)).collect();

        let mut next_log_p = vec![f64::NEG_INFINITY; log_p.len() + 1];
        let cp_terms: Vec<f64> =
            log_p.iter().zip(&log_pred).map(|(lp, lpr)| lp + lpr + log_h).collect();
        next_log_p[0] = log_sum_exp(&cp_terms);
        for r in 0..log_p.len() {
            next_log_p[r + 1] = log_p[r] + log_pred[r] + log_1mh;
        }
        let norm = log_sum_exp(&next_log_p);
        for lp in next_log_p.iter_mut() {
            *lp -= norm;
        }

        let mut next_stats = Vec::with_capacity(stats.len() + 1);
        next_stats.push(RunStats::empty());
        next_stats.extend(stats.iter().map(|s| s.push(x)));

        log_p = next_log_p;
        stats = next_stats;

        let posterior: Vec<f64> = log_p.iter().map(|lp| lp.exp()).collect();
        let map_run = posterior
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(r, _)| r)
            .unwrap_or(0);

        if prev_map >= MIN_ESTABLISHED_RUN && (map_run as f64) < prev_map as f64 / 2.0 {
            // hypothesis r covers the last r observations: the new regime
            // starts at t - r + 1
            let start = (t + 1).saturating_sub(map_run.max(1));
            let pre = &series[start.saturating_sub(MEAN_WINDOW)..start];
            let post = &series[start..(start + MEAN_WINDOW).min(series.len())];
            if pre.len() >= 2 && !post.is_empty() {
                let pre_mean = mean(pre);
                let post_mean = mean(post);
                change_points.push(ChangePoint {
                    index: start,
                    pre_mean,
                    post_mean,
                    statistic: prev_map as f64 / map_run.max(1) as f64,
                    significant: true,
                    direction: if pre_mean > post_mean {
                        Direction::Decrease
                    } else {
                        Direction::Increase
                    },
                });
            }
        }
        prev_map = map_run;
        posterior_rows.push(posterior);
        map_runs.push(map_run);
    }

    Ok(BocpdResult { run_length_posterior: posterior_rows, map_run_lengths: map_runs, change_points })
}
