//! Delay-tolerant detection scoring against ground-truth change points.

use serde::{Deserialize, Serialize};

/// Recall/precision/F1 of a detector under a bounded detection delay.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectionEval {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub matched: usize,
    pub n_truth: usize,
    pub n_predicted: usize,
    /// True when the truth set was empty and recall is reported by convention.
    pub degenerate_truth: bool,
}

/// Default matching tolerance: 2 points (about 5 days).
pub const DEFAULT_DELAY_TOLERANCE: usize = 2;

/// Greedy one-to-one matching: a prediction matches a truth point when
/// `truth <= prediction <= truth + delay_tolerance`; each prediction is used
/// at most once, truths are matched in order to the earliest usable prediction.
pub fn evaluate_detection(predicted: &[usize], truth: &[usize], delay_tolerance: usize) -> DetectionEval {
    let mut predicted = predicted.to_vec();
    predicted.sort_unstable();
    let mut truth_sorted = truth.to_vec();
    truth_sorted.sort_unstable();

    let mut used = vec![false; predicted.len()];
    let mut matched = 0usize;
    for &t in &truth_sorted {
        for (i, &p) in predicted.iter().enumerate() {
            if !used[i] && p >= t && p <= t + delay_tolerance {
                used[i] = true;
                matched += 1;
                break;
            }
        }
    }

    let degenerate_truth = truth_sorted.is_empty();
    let recall = if degenerate_truth { 1.0 } else { matched as f64 / truth_sorted.len() as f64 };
    let precision = if predicted.is_empty() { 1.0 } else { matched as f64 / predicted.len() as f64 };
    let precision = if degenerate_truth && !predicted.is_empty() { 0.0 } else { precision };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    DetectionEval {
        recall,
        precision,
        f1,
        matched,
        n_truth: truth_sorted.len(),
        n_predicted: predicted.len(),
        degenerate_truth,
    }
}

/// Micro-aggregate over per-block counts.
pub fn aggregate_detection(per_block: &[DetectionEval]) -> DetectionEval {
    let matched: usize = per_block.iter().map(|e| e.matched).sum();
    let n_truth: usize = per_block.iter().map(|e| e.n_truth).sum();
    let n_predicted: usize = per_block.iter().map(|e| e.n_predicted).sum();
    let recall = if n_truth == 0 { 1.0 } else { matched as f64 / n_truth as f64 };
    let precision = if n_predicted == 0 { 1.0 } else { matched as f64 / n_predicted as f64 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    DetectionEval {
        recall,
        precision,
        f1,
        matched,
        n_truth,
        n_predicted,
        degenerate_truth: n_truth == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_is_perfect() {
        let eval = evaluate_detection(&[5, 20], &[5, 20], 2);
        assert_eq!((eval.recall, eval.precision, eval.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn tolerance_allows_late_detection_only() {
        let eval = evaluate_detection(&[11], &[10], 2);
        assert_eq!(eval.recall, 1.0);
        let eval = evaluate_detection(&[9], &[10], 2);
        assert_eq!(eval.recall, 0.0, "early predictions must not match");
        let eval = evaluate_detection(&[13], &[10], 2);
        assert_eq!(eval.recall, 0.0, "too-late predictions must not match");
    }

    #[test]
    fn hand_matching_example() {
        let eval = evaluate_detection(&[12, 20, 41], &[10, 40], 2);
        assert_eq!(eval.recall, 1.0);
        assert!((eval.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((eval.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn one_to_one_matching_consumes_predictions() {
        // one prediction cannot match two truths
        let eval = evaluate_detection(&[10], &[10, 11], 2);
        assert_eq!(eval.matched, 1);
        assert_eq!(eval.recall, 0.5);
    }

    #[test]
    fn empty_truth_conventions() {
        let eval = evaluate_detection(&[], &[], 2);
        assert!(eval.degenerate_truth);
        assert_eq!((eval.recall, eval.precision), (1.0, 1.0));
        let eval = evaluate_detection(&[3, 4], &[], 2);
        assert!(eval.degenerate_truth);
        assert_eq!((eval.recall, eval.precision, eval.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn aggregate_pools_counts() {
        let a = evaluate_detection(&[10], &[10, 30], 2);
        let b = evaluate_detection(&[5, 6], &[5], 2);
        let total = aggregate_detection(&[a, b]);
        assert_eq!(total.matched, 2);
        assert_eq!(total.n_truth, 3);
        assert_eq!(total.n_predicted, 3);
        assert!((total.recall - 2.0 / 3.0).abs() < 1e-12);
    }
}
