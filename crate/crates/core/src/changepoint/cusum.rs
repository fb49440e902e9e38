//! Iterative CUSUM change-point location and the Gaussian log-likelihood
//! ratio test.
//!
//! The locator maximizes the norm of the cumulative sum of deviations from a
//! reference mean. The reference starts as the midpoint of the two half-means
//! around the segment middle and is re-estimated around the current candidate
//! until the candidate index is stable or the iteration budget runs out.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Minimum points on each side of a split.
pub const MIN_HALF: usize = 2;
const VAR_EPS: f64 = 1e-12;

/// A window of a series under study, with its absolute start index.
#[derive(Debug, Clone)]
pub struct Segment<'a> {
    values: &'a [f64],
    start: usize,
}

/// Means of the two halves around a reference split and their midpoint.
#[derive(Debug, Clone, Copy)]
pub struct SplitMeans {
    pub mu_a: f64,
    pub mu_b: f64,
    pub reference: f64,
}

impl<'a> Segment<'a> {
    /// Requires at least 5 points so each half of any split keeps >= 2.
    pub fn new(values: &'a [f64], start: usize) -> Result<Self> {
        if values.len() < 2 * MIN_HALF + 1 {
            return Err(Error::InsufficientData(format!(
                "segment needs at least {} points, got {}",
                2 * MIN_HALF + 1,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("segment values".into()));
        }
        Ok(Self { values, start })
    }

    pub fn values(&self) -> &[f64] {
        self.values
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Absolute index of the last point.
    pub fn end(&self) -> usize {
        self.start + self.values.len() - 1
    }

    /// Half-means around a local split: `[0, split)` vs `[split, len)`.
    pub fn split_means(&self, split: usize) -> SplitMeans {
        let mu_a = mean(&self.values[..split]);
        let mu_b = mean(&self.values[split..]);
        SplitMeans { mu_a, mu_b, reference: 0.5 * (mu_a + mu_b) }
    }

    /// The default reference split: the segment middle.
    pub fn middle_split(&self) -> SplitMeans {
        self.split_means(self.values.len() / 2)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Local argmax (1..len-1) of the absolute cumulative sum of deviations from
/// `reference`, ties broken by the earliest index.
pub(crate) fn locate_local(values: &[f64], reference: f64) -> usize {
    let mut cumulative = 0.0;
    let mut best_stat = f64::NEG_INFINITY;
    let mut best_n = 1;
    for (n, &v) in values.iter().enumerate().skip(1) {
        cumulative += v - reference;
        let stat = cumulative.abs();
        if stat > best_stat {
            best_stat = stat;
            best_n = n;
        }
    }
    best_n
}

/// Candidate change index for a segment: the cumulative-sum argmax under the
/// segment's middle reference split. Returns an absolute index in
/// `(segment.start, segment.end]`.
pub fn cusum_locate(segment: &Segment<'_>) -> usize {
    let reference = segment.middle_split().reference;
    segment.start + locate_local(segment.values(), reference)
}

/// Direction of a detected shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Decrease,
    Increase,
}

/// A located shift: `index` is the first point of the new regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChangePoint {
    pub index: usize,
    pub pre_mean: f64,
    pub post_mean: f64,
    pub statistic: f64,
    pub significant: bool,
    pub direction: Direction,
}

/// Chi-square(1) critical value at significance level `alpha`.
pub fn llr_threshold(alpha: f64) -> f64 {
    ChiSquared::new(1.0).expect("valid dof").inverse_cdf(1.0 - alpha)
}

/// Gaussian log-likelihood ratio test for a single mean change at split `k`
/// (first index of the second half). The variance is re-estimated under each
/// hypothesis; the statistic is `n * ln(var0 / var1) >= 0`.
pub fn llr_gaussian_test(values: &[f64], k: usize, alpha: f64) -> Result<(f64, bool)> {
    let n = values.len();
    if k < MIN_HALF || n.saturating_sub(k) < MIN_HALF {
        return Err(Error::InvalidParam(format!(
            "split {k} leaves a half shorter than {MIN_HALF} (n = {n})"
        )));
    }
    let grand = mean(values);
    let var0 = values.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / n as f64;
    let mu_a = mean(&values[..k]);
    let mu_b = mean(&values[k..]);
    let ss1 = values[..k].iter().map(|v| (v - mu_a).powi(2)).sum::<f64>()
        + values[k..].iter().map(|v| (v - mu_b).powi(2)).sum::<f64>();
    let var1 = ss1 / n as f64;

    let statistic = if var1 < VAR_EPS {
        if (mu_a - mu_b).abs() > 1e-9 {
            f64::INFINITY
        } else {
            0.0
        }
    } else if var0 < VAR_EPS {
        0.0
    } else {
        (n as f64 * (var0 / var1).ln()).max(0.0)
    };
    Ok((statistic, statistic > llr_threshold(alpha)))
}

/// Iteratively re-estimate the split means around the current candidate and
/// re-run the locator until the candidate repeats or `max_iterations` is hit,
/// then test the final split.
pub fn cusum_iterate(segment: &Segment<'_>, max_iterations: usize, alpha: f64) -> Result<ChangePoint> {
    let len = segment.len();
    let clamp_split = |candidate: usize| (candidate + 1).clamp(MIN_HALF, len - MIN_HALF);

    let mut candidate = locate_local(segment.values(), segment.middle_split().reference);
    for _ in 0..max_iterations {
        let split = clamp_split(candidate);
        let reference = segment.split_means(split).reference;
        let next = locate_local(segment.values(), reference);
        if next == candidate {
            break;
        }
        candidate = next;
    }

    let split = clamp_split(candidate);
    let means = segment.split_means(split);
    let (statistic, significant) = llr_gaussian_test(segment.values(), split, alpha)?;
    let direction = if means.mu_a > means.mu_b { Direction::Decrease } else { Direction::Increase };
    Ok(ChangePoint {
        index: segment.start + split,
        pre_mean: means.mu_a,
        post_mean: means.mu_b,
        statistic,
        significant,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct re-computation of the statistic for every admissible N.
    pub(crate) fn brute_force_locate(values: &[f64], reference: f64) -> usize {
        let mut best = (f64::NEG_INFINITY, 1usize);
        for n in 1..values.len() {
            let c: f64 = values[1..=n].iter().map(|v| v - reference).sum();
            if c.abs() > best.0 {
                best = (c.abs(), n);
            }
        }
        best.1
    }

    #[test]
    fn step_series_peaks_at_the_boundary() {
        let values = [5.0, 5.0, 5.0, 5.0, 1.0, 1.0, 1.0, 1.0];
        let seg = Segment::new(&values, 0).unwrap();
        let located = cusum_locate(&seg);
        assert_eq!(located, brute_force_locate(&values, seg.middle_split().reference));
        assert_eq!(located, 3); // last point before the drop
    }

    #[test]
    fn constant_series_ties_resolve_to_earliest() {
        let values = [4.0; 8];
        let seg = Segment::new(&values, 0).unwrap();
        // reference equals the constant, every cumulative sum is 0: earliest wins
        assert_eq!(cusum_locate(&seg), 1);
    }

    #[test]
    fn located_index_is_inside_the_segment() {
        let values = [1.0, 9.0, 2.0, 8.0, 3.0, 7.0, 4.0];
        let seg = Segment::new(&values, 10).unwrap();
        let k = cusum_locate(&seg);
        assert!(k > 10 && k <= seg.end());
    }

    #[test]
    fn locate_matches_brute_force_on_random_segments() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(7, 0);
        for _ in 0..300 {
            let len = rng.gen_range(5..=30);
            let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let seg = Segment::new(&values, 0).unwrap();
            let reference = seg.middle_split().reference;
            assert_eq!(locate_local(&values, reference), brute_force_locate(&values, reference));
        }
    }

    #[test]
    fn iterate_converges_on_clean_step() {
        let mut values = vec![10.0; 9];
        values.extend(vec![4.0; 9]);
        let seg = Segment::new(&values, 0).unwrap();
        let cp = cusum_iterate(&seg, 10, 0.05).unwrap();
        assert_eq!(cp.index, 9); // first point of the new regime
        assert_eq!(cp.direction, Direction::Decrease);
        assert!(cp.significant);
        assert_eq!(cp.pre_mean, 10.0);
        assert_eq!(cp.post_mean, 4.0);
    }

    #[test]
    fn constant_series_is_not_significant() {
        let values = [3.0; 12];
        let seg = Segment::new(&values, 0).unwrap();
        let cp = cusum_iterate(&seg, 10, 0.05).unwrap();
        assert!(!cp.significant);
        assert_eq!(cp.statistic, 0.0);
    }

    #[test]
    fn llr_identical_halves_is_zero() {
        let values = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let (stat, sig) = llr_gaussian_test(&values, 3, 0.05).unwrap();
        assert!(stat.abs() < 1e-9);
        assert!(!sig);
    }

    #[test]
    fn llr_separated_gaussians_significant() {
        use rand_distr::{Distribution, Normal};
        let mut rng = crate::seeds::rng(3, 1);
        let n0 = Normal::new(0.0, 1.0).unwrap();
        let n5 = Normal::new(5.0, 1.0).unwrap();
        let mut values: Vec<f64> = (0..10).map(|_| n0.sample(&mut rng)).collect();
        values.extend((0..10).map(|_| n5.sample(&mut rng)));
        let (stat, sig) = llr_gaussian_test(&values, 10, 0.05).unwrap();
        assert!(sig, "statistic {stat} should clear the threshold");
    }

    #[test]
    fn llr_statistic_is_non_negative_and_affine_invariant() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(5, 2);
        for _ in 0..50 {
            let n = rng.gen_range(6..40);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let k = rng.gen_range(2..=n - 2);
            let (stat, sig) = llr_gaussian_test(&values, k, 0.05).unwrap();
            assert!(stat >= 0.0);
            let a: f64 = if rng.gen_bool(0.5) { 2.5 } else { -0.7 };
            let b: f64 = rng.gen_range(-10.0..10.0);
            let transformed: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            let (stat2, sig2) = llr_gaussian_test(&transformed, k, 0.05).unwrap();
            assert_eq!(sig, sig2);
            if stat.is_finite() {
                assert!((stat - stat2).abs() < 1e-6 * (1.0 + stat.abs()));
            }
        }
    }

    #[test]
    fn llr_two_constant_halves_is_infinite() {
        let values = [2.0, 2.0, 2.0, 7.0, 7.0, 7.0];
        let (stat, sig) = llr_gaussian_test(&values, 3, 0.05).unwrap();
        assert!(stat.is_infinite());
        assert!(sig);
    }

    #[test]
    fn llr_rejects_degenerate_split() {
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(llr_gaussian_test(&values, 1, 0.05).is_err());
        assert!(llr_gaussian_test(&values, 4, 0.05).is_err());
    }

    #[test]
    fn iteration_count_is_bounded() {
        use rand::Rng;
        let mut rng = crate::seeds::rng(11, 3);
        for _ in 0..50 {
            let values: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..30.0)).collect();
            let seg = Segment::new(&values, 0).unwrap();
            // max_iterations = 0 still terminates with the initial candidate
            let cp = cusum_iterate(&seg, 0, 0.05).unwrap();
            assert!(cp.index > 0 && cp.index < 20);
        }
    }
}
