//! Quality metrics of a counterfactual set.

use serde::{Deserialize, Serialize};

use crate::counterfactual::query::{distance, CfQuery, Counterfactual};
use crate::error::{Error, Result};
use crate::forecast::FittedModel;

/// The five set-level quality measures.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CfMetrics {
    /// Fraction of candidates whose (freshly recomputed) prediction falls in
    /// the desired range.
    pub validity: f64,
    /// Mean pairwise Jaccard similarity of changed-feature sets.
    pub redundancy: f64,
    /// Mean fraction of changed features.
    pub sparsity: f64,
    /// Mean distance to the original instance.
    pub proximity: f64,
    /// Mean pairwise distance among candidates.
    pub diversity: f64,
}

fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let sa: std::collections::HashSet<_> = a.iter().collect();
    let sb: std::collections::HashSet<_> = b.iter().collect();
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    inter / union
}

/// Score a counterfactual set against its query. Validity is recomputed from
/// the model, never read from cached predictions.
pub fn score_set(
    query: &CfQuery,
    cfs: &[Counterfactual],
    model: &FittedModel,
) -> Result<CfMetrics> {
    if cfs.is_empty() {
        return Err(Error::InvalidParam("score_set needs a nonempty counterfactual set".into()));
    }
    let ranges = query.space.ranges();
    let n = cfs.len();

    let validity = cfs
        .iter()
        .filter(|cf| query.accepts(model.predict_score(&cf.x_cf)))
        .count() as f64
        / n as f64;

    let proximity =
        cfs.iter().map(|cf| distance(&query.x, &cf.x_cf, &ranges)).sum::<f64>() / n as f64;

    let changed_sets: Vec<Vec<usize>> =
        cfs.iter().map(|cf| cf.changed_indices(&query.x, &query.space)).collect();
    let sparsity = changed_sets.iter().map(|s| s.len() as f64).sum::<f64>()
        / (n as f64 * query.space.len() as f64);

    let (mut diversity, mut redundancy) = (0.0, 0.0);
    if n >= 2 {
        let mut pairs = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diversity += distance(&cfs[i].x_cf, &cfs[j].x_cf, &ranges);
                redundancy += jaccard(&changed_sets[i], &changed_sets[j]);
                pairs += 1.0;
            }
        }
        diversity /= pairs;
        redundancy /= pairs;
    }

    Ok(CfMetrics { validity, redundancy, sparsity, proximity, diversity })
}
