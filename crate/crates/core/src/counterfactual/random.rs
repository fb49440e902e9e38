//! Rejection-sampling counterfactual generation.

use rand::Rng;

use crate::counterfactual::query::{distance, CfQuery, CfSet, Counterfactual};
use crate::counterfactual::FeatureKind;
use crate::error::{Error, Result};
use crate::forecast::FittedModel;
use crate::seeds;

pub const DEFAULT_BUDGET: usize = 10_000;

/// Sample uniformly inside the search box, keep the `k` valid candidates with
/// the smallest distance to `x`. Deterministic given the seed.
pub fn generate_random(
    query: &CfQuery,
    model: &FittedModel,
    seed: u64,
    budget: usize,
) -> Result<CfSet> {
    query.validate()?;
    if budget < query.k {
        return Err(Error::InvalidParam(format!(
            "budget {budget} smaller than k = {}",
            query.k
        )));
    }
    let mut rng = seeds::rng(seed, 0xCF_00);
    let ranges = query.space.ranges();

    let mut valid: Vec<(f64, usize, Vec<f64>, f64)> = Vec::new();
    for draw in 0..budget {
        let candidate: Vec<f64> = query
            .space
            .features
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Integer { lo, hi } => rng.gen_range(lo..=hi) as f64,
                FeatureKind::Continuous { lo, hi } => {
                    if hi > lo {
                        rng.gen_range(lo..=hi)
                    } else {
                        lo
                    }
                }
            })
            .collect();
        let predicted = model.predict_score(&candidate);
        if query.accepts(predicted) {
            let d = distance(&query.x, &candidate, &ranges);
            valid.push((d, draw, candidate, predicted));
        }
    }
    valid.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    valid.truncate(query.k);

    let shortfall = valid.len() < query.k;
    let counterfactuals = valid
        .into_iter()
        .map(|(_, _, x_cf, predicted)| {
            Counterfactual::from_vector(&query.x, x_cf, predicted, &query.space)
        })
        .collect();
    Ok(CfSet { counterfactuals, shortfall })
}
