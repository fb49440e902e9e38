//! Exact k-nearest-neighbor counterfactuals from historical instances.
//!
//! Candidates are the reference columns whose model prediction already falls
//! in the desired range; the k nearest under the range-normalized L1 metric
//! are returned. A kd-tree over range-normalized coordinates provides the
//! search; a linear scan with identical tie-breaking is kept as the oracle.

use crate::counterfactual::query::{distance, CfQuery, CfSet, Counterfactual};
use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::forecast::FittedModel;

/// Candidate with its tie-breaking identity: (distance, reference index).
type Scored = (f64, usize);

struct KdNode {
    point: usize,
    axis: usize,
    left: Option<Box<KdNode>>,
    right: Option<Box<KdNode>>,
}

/// kd-tree over range-normalized coordinates with L1 pruning.
struct KdTree<'a> {
    normalized: Vec<Vec<f64>>,
    /// Original reference indices, parallel to `normalized`.
    ids: &'a [usize],
    root: Option<Box<KdNode>>,
    dims: usize,
}

impl<'a> KdTree<'a> {
    fn build(normalized: Vec<Vec<f64>>, ids: &'a [usize]) -> Self {
        let dims = normalized.first().map_or(0, |p| p.len());
        let mut order: Vec<usize> = (0..normalized.len()).collect();
        let root = Self::build_node(&normalized, &mut order, 0, dims);
        Self { normalized, ids, root, dims }
    }

    fn build_node(
        points: &[Vec<f64>],
        order: &mut [usize],
        depth: usize,
        dims: usize,
    ) -> Option<Box<KdNode>> {
        if order.is_empty() {
            return None;
        }
        let axis = if dims == 0 { 0 } else { depth % dims };
        order.sort_by(|&a, &b| {
            points[a][axis].partial_cmp(&points[b][axis]).unwrap().then(a.cmp(&b))
        });
        let mid = order.len() / 2;
        let point = order[mid];
        let (left_slice, rest) = order.split_at_mut(mid);
        let right_slice = &mut rest[1..];
        Some(Box::new(KdNode {
            point,
            axis,
            left: Self::build_node(points, left_slice, depth + 1, dims),
            right: Self::build_node(points, right_slice, depth + 1, dims),
        }))
    }

    /// Exact k nearest by (L1 distance, reference index).
    fn knn(&self, target: &[f64], k: usize) -> Vec<Scored> {
        let mut best: Vec<Scored> = Vec::with_capacity(k + 1);
        if let Some(root) = &self.root {
            self.search(root, target, k, &mut best);
        }
        best
    }

    fn search(&self, node: &KdNode, target: &[f64], k: usize, best: &mut Vec<Scored>) {
        let p = &self.normalized[node.point];
        let d: f64 = p.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
        let entry = (d, self.ids[node.point]);
        let pos = best.partition_point(|e| (e.0, e.1) <= (entry.0, entry.1));
        best.insert(pos, entry);
        if best.len() > k {
            best.pop();
        }

        if self.dims == 0 {
            return;
        }
        let diff = target[node.axis] - p[node.axis];
        let (near, far) = if diff <= 0.0 { (&node.left, &node.right) } else { (&node.right, &node.left) };
        if let Some(n) = near {
            self.search(n, target, k, best);
        }
        // the axis gap lower-bounds the L1 distance of anything on the far side
        let bound_ok = best.len() < k || diff.abs() <= best.last().unwrap().0;
        if bound_ok {
            if let Some(f) = far {
                self.search(f, target, k, best);
            }
        }
    }
}

fn normalize(point: &[f64], ranges: &[f64]) -> Vec<f64> {
    point
        .iter()
        .zip(ranges)
        .map(|(&v, &r)| if r > 0.0 { v / r } else { 0.0 })
        .collect()
}

fn valid_reference_indices(
    query: &CfQuery,
    model: &FittedModel,
    reference: &FeatureMatrix,
) -> Vec<(usize, f64)> {
    (0..reference.n_samples)
        .filter_map(|i| {
            let predicted = model.predict_score(reference.col(i));
            query.accepts(predicted).then_some((i, predicted))
        })
        .collect()
}

/// Linear-scan oracle: same metric, same (distance, index) tie-breaking.
pub fn linear_scan_neighbors(
    query: &CfQuery,
    model: &FittedModel,
    reference: &FeatureMatrix,
) -> Vec<usize> {
    let ranges = query.space.ranges();
    let mut scored: Vec<Scored> = valid_reference_indices(query, model, reference)
        .into_iter()
        .map(|(i, _)| (distance(&query.x, reference.col(i), &ranges), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    scored.truncate(query.k);
    scored.into_iter().map(|(_, i)| i).collect()
}

/// Exact nearest-neighbor counterfactuals from the block's history. The
/// `_seed` parameter is accepted for method-dispatch symmetry; the search is
/// deterministic.
pub fn generate_kdtree(
    query: &CfQuery,
    model: &FittedModel,
    reference: &FeatureMatrix,
    _seed: u64,
) -> Result<CfSet> {
    query.validate()?;
    if reference.n_samples == 0 {
        return Err(Error::InsufficientData("empty reference matrix".into()));
    }
    if reference.n_features != query.space.len() {
        return Err(Error::FeatureMismatch {
            expected: format!("{} features", query.space.len()),
            got: format!("{}", reference.n_features),
        });
    }
    let ranges = query.space.ranges();
    let valid = valid_reference_indices(query, model, reference);
    let ids: Vec<usize> = valid.iter().map(|&(i, _)| i).collect();
    let predictions: std::collections::HashMap<usize, f64> = valid.into_iter().collect();

    let normalized: Vec<Vec<f64>> =
        ids.iter().map(|&i| normalize(reference.col(i), &ranges)).collect();
    let tree = KdTree::build(normalized, &ids);
    let target = normalize(&query.x, &ranges);

    // normalized L1 sum orders candidates identically to the mean-aggregated
    // distance (a constant 1/d factor), so the tree metric is exact
    let neighbors = tree.knn(&target, query.k);
    let shortfall = neighbors.len() < query.k;
    let counterfactuals = neighbors
        .into_iter()
        .map(|(_, i)| {
            Counterfactual::from_vector(
                &query.x,
                reference.col(i).to_vec(),
                predictions[&i],
                &query.space,
            )
        })
        .collect();
    Ok(CfSet { counterfactuals, shortfall })
}
