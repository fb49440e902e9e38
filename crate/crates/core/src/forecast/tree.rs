//! CART regression trees with variance-reduction splits.
//!
//! Split search is exhaustive over midpoints of sorted distinct feature
//! values; ties keep the first candidate (lowest feature index, lowest
//! threshold), which makes fitting deterministic.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_split: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_split: 2, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    root: Node,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    sse: f64,
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

/// Best (feature, threshold) by total child SSE; None when no split satisfies
/// the leaf-size constraint or every feature is constant on the node.
fn search_split(
    samples: &[&[f64]],
    y: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let d = samples[idx[0]].len();
    let mut best: Option<BestSplit> = None;

    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature in 0..d {
        order.clear();
        order.extend_from_slice(idx);
        order.sort_by(|&a, &b| {
            samples[a][feature]
                .partial_cmp(&samples[b][feature])
                .unwrap()
                .then(a.cmp(&b))
        });

        // prefix sums over the sorted order
        let mut sum_left = 0.0;
        let mut sq_left = 0.0;
        let total_sum: f64 = order.iter().map(|&i| y[i]).sum();
        let total_sq: f64 = order.iter().map(|&i| y[i] * y[i]).sum();

        for pos in 0..n - 1 {
            let i = order[pos];
            sum_left += y[i];
            sq_left += y[i] * y[i];
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let v = samples[i][feature];
            let v_next = samples[order[pos + 1]][feature];
            if v == v_next {
                continue; // can't separate equal values
            }
            let sum_right = total_sum - sum_left;
            let sq_right = total_sq - sq_left;
            let sse = (sq_left - sum_left * sum_left / n_left as f64)
                + (sq_right - sum_right * sum_right / n_right as f64);
            let better = match &best {
                None => true,
                Some(b) => sse < b.sse - 1e-12,
            };
            if better {
                best = Some(BestSplit { feature, threshold: 0.5 * (v + v_next), sse });
            }
        }
    }
    best
}

fn grow(
    samples: &[&[f64]],
    y: &[f64],
    idx: Vec<usize>,
    depth: usize,
    params: &TreeParams,
) -> Node {
    let node_mean = mean(y, &idx);
    let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
    let splittable = idx.len() >= params.min_split.max(2);
    if depth_reached || !splittable {
        return Node::Leaf { value: node_mean };
    }
    let constant_target = idx.iter().all(|&i| y[i] == y[idx[0]]);
    if constant_target {
        return Node::Leaf { value: node_mean };
    }
    match search_split(samples, y, &idx, params.min_leaf) {
        None => Node::Leaf { value: node_mean },
        Some(split) => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for i in idx {
                if samples[i][split.feature] <= split.threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(samples, y, left, depth + 1, params)),
                right: Box::new(grow(samples, y, right, depth + 1, params)),
            }
        }
    }
}

impl RegressionTree {
    /// Fit on the samples selected by `idx` (duplicates allowed, e.g. from a
    /// bootstrap resample).
    pub fn fit(samples: &[&[f64]], y: &[f64], idx: Vec<usize>, params: &TreeParams) -> Self {
        assert!(!idx.is_empty(), "cannot fit a tree on zero samples");
        Self { root: grow(samples, y, idx, 0, params) }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}
