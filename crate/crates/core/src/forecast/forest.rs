//! Random forest regression: averaged CART trees over bootstrap resamples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forecast::tree::{RegressionTree, TreeParams};
use crate::seeds;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_split: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn fit(samples: &[&[f64]], y: &[f64], params: &ForestParams) -> Self {
        let n = samples.len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_split: params.min_split,
            min_leaf: params.min_leaf,
        };
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let idx: Vec<usize> = if params.bootstrap {
                    let mut rng = seeds::rng(params.seed, t as u64);
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(samples, y, idx, &tree_params)
            })
            .collect();
        Self { trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
