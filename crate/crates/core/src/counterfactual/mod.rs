//! Counterfactual explanations for alerted weekly predictions.

pub mod explain;
pub mod genetic;
pub mod kdtree;
pub mod metrics;
pub mod query;
pub mod random;

pub use explain::{explain_alert, CfConfig, CfMethod, ExplanationReport};
pub use genetic::{generate_genetic, GeneticParams};
pub use kdtree::{generate_kdtree, linear_scan_neighbors};
pub use metrics::{score_set, CfMetrics};
pub use query::{
    distance, CfQuery, CfSet, Counterfactual, FeatureDelta, FeatureKind, FeatureSpace, FeatureSpec,
};
pub use random::{generate_random, DEFAULT_BUDGET};
