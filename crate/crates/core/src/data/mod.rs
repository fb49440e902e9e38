//! Domain data model: records, scoring, blocks, and lag features.

pub mod block;
pub mod csv_io;
pub mod features;
pub mod records;

pub use block::{
    attach_sensors, segment_blocks, segment_cohort, split_block, variance_filter, Block,
    BlockPoint, SegmentParams, ALIGNED_SENSOR_DIM, MIN_BLOCK_LEN,
};
pub use features::{build_lag_features, build_lag_features_filled, FeatureMatrix, FeatureSet};
pub use records::{
    sum_score, EmaRecord, Epoch, SensorEpochRecord, SumScore, EMA_ITEMS, EMA_ITEM_NAMES,
    MAX_SCORE, SENSOR_FEATURE_NAMES,
};
