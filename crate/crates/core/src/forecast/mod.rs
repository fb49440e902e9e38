//! Forecasting: model families, fitting, tuning, and multi-step prediction.

pub mod forest;
pub mod gbrt;
pub mod linear;
pub mod model;
pub mod tree;
pub mod tuning;

pub use forest::{ForestParams, RandomForest};
pub use gbrt::{huber_gradient, huber_loss, Gbrt, GbrtParams, Loss};
pub use linear::{coordinate_descent, CdFit, LinearModel};
pub use model::{
    fit_model, fit_on_block, forecast, latest_feature_vector, FittedModel, ForecastRequest,
    HyperParams, ModelArtifact, ModelFamily, DEFAULT_HORIZON, DEFAULT_LAGS,
};
pub use tuning::{
    bootstrap_ci, grid_search, mae, rolling_origin_evaluate, CvRow, CvTable, EvalResult, FoldMeta,
    HyperGrid, DEFAULT_MIN_TRAIN,
};
