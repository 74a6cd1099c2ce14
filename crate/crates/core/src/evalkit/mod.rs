//! Scoring and comparison: per-series mismatch loss, quantile summaries,
//! percentile bootstrap of median differences, OLS with one-hot categorical
//! features, probability pooling and Wasserstein-1 calibration of simulators.

mod bootstrap;
mod calibrate;
mod loss;
mod ols;
mod pool;
mod wasserstein;

pub use bootstrap::{bootstrap_median_diff, bootstrap_median_diff_stratified, BootstrapResult, DEFAULT_RESAMPLES};
pub use calibrate::{calibrate, calibration_returns, distance_to_target, CalibrationResult, CalibrationSearch};
pub use loss::{quantile, series_loss, summarize, EvalReport, GroupSummary, LossRow};
pub use ols::{ols_fit, CategoricalRow, DesignMatrix, OlsFit};
pub use pool::pool_probabilities;
pub use wasserstein::wasserstein_1d;
