//! Trend-detection laboratory: simulated labeled time series, from-scratch
//! recurrent classifiers, moving-average, maximum-likelihood and HMM baselines,
//! and the statistics used to compare them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the scalar to `f64`, which is what the data files and
//! the command-line tool use.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod label;
pub mod rng;
pub mod scalar;
pub mod simgen;
pub mod tensornet;
pub mod classical;
pub mod evalkit;
pub mod mle;
pub mod model_file;

pub use error::{Error, Result};
pub use label::{argmax_label, ProbTriple, TrendLabel};
pub use scalar::Scalar;
pub use simgen::{Dataset, Dynamic, Series};
pub use model_file::{load_model, save_model, ModelFile, StoredModel, MODEL_FORMAT_VERSION};

pub type Rnn = tensornet::RnnModel<f64>;
pub type RnnWeights = tensornet::RnnParams<f64>;
pub type ConvexNet = classical::ConvexNetParams<f64>;
pub type Probs = ProbTriple<f64>;
pub type Estimate = mle::MleEstimate<f64>;
pub type Optimizer = tensornet::OptimState<f64>;
