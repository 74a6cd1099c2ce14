//! Model-based trend classifiers: the least-squares slope of the noisy line,
//! the continuous-likelihood drift/pull estimator of the OU-type diffusion
//! `dY = (mu - a Y) dt + dW`, and a Gaussian hidden Markov model on log-returns.
//! The first two become classifiers through a sliding window and a thresholded
//! sign.

mod hmm;
mod nle;
mod oue;
mod window;

use serde::{Deserialize, Serialize};

pub use hmm::{hmm_classify, hmm_fit, hmm_fit_returns, hmm_posteriors, HmmFit, HmmModel, HmmOptions};
pub use nle::nle_slope;
pub use oue::{oue_estimate, OuIntegrals};
pub use window::{
    mle_classify, mle_probabilities, sgn_eps, tune_sliding_window, EpsilonMode, Estimator, SlidingWindowConfig,
    WindowSearchResult,
};

/// Result of one window estimate. `a_hat` is absent for the noisy line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate<T> {
    pub mu_hat: T,
    pub a_hat: Option<T>,
    pub bias_mu: T,
    pub bias_a: T,
    pub var_mu: T,
}
