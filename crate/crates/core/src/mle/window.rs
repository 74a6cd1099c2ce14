use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nle_slope, oue_estimate, MleEstimate};
use crate::error::{config_err, Error, Result};
use crate::evalkit::{quantile, series_loss};
use crate::label::{ProbTriple, TrendLabel};
use crate::scalar::Scalar;
use crate::simgen::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Noisy-line slope.
    Nle,
    /// OU drift at the window's last point.
    Oue,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Nle => "nle",
            Estimator::Oue => "oue",
        }
    }

    fn min_eta(self) -> usize {
        match self {
            Estimator::Nle => 3,
            Estimator::Oue => 10,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nle" => Ok(Estimator::Nle),
            "oue" => Ok(Estimator::Oue),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// How `epsilon` is read: as a raw threshold on the estimate, or as a multiple
/// of the estimate's plug-in standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    #[default]
    Absolute,
    StdErr,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlidingWindowConfig {
    pub eta: usize,
    pub epsilon: f64,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub epsilon_mode: EpsilonMode,
}

impl SlidingWindowConfig {
    pub fn new(eta: usize, epsilon: f64) -> Self {
        Self { eta, epsilon, stride: 1, epsilon_mode: EpsilonMode::Absolute }
    }

    pub fn validate(&self, estimator: Estimator) -> Result<()> {
        if self.eta < estimator.min_eta() {
            return config_err(format!("{estimator} window needs eta >= {}, got {}", estimator.min_eta(), self.eta));
        }
        if self.stride == 0 {
            return config_err("stride must be at least 1");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return config_err(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// `-1` if `x <= -eps`, `+1` if `x >= eps`, else `0`. With `eps = 0` an exact
/// zero counts as up.
pub fn sgn_eps<T: Scalar>(x: T, eps: T) -> TrendLabel {
    if x <= -eps && !(x >= eps) {
        TrendLabel::Down
    } else if x >= eps {
        TrendLabel::Up
    } else {
        TrendLabel::Flat
    }
}

/// Estimate on one window. For the OU estimator the window is re-centered at
/// its last value (so the fitted `mu` is the drift at that point, whose sign is
/// the direction of the pull) and divided by its realized volatility (the
/// estimator assumes unit diffusion).
fn window_estimate<T: Scalar>(estimator: Estimator, y: &[T], t: &[T]) -> Result<MleEstimate<T>> {
    match estimator {
        Estimator::Nle => nle_slope(y, t),
        Estimator::Oue => {
            let n = y.len();
            let dt = (t[n - 1] - t[0]) / T::of((n - 1) as f64);
            let qv: T = y.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
            let vol = (qv / (T::of((n - 1) as f64) * dt)).sqrt();
            if !(vol > T::zero()) {
                return Err(Error::DegenerateWindow("window has no variation".into()));
            }
            let last = y[n - 1];
            let z: Vec<T> = y.iter().map(|v| (*v - last) / vol).collect();
            let mut e = oue_estimate(&z, dt)?;
            e.mu_hat -= e.bias_mu;
            Ok(e)
        }
    }
}

/// Sliding-window classification. Step `k` (0-based) with `k >= eta - 1` gets
/// the thresholded sign of the estimate on points `k - eta + 1 ..= k`; earlier
/// steps are flat. With `stride > 1` the estimate is refreshed every `stride`
/// steps and held in between. A degenerate window yields a flat label.
pub fn mle_classify<T: Scalar>(y: &[T], t: &[T], estimator: Estimator, cfg: &SlidingWindowConfig) -> Result<Vec<TrendLabel>> {
    cfg.validate(estimator)?;
    if y.len() != t.len() {
        return Err(Error::LengthMismatch { expected: t.len(), got: y.len() });
    }
    if y.len() < cfg.eta {
        return Err(Error::Input(format!("series of length {} is shorter than the window ({})", y.len(), cfg.eta)));
    }
    let eps = T::of(cfg.epsilon);
    let mut labels = vec![TrendLabel::Flat; y.len()];
    let mut current = TrendLabel::Flat;
    let mut warned = false;
    for k in cfg.eta - 1..y.len() {
        if (k + 1 - cfg.eta).is_multiple_of(cfg.stride) {
            let lo = k + 1 - cfg.eta;
            current = match window_estimate(estimator, &y[lo..=k], &t[lo..=k]) {
                Ok(e) => {
                    let threshold = match cfg.epsilon_mode {
                        EpsilonMode::Absolute => eps,
                        EpsilonMode::StdErr => eps * e.var_mu.sqrt(),
                    };
                    sgn_eps(e.mu_hat, threshold)
                }
                Err(Error::DegenerateWindow(why)) => {
                    if !warned {
                        log::warn!("degenerate window ending at step {k} labelled flat: {why}");
                        warned = true;
                    }
                    TrendLabel::Flat
                }
                Err(e) => return Err(e),
            };
        }
        labels[k] = current;
    }
    Ok(labels)
}

/// One-hot probabilities: each label is predicted with probability one.
pub fn mle_probabilities<T: Scalar>(
    y: &[T],
    t: &[T],
    estimator: Estimator,
    cfg: &SlidingWindowConfig,
) -> Result<Vec<ProbTriple<T>>> {
    Ok(mle_classify(y, t, estimator, cfg)?.into_iter().map(ProbTriple::one_hot).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSearchResult {
    pub estimator: Estimator,
    pub best: SlidingWindowConfig,
    pub median_loss: f64,
    pub n_candidates: usize,
}

/// Grid search over `(eta, epsilon)` minimizing the median per-series loss on
/// `data`. Series shorter than a candidate window are scored as all-flat.
pub fn tune_sliding_window(
    data: &Dataset,
    estimator: Estimator,
    etas: &[usize],
    epsilons: &[f64],
    mode: EpsilonMode,
) -> Result<WindowSearchResult> {
    if data.is_empty() {
        return Err(Error::Empty("window search on an empty dataset".into()));
    }
    let cands: Vec<SlidingWindowConfig> = etas
        .iter()
        .flat_map(|&eta| epsilons.iter().map(move |&epsilon| SlidingWindowConfig { eta, epsilon, stride: 1, epsilon_mode: mode }))
        .filter(|c| c.validate(estimator).is_ok())
        .collect();
    if cands.is_empty() {
        return config_err("window search grid has no valid candidate");
    }
    let scores: Vec<f64> = cands
        .par_iter()
        .map(|c| {
            let mut losses = data
                .series
                .iter()
                .map(|s| {
                    let pred = if s.len() < c.eta {
                        vec![TrendLabel::Flat; s.len()]
                    } else {
                        mle_classify(&s.y, &s.t, estimator, c)?
                    };
                    series_loss(&pred, &s.labels)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(quantile(&mut losses, 0.5))
        })
        .collect::<Result<_>>()?;
    let (i, &median_loss) =
        scores.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0))).expect("non-empty");
    Ok(WindowSearchResult { estimator, best: cands[i], median_loss, n_candidates: cands.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgn_eps_examples() {
        assert_eq!(sgn_eps(0.05, 0.1), TrendLabel::Flat);
        assert_eq!(sgn_eps(-0.1, 0.1), TrendLabel::Down);
        assert_eq!(sgn_eps(0.1, 0.1), TrendLabel::Up);
        assert_eq!(sgn_eps(-3.0, 0.0), TrendLabel::Down);
    }

    #[test]
    fn noiseless_up_line() {
        let t: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| 0.5 * x).collect();
        for eta in [3, 7, 20] {
            let l = mle_classify(&y, &t, Estimator::Nle, &SlidingWindowConfig::new(eta, 0.1)).unwrap();
            assert!(l[..eta - 1].iter().all(|x| *x == TrendLabel::Flat));
            assert!(l[eta - 1..].iter().all(|x| *x == TrendLabel::Up));
        }
    }

    #[test]
    fn constant_series_is_flat_under_oue() {
        let t: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let l = mle_classify(&[3.0; 40], &t, Estimator::Oue, &SlidingWindowConfig::new(10, 0.0)).unwrap();
        assert!(l.iter().all(|x| *x == TrendLabel::Flat));
    }

    #[test]
    fn stride_holds_labels() {
        let t: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| if *x < 15.0 { *x } else { 30.0 - x }).collect();
        let cfg = SlidingWindowConfig { stride: 4, ..SlidingWindowConfig::new(3, 0.1) };
        let l = mle_classify(&y, &t, Estimator::Nle, &cfg).unwrap();
        for k in 2..30 {
            let anchor = 2 + ((k - 2) / 4) * 4;
            assert_eq!(l[k], l[anchor]);
        }
    }

    #[test]
    fn short_series_and_bad_config() {
        let t = [0.0, 1.0];
        assert!(mle_classify(&[0.0, 1.0], &t, Estimator::Nle, &SlidingWindowConfig::new(3, 0.1)).is_err());
        assert!(SlidingWindowConfig::new(5, 0.1).validate(Estimator::Oue).is_err());
    }
}
