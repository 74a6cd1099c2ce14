use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::evalkit::series_loss;
use crate::label::{ProbTriple, TrendLabel};
use crate::scalar::Scalar;
use crate::simgen::Dataset;

/// Two exponential moving averages and a no-trend band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaConfig {
    pub mu_slow: f64,
    pub mu_fast: f64,
    pub epsilon: f64,
}

impl Default for MaConfig {
    /// The tuned values of the reference moving-average baseline.
    fn default() -> Self {
        Self { mu_slow: 0.95, mu_fast: 0.48, epsilon: 0.1 }
    }
}

impl MaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.mu_fast && self.mu_fast < self.mu_slow && self.mu_slow < 1.0;
        if !ok {
            return config_err(format!(
                "need 0 < mu_fast < mu_slow < 1, got mu_fast={} mu_slow={}",
                self.mu_fast, self.mu_slow
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return config_err(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// `ma <- mu ma + (1 - mu) x` for both speeds, started at `x[0]`; up when
/// `fast - slow > eps`, down when `< -eps`.
pub fn ma_classify<T: Scalar>(cfg: &MaConfig, x: &[T]) -> Result<Vec<TrendLabel>> {
    cfg.validate()?;
    let Some(&x0) = x.first() else {
        return Err(Error::Empty("moving average on an empty series".into()));
    };
    let (ms, mf, eps) = (T::of(cfg.mu_slow), T::of(cfg.mu_fast), T::of(cfg.epsilon));
    let one = T::one();
    let mut slow = x0;
    let mut fast = x0;
    let mut out = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        if i > 0 {
            slow = ms * slow + (one - ms) * xi;
            fast = mf * fast + (one - mf) * xi;
        }
        let d = fast - slow;
        out.push(if d > eps {
            TrendLabel::Up
        } else if d < -eps {
            TrendLabel::Down
        } else {
            TrendLabel::Flat
        });
    }
    Ok(out)
}

/// One-hot probabilities, for pooling with probabilistic estimators.
pub fn ma_probabilities<T: Scalar>(cfg: &MaConfig, x: &[T]) -> Result<Vec<ProbTriple<T>>> {
    Ok(ma_classify(cfg, x)?.into_iter().map(ProbTriple::one_hot).collect())
}

/// Axis values of a grid search; invalid `(mu_slow, mu_fast)` pairs are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaGrid {
    pub mu_slow: Vec<f64>,
    pub mu_fast: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for MaGrid {
    fn default() -> Self {
        let decays: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        let eps = (0..=10).map(|i| i as f64 * 0.05).collect();
        Self { mu_slow: decays.clone(), mu_fast: decays, epsilon: eps }
    }
}

impl MaGrid {
    pub fn candidates(&self) -> Vec<MaConfig> {
        let mut out = Vec::new();
        for &mu_slow in &self.mu_slow {
            for &mu_fast in &self.mu_fast {
                for &epsilon in &self.epsilon {
                    let c = MaConfig { mu_slow, mu_fast, epsilon };
                    if c.validate().is_ok() {
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaSearchResult {
    pub best: MaConfig,
    /// Median per-series loss of `best` on the search set.
    pub median_loss: f64,
    pub n_candidates: usize,
}

/// Exhaustive search minimizing the median per-series loss. Ties keep the
/// first candidate in grid order.
pub fn ma_grid_search(data: &Dataset, grid: &MaGrid) -> Result<MaSearchResult> {
    if data.is_empty() {
        return Err(Error::Empty("grid search on an empty dataset".into()));
    }
    let cands = grid.candidates();
    if cands.is_empty() {
        return config_err("moving-average grid has no valid candidate");
    }
    let scores: Vec<f64> = cands
        .par_iter()
        .map(|c| {
            let mut losses: Vec<f64> = data
                .series
                .iter()
                .map(|s| series_loss(&ma_classify(c, &s.y)?, &s.labels))
                .collect::<Result<_>>()?;
            Ok(crate::evalkit::quantile(&mut losses, 0.5))
        })
        .collect::<Result<_>>()?;
    let (i, &median_loss) = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty");
    Ok(MaSearchResult { best: cands[i], median_loss, n_candidates: cands.len() })
}
