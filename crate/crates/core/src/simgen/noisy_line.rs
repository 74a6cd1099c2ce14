use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_range_u, uniform_u, Dynamic, GenParams, Series};
use crate::error::{config_err, Result};
use crate::label::TrendLabel;
use crate::rng::{rng_from_seed, standard_normal};

/// Piecewise linear trend plus i.i.d. Gaussian noise.
///
/// Slopes are drawn from the grid `{-gamma, ..., -gamma/n, 0, gamma/n, ..., gamma}` and
/// per-segment noise levels uniformly from `(0, sigma_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyLineConfig {
    pub gamma: f64,
    pub n_slopes: u32,
    pub sigma_max: f64,
    pub n_segments_range: [usize; 2],
    pub segment_len_range: [usize; 2],
    #[serde(default)]
    pub y0: f64,
    /// Time between consecutive points; slopes are per unit of time.
    #[serde(default = "unit_step")]
    pub dt: f64,
}

fn unit_step() -> f64 {
    1.0
}

impl Default for NoisyLineConfig {
    fn default() -> Self {
        Self {
            gamma: 1.4,
            n_slopes: 4,
            sigma_max: 0.07,
            n_segments_range: [1, 5],
            segment_len_range: [50, 200],
            y0: 0.0,
            dt: 1.0,
        }
    }
}

impl NoisyLineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return config_err(format!("noisy line gamma must be > 0, got {}", self.gamma));
        }
        if self.n_slopes == 0 {
            return config_err("noisy line slope grid resolution must be positive");
        }
        if !(self.sigma_max > 0.0) || !self.sigma_max.is_finite() {
            return config_err(format!("noisy line sigma_max must be > 0, got {}", self.sigma_max));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return config_err(format!("noisy line time step must be > 0, got {}", self.dt));
        }
        check_range_u("n_segments", self.n_segments_range, 1)?;
        check_range_u("segment_len", self.segment_len_range, 1)?;
        Ok(())
    }

    /// The finite slope grid, ascending.
    pub fn slope_grid(&self) -> Vec<f64> {
        let n = self.n_slopes as i64;
        (-n..=n).map(|k| self.gamma * k as f64 / n as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    /// Index of the segment anchor in the series.
    pub start: usize,
    pub len: usize,
    pub slope: f64,
    pub sigma: f64,
    /// Noiseless value at the anchor.
    pub anchor: f64,
}

pub fn generate_noisy_line(cfg: &NoisyLineConfig, seed: u64) -> Result<Series> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let grid = cfg.slope_grid();

    let n_segments = uniform_u(&mut rng, cfg.n_segments_range);
    let mut segments = Vec::with_capacity(n_segments);
    let mut start = 0;
    let mut anchor = cfg.y0;
    for _ in 0..n_segments {
        let len = uniform_u(&mut rng, cfg.segment_len_range);
        let slope = grid[rng.random_range(0..grid.len())];
        // (0, sigma_max]
        let sigma = cfg.sigma_max * (1.0 - rng.random::<f64>());
        segments.push(LineSegment { start, len, slope, sigma, anchor });
        start += len;
        anchor += slope * len as f64 * cfg.dt;
    }

    let total = start + 1;
    let mut t = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    t.push(0.0);
    y.push(cfg.y0);
    labels.push(TrendLabel::from_sign(segments[0].slope));
    for seg in &segments {
        let label = TrendLabel::from_sign(seg.slope);
        for k in 1..=seg.len {
            let eps = standard_normal(&mut rng);
            t.push((seg.start + k) as f64 * cfg.dt);
            y.push(seg.anchor + seg.slope * (k as f64 * cfg.dt) + seg.sigma * eps);
            labels.push(label);
        }
    }

    Ok(Series {
        seed,
        dynamic: Dynamic::NoisyLine,
        t,
        y,
        labels,
        gen_params: GenParams::NoisyLine { config: cfg.clone(), segments },
    })
}
