use serde::{Deserialize, Serialize};

use super::{check_range_f, check_range_u, uniform_f, uniform_u, Dynamic, GenParams, Series};
use crate::error::{config_err, Error, Result};
use crate::label::TrendLabel;
use crate::rng::{rng_from_seed, standard_normal};

fn default_dt() -> f64 {
    1.0
}

fn default_flat_tolerance() -> f64 {
    0.02
}

fn default_y0() -> f64 {
    1.0
}

/// Piecewise Ornstein-Uhlenbeck process `dY = (mu - a Y) dt + sigma dW`, with
/// `(a, mu)` redrawn on each segment. The attractor of a segment is `mu / a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuConfig {
    pub a_range: [f64; 2],
    pub sigma: f64,
    pub mu_range: [f64; 2],
    pub n_segments_range: [usize; 2],
    pub segment_len_range: [usize; 2],
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Relative band around 1 for the attractor/anchor ratio inside which a segment is flat.
    #[serde(default = "default_flat_tolerance")]
    pub flat_tolerance: f64,
}

impl Default for OuConfig {
    fn default() -> Self {
        Self {
            a_range: [0.01, 0.05],
            sigma: 0.01,
            mu_range: [0.01, 0.1],
            n_segments_range: [1, 6],
            segment_len_range: [80, 400],
            y0: 1.0,
            dt: 1.0,
            flat_tolerance: 0.02,
        }
    }
}

impl OuConfig {
    pub fn validate(&self) -> Result<()> {
        check_range_f("a", self.a_range)?;
        check_range_f("mu", self.mu_range)?;
        if !(self.a_range[0] > 0.0) {
            return config_err(format!("OU mean reversion speed must be > 0, got range {:?}", self.a_range));
        }
        if self.mu_range[0] < 0.0 {
            return config_err(format!("OU drive must be >= 0, got range {:?}", self.mu_range));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return config_err(format!("OU sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return config_err(format!("OU time step must be > 0, got {}", self.dt));
        }
        if !(self.flat_tolerance >= 0.0) {
            return config_err("OU flat tolerance must be >= 0");
        }
        check_range_u("n_segments", self.n_segments_range, 1)?;
        check_range_u("segment_len", self.segment_len_range, 1)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuSegment {
    pub start: usize,
    pub len: usize,
    pub a: f64,
    pub mu: f64,
    pub y_inf: f64,
    /// Observed value at the segment start.
    pub anchor: f64,
    pub label: TrendLabel,
}

fn ratio_label(y_inf: f64, anchor: f64, tol: f64, time: f64) -> Result<TrendLabel> {
    if anchor == 0.0 {
        return Err(Error::DegenerateLabel { time });
    }
    let r = y_inf / anchor - 1.0;
    Ok(if r.abs() <= tol { TrendLabel::Flat } else { TrendLabel::from_sign(r) })
}

/// Exact-discretization simulation. The path is continuous across segments:
/// each segment starts from the last observed value.
pub fn generate_piecewise_ou(cfg: &OuConfig, seed: u64) -> Result<Series> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let dt = cfg.dt;

    let n_segments = uniform_u(&mut rng, cfg.n_segments_range);
    let mut plan = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        let len = uniform_u(&mut rng, cfg.segment_len_range);
        let a = uniform_f(&mut rng, cfg.a_range);
        let mu = uniform_f(&mut rng, cfg.mu_range);
        plan.push((len, a, mu));
    }

    let total: usize = plan.iter().map(|p| p.0).sum::<usize>() + 1;
    let mut t = Vec::with_capacity(total);
    let mut y = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    let mut segments = Vec::with_capacity(n_segments);

    t.push(0.0);
    y.push(cfg.y0);
    labels.push(TrendLabel::Flat);
    let mut start = 0;
    let mut current = cfg.y0;
    for (i, &(len, a, mu)) in plan.iter().enumerate() {
        let y_inf = mu / a;
        let label = ratio_label(y_inf, current, cfg.flat_tolerance, start as f64 * dt)?;
        if i == 0 {
            labels[0] = label;
        }
        let decay = (-a * dt).exp();
        let step_sd = cfg.sigma * ((1.0 - (-2.0 * a * dt).exp()) / (2.0 * a)).sqrt();
        segments.push(OuSegment { start, len, a, mu, y_inf, anchor: current, label });
        for k in 1..=len {
            let xi = standard_normal(&mut rng);
            current = current * decay + y_inf * (1.0 - decay) + step_sd * xi;
            t.push((start + k) as f64 * dt);
            y.push(current);
            labels.push(label);
        }
        start += len;
    }

    Ok(Series {
        seed,
        dynamic: Dynamic::PiecewiseOu,
        t,
        y,
        labels,
        gen_params: GenParams::PiecewiseOu { config: cfg.clone(), segments },
    })
}
