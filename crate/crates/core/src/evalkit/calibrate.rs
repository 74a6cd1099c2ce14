use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wasserstein_1d;
use crate::error::{config_err, Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::simgen::{Dynamic, GenConfig, Series};

/// Shortest return sample accepted as a calibration target.
pub const MIN_TARGET_RETURNS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSearch {
    /// Simulated series per candidate; their distances are averaged.
    pub n_draws: usize,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        Self { n_draws: 8, n_candidates: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub dynamic: Dynamic,
    /// Generator config with the winning parameters for `dynamic`.
    pub config: GenConfig,
    pub distance: f64,
    pub best_index: usize,
    /// Distance of every candidate, in draw order.
    pub candidate_distances: Vec<f64>,
}

impl CalibrationResult {
    /// Best distance after the first `k` candidates, for `k = 1..=n`.
    pub fn running_minimum(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.candidate_distances
            .iter()
            .map(|d| {
                best = best.min(*d);
                best
            })
            .collect()
    }
}

/// The return series a simulator is compared on: log-returns for the
/// Markov switch (it is a log-price model), plain increments otherwise, the
/// noisy line and OU being read as models of the log-price itself.
pub fn calibration_returns(series: &Series) -> Result<Vec<f64>> {
    match series.dynamic {
        Dynamic::MarkovSwitch => series.log_returns(),
        _ => Ok(series.y.windows(2).map(|w| w[1] - w[0]).collect()),
    }
}

/// Mean W1 between `target` and the returns of `n_draws` series simulated from
/// `cfg`, draw `i` seeded with `derive_seed(seed, i)`.
pub fn distance_to_target(cfg: &GenConfig, dynamic: Dynamic, target: &[f64], n_draws: usize, seed: u64) -> Result<f64> {
    if n_draws == 0 {
        return config_err("calibration needs at least one draw per candidate");
    }
    let cfg = cfg.resolved()?;
    let mut total = 0.0;
    for i in 0..n_draws {
        let s = cfg.generate(dynamic, derive_seed(seed, i as u64))?;
        total += wasserstein_1d(&calibration_returns(&s)?, target);
    }
    Ok(total / n_draws as f64)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// One random point of the search space for `dynamic`; everything else is
/// taken from `base`.
fn sample_candidate<R: Rng>(dynamic: Dynamic, base: &GenConfig, rng: &mut R) -> GenConfig {
    let mut c = base.clone();
    c.noise_scale = 1.0;
    match dynamic {
        Dynamic::NoisyLine => {
            c.noisy_line.gamma = log_uniform(rng, 1e-4, 3.0);
            c.noisy_line.n_slopes = rng.random_range(1..=8);
            c.noisy_line.sigma_max = log_uniform(rng, 1e-4, 1.0);
        }
        Dynamic::PiecewiseOu => {
            let a_lo = log_uniform(rng, 1e-3, 0.5);
            let a_hi = a_lo * rng.random_range(1.0..5.0);
            c.piecewise_ou.a_range = [a_lo, a_hi];
            // attractors spread around the starting level
            let y0 = c.piecewise_ou.y0.abs().max(1e-6);
            let r_lo = rng.random_range(0.2..1.0);
            let r_hi = rng.random_range(1.0..5.0);
            c.piecewise_ou.mu_range = [a_lo * r_lo * y0, a_hi * r_hi * y0];
            c.piecewise_ou.sigma = log_uniform(rng, 1e-4, 1.0);
        }
        Dynamic::MarkovSwitch => {
            let stay = rng.random_range(0.9..0.999);
            let leave = (1.0 - stay) / 2.0;
            c.markov_switch.transition = [[stay, leave, leave], [leave, stay, leave], [leave, leave, stay]];
            c.markov_switch.gamma = log_uniform(rng, 1e-5, 0.05);
            c.markov_switch.sigma = log_uniform(rng, 1e-4, 0.2);
        }
    }
    c
}

/// Random search: candidate `c` and its simulations depend only on
/// `(seed, c)`, so adding candidates never changes earlier ones and the best
/// distance can only go down.
pub fn calibrate(dynamic: Dynamic, base: &GenConfig, target: &[f64], search: &CalibrationSearch) -> Result<CalibrationResult> {
    if target.len() < MIN_TARGET_RETURNS {
        return Err(Error::Input(format!(
            "calibration target has {} returns, need at least {MIN_TARGET_RETURNS}",
            target.len()
        )));
    }
    if target.iter().any(|r| !r.is_finite()) {
        return Err(Error::Input("non-finite calibration target".into()));
    }
    if search.n_candidates == 0 {
        return config_err("empty calibration search space (n_candidates = 0)");
    }
    let scored: Vec<(GenConfig, f64)> = (0..search.n_candidates)
        .into_par_iter()
        .map(|c| {
            let cseed = derive_seed(search.seed, c as u64);
            let cfg = sample_candidate(dynamic, base, &mut rng_for(cseed, 0));
            let d = distance_to_target(&cfg, dynamic, target, search.n_draws, derive_seed(cseed, 1))?;
            Ok((cfg, d))
        })
        .collect::<Result<_>>()?;
    let (best_index, _) = scored
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .expect("at least one candidate");
    Ok(CalibrationResult {
        dynamic,
        config: scored[best_index].0.clone(),
        distance: scored[best_index].1,
        best_index,
        candidate_distances: scored.into_iter().map(|(_, d)| d).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> Vec<f64> {
        let s = GenConfig::training().generate(Dynamic::MarkovSwitch, 3).unwrap();
        calibration_returns(&s).unwrap()
    }

    #[test]
    fn one_candidate_is_returned_as_is() {
        let base = GenConfig::training();
        let search = CalibrationSearch { n_draws: 2, n_candidates: 1, seed: 4 };
        let r = calibrate(Dynamic::MarkovSwitch, &base, &target(), &search).unwrap();
        assert_eq!(r.best_index, 0);
        let cand = sample_candidate(Dynamic::MarkovSwitch, &base, &mut rng_for(derive_seed(4, 0), 0));
        assert_eq!(r.config, cand);
    }

    #[test]
    fn more_candidates_never_hurt() {
        let base = GenConfig::training();
        let t = target();
        let small = calibrate(Dynamic::MarkovSwitch, &base, &t, &CalibrationSearch { n_draws: 2, n_candidates: 5, seed: 1 }).unwrap();
        let big = calibrate(Dynamic::MarkovSwitch, &base, &t, &CalibrationSearch { n_draws: 2, n_candidates: 20, seed: 1 }).unwrap();
        assert_eq!(&big.candidate_distances[..5], &small.candidate_distances[..]);
        assert!(big.distance <= small.distance && small.distance >= 0.0);
        let run = big.running_minimum();
        assert!(run.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn bad_searches() {
        let base = GenConfig::training();
        assert!(calibrate(Dynamic::NoisyLine, &base, &[0.0; 10], &CalibrationSearch::default()).is_err());
        let s = CalibrationSearch { n_candidates: 0, ..CalibrationSearch::default() };
        assert!(calibrate(Dynamic::NoisyLine, &base, &target(), &s).is_err());
    }
}
