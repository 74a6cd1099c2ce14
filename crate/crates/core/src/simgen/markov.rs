use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_range_u, uniform_u, Dynamic, GenParams, Series};
use crate::error::{config_err, Result};
use crate::label::TrendLabel;
use crate::rng::{rng_from_seed, standard_normal};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Log-price driven by a three-state chain over (down, flat, up):
/// `log y_t - log y_{t-1} = gamma * l_t + sigma * eps_t`, `y_0 = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovSwitchConfig {
    /// Rows and columns ordered (down, flat, up).
    pub transition: [[f64; 3]; 3],
    pub gamma: f64,
    pub sigma: f64,
    pub initial_dist: [f64; 3],
    pub length_range: [usize; 2],
}

impl Default for MarkovSwitchConfig {
    fn default() -> Self {
        let stay = 0.99;
        let leave = (1.0 - stay) / 2.0;
        Self {
            transition: [[stay, leave, leave], [leave, stay, leave], [leave, leave, stay]],
            gamma: 0.003,
            sigma: 0.01,
            initial_dist: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            length_range: [500, 1000],
        }
    }
}

fn check_distribution(name: &str, p: &[f64; 3]) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return config_err(format!("{name} has negative or non-finite entries: {p:?}"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return config_err(format!("{name} sums to {s}, not 1"));
    }
    Ok(())
}

impl MarkovSwitchConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.transition.iter().enumerate() {
            check_distribution(&format!("transition row {i}"), row)?;
        }
        check_distribution("initial distribution", &self.initial_dist)?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return config_err(format!("markov switch gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return config_err(format!("markov switch sigma must be >= 0, got {}", self.sigma));
        }
        check_range_u("length", self.length_range, 2)?;
        Ok(())
    }
}

fn draw_state<R: Rng + ?Sized>(rng: &mut R, p: &[f64; 3]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding slack: fall back to the last state with positive mass
    p.iter().rposition(|v| *v > 0.0).unwrap_or(2)
}

pub fn generate_markov_switch(cfg: &MarkovSwitchConfig, seed: u64) -> Result<Series> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let n = uniform_u(&mut rng, cfg.length_range);

    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut state = draw_state(&mut rng, &cfg.initial_dist);
    let mut log_y = 0.0;
    t.push(0.0);
    y.push(1.0);
    labels.push(TrendLabel::from_class_index(state));
    for i in 1..n {
        state = draw_state(&mut rng, &cfg.transition[state]);
        let label = TrendLabel::from_class_index(state);
        log_y += cfg.gamma * label.value() as f64 + cfg.sigma * standard_normal(&mut rng);
        t.push(i as f64);
        y.push(log_y.exp());
        labels.push(label);
    }

    Ok(Series {
        seed,
        dynamic: Dynamic::MarkovSwitch,
        t,
        y,
        labels,
        gen_params: GenParams::MarkovSwitch { config: cfg.clone() },
    })
}

/// Stationary distribution of a row-stochastic 3x3 matrix, by power iteration.
pub fn stationary_distribution(transition: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut pi = [1.0 / 3.0; 3];
    for _ in 0..100_000 {
        let mut next = [0.0; 3];
        for (i, row) in transition.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::log_returns;

    #[test]
    fn absorbing_up_chain_is_pure_exponential() {
        let cfg = MarkovSwitchConfig {
            transition: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            gamma: 0.01,
            sigma: 0.0,
            initial_dist: [0.0, 0.0, 1.0],
            length_range: [200, 200],
        };
        let s = generate_markov_switch(&cfg, 5).unwrap();
        for (i, v) in s.y.iter().enumerate() {
            assert!((v - (0.01 * i as f64).exp()).abs() < 1e-10 * v);
        }
        assert!(s.labels.iter().all(|l| *l == TrendLabel::Up));
    }

    #[test]
    fn zero_gamma_decouples_values_from_states() {
        let cfg = MarkovSwitchConfig { gamma: 0.0, ..MarkovSwitchConfig::default() };
        let s = generate_markov_switch(&cfg, 9).unwrap();
        let r = log_returns(&s.y).unwrap();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let se = cfg.sigma / (r.len() as f64).sqrt();
        assert!(mean.abs() < 4.0 * se);
        assert!(s.labels.iter().any(|l| *l != s.labels[0]));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let mut cfg = MarkovSwitchConfig::default();
        cfg.transition[1] = [0.5, 0.5, 0.1];
        assert!(generate_markov_switch(&cfg, 1).is_err());
        let mut cfg = MarkovSwitchConfig::default();
        cfg.transition[0] = [1.2, -0.1, -0.1];
        assert!(generate_markov_switch(&cfg, 1).is_err());
        let cfg = MarkovSwitchConfig { initial_dist: [0.5, 0.5, 0.5], ..MarkovSwitchConfig::default() };
        assert!(generate_markov_switch(&cfg, 1).is_err());
    }
}
