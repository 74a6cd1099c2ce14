use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    generate_markov_switch, generate_noisy_line, generate_piecewise_ou, Dynamic, MarkovSwitchConfig,
    NoisyLineConfig, OuConfig, Series,
};
use crate::error::{config_err, Error, Result};
use crate::rng::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Test,
    Validation,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
            Role::Validation => "validation",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            "validation" => Ok(Role::Validation),
            other => Err(Error::Config(format!("unknown dataset role `{other}`"))),
        }
    }
}

/// One dynamic, or the round-robin mixture of all three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicChoice {
    NoisyLine,
    PiecewiseOu,
    MarkovSwitch,
    Mixed,
}

impl DynamicChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DynamicChoice::NoisyLine => "noisy_line",
            DynamicChoice::PiecewiseOu => "piecewise_ou",
            DynamicChoice::MarkovSwitch => "markov_switch",
            DynamicChoice::Mixed => "mixed",
        }
    }

    fn dynamic_for(self, index: usize) -> Dynamic {
        match self {
            DynamicChoice::NoisyLine => Dynamic::NoisyLine,
            DynamicChoice::PiecewiseOu => Dynamic::PiecewiseOu,
            DynamicChoice::MarkovSwitch => Dynamic::MarkovSwitch,
            DynamicChoice::Mixed => Dynamic::ALL[index % 3],
        }
    }
}

impl From<Dynamic> for DynamicChoice {
    fn from(d: Dynamic) -> Self {
        match d {
            Dynamic::NoisyLine => DynamicChoice::NoisyLine,
            Dynamic::PiecewiseOu => DynamicChoice::PiecewiseOu,
            Dynamic::MarkovSwitch => DynamicChoice::MarkovSwitch,
        }
    }
}

impl fmt::Display for DynamicChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DynamicChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" | "mix" => Ok(DynamicChoice::Mixed),
            other => other.parse::<Dynamic>().map(Into::into),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A fine noisy-line time step at which the line's drift per step is
/// comparable to its noise, so that trend detection is non-trivial. On the unit
/// grid every non-zero slope is visible by eye.
pub const FINE_NOISY_LINE_DT: f64 = 0.006;

/// Per-dynamic generator configs plus a global noise multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub noisy_line: NoisyLineConfig,
    pub piecewise_ou: OuConfig,
    pub markov_switch: MarkovSwitchConfig,
    /// Multiplies every noise parameter.
    #[serde(default = "one")]
    pub noise_scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self::training()
    }
}

impl GenConfig {
    /// Training-set generators; sequence lengths 50-1000 (noisy line), 80-2400 (OU), 500-1000 (switch).
    pub fn training() -> Self {
        Self {
            noisy_line: NoisyLineConfig::default(),
            piecewise_ou: OuConfig::default(),
            markov_switch: MarkovSwitchConfig::default(),
            noise_scale: 1.0,
        }
    }

    /// Validation generators: every series has between 500 and 1000 points.
    pub fn validation() -> Self {
        let nl = NoisyLineConfig {
            n_segments_range: [3, 4],
            segment_len_range: [167, 249],
            ..NoisyLineConfig::default()
        };
        let ou = OuConfig {
            n_segments_range: [3, 4],
            segment_len_range: [167, 249],
            ..OuConfig::default()
        };
        Self {
            noisy_line: nl,
            piecewise_ou: ou,
            markov_switch: MarkovSwitchConfig::default(),
            noise_scale: 1.0,
        }
    }

    /// Same generators with the noisy-line clock set to `dt`.
    pub fn with_noisy_line_dt(mut self, dt: f64) -> Self {
        self.noisy_line.dt = dt;
        self
    }

    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Validation => Self::validation(),
            Role::Train | Role::Test => Self::training(),
        }
    }

    /// Configs with `noise_scale` folded into each noise parameter.
    pub fn resolved(&self) -> Result<GenConfig> {
        if !(self.noise_scale > 0.0) || !self.noise_scale.is_finite() {
            return config_err(format!("noise scale must be > 0, got {}", self.noise_scale));
        }
        let mut out = self.clone();
        out.noisy_line.sigma_max *= self.noise_scale;
        out.piecewise_ou.sigma *= self.noise_scale;
        out.markov_switch.sigma *= self.noise_scale;
        out.noise_scale = 1.0;
        Ok(out)
    }

    pub fn generate(&self, dynamic: Dynamic, seed: u64) -> Result<Series> {
        match dynamic {
            Dynamic::NoisyLine => generate_noisy_line(&self.noisy_line, seed),
            Dynamic::PiecewiseOu => generate_piecewise_ou(&self.piecewise_ou, seed),
            Dynamic::MarkovSwitch => generate_markov_switch(&self.markov_switch, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub role: Role,
    pub dynamic: DynamicChoice,
    pub count: usize,
    pub config: GenConfig,
}

impl DatasetSpec {
    /// 300 series, 100 per dynamic.
    pub fn validation() -> Self {
        Self { role: Role::Validation, dynamic: DynamicChoice::Mixed, count: 300, config: GenConfig::validation() }
    }

    /// 1000 series from one dynamic or the mixture.
    pub fn training(dynamic: DynamicChoice) -> Self {
        Self { role: Role::Train, dynamic, count: 1000, config: GenConfig::training() }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub series: Vec<Series>,
}

impl Dataset {
    pub fn new(role: Role, series: Vec<Series>) -> Self {
        Self { role, series }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Series count per dynamic.
    pub fn composition(&self) -> BTreeMap<Dynamic, usize> {
        let mut out = BTreeMap::new();
        for s in &self.series {
            *out.entry(s.dynamic).or_insert(0) += 1;
        }
        out
    }

    pub fn require_role(&self, role: Role) -> Result<()> {
        if self.role != role {
            return Err(Error::Input(format!("expected a {role} dataset, got {}", self.role)));
        }
        Ok(())
    }
}

/// Builds a dataset. Series `i` uses seed `derive_seed(seed, i)` and, for the
/// mixture, dynamic `i mod 3`, so the output does not depend on scheduling.
pub fn make_dataset(spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    if spec.count == 0 {
        return config_err("dataset count must be at least 1");
    }
    let cfg = spec.config.resolved()?;
    let series = (0..spec.count)
        .into_par_iter()
        .map(|i| cfg.generate(spec.dynamic.dynamic_for(i), derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { role: spec.role, series })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_defaults_have_100_per_dynamic_and_lengths_in_range() {
        let ds = make_dataset(&DatasetSpec::validation(), 7).unwrap();
        assert_eq!(ds.len(), 300);
        for d in Dynamic::ALL {
            assert_eq!(ds.composition()[&d], 100);
        }
        for s in &ds.series {
            assert!((500..=1000).contains(&s.len()), "{} has {} points", s.dynamic, s.len());
        }
    }

    #[test]
    fn mixed_training_splits_round_robin() {
        let spec = DatasetSpec::training(DynamicChoice::Mixed).with_count(9);
        let ds = make_dataset(&spec, 1).unwrap();
        for d in Dynamic::ALL {
            assert_eq!(ds.composition()[&d], 3);
        }
    }

    #[test]
    fn unknown_tags_are_errors() {
        assert!("brownian".parse::<DynamicChoice>().is_err());
        assert_eq!("mixed".parse::<DynamicChoice>().unwrap(), DynamicChoice::Mixed);
        assert_eq!("ou".parse::<DynamicChoice>().unwrap(), DynamicChoice::PiecewiseOu);
    }

    #[test]
    fn zero_count_is_rejected() {
        let spec = DatasetSpec::training(DynamicChoice::NoisyLine).with_count(0);
        assert!(make_dataset(&spec, 1).is_err());
    }

    #[test]
    fn noise_scale_multiplies_sigmas() {
        let cfg = GenConfig { noise_scale: 5.0, ..GenConfig::training() };
        let r = cfg.resolved().unwrap();
        assert_eq!(r.noisy_line.sigma_max, 0.07 * 5.0);
        assert_eq!(r.markov_switch.sigma, 0.01 * 5.0);
    }
}
