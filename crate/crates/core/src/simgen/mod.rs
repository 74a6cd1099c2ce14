//! Labeled trending time series under three dynamics: the piecewise noisy
//! line, the piecewise Ornstein-Uhlenbeck process and the Markov-switching
//! log-price, plus dataset assembly and serialization.

mod dataset;
mod io;
mod markov;
mod noisy_line;
mod ou;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::TrendLabel;

pub use dataset::{make_dataset, FINE_NOISY_LINE_DT, Dataset, DatasetSpec, DynamicChoice, GenConfig, Role};
pub use io::{read_jsonl, read_jsonl_path, write_csv, write_jsonl, write_jsonl_path};
pub use markov::{generate_markov_switch, stationary_distribution, MarkovSwitchConfig};
pub use noisy_line::{generate_noisy_line, LineSegment, NoisyLineConfig};
pub use ou::{generate_piecewise_ou, OuConfig, OuSegment};

/// Generating dynamic of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamic {
    NoisyLine,
    PiecewiseOu,
    MarkovSwitch,
}

impl Dynamic {
    pub const ALL: [Dynamic; 3] = [Dynamic::NoisyLine, Dynamic::PiecewiseOu, Dynamic::MarkovSwitch];

    pub fn as_str(self) -> &'static str {
        match self {
            Dynamic::NoisyLine => "noisy_line",
            Dynamic::PiecewiseOu => "piecewise_ou",
            Dynamic::MarkovSwitch => "markov_switch",
        }
    }
}

impl fmt::Display for Dynamic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dynamic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noisy_line" | "nl" => Ok(Dynamic::NoisyLine),
            "piecewise_ou" | "ou" => Ok(Dynamic::PiecewiseOu),
            "markov_switch" | "ms" => Ok(Dynamic::MarkovSwitch),
            other => Err(Error::Config(format!("unknown dynamic tag `{other}`"))),
        }
    }
}

/// Parameters that produced a series: the config plus whatever was sampled from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dynamic", rename_all = "snake_case")]
pub enum GenParams {
    NoisyLine {
        config: NoisyLineConfig,
        segments: Vec<LineSegment>,
    },
    PiecewiseOu {
        config: OuConfig,
        segments: Vec<OuSegment>,
    },
    MarkovSwitch {
        config: MarkovSwitchConfig,
    },
}

/// A simulated series with per-step ground truth labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub seed: u64,
    pub dynamic: Dynamic,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub labels: Vec<TrendLabel>,
    pub gen_params: GenParams,
}

impl Series {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if self.t.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: self.t.len() });
        }
        if self.labels.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: self.labels.len() });
        }
        if n < 2 {
            return Err(Error::Input(format!("series needs at least 2 points, got {n}")));
        }
        if self.t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("time stamps are not strictly increasing".into()));
        }
        Ok(())
    }

    /// Rebuilds the series from its stored config and seed.
    pub fn regenerate(&self) -> Result<Series> {
        match &self.gen_params {
            GenParams::NoisyLine { config, .. } => generate_noisy_line(config, self.seed),
            GenParams::PiecewiseOu { config, .. } => generate_piecewise_ou(config, self.seed),
            GenParams::MarkovSwitch { config } => generate_markov_switch(config, self.seed),
        }
    }

    /// First differences, with a leading zero so the output has the series length.
    pub fn increments(&self) -> Vec<f64> {
        increments(&self.y)
    }

    pub fn log_returns(&self) -> Result<Vec<f64>> {
        log_returns(&self.y)
    }
}

pub fn increments(y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    if !y.is_empty() {
        out.push(0.0);
    }
    out.extend(y.windows(2).map(|w| w[1] - w[0]));
    out
}

/// `log(y[t+1] / y[t])`, one shorter than the input.
pub fn log_returns(y: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = y.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Input(format!(
            "log-returns need strictly positive values, found {} at index {bad}",
            y[bad]
        )));
    }
    Ok(y.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

pub(crate) fn check_range_f(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite()) || r[0] > r[1] {
        return Err(Error::Config(format!("{name} range [{}, {}] is empty or non-finite", r[0], r[1])));
    }
    Ok(())
}

pub(crate) fn check_range_u(name: &str, r: [usize; 2], min: usize) -> Result<()> {
    if r[0] > r[1] || r[0] < min {
        return Err(Error::Config(format!(
            "{name} range [{}, {}] is empty or below {min}",
            r[0], r[1]
        )));
    }
    Ok(())
}

pub(crate) fn uniform_f<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        r[0] + (r[1] - r[0]) * rng.random::<f64>()
    }
}

pub(crate) fn uniform_u<R: Rng + ?Sized>(rng: &mut R, r: [usize; 2]) -> usize {
    rng.random_range(r[0]..=r[1])
}
