//! JSON persistence for every classifier the lab can train or tune.
//!
//! A file holds a format version, free-form metadata (training options, the
//! dataset it was fitted on, ...) and one tagged model:
//!
//! ```json
//! { "format_version": 1, "meta": { ... }, "model": { "kind": "rnn", ... } }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classical::{convex_forward, ma_probabilities, ConvexNetParams, MaConfig};
use crate::error::{Error, Result};
use crate::label::{ProbTriple, TrendLabel};
use crate::mle::{hmm_classify, mle_probabilities, Estimator, HmmModel, SlidingWindowConfig};
use crate::simgen::Series;
use crate::tensornet::RnnModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredModel {
    Rnn(RnnModel<f64>),
    MovingAverage(MaConfig),
    ConvexNet(ConvexNetParams<f64>),
    Hmm(HmmModel),
    SlidingMle { estimator: Estimator, window: SlidingWindowConfig },
}

impl StoredModel {
    pub fn kind(&self) -> &'static str {
        match self {
            StoredModel::Rnn(_) => "rnn",
            StoredModel::MovingAverage(_) => "moving_average",
            StoredModel::ConvexNet(_) => "convex_net",
            StoredModel::Hmm(_) => "hmm",
            StoredModel::SlidingMle { .. } => "sliding_mle",
        }
    }

    /// Structural checks that serde cannot express (matrix shapes, stochastic rows, ...).
    pub fn validate(&self) -> Result<()> {
        match self {
            StoredModel::Rnn(m) => {
                m.spec.validate()?;
                m.params.validate(&m.spec)
            }
            StoredModel::MovingAverage(c) => c.validate(),
            StoredModel::ConvexNet(p) => p.validate(),
            StoredModel::Hmm(h) => h.validate(),
            StoredModel::SlidingMle { estimator, window } => window.validate(*estimator),
        }
    }

    /// Per-step class probabilities on one series.
    pub fn probabilities(&self, series: &Series) -> Result<Vec<ProbTriple<f64>>> {
        match self {
            StoredModel::Rnn(m) => m.predict(&series.y),
            StoredModel::MovingAverage(c) => ma_probabilities(c, &series.y),
            StoredModel::ConvexNet(p) => Ok(convex_forward(p, &series.y)?.probs),
            StoredModel::Hmm(h) => Ok(hmm_classify(h, &positive_levels(&series.y))?.1),
            StoredModel::SlidingMle { estimator, window } => {
                mle_probabilities(&series.y, &series.t, *estimator, window)
            }
        }
    }

    pub fn classify(&self, series: &Series) -> Result<Vec<TrendLabel>> {
        Ok(self.probabilities(series)?.iter().map(ProbTriple::label).collect())
    }
}

/// The HMM works on log-returns, so a series that touches zero or goes
/// negative (noisy lines start at 0) is lifted to a minimum of 1 first.
fn positive_levels(y: &[f64]) -> Vec<f64> {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    if lo > 0.0 {
        y.to_vec()
    } else {
        y.iter().map(|v| v - lo + 1.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
    pub model: StoredModel,
}

impl ModelFile {
    pub fn new(model: StoredModel) -> Self {
        Self { format_version: MODEL_FORMAT_VERSION, meta: BTreeMap::new(), model }
    }

    pub fn with_meta(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.meta.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parse and validate. The version is checked before the model body so a
    /// file from a newer format reports a version error, not a schema error.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Value = serde_json::from_str(text)?;
        let found = raw
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Input("model file has no integer format_version".into()))?;
        if found != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::Version { found: u32::try_from(found).unwrap_or(u32::MAX), expected: MODEL_FORMAT_VERSION });
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        file.model.validate()?;
        Ok(file)
    }
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<()> {
    let mut text = file.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    ModelFile::from_json(&fs::read_to_string(path)?)
}
