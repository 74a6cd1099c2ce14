use serde::{Deserialize, Serialize};

use super::{forward, RnnParams, RnnSpec};
use crate::error::{Error, Result};
use crate::label::{ProbTriple, TrendLabel};
use crate::scalar::Scalar;
use crate::simgen::{increments, Dataset};

/// Network inputs are first differences divided by a global scale fixed on the
/// training set, so that exponentially growing levels stay trainable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub scale: f64,
}

impl Default for InputScaling {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl InputScaling {
    /// Median absolute increment over the whole set; 1 when that is zero.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let mut abs: Vec<f64> = data
            .series
            .iter()
            .flat_map(|s| s.y.windows(2).map(|w| (w[1] - w[0]).abs()))
            .collect();
        if abs.is_empty() {
            return Err(Error::Empty("cannot fit input scale on an empty dataset".into()));
        }
        abs.sort_by(f64::total_cmp);
        let n = abs.len();
        let median = if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) };
        let scale = if median > 0.0 && median.is_finite() { median } else { 1.0 };
        Ok(Self { scale })
    }

    pub fn transform<T: Scalar>(&self, y: &[f64]) -> Vec<T> {
        increments(y).into_iter().map(|d| T::of(d / self.scale)).collect()
    }
}

/// A trained recurrent classifier together with its input preprocessing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnModel<T> {
    pub spec: RnnSpec,
    pub input_scaling: InputScaling,
    pub params: RnnParams<T>,
}

impl<T: Scalar> RnnModel<T> {
    pub fn new(spec: RnnSpec, input_scaling: InputScaling, params: RnnParams<T>) -> Result<Self> {
        spec.validate()?;
        params.validate(&spec)?;
        Ok(Self { spec, input_scaling, params })
    }

    /// Per-step class probabilities for a raw series `y`.
    pub fn predict(&self, y: &[f64]) -> Result<Vec<ProbTriple<T>>> {
        let x = self.input_scaling.transform::<T>(y);
        Ok(forward(&self.params, &self.spec, &x)?.0)
    }

    pub fn classify(&self, y: &[f64]) -> Result<Vec<TrendLabel>> {
        Ok(self.predict(y)?.iter().map(ProbTriple::label).collect())
    }

    /// Hidden states of `layer` at every step, shape `len(y) x hidden_dim`.
    pub fn hidden_states(&self, y: &[f64], layer: usize) -> Result<Vec<Vec<T>>> {
        if layer >= self.spec.n_layers {
            return Err(Error::Input(format!("layer {layer} out of range ({} layers)", self.spec.n_layers)));
        }
        let x = self.input_scaling.transform::<T>(y);
        let (_, cache) = forward(&self.params, &self.spec, &x)?;
        Ok(cache.hidden_states(layer).into_iter().map(<[T]>::to_vec).collect())
    }
}
