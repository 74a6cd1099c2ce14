use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{backward, forward_with_dropout, InputScaling, OptimState, OptimizerKind, RnnModel, RnnParams, RnnSpec};
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::scalar::Scalar;
use crate::simgen::{Dataset, Role};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

/// Training is declared failed once the epoch loss exceeds this multiple of
/// the first epoch's loss for `DIVERGENCE_PATIENCE` epochs in a row.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
pub const DIVERGENCE_PATIENCE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { optimizer: OptimizerKind::Adam, learning_rate: 0.005, epochs: 200, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub model: RnnModel<T>,
    /// Mean per-step loss of each epoch, as seen during training (dropout on).
    pub epoch_losses: Vec<f64>,
}

/// Full-sequence BPTT, one series per optimizer step, series order reshuffled
/// every epoch. Everything random is derived from `opts.seed`.
pub fn train<T: Scalar>(spec: &RnnSpec, data: &Dataset, opts: &TrainOptions) -> Result<TrainOutcome<T>> {
    spec.validate()?;
    data.require_role(Role::Train)?;
    if data.is_empty() {
        return Err(Error::Empty("training set has no series".into()));
    }
    if !(opts.learning_rate > 0.0 && opts.learning_rate.is_finite()) {
        return Err(Error::Config(format!("learning rate must be positive, got {}", opts.learning_rate)));
    }
    let scaling = InputScaling::fit(data)?;
    let inputs: Vec<Vec<T>> = data.series.iter().map(|s| scaling.transform(&s.y)).collect();

    let mut params: RnnParams<T> = RnnParams::init_uniform(spec, &mut rng_for(opts.seed, STREAM_INIT));
    let mut optim = OptimState::new(opts.optimizer, T::of(opts.learning_rate), &params);
    let mut shuffle_rng = rng_for(opts.seed, STREAM_SHUFFLE);
    let mut dropout_rng = rng_for(opts.seed, STREAM_DROPOUT);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    let mut over = 0usize;

    for epoch in 0..opts.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for &i in &order {
            let cache = forward_with_dropout(&params, spec, &inputs[i], &mut dropout_rng)?;
            let (loss, grads) = backward(&params, spec, &cache, &data.series[i].labels)?;
            let loss = loss.to_f64_lossy();
            if !loss.is_finite() {
                epoch_losses.push(f64::NAN);
                return Err(Error::TrainingFailed { epoch, reason: "non-finite loss".into(), epoch_losses });
            }
            total += loss;
            optim.step(&mut params, &grads)?;
        }
        let mean = total / data.len() as f64;
        epoch_losses.push(mean);
        log::debug!("epoch {epoch}: loss {mean:.5}");
        if mean > DIVERGENCE_FACTOR * epoch_losses[0] {
            over += 1;
            if over >= DIVERGENCE_PATIENCE {
                return Err(Error::TrainingFailed {
                    epoch,
                    reason: format!("loss above {DIVERGENCE_FACTOR}x the first epoch for {over} epochs"),
                    epoch_losses,
                });
            }
        } else {
            over = 0;
        }
    }
    if params.tensors_not_finite() {
        return Err(Error::TrainingFailed {
            epoch: opts.epochs,
            reason: "non-finite weights".into(),
            epoch_losses,
        });
    }
    Ok(TrainOutcome { model: RnnModel { spec: spec.clone(), input_scaling: scaling, params }, epoch_losses })
}

impl<T: Scalar> RnnParams<T> {
    fn tensors_not_finite(&self) -> bool {
        use super::Parameters;
        self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite()))
    }
}
