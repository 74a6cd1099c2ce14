use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_DECAY: f64 = 0.99;
pub const OPTIM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Rmsprop,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "rmsprop" | "rmsp" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Optimizer moments, one flat buffer per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    /// First moments (Adam only; empty buffers for RMSprop).
    pub m: Vec<Vec<T>>,
    /// Second moments, elementwise >= 0.
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

impl<T: Scalar> OptimState<T> {
    pub fn new<P: Parameters<T>>(kind: OptimizerKind, learning_rate: T, like: &P) -> Self {
        let shapes: Vec<usize> = like.tensors().iter().map(|t| t.len()).collect();
        let zeros = |n: usize| vec![T::zero(); n];
        let m = match kind {
            OptimizerKind::Adam => shapes.iter().map(|n| zeros(*n)).collect(),
            OptimizerKind::Rmsprop => shapes.iter().map(|_| Vec::new()).collect(),
        };
        Self { kind, learning_rate, m, v: shapes.iter().map(|n| zeros(*n)).collect(), step: 0 }
    }

    pub fn step<P: Parameters<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        match self.kind {
            OptimizerKind::Adam => adam_step(self, params, grads),
            OptimizerKind::Rmsprop => rmsprop_step(self, params, grads),
        }
    }

    fn check<P: Parameters<T>>(&self, params: &P, grads: &P) -> Result<()> {
        let p = params.tensors();
        let g = grads.tensors();
        if p.len() != g.len() || p.len() != self.v.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, params have {}, grads {}",
                self.v.len(),
                p.len(),
                g.len()
            )));
        }
        for (i, ((pt, gt), vt)) in p.iter().zip(&g).zip(&self.v).enumerate() {
            if pt.len() != gt.len() || pt.len() != vt.len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: params {}, grads {}, state {}",
                    pt.len(),
                    gt.len(),
                    vt.len()
                )));
            }
        }
        Ok(())
    }
}

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
pub fn adam_step<T: Scalar, P: Parameters<T>>(state: &mut OptimState<T>, params: &mut P, grads: &P) -> Result<()> {
    state.check(params, grads)?;
    if state.kind != OptimizerKind::Adam {
        return Err(Error::Config("adam step on a non-Adam optimizer state".into()));
    }
    state.step += 1;
    let b1 = T::of(ADAM_BETA1);
    let b2 = T::of(ADAM_BETA2);
    let eps = T::of(OPTIM_EPS);
    let one = T::one();
    let c1 = one - b1.powi(state.step as i32);
    let c2 = one - b2.powi(state.step as i32);
    let lr = state.learning_rate;
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (one - b1) * gi;
            v[i] = b2 * v[i] + (one - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// RMSprop: `v <- 0.99 v + 0.01 g^2`, `p <- p - lr g / sqrt(v + 1e-8)`.
pub fn rmsprop_step<T: Scalar, P: Parameters<T>>(
    state: &mut OptimState<T>,
    params: &mut P,
    grads: &P,
) -> Result<()> {
    state.check(params, grads)?;
    if state.kind != OptimizerKind::Rmsprop {
        return Err(Error::Config("rmsprop step on a non-RMSprop optimizer state".into()));
    }
    state.step += 1;
    let decay = T::of(RMSPROP_DECAY);
    let eps = T::of(OPTIM_EPS);
    let lr = state.learning_rate;
    for ((p, g), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(&mut state.v) {
        for i in 0..p.len() {
            let gi = g[i];
            v[i] = decay * v[i] + (T::one() - decay) * gi * gi;
            p[i] -= lr * gi / (v[i] + eps).sqrt();
        }
    }
    Ok(())
}
