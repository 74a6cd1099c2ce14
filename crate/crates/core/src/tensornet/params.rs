use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Matrix, RnnSpec, OUT_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anything an optimizer can update: an ordered list of flat tensors.
pub trait Parameters<T> {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

impl<T> Parameters<T> for Vec<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.as_mut_slice()]
    }
}

/// One recurrent layer. Gate blocks are stacked along rows:
/// vanilla `[h]`, GRU `[r, z, n]`, LSTM `[i, f, g, o]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<T> {
    pub wx: Matrix<T>,
    pub wh: Matrix<T>,
    pub b: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RnnParams<T> {
    pub layers: Vec<LayerParams<T>>,
    /// Read-out, `3 x hidden_dim`.
    pub w_out: Matrix<T>,
    pub b_out: Vec<T>,
}

impl<T: Scalar> RnnParams<T> {
    pub fn zeros(spec: &RnnSpec) -> Self {
        let h = spec.hidden_dim;
        let g = spec.cell.gates() * h;
        let layers = (0..spec.n_layers)
            .map(|l| LayerParams {
                wx: Matrix::zeros(g, spec.layer_input_dim(l)),
                wh: Matrix::zeros(g, h),
                b: vec![T::zero(); g],
            })
            .collect();
        Self { layers, w_out: Matrix::zeros(OUT_CLASSES, h), b_out: vec![T::zero(); OUT_CLASSES] }
    }

    /// Every weight and bias uniform in `[-1/sqrt(hidden), 1/sqrt(hidden)]`.
    pub fn init_uniform<R: Rng + ?Sized>(spec: &RnnSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        let bound = 1.0 / (spec.hidden_dim as f64).sqrt();
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = T::of(bound * (2.0 * rng.random::<f64>() - 1.0));
            }
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    pub fn validate(&self, spec: &RnnSpec) -> Result<()> {
        if self.layers.len() != spec.n_layers {
            return Err(Error::Shape(format!(
                "{} layers stored, spec says {}",
                self.layers.len(),
                spec.n_layers
            )));
        }
        let h = spec.hidden_dim;
        let g = spec.cell.gates() * h;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.wx.expect_shape(&format!("layer {l} input weights"), g, spec.layer_input_dim(l))?;
            layer.wh.expect_shape(&format!("layer {l} recurrent weights"), g, h)?;
            if layer.b.len() != g {
                return Err(Error::Shape(format!("layer {l} bias has {} entries, expected {g}", layer.b.len())));
            }
        }
        self.w_out.expect_shape("read-out weights", OUT_CLASSES, h)?;
        if self.b_out.len() != OUT_CLASSES {
            return Err(Error::Shape(format!("read-out bias has {} entries", self.b_out.len())));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Input("non-finite weight".into()));
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> T {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> RnnParams<U> {
        let m = |x: &Matrix<T>| Matrix {
            rows: x.rows,
            cols: x.cols,
            data: x.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        };
        let v = |x: &[T]| x.iter().map(|v| U::of(v.to_f64_lossy())).collect::<Vec<U>>();
        RnnParams {
            layers: self.layers.iter().map(|l| LayerParams { wx: m(&l.wx), wh: m(&l.wh), b: v(&l.b) }).collect(),
            w_out: m(&self.w_out),
            b_out: v(&self.b_out),
        }
    }
}

impl<T> Parameters<T> for RnnParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.wx.data.as_slice());
            out.push(l.wh.data.as_slice());
            out.push(l.b.as_slice());
        }
        out.push(self.w_out.data.as_slice());
        out.push(self.b_out.as_slice());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.wx.data.as_mut_slice());
            out.push(l.wh.data.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out.push(self.w_out.data.as_mut_slice());
        out.push(self.b_out.as_mut_slice());
        out
    }
}
