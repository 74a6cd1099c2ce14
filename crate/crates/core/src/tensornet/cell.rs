//! Forward recursion and backpropagation through time for the three cell types.
//!
//! Cell equations (`x` input, `h` previous state, `s` logistic):
//! - vanilla: `h' = tanh(Wx x + Wh h + b)`
//! - GRU: `r = s(..)`, `z = s(..)`, `n = tanh(Wxn x + Whn (r * h) + bn)`, `h' = (1 - z) n + z h`
//! - LSTM: `i, f, o = s(..)`, `g = tanh(..)`, `c' = f c + i g`, `h' = o tanh(c')`

use rand::Rng;

use super::{CellKind, RnnParams, RnnSpec, OUT_CLASSES};
use crate::error::{Error, Result};
use crate::label::{ProbTriple, TrendLabel};
use crate::scalar::{sigmoid, softmax_in_place, Scalar};

struct LayerCache<T> {
    input_dim: usize,
    /// Post-dropout inputs, `steps x input_dim`.
    inputs: Vec<T>,
    /// Dropout multipliers applied to `inputs` (0 or 1/(1-p)); empty when dropout is off.
    mask: Vec<T>,
    /// States, `(steps + 1) x hidden`; row 0 is the zero initial state.
    hs: Vec<T>,
    /// Activated gates, `steps x gates*hidden`.
    gates: Vec<T>,
    /// LSTM cell states, `(steps + 1) x hidden`.
    cs: Vec<T>,
    /// LSTM `tanh(c)`, `steps x hidden`.
    tanh_c: Vec<T>,
}

/// Activations retained by a forward pass for backpropagation.
pub struct ForwardCache<T> {
    steps: usize,
    hidden: usize,
    layers: Vec<LayerCache<T>>,
    probs: Vec<[T; 3]>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn probabilities(&self) -> Vec<ProbTriple<T>> {
        self.probs.iter().map(|p| ProbTriple::from_array_unchecked(*p)).collect()
    }

    /// State of `layer` after each input step.
    pub fn hidden_states(&self, layer: usize) -> Vec<&[T]> {
        let h = self.hidden;
        let hs = &self.layers[layer].hs;
        (1..=self.steps).map(|t| &hs[t * h..(t + 1) * h]).collect()
    }

    /// Mean per-step cross-entropy against `targets`.
    pub fn loss(&self, targets: &[TrendLabel]) -> Result<T> {
        check_targets(self.steps, targets)?;
        let total: T = self
            .probs
            .iter()
            .zip(targets)
            .map(|(p, l)| -p[l.class_index()].ln())
            .sum();
        Ok(total / T::of(self.steps as f64))
    }
}

fn check_inputs<T: Scalar>(inputs: &[T]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Input("empty input sequence".into()));
    }
    if let Some(i) = inputs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite input at step {i}")));
    }
    Ok(())
}

fn check_targets(steps: usize, targets: &[TrendLabel]) -> Result<()> {
    if targets.len() != steps {
        return Err(Error::LengthMismatch { expected: steps, got: targets.len() });
    }
    Ok(())
}

/// Inference pass: no dropout.
pub fn forward<T: Scalar>(
    params: &RnnParams<T>,
    spec: &RnnSpec,
    inputs: &[T],
) -> Result<(Vec<ProbTriple<T>>, ForwardCache<T>)> {
    let cache = run_forward::<T, rand::rngs::ThreadRng>(params, spec, inputs, None)?;
    Ok((cache.probabilities(), cache))
}

/// Training pass: inverted dropout between stacked layers, masks drawn from `rng`.
pub fn forward_with_dropout<T: Scalar, R: Rng + ?Sized>(
    params: &RnnParams<T>,
    spec: &RnnSpec,
    inputs: &[T],
    rng: &mut R,
) -> Result<ForwardCache<T>> {
    run_forward(params, spec, inputs, Some(rng))
}

pub fn sequence_loss<T: Scalar>(
    params: &RnnParams<T>,
    spec: &RnnSpec,
    inputs: &[T],
    targets: &[TrendLabel],
) -> Result<T> {
    let (_, cache) = forward(params, spec, inputs)?;
    cache.loss(targets)
}

fn run_forward<T: Scalar, R: Rng + ?Sized>(
    params: &RnnParams<T>,
    spec: &RnnSpec,
    inputs: &[T],
    mut rng: Option<&mut R>,
) -> Result<ForwardCache<T>> {
    check_inputs(inputs)?;
    let steps = inputs.len();
    let h = spec.hidden_dim;
    let keep = 1.0 - spec.dropout;

    let mut layers: Vec<LayerCache<T>> = Vec::with_capacity(spec.n_layers);
    for (l, lp) in params.layers.iter().enumerate() {
        let input_dim = spec.layer_input_dim(l);
        let (layer_inputs, mask) = if l == 0 {
            (inputs.to_vec(), Vec::new())
        } else {
            let below = &layers[l - 1].hs[h..];
            match rng.as_deref_mut() {
                Some(rng) if spec.dropout > 0.0 => {
                    let scale = T::of(1.0 / keep);
                    let mask: Vec<T> = (0..below.len())
                        .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                        .collect();
                    (below.iter().zip(&mask).map(|(a, m)| *a * *m).collect(), mask)
                }
                _ => (below.to_vec(), Vec::new()),
            }
        };
        layers.push(layer_forward(spec.cell, lp, h, input_dim, steps, layer_inputs, mask));
    }

    let top = layers.last().expect("at least one layer");
    let mut probs = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut logits = [T::zero(); OUT_CLASSES];
        logits.copy_from_slice(&params.b_out);
        params.w_out.gemv(&top.hs[(t + 1) * h..(t + 2) * h], &mut logits);
        softmax_in_place(&mut logits);
        probs.push(logits);
    }
    Ok(ForwardCache { steps, hidden: h, layers, probs })
}

fn layer_forward<T: Scalar>(
    cell: CellKind,
    lp: &super::LayerParams<T>,
    h: usize,
    input_dim: usize,
    steps: usize,
    inputs: Vec<T>,
    mask: Vec<T>,
) -> LayerCache<T> {
    let g = cell.gates() * h;
    let mut hs = vec![T::zero(); (steps + 1) * h];
    let mut gates = vec![T::zero(); steps * g];
    let is_lstm = cell == CellKind::Lstm;
    let mut cs = if is_lstm { vec![T::zero(); (steps + 1) * h] } else { Vec::new() };
    let mut tanh_c = if is_lstm { vec![T::zero(); steps * h] } else { Vec::new() };
    let mut pre = vec![T::zero(); g];
    let mut rh = vec![T::zero(); h];

    for t in 0..steps {
        let x = &inputs[t * input_dim..(t + 1) * input_dim];
        let (prev, next) = hs.split_at_mut((t + 1) * h);
        let h_prev = &prev[t * h..];
        let h_new = &mut next[..h];
        let gt = &mut gates[t * g..(t + 1) * g];
        pre.copy_from_slice(&lp.b);
        lp.wx.gemv(x, &mut pre);
        match cell {
            CellKind::Vanilla => {
                lp.wh.gemv(h_prev, &mut pre);
                for k in 0..h {
                    let v = pre[k].tanh();
                    gt[k] = v;
                    h_new[k] = v;
                }
            }
            CellKind::Gru => {
                lp.wh.gemv_rows(0..2 * h, h_prev, &mut pre[..2 * h]);
                for k in 0..2 * h {
                    gt[k] = sigmoid(pre[k]);
                }
                for k in 0..h {
                    rh[k] = gt[k] * h_prev[k];
                }
                lp.wh.gemv_rows(2 * h..3 * h, &rh, &mut pre[2 * h..]);
                for k in 0..h {
                    let n = pre[2 * h + k].tanh();
                    gt[2 * h + k] = n;
                    let z = gt[h + k];
                    h_new[k] = (T::one() - z) * n + z * h_prev[k];
                }
            }
            CellKind::Lstm => {
                lp.wh.gemv(h_prev, &mut pre);
                for k in 0..h {
                    gt[k] = sigmoid(pre[k]);
                    gt[h + k] = sigmoid(pre[h + k]);
                    gt[2 * h + k] = pre[2 * h + k].tanh();
                    gt[3 * h + k] = sigmoid(pre[3 * h + k]);
                }
                for k in 0..h {
                    let c = gt[h + k] * cs[t * h + k] + gt[k] * gt[2 * h + k];
                    cs[(t + 1) * h + k] = c;
                    let tc = c.tanh();
                    tanh_c[t * h + k] = tc;
                    h_new[k] = gt[3 * h + k] * tc;
                }
            }
        }
    }
    LayerCache { input_dim, inputs, mask, hs, gates, cs, tanh_c }
}

/// Exact gradient of the mean per-step cross-entropy. Returns the loss and
/// gradients shaped like `params`.
pub fn backward<T: Scalar>(
    params: &RnnParams<T>,
    spec: &RnnSpec,
    cache: &ForwardCache<T>,
    targets: &[TrendLabel],
) -> Result<(T, RnnParams<T>)> {
    let steps = cache.steps;
    check_targets(steps, targets)?;
    let loss = cache.loss(targets)?;
    let h = spec.hidden_dim;
    let inv_n = T::one() / T::of(steps as f64);
    let mut grads = params.zeros_like();

    let top = cache.layers.last().expect("at least one layer");
    let mut d_h = vec![T::zero(); steps * h];
    for t in 0..steps {
        let mut dlogits = cache.probs[t];
        dlogits[targets[t].class_index()] -= T::one();
        for v in dlogits.iter_mut() {
            *v *= inv_n;
        }
        let h_t = &top.hs[(t + 1) * h..(t + 2) * h];
        grads.w_out.add_outer(&dlogits, h_t);
        for (b, d) in grads.b_out.iter_mut().zip(&dlogits) {
            *b += *d;
        }
        params.w_out.gemv_t(&dlogits, &mut d_h[t * h..(t + 1) * h]);
    }

    for l in (0..spec.n_layers).rev() {
        let lc = &cache.layers[l];
        let d_in = layer_backward(spec.cell, &params.layers[l], &mut grads.layers[l], lc, h, steps, &d_h);
        if l > 0 {
            // gradient w.r.t. the layer below's states, through the dropout mask
            d_h = if lc.mask.is_empty() {
                d_in
            } else {
                d_in.iter().zip(&lc.mask).map(|(d, m)| *d * *m).collect()
            };
        }
    }
    Ok((loss, grads))
}

fn layer_backward<T: Scalar>(
    cell: CellKind,
    lp: &super::LayerParams<T>,
    gp: &mut super::LayerParams<T>,
    lc: &LayerCache<T>,
    h: usize,
    steps: usize,
    d_h_out: &[T],
) -> Vec<T> {
    let g = cell.gates() * h;
    let input_dim = lc.input_dim;
    let mut d_in = vec![T::zero(); steps * input_dim];
    let mut dh_next = vec![T::zero(); h];
    let mut dc_next = vec![T::zero(); h];
    let mut dh = vec![T::zero(); h];
    let mut da = vec![T::zero(); g];
    let mut rh = vec![T::zero(); h];
    let mut d_rh = vec![T::zero(); h];
    let one = T::one();

    for t in (0..steps).rev() {
        let x = &lc.inputs[t * input_dim..(t + 1) * input_dim];
        let h_prev = &lc.hs[t * h..(t + 1) * h];
        let gt = &lc.gates[t * g..(t + 1) * g];
        for k in 0..h {
            dh[k] = d_h_out[t * h + k] + dh_next[k];
        }
        dh_next.iter_mut().for_each(|v| *v = T::zero());

        match cell {
            CellKind::Vanilla => {
                for k in 0..h {
                    da[k] = dh[k] * (one - gt[k] * gt[k]);
                }
                gp.wh.add_outer(&da, h_prev);
                lp.wh.gemv_t(&da, &mut dh_next);
            }
            CellKind::Gru => {
                let (r, rest) = gt.split_at(h);
                let (z, n) = rest.split_at(h);
                for k in 0..h {
                    let dn = dh[k] * (one - z[k]);
                    let dz = dh[k] * (h_prev[k] - n[k]);
                    dh_next[k] = dh[k] * z[k];
                    da[2 * h + k] = dn * (one - n[k] * n[k]);
                    da[h + k] = dz * z[k] * (one - z[k]);
                    rh[k] = r[k] * h_prev[k];
                }
                d_rh.iter_mut().for_each(|v| *v = T::zero());
                lp.wh.gemv_t_rows(2 * h..3 * h, &da[2 * h..], &mut d_rh);
                gp.wh.add_outer_rows(2 * h..3 * h, &da[2 * h..], &rh);
                for k in 0..h {
                    da[k] = d_rh[k] * h_prev[k] * r[k] * (one - r[k]);
                    dh_next[k] += d_rh[k] * r[k];
                }
                gp.wh.add_outer_rows(0..2 * h, &da[..2 * h], h_prev);
                lp.wh.gemv_t_rows(0..2 * h, &da[..2 * h], &mut dh_next);
            }
            CellKind::Lstm => {
                let c_prev = &lc.cs[t * h..(t + 1) * h];
                let tc = &lc.tanh_c[t * h..(t + 1) * h];
                for k in 0..h {
                    let (i, f, gg, o) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                    let d_o = dh[k] * tc[k];
                    let dc = dc_next[k] + dh[k] * o * (one - tc[k] * tc[k]);
                    da[k] = dc * gg * i * (one - i);
                    da[h + k] = dc * c_prev[k] * f * (one - f);
                    da[2 * h + k] = dc * i * (one - gg * gg);
                    da[3 * h + k] = d_o * o * (one - o);
                    dc_next[k] = dc * f;
                }
                gp.wh.add_outer(&da, h_prev);
                lp.wh.gemv_t(&da, &mut dh_next);
            }
        }
        gp.wx.add_outer(&da, x);
        for (b, d) in gp.b.iter_mut().zip(&da) {
            *b += *d;
        }
        lp.wx.gemv_t(&da, &mut d_in[t * input_dim..(t + 1) * input_dim]);
    }
    d_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::tensornet::Parameters;

    #[test]
    fn zero_weights_give_uniform_outputs() {
        for cell in CellKind::ALL {
            let spec = RnnSpec::new(cell, 2, 4, 0.0).unwrap();
            let params = RnnParams::<f64>::zeros(&spec);
            let (probs, _) = forward(&params, &spec, &[0.3, -2.0, 5.0]).unwrap();
            for p in probs {
                for v in p.to_array() {
                    assert!((v - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_vanilla_unit_is_tanh_of_input() {
        let spec = RnnSpec::new(CellKind::Vanilla, 1, 1, 0.0).unwrap();
        let mut params = RnnParams::<f64>::zeros(&spec);
        params.layers[0].wx.data[0] = 1.0;
        params.w_out.data = vec![0.0, 0.0, 1.0];
        let xs = [0.5, -1.0, 2.0, 0.0];
        let (_, cache) = forward(&params, &spec, &xs).unwrap();
        for (hs, x) in cache.hidden_states(0).iter().zip(xs) {
            assert!((hs[0] - f64::tanh(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_inputs_and_targets() {
        let spec = RnnSpec::new(CellKind::Gru, 1, 3, 0.0).unwrap();
        let params = RnnParams::<f64>::zeros(&spec);
        assert!(forward(&params, &spec, &[]).is_err());
        assert!(forward(&params, &spec, &[1.0, f64::NAN]).is_err());
        let (_, cache) = forward(&params, &spec, &[1.0, 2.0]).unwrap();
        let err = backward(&params, &spec, &cache, &[TrendLabel::Up]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn saturated_correct_read_out_has_vanishing_gradient() {
        let spec = RnnSpec::new(CellKind::Lstm, 1, 2, 0.0).unwrap();
        let mut rng = rng_from_seed(4);
        let mut params = RnnParams::<f64>::init_uniform(&spec, &mut rng);
        params.w_out.data.iter_mut().for_each(|v| *v = 0.0);
        params.b_out = vec![-40.0, -40.0, 40.0];
        let xs = [0.1, 0.2, -0.3, 0.4];
        let (_, cache) = forward(&params, &spec, &xs).unwrap();
        let (_, grads) = backward(&params, &spec, &cache, &[TrendLabel::Up; 4]).unwrap();
        assert!(grads.l2_norm() < 1e-6);
    }

    #[test]
    fn dropout_is_inactive_at_inference() {
        let spec = RnnSpec::new(CellKind::Gru, 2, 5, 0.5).unwrap();
        let mut rng = rng_from_seed(1);
        let params = RnnParams::<f64>::init_uniform(&spec, &mut rng);
        let xs: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let (a, _) = forward(&params, &spec, &xs).unwrap();
        let (b, _) = forward(&params, &spec, &xs).unwrap();
        assert_eq!(a, b);
        let train = forward_with_dropout(&params, &spec, &xs, &mut rng).unwrap();
        assert_ne!(train.probabilities(), a);
        assert_eq!(params.tensors().len(), 3 * 2 + 2);
    }
}
