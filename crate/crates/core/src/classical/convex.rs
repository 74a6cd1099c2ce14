use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::label::{argmax_label, ProbTriple, TrendLabel};
use crate::rng::{rng_for, standard_normal};
use crate::scalar::{softmax_in_place, Scalar};
use crate::simgen::{Dataset, Role};
use crate::tensornet::{Matrix, OptimState, OptimizerKind, Parameters, OUT_CLASSES};

const ROW_SUM_TOL: f64 = 1e-9;

/// `h_t = W_hh h_{t-1} + y_t w_ih`, read out through `W h_t`.
///
/// Each row of `[W_hh | w_ih]` is a probability vector, so every coordinate of
/// `h_t` is a weighted average of past inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexNetParams<T> {
    pub w_hh: Matrix<T>,
    pub w_ih: Vec<T>,
    /// `3 x m` read-out, unconstrained.
    pub w_out: Matrix<T>,
}

impl<T: Scalar> ConvexNetParams<T> {
    pub fn dim(&self) -> usize {
        self.w_ih.len()
    }

    /// Random valid weights: each row of `[W_hh | w_ih]` uniform on the simplex
    /// (normalized exponentials), read-out `N(0, 1/m)`.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return config_err("convex net needs at least one state");
        }
        let mut w_hh = Matrix::zeros(m, m);
        let mut w_ih = vec![T::zero(); m];
        for i in 0..m {
            let mut row: Vec<f64> = (0..=m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            for j in 0..m {
                w_hh.set(i, j, T::of(row[j]));
            }
            w_ih[i] = T::of(row[m]);
        }
        let scale = 1.0 / (m as f64).sqrt();
        let w_out = Matrix::from_fn(OUT_CLASSES, m, |_, _| T::of(scale * standard_normal(rng)));
        let p = Self { w_hh, w_ih, w_out };
        p.validate()?;
        Ok(p)
    }

    /// Nonnegativity, unit row sums and spectral radius of `W_hh` below one.
    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::Shape("convex net with zero states".into()));
        }
        self.w_hh.expect_shape("convex recurrent weights", m, m)?;
        self.w_out.expect_shape("convex read-out", OUT_CLASSES, m)?;
        for i in 0..m {
            let row = self.w_hh.row(i);
            if row.iter().chain([&self.w_ih[i]]).any(|v| !(v.is_finite() && *v >= T::zero())) {
                return Err(Error::Input(format!("convex row {i} has a negative or non-finite weight")));
            }
            let s = row.iter().copied().sum::<T>() + self.w_ih[i];
            if (s.to_f64_lossy() - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Input(format!("convex row {i} sums to {s}, not 1")));
            }
        }
        if self.w_out.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite convex read-out weight".into()));
        }
        let rho = spectral_radius(&self.w_hh);
        if rho >= 1.0 {
            return Err(Error::Input(format!("recurrent spectral radius {rho} is not below 1")));
        }
        Ok(())
    }

    /// Replace every row of `[W_hh | w_ih]` by its projection.
    pub fn project(&mut self) {
        let m = self.dim();
        let mut row = vec![T::zero(); m + 1];
        for i in 0..m {
            row[..m].copy_from_slice(self.w_hh.row(i));
            row[m] = self.w_ih[i];
            project_stochastic_row(&mut row);
            self.w_hh.row_mut(i).copy_from_slice(&row[..m]);
            self.w_ih[i] = row[m];
        }
    }

    /// Fixed point of the recursion under a constant input `c`:
    /// `c (I - W_hh)^{-1} w_ih`, which is `c` in every coordinate.
    pub fn fixed_point(&self, c: T) -> Vec<T> {
        vec![c; self.dim()]
    }
}

impl<T> Parameters<T> for ConvexNetParams<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![&self.w_hh.data, &self.w_ih, &self.w_out.data]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.w_hh.data, &mut self.w_ih, &mut self.w_out.data]
    }
}

/// Clip negatives to zero, then rescale to unit sum. A row with nothing left
/// after clipping becomes uniform.
pub fn project_stochastic_row<T: Scalar>(row: &mut [T]) {
    for v in row.iter_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
    let s: T = row.iter().copied().sum();
    if s > T::zero() && s.is_finite() {
        row.iter_mut().for_each(|v| *v /= s);
    } else {
        let u = T::one() / T::of(row.len() as f64);
        row.iter_mut().for_each(|v| *v = u);
    }
}

/// Spectral radius via `||W^k||^(1/k)` with `k = 2^40` reached by repeated
/// squaring, renormalizing at every step so nothing under- or overflows.
/// Always an upper bound that converges to the true radius.
pub fn spectral_radius<T: Scalar>(w: &Matrix<T>) -> f64 {
    let n = w.rows;
    let norm = |m: &[f64]| (0..n).map(|i| m[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut m: Vec<f64> = w.data.iter().map(|v| v.to_f64_lossy()).collect();
    let n0 = norm(&m);
    if n0 == 0.0 {
        return 0.0;
    }
    m.iter_mut().for_each(|v| *v /= n0);
    // ||W^(2^j)|| = exp(log_norm) * ||m||, with ||m|| = 1
    let mut log_norm = n0.ln();
    let mut k = 1.0f64;
    for _ in 0..40 {
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let a = m[i * n + l];
                if a != 0.0 {
                    for j in 0..n {
                        sq[i * n + j] += a * m[l * n + j];
                    }
                }
            }
        }
        let s = norm(&sq);
        if s == 0.0 {
            return 0.0;
        }
        sq.iter_mut().for_each(|v| *v /= s);
        m = sq;
        log_norm = 2.0 * log_norm + s.ln();
        k *= 2.0;
    }
    (log_norm / k).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexOutput<T> {
    pub labels: Vec<TrendLabel>,
    pub probs: Vec<ProbTriple<T>>,
    /// `h_t` for every step, `len x m`.
    pub states: Vec<Vec<T>>,
}

/// Run the recursion from `h_0 = y_0 w_ih`; labels are the argmax of `W h_t`
/// with ties going to flat.
pub fn convex_forward<T: Scalar>(params: &ConvexNetParams<T>, y: &[T]) -> Result<ConvexOutput<T>> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::Empty("convex net on an empty series".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in convex net input".into()));
    }
    let m = params.dim();
    let mut states: Vec<Vec<T>> = Vec::with_capacity(y.len());
    let mut labels = Vec::with_capacity(y.len());
    let mut probs = Vec::with_capacity(y.len());
    let mut h = vec![T::zero(); m];
    for &yt in y {
        let mut next: Vec<T> = params.w_ih.iter().map(|w| *w * yt).collect();
        params.w_hh.gemv(&h, &mut next);
        h = next;
        let mut logits = [T::zero(); OUT_CLASSES];
        params.w_out.gemv(&h, &mut logits);
        labels.push(argmax_label(logits));
        softmax_in_place(&mut logits);
        probs.push(ProbTriple::from_array_unchecked(logits));
        states.push(h.clone());
    }
    Ok(ConvexOutput { labels, probs, states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexTrainOptions {
    pub m: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for ConvexTrainOptions {
    fn default() -> Self {
        Self { m: 5, optimizer: OptimizerKind::Adam, learning_rate: 0.005, epochs: 20, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct ConvexTrainOutcome<T> {
    pub params: ConvexNetParams<T>,
    pub epoch_losses: Vec<f64>,
}

/// Mean per-step cross-entropy and its exact gradient through the linear
/// recursion.
fn loss_and_grad<T: Scalar>(p: &ConvexNetParams<T>, y: &[T], labels: &[TrendLabel]) -> Result<(f64, ConvexNetParams<T>)> {
    if y.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: y.len(), got: labels.len() });
    }
    let out = convex_forward(p, y)?;
    let n = y.len();
    let inv_n = T::one() / T::of(n as f64);
    let m = p.dim();
    let mut g = ConvexNetParams { w_hh: Matrix::zeros(m, m), w_ih: vec![T::zero(); m], w_out: Matrix::zeros(OUT_CLASSES, m) };
    let mut loss = 0.0;
    let mut dh_next = vec![T::zero(); m];
    for t in (0..n).rev() {
        let pr = out.probs[t].to_array();
        let k = labels[t].class_index();
        loss -= pr[k].to_f64_lossy().max(1e-300).ln();
        let mut dz = pr;
        dz[k] -= T::one();
        dz.iter_mut().for_each(|v| *v *= inv_n);
        g.w_out.add_outer(&dz, &out.states[t]);
        let mut dh = dh_next.clone();
        p.w_out.gemv_t(&dz, &mut dh);
        for i in 0..m {
            g.w_ih[i] += dh[i] * y[t];
        }
        dh_next = vec![T::zero(); m];
        if t > 0 {
            g.w_hh.add_outer(&dh, &out.states[t - 1]);
            p.w_hh.gemv_t(&dh, &mut dh_next);
        }
    }
    Ok((loss / n as f64, g))
}

/// Projected gradient training: an optimizer step on the cross-entropy, then
/// every row of `[W_hh | w_ih]` is clipped and renormalized.
pub fn convex_train<T: Scalar>(data: &Dataset, opts: &ConvexTrainOptions) -> Result<ConvexTrainOutcome<T>> {
    data.require_role(Role::Train)?;
    if data.is_empty() {
        return Err(Error::Empty("training set has no series".into()));
    }
    let mut params = ConvexNetParams::<T>::random(opts.m, &mut rng_for(opts.seed, 0))?;
    let mut optim = OptimState::new(opts.optimizer, T::of(opts.learning_rate), &params);
    let mut shuffle = rng_for(opts.seed, 1);
    let inputs: Vec<Vec<T>> = data.series.iter().map(|s| s.y.iter().map(|v| T::of(*v)).collect()).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    let mut over = 0;
    for epoch in 0..opts.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for &i in &order {
            let (loss, grads) = loss_and_grad(&params, &inputs[i], &data.series[i].labels)?;
            if !loss.is_finite() {
                epoch_losses.push(f64::NAN);
                return Err(Error::TrainingFailed { epoch, reason: "non-finite loss".into(), epoch_losses });
            }
            total += loss;
            optim.step(&mut params, &grads)?;
            params.project();
        }
        let mean = total / data.len() as f64;
        epoch_losses.push(mean);
        if mean > crate::tensornet::DIVERGENCE_FACTOR * epoch_losses[0] {
            over += 1;
            if over >= crate::tensornet::DIVERGENCE_PATIENCE {
                return Err(Error::TrainingFailed { epoch, reason: "loss diverged".into(), epoch_losses });
            }
        } else {
            over = 0;
        }
    }
    params.validate().map_err(|e| Error::TrainingFailed {
        epoch: opts.epochs,
        reason: format!("projected weights are invalid: {e}"),
        epoch_losses: epoch_losses.clone(),
    })?;
    Ok(ConvexTrainOutcome { params, epoch_losses })
}
