use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::label::{ProbTriple, TrendLabel};
use crate::rng::rng_for;
use crate::simgen::{log_returns, Dataset};

const ROW_TOL: f64 = 1e-12;
const MIN_VAR: f64 = 1e-12;
const MAX_RESTARTS: usize = 5;

/// Gaussian-emission hidden Markov model on log-returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
}

impl HmmModel {
    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n == 0 {
            return Err(Error::Shape("hmm with no states".into()));
        }
        if self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("hmm transition must be {n}x{n}")));
        }
        if self.means.len() != n || self.vars.len() != n {
            return Err(Error::Shape(format!("hmm needs {n} means and variances")));
        }
        let stochastic = |r: &[f64]| r.iter().all(|p| *p >= 0.0 && p.is_finite()) && (r.iter().sum::<f64>() - 1.0).abs() <= ROW_TOL;
        if !stochastic(&self.initial) {
            return config_err("hmm initial distribution must be a probability vector");
        }
        if let Some(i) = self.transition.iter().position(|r| !stochastic(r)) {
            return config_err(format!("hmm transition row {i} is not a probability vector"));
        }
        if self.vars.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.means.iter().any(|m| !m.is_finite()) {
            return config_err("hmm variances must be positive and means finite");
        }
        Ok(())
    }

    /// State indices ordered by increasing mean.
    pub fn order_by_mean(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_states()).collect();
        idx.sort_by(|a, b| self.means[*a].total_cmp(&self.means[*b]).then(a.cmp(b)));
        idx
    }

    /// Whether sorted means read as negative / near zero / positive: the lowest
    /// below zero, the highest above zero.
    pub fn means_separated(&self) -> bool {
        let o = self.order_by_mean();
        self.n_states() == 3 && self.means[o[0]] < 0.0 && self.means[o[2]] > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmOptions {
    pub n_states: usize,
    pub max_iters: usize,
    /// Stop once the log-likelihood gains less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for HmmOptions {
    fn default() -> Self {
        Self { n_states: 3, max_iters: 200, tol: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmmFit {
    pub model: HmmModel,
    /// Total log-likelihood before each update; the last entry belongs to `model`.
    pub log_likelihoods: Vec<f64>,
    pub restarts: usize,
    pub converged: bool,
}

struct Pass {
    log_likelihood: f64,
    /// Posterior state probabilities, `len x n`.
    gamma: Vec<Vec<f64>>,
    /// Sum over steps of the pairwise posteriors.
    xi_sum: Vec<Vec<f64>>,
}

fn log_emission(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// Scaled forward-backward. Emissions are shifted by their per-step maximum
/// in log space before exponentiating, so nothing underflows on long or
/// far-out-of-model sequences.
fn forward_backward(m: &HmmModel, x: &[f64], want_xi: bool) -> Pass {
    let n = m.n_states();
    let len = x.len();
    let mut b = vec![vec![0.0; n]; len];
    let mut log_shift = 0.0;
    for (t, xt) in x.iter().enumerate() {
        let logs: Vec<f64> = (0..n).map(|j| log_emission(*xt, m.means[j], m.vars[j])).collect();
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_shift += mx;
        for j in 0..n {
            b[t][j] = (logs[j] - mx).exp();
        }
    }
    let mut alpha = vec![vec![0.0; n]; len];
    let mut c = vec![0.0; len];
    for t in 0..len {
        for j in 0..n {
            let prior = if t == 0 {
                m.initial[j]
            } else {
                (0..n).map(|i| alpha[t - 1][i] * m.transition[i][j]).sum()
            };
            alpha[t][j] = prior * b[t][j];
        }
        let mut s = alpha[t].iter().sum::<f64>();
        if !(s > 0.0) {
            // the observation is impossible under the model's zero-probability
            // transitions; restart the filter from the emissions alone
            alpha[t].copy_from_slice(&b[t]);
            s = alpha[t].iter().sum::<f64>();
        }
        c[t] = s.max(f64::MIN_POSITIVE);
        alpha[t].iter_mut().for_each(|a| *a /= c[t]);
    }
    let mut beta = vec![vec![1.0; n]; len];
    for t in (0..len.saturating_sub(1)).rev() {
        for i in 0..n {
            beta[t][i] = (0..n).map(|j| m.transition[i][j] * b[t + 1][j] * beta[t + 1][j]).sum::<f64>() / c[t + 1];
        }
        if !(beta[t].iter().sum::<f64>() > 0.0) {
            beta[t].iter_mut().for_each(|v| *v = 1.0);
        }
    }
    let mut gamma = vec![vec![0.0; n]; len];
    for t in 0..len {
        let s: f64 = (0..n).map(|i| alpha[t][i] * beta[t][i]).sum();
        for i in 0..n {
            gamma[t][i] = if s > 0.0 { alpha[t][i] * beta[t][i] / s } else { alpha[t][i] };
        }
    }
    let mut xi_sum = vec![vec![0.0; n]; n];
    if want_xi {
        for t in 0..len.saturating_sub(1) {
            for i in 0..n {
                for j in 0..n {
                    xi_sum[i][j] += alpha[t][i] * m.transition[i][j] * b[t + 1][j] * beta[t + 1][j] / c[t + 1];
                }
            }
        }
    }
    let log_likelihood = c.iter().map(|v| v.ln()).sum::<f64>() + log_shift;
    Pass { log_likelihood, gamma, xi_sum }
}

fn initial_model<R: Rng>(pooled: &[f64], n: usize, rng: &mut R) -> HmmModel {
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let var = pooled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / pooled.len() as f64;
    let sd = var.sqrt();
    let means = (0..n)
        .map(|k| {
            let q = (k as f64 + 0.5) / n as f64;
            let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
            sorted[idx] + 0.1 * sd * (2.0 * rng.random::<f64>() - 1.0)
        })
        .collect();
    let transition = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| if i == j { 0.9 } else { 0.1 / (n - 1).max(1) as f64 } * (0.9 + 0.2 * rng.random::<f64>())).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            row
        })
        .collect();
    HmmModel { initial: vec![1.0 / n as f64; n], transition, means, vars: vec![var; n] }
}

/// One Baum-Welch update from the per-sequence passes, reduced in sequence order.
fn m_step(passes: &[Pass], seqs: &[Vec<f64>], n: usize) -> Option<HmmModel> {
    let mut initial = vec![0.0; n];
    let mut trans = vec![vec![0.0; n]; n];
    let mut w = vec![0.0; n];
    let mut wx = vec![0.0; n];
    for (p, x) in passes.iter().zip(seqs) {
        for i in 0..n {
            initial[i] += p.gamma[0][i];
            for j in 0..n {
                trans[i][j] += p.xi_sum[i][j];
            }
        }
        for (g, xt) in p.gamma.iter().zip(x) {
            for i in 0..n {
                w[i] += g[i];
                wx[i] += g[i] * xt;
            }
        }
    }
    let means: Vec<f64> = (0..n).map(|i| wx[i] / w[i]).collect();
    let mut wvar = vec![0.0; n];
    for (p, x) in passes.iter().zip(seqs) {
        for (g, xt) in p.gamma.iter().zip(x) {
            for i in 0..n {
                wvar[i] += g[i] * (xt - means[i]) * (xt - means[i]);
            }
        }
    }
    let vars: Vec<f64> = (0..n).map(|i| wvar[i] / w[i]).collect();
    if vars.iter().chain(&means).any(|v| !v.is_finite()) || vars.iter().any(|v| *v < MIN_VAR) {
        return None;
    }
    let s0: f64 = initial.iter().sum();
    initial.iter_mut().for_each(|p| *p /= s0);
    for (i, row) in trans.iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p /= s);
        } else {
            row.iter_mut().enumerate().for_each(|(j, p)| *p = if i == j { 1.0 } else { 0.0 });
        }
    }
    Some(HmmModel { initial, transition: trans, means, vars })
}

/// Baum-Welch on several return sequences at once. A variance collapsing below
/// 1e-12 triggers a restart from a re-seeded initialization, at most five times.
pub fn hmm_fit_returns(seqs: &[Vec<f64>], opts: &HmmOptions) -> Result<HmmFit> {
    if opts.n_states == 0 {
        return config_err("hmm needs at least one state");
    }
    let seqs: Vec<Vec<f64>> = seqs.iter().filter(|s| !s.is_empty()).cloned().collect();
    if seqs.is_empty() {
        return Err(Error::Empty("no returns to fit".into()));
    }
    if seqs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite return".into()));
    }
    let pooled: Vec<f64> = seqs.iter().flatten().copied().collect();
    'restart: for restart in 0..=MAX_RESTARTS {
        let mut model = initial_model(&pooled, opts.n_states, &mut rng_for(opts.seed, restart as u64));
        if model.vars[0] < MIN_VAR {
            return Err(Error::Input("returns have (almost) no variance".into()));
        }
        let mut lls = Vec::new();
        for _ in 0..opts.max_iters.max(1) {
            let passes: Vec<Pass> = seqs.par_iter().map(|x| forward_backward(&model, x, true)).collect();
            let ll: f64 = passes.iter().map(|p| p.log_likelihood).sum();
            let gained = lls.last().map(|prev| ll - prev);
            lls.push(ll);
            if gained.is_some_and(|g| g < opts.tol) {
                return Ok(HmmFit { model, log_likelihoods: lls, restarts: restart, converged: true });
            }
            match m_step(&passes, &seqs, opts.n_states) {
                Some(next) => model = next,
                None => {
                    log::warn!("hmm variance collapsed, restarting ({})", restart + 1);
                    continue 'restart;
                }
            }
        }
        let ll: f64 = seqs.par_iter().map(|x| forward_backward(&model, x, false).log_likelihood).collect::<Vec<_>>().iter().sum();
        lls.push(ll);
        return Ok(HmmFit { model, log_likelihoods: lls, restarts: restart, converged: false });
    }
    Err(Error::TrainingFailed {
        epoch: 0,
        reason: format!("hmm variance collapsed after {MAX_RESTARTS} restarts"),
        epoch_losses: Vec::new(),
    })
}

/// Fit on the log-returns of every series in `data`.
pub fn hmm_fit(data: &Dataset, opts: &HmmOptions) -> Result<HmmFit> {
    let seqs = data.series.iter().map(|s| log_returns(&s.y)).collect::<Result<Vec<_>>>()?;
    hmm_fit_returns(&seqs, opts)
}

/// Posterior state probabilities of every step of `y`. Step 0 has no return
/// and reuses the posterior of step 1.
pub fn hmm_posteriors(model: &HmmModel, y: &[f64]) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    if y.len() < 2 {
        return Err(Error::Input("hmm decoding needs at least two prices".into()));
    }
    let r = log_returns(y)?;
    let mut g = forward_backward(model, &r, false).gamma;
    g.insert(0, g[0].clone());
    Ok(g)
}

/// Posterior decoding with states mapped to (down, flat, up) by increasing
/// mean. Needs a three-state model.
pub fn hmm_classify(model: &HmmModel, y: &[f64]) -> Result<(Vec<TrendLabel>, Vec<ProbTriple<f64>>)> {
    if model.n_states() != 3 {
        return config_err(format!("trend decoding needs 3 states, model has {}", model.n_states()));
    }
    let order = model.order_by_mean();
    let post = hmm_posteriors(model, y)?;
    let probs: Vec<ProbTriple<f64>> = post.iter().map(|g| ProbTriple::from_array_unchecked([g[order[0]], g[order[1]], g[order[2]]])).collect();
    let labels = probs.iter().map(ProbTriple::label).collect();
    Ok((labels, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;

    fn iid(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, 9);
        (0..n).map(|_| mean + sd * standard_normal(&mut rng)).collect()
    }

    #[test]
    fn one_state_fit_is_the_sample_moments() {
        let x = iid(2000, 0.3, 2.0, 1);
        let fit = hmm_fit_returns(std::slice::from_ref(&x), &HmmOptions { n_states: 1, ..HmmOptions::default() }).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / x.len() as f64;
        assert!((fit.model.means[0] - m).abs() < 1e-10);
        assert!((fit.model.vars[0] / v - 1.0).abs() < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn posteriors_normalize_on_long_sequences() {
        let x = iid(100_000, 0.0, 1.0, 2);
        let model = HmmModel {
            initial: vec![0.2, 0.5, 0.3],
            transition: vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]],
            means: vec![-1.0, 0.0, 1.0],
            vars: vec![0.5, 0.5, 0.5],
        };
        let p = forward_backward(&model, &x, false);
        assert!(p.log_likelihood.is_finite());
        assert!(p.gamma.iter().all(|g| (g.iter().sum::<f64>() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn invalid_inputs() {
        assert!(hmm_fit_returns(&[], &HmmOptions::default()).is_err());
        assert!(hmm_fit_returns(&[vec![0.0; 50]], &HmmOptions::default()).is_err());
        let bad = HmmModel { initial: vec![0.5, 0.6], transition: vec![vec![1.0, 0.0]; 2], means: vec![0.0; 2], vars: vec![1.0; 2] };
        assert!(bad.validate().is_err());
    }
}
