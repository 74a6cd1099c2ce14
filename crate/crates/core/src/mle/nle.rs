use super::MleEstimate;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slope through the first point of the window:
/// `sum (t_i - t_0)(y_i - y_0) / sum (t_i - t_0)^2`.
///
/// `var_mu` is a plug-in variance. The noise level comes from the residuals of
/// an ordinary line fit (intercept free), and since the anchor `y_0` is itself
/// noisy the variance carries both terms: `s^2 (1/S + (sum tau)^2 / S^2)` with
/// `tau_i = t_i - t_0`, `S = sum tau^2`.
pub fn nle_slope<T: Scalar>(y: &[T], t: &[T]) -> Result<MleEstimate<T>> {
    if y.len() != t.len() {
        return Err(Error::LengthMismatch { expected: t.len(), got: y.len() });
    }
    if y.len() < 2 {
        return Err(Error::DegenerateWindow(format!("slope needs at least 2 points, got {}", y.len())));
    }
    if y.iter().chain(t).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in window".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("window times must be strictly increasing".into()));
    }
    let (t0, y0) = (t[0], y[0]);
    let mut s_tt = T::zero();
    let mut s_ty = T::zero();
    let mut s_t = T::zero();
    for (ti, yi) in t.iter().zip(y).skip(1) {
        let tau = *ti - t0;
        s_tt += tau * tau;
        s_ty += tau * (*yi - y0);
        s_t += tau;
    }
    if s_tt <= T::zero() {
        return Err(Error::DegenerateWindow("all window times coincide with the anchor".into()));
    }
    let mu_hat = s_ty / s_tt;

    let n = y.len();
    let sigma2 = if n > 2 { ols_residual_variance(y, t) } else { T::zero() };
    let var_mu = sigma2 * (T::one() / s_tt + s_t * s_t / (s_tt * s_tt));
    Ok(MleEstimate { mu_hat, a_hat: None, bias_mu: T::zero(), bias_a: T::zero(), var_mu })
}

/// Residual variance of the intercept-and-slope least-squares line, `n - 2` dof.
fn ols_residual_variance<T: Scalar>(y: &[T], t: &[T]) -> T {
    let n = T::of(y.len() as f64);
    let mt = t.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (ti, yi) in t.iter().zip(y) {
        sxx += (*ti - mt) * (*ti - mt);
        sxy += (*ti - mt) * (*yi - my);
    }
    let b = sxy / sxx;
    let rss: T = t.iter().zip(y).map(|(ti, yi)| {
        let r = *yi - my - b * (*ti - mt);
        r * r
    }).sum();
    (rss / (n - T::of(2.0))).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_line_and_constant() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let e = nle_slope(&[0.0, 1.0, 2.0, 3.0], &t).unwrap();
        assert_eq!(e.mu_hat, 1.0);
        assert_eq!(e.var_mu, 0.0);
        assert_eq!(nle_slope(&[5.0; 4], &t).unwrap().mu_hat, 0.0);
    }

    #[test]
    fn affine_equivariance() {
        let t: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|x| (x * 1.3).sin() + 0.2 * x).collect();
        let base = nle_slope(&y, &t).unwrap().mu_hat;
        let z: Vec<f64> = y.iter().map(|v| 2.5 * v - 7.0).collect();
        assert!((nle_slope(&z, &t).unwrap().mu_hat - 2.5 * base).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(nle_slope(&[1.0], &[0.0]).is_err());
        assert!(nle_slope(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(nle_slope(&[1.0, f64::NAN], &[0.0, 1.0]).is_err());
    }
}
