use super::MleEstimate;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Left-point discretizations of the path integrals that enter the
/// likelihood of `dY = (mu - a Y) dt + dW` over a window of `n + 1` points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuIntegrals<T> {
    /// `n dt`.
    pub horizon: T,
    /// `sum y_i dt`.
    pub int_y_dt: T,
    /// `sum y_i^2 dt`.
    pub int_y2_dt: T,
    /// `sum (y_{i+1} - y_i)`, equal to `Y_T - Y_0`.
    pub int_dy: T,
    /// `sum y_i (y_{i+1} - y_i)`, the Ito integral of `Y dY`.
    pub int_y_dy: T,
}

impl<T: Scalar> OuIntegrals<T> {
    pub fn from_window(y: &[T], dt: T) -> Self {
        let mut s = Self { horizon: T::zero(), int_y_dt: T::zero(), int_y2_dt: T::zero(), int_dy: T::zero(), int_y_dy: T::zero() };
        for w in y.windows(2) {
            let (a, b) = (w[0], w[1]);
            s.horizon += dt;
            s.int_y_dt += a * dt;
            s.int_y2_dt += a * a * dt;
            s.int_dy += b - a;
            s.int_y_dy += a * (b - a);
        }
        s
    }

    /// Gram matrix of the drift basis `(1, -y)`:
    /// `[[T, -int y dt], [-int y dt, int y^2 dt]]`, row-major.
    pub fn gram(&self) -> [[T; 2]; 2] {
        [[self.horizon, -self.int_y_dt], [-self.int_y_dt, self.int_y2_dt]]
    }

    /// `(int y dt)^2 - T int y^2 dt`; negative unless the path is constant.
    pub fn denominator(&self) -> T {
        self.int_y_dt * self.int_y_dt - self.horizon * self.int_y2_dt
    }
}

/// Maximum-likelihood `(mu, a)` for unit diffusion, from the two-parameter
/// drift formula with basis `alpha_1 = 1`, `alpha_2 = -y`:
///
/// `mu = (I_Y(a2) I_t(a1 a2) - I_Y(a1) I_t(a2^2)) / D`,
/// `a  = (I_Y(a1) I_t(a1 a2) - I_Y(a2) I_t(a1^2)) / D`,
/// `D  = I_t(a1 a2)^2 - I_t(a1^2) I_t(a2^2)`.
///
/// The stochastic integrals stay as discrete sums rather than their Ito-lemma
/// closed forms, so the window's `Y_0` enters exactly as observed.
///
/// Biases are the plug-in versions of
/// `E[((int Y dW)(int Y dt) - W_T int Y^2 dt) / D]` and
/// `E[(T int Y dW - W_T int Y dt) / D]` with `dW` replaced by the residual
/// increments of the fitted drift on this single path.
pub fn oue_estimate<T: Scalar>(y: &[T], dt: T) -> Result<MleEstimate<T>> {
    if y.len() < 10 {
        return Err(Error::DegenerateWindow(format!("OU estimate needs at least 10 points, got {}", y.len())));
    }
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in window".into()));
    }
    let ig = OuIntegrals::from_window(y, dt);
    let den = ig.denominator();
    // relative test: the Cauchy-Schwarz gap vanishes only on constant paths
    let scale = ig.horizon * ig.int_y2_dt;
    if den.abs() <= T::of(1e-12) * scale.abs() || den == T::zero() {
        return Err(Error::DegenerateWindow("constant window: likelihood is flat in (mu, a)".into()));
    }
    let i_y1 = ig.int_dy;
    let i_y2 = -ig.int_y_dy;
    let i_t12 = -ig.int_y_dt;
    let i_t11 = ig.horizon;
    let i_t22 = ig.int_y2_dt;
    let mu_hat = (i_y2 * i_t12 - i_y1 * i_t22) / den;
    let a_hat = (i_y1 * i_t12 - i_y2 * i_t11) / den;

    // residual increments of the fitted drift
    let mut w_t = T::zero();
    let mut int_y_dw = T::zero();
    for w in y.windows(2) {
        let dw = (w[1] - w[0]) - (mu_hat - a_hat * w[0]) * dt;
        w_t += dw;
        int_y_dw += w[0] * dw;
    }
    let bias_mu = (int_y_dw * ig.int_y_dt - w_t * ig.int_y2_dt) / den;
    let bias_a = (ig.horizon * int_y_dw - w_t * ig.int_y_dt) / den;
    // inverse Fisher information for mu at unit diffusion
    let var_mu = (i_t22 / -den).max(T::zero());
    Ok(MleEstimate { mu_hat, a_hat: Some(a_hat), bias_mu, bias_a, var_mu })
}
