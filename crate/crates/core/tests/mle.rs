use trendlab_core::evalkit::quantile;
use trendlab_core::mle::*;
use trendlab_core::rng::{rng_for, standard_normal};
use trendlab_core::TrendLabel;

/// Exact OU transition: `y' = y e^{-a dt} + (mu/a)(1 - e^{-a dt}) + sqrt((1 - e^{-2 a dt}) / (2a)) xi`.
fn ou_path(mu: f64, a: f64, y0: f64, dt: f64, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 0);
    let e = (-a * dt).exp();
    let sd = ((1.0 - (-2.0 * a * dt).exp()) / (2.0 * a)).sqrt();
    let mut y = Vec::with_capacity(steps + 1);
    y.push(y0);
    for _ in 0..steps {
        let last = *y.last().unwrap();
        y.push(last * e + mu / a * (1.0 - e) + sd * standard_normal(&mut rng));
    }
    y
}

fn brownian(dt: f64, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 1);
    let mut y = vec![0.0];
    for _ in 0..steps {
        let last = *y.last().unwrap();
        y.push(last + dt.sqrt() * standard_normal(&mut rng));
    }
    y
}

#[test]
fn nle_variance_law_on_noiseless_anchor_windows() {
    // the noisy-line model: known anchor y_0, then y_i = y_0 + mu i + sigma eps_i
    let (n, mu, sigma, reps) = (100usize, 0.3, 1.0, 10_000usize);
    let t: Vec<f64> = (0..=n).map(|i| i as f64).collect();
    let mut rng = rng_for(2024, 0);
    let mut est = Vec::with_capacity(reps);
    for _ in 0..reps {
        let y: Vec<f64> = t.iter().enumerate().map(|(i, ti)| if i == 0 { 0.0 } else { mu * ti + sigma * standard_normal(&mut rng) }).collect();
        est.push(nle_slope(&y, &t).unwrap().mu_hat);
    }
    let m = est.iter().sum::<f64>() / reps as f64;
    let v = est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let nf = n as f64;
    let law = 6.0 * sigma * sigma / (nf * (nf + 1.0) * (2.0 * nf + 1.0));
    assert!((v / law - 1.0).abs() < 0.05, "var {v} vs {law}");
    assert!((m - mu).abs() < 3.0 * (v / reps as f64).sqrt(), "mean {m}");
}

#[test]
fn nle_reported_variance_matches_noisy_anchor_windows() {
    // when the first point is noisy too, the reported var_mu includes the anchor term
    let (n, reps) = (60usize, 4000usize);
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut rng = rng_for(7, 0);
    let mut est = Vec::new();
    let mut reported = 0.0;
    for _ in 0..reps {
        let y: Vec<f64> = t.iter().map(|ti| 0.1 * ti + standard_normal(&mut rng)).collect();
        let e = nle_slope(&y, &t).unwrap();
        est.push(e.mu_hat);
        reported += e.var_mu / reps as f64;
    }
    let m = est.iter().sum::<f64>() / reps as f64;
    let v = est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    assert!((v / reported - 1.0).abs() < 0.08, "empirical {v}, reported {reported}");
}

#[test]
fn ou_estimator_recovers_drift_and_pull() {
    let (mu, a, dt, steps) = (1.0, 0.5, 0.1, 5000);
    let paths = 300;
    let (mut sm, mut sa) = (0.0, 0.0);
    for p in 0..paths {
        let y = ou_path(mu, a, mu / a, dt, steps, 100 + p);
        let e = oue_estimate(&y, dt).unwrap();
        sm += (e.mu_hat - e.bias_mu) / paths as f64;
        sa += (e.a_hat.unwrap() - e.bias_a) / paths as f64;
    }
    assert!((sm - mu).abs() < 0.1, "mu {sm}");
    assert!((sa - a).abs() < 0.1, "a {sa}");
}

#[test]
fn driftless_brownian_gives_small_drift_at_the_window_end() {
    // the classifier reads the drift at the window's last value; the drift at
    // the path's origin has a wider, unit-root spread and is not bounded here
    let (dt, steps) = (0.1, 1000);
    let horizon = dt * steps as f64;
    let mut abs_mu: Vec<f64> = (0..1000)
        .map(|p| {
            let y = brownian(dt, steps, p);
            let last = y[steps];
            let centred: Vec<f64> = y.iter().map(|v| v - last).collect();
            oue_estimate(&centred, dt).unwrap().mu_hat.abs()
        })
        .collect();
    let med = quantile(&mut abs_mu, 0.5);
    assert!(med < 2.0 / horizon.sqrt(), "median |mu| {med}");
}

#[test]
fn ito_gap_halves_with_the_time_step() {
    // -sum y dY - (T - Y_T^2 + Y_0^2)/2 = (sum dY^2 - T)/2, whose mean under a
    // stationary OU with unit diffusion is (T/dt (1 - e^{-a dt})/a - T)/2
    let (a, horizon, paths): (f64, f64, u64) = (2.0, 200.0, 300);
    let mut mean_gap = [0.0; 2];
    for (k, dt) in [0.1, 0.05].into_iter().enumerate() {
        let steps = (horizon / dt) as usize;
        for p in 0..paths {
            let mut rng = rng_for(900 + p, 5);
            let y0 = standard_normal(&mut rng) / (2.0 * a).sqrt();
            let y = ou_path(0.0, a, y0, dt, steps, 5000 + p);
            let ig = OuIntegrals::from_window(&y, dt);
            let closed = 0.5 * (ig.horizon - y[steps] * y[steps] + y[0] * y[0]);
            mean_gap[k] += (-ig.int_y_dy - closed) / paths as f64;
        }
        let theory = 0.5 * (horizon / dt * (1.0 - (-a * dt).exp()) / a - horizon);
        assert!((mean_gap[k] / theory - 1.0).abs() < 0.1, "dt {dt}: {} vs {theory}", mean_gap[k]);
    }
    let ratio = mean_gap[1] / mean_gap[0];
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn gram_matrix_is_positive_definite_on_simulated_windows() {
    for p in 0..200 {
        let y = ou_path(0.3, 1.0 + p as f64 * 0.01, 0.5, 0.05, 40, p);
        let ig = OuIntegrals::from_window(&y, 0.05);
        if oue_estimate(&y, 0.05).is_err() {
            continue;
        }
        let [[g11, g12], [g21, g22]] = ig.gram();
        assert!(g11 * g22 - g12 * g21 > 0.0 && g11 + g22 > 0.0, "path {p}");
    }
}

#[test]
fn pure_noise_is_mostly_flat_under_standard_error_threshold() {
    let cfg = SlidingWindowConfig { eta: 50, epsilon: 3.0, stride: 1, epsilon_mode: EpsilonMode::StdErr };
    let n = 200;
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (mut flat, mut total) = (0usize, 0usize);
    for s in 0..1000 {
        let mut rng = rng_for(s, 3);
        let y: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let labels = mle_classify(&y, &t, Estimator::Nle, &cfg).unwrap();
        // only steps that actually carry an estimate
        flat += labels[cfg.eta - 1..].iter().filter(|l| **l == TrendLabel::Flat).count();
        total += n - cfg.eta + 1;
    }
    let frac = flat as f64 / total as f64;
    assert!(frac >= 0.95, "flat fraction {frac}");
}

#[test]
fn oue_classifier_reads_direction_of_pull() {
    // far below the attractor the drift points up, far above it points down
    let cfg = SlidingWindowConfig::new(60, 0.0);
    let dt = 0.05;
    let up = ou_path(5.0, 1.0, -10.0, dt, 80, 1);
    let down = ou_path(5.0, 1.0, 20.0, dt, 80, 2);
    let t: Vec<f64> = (0..=80).map(|i| i as f64 * dt).collect();
    let lu = mle_classify(&up, &t, Estimator::Oue, &cfg).unwrap();
    let ld = mle_classify(&down, &t, Estimator::Oue, &cfg).unwrap();
    assert_eq!(lu[59], TrendLabel::Up);
    assert_eq!(ld[59], TrendLabel::Down);
}

#[test]
fn f32_and_f64_estimates_agree() {
    let y = ou_path(1.0, 0.5, 2.0, 0.1, 400, 3);
    let y32: Vec<f32> = y.iter().map(|v| *v as f32).collect();
    let a = oue_estimate(&y, 0.1).unwrap();
    let b = oue_estimate(&y32, 0.1f32).unwrap();
    assert!((a.mu_hat - b.mu_hat as f64).abs() < 1e-2 * a.mu_hat.abs().max(1.0));
    let t: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
    let t32: Vec<f32> = t.iter().map(|v| *v as f32).collect();
    let c = nle_slope(&y, &t).unwrap();
    let d = nle_slope(&y32, &t32).unwrap();
    assert!((c.mu_hat - d.mu_hat as f64).abs() < 1e-4);
}
