#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use trendlab_core::classical::*;
use trendlab_core::evalkit::{ols_fit, DesignMatrix};
use trendlab_core::rng::{rng_for, standard_normal};
use trendlab_core::simgen::*;
use trendlab_core::tensornet::{Matrix, OptimizerKind};
use trendlab_core::TrendLabel;

fn params(m: usize, seed: u64) -> ConvexNet {
    ConvexNet::random(m, &mut rng_for(seed, 0)).unwrap()
}

use trendlab_core::ConvexNet;

fn sup_norm(h: &[f64]) -> f64 {
    h.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Stationary covariance of `h_t = W h_{t-1} + w y_t` under unit white-noise
/// input, from iterating `P <- W P W' + w w'`.
fn stationary_sd(p: &ConvexNet) -> f64 {
    let m = p.dim();
    let mut cov = vec![vec![0.0; m]; m];
    for _ in 0..20_000 {
        let mut next = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in 0..m {
                let mut s = p.w_ih[i] * p.w_ih[j];
                for k in 0..m {
                    for l in 0..m {
                        s += p.w_hh.get(i, k) * cov[k][l] * p.w_hh.get(j, l);
                    }
                }
                next[i][j] = s;
            }
        }
        cov = next;
    }
    (0..m).map(|i| cov[i][i].sqrt()).fold(0.0, f64::max)
}

#[test]
fn constant_input_reaches_the_linear_fixed_point() {
    let p = params(5, 1);
    let y = vec![2.5; 10_000];
    let out = convex_forward(&p, &y).unwrap();
    let last = out.states.last().unwrap();
    // independent oracle: solve (I - W) h = c w by Gaussian elimination
    let m = p.dim();
    let mut a: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 } - p.w_hh.get(i, j)).chain([2.5 * p.w_ih[i]]).collect()).collect();
    for c in 0..m {
        let piv = (c..m).max_by(|x, y| a[*x][c].abs().total_cmp(&a[*y][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    for i in 0..m {
        let h = a[i][m] / a[i][i];
        assert!((last[i] - h).abs() < 1e-8, "coord {i}: {} vs {h}", last[i]);
        assert!((h - 2.5).abs() < 1e-8);
    }
    assert_eq!(p.fixed_point(2.5), vec![2.5; m]);
}

#[test]
fn ramp_input_diverges() {
    let p = params(5, 2);
    let y: Vec<f64> = (0..10_000).map(|t| t as f64).collect();
    let out = convex_forward(&p, &y).unwrap();
    let h = out.states.last().unwrap();
    assert!(sup_norm(h) > 1e3);
    assert!(h.iter().all(|v| *v > 1e3), "every coordinate grows");
    // asymptotic slope of the sup norm is the input slope
    let slope = (sup_norm(&out.states[9_999]) - sup_norm(&out.states[8_999])) / 1000.0;
    let wmin = p.w_ih.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(slope >= 0.8 * wmin && (slope - 1.0).abs() < 0.2, "slope {slope}");
}

#[test]
fn white_noise_input_stays_bounded_without_drift() {
    let p = params(5, 3);
    let mut rng = rng_for(3, 1);
    let y: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
    let out = convex_forward(&p, &y).unwrap();
    let norms: Vec<f64> = out.states.iter().map(|h| sup_norm(h)).collect();
    let bound = 10.0 * stationary_sd(&p);
    let peak = norms.iter().copied().fold(0.0, f64::max);
    assert!(peak < bound, "peak {peak} bound {bound}");
    // block means regressed on block index: slope not significant
    let blocks: Vec<f64> = norms.chunks(1000).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let design = DesignMatrix {
        names: vec!["intercept".into(), "block".into()],
        rows: (0..blocks.len()).map(|i| vec![1.0, i as f64]).collect(),
    };
    let fit = ols_fit(&design, &blocks).unwrap();
    assert!(fit.p_values[1] > 0.01, "drift p-value {}", fit.p_values[1]);
}

#[test]
fn training_keeps_the_stochastic_constraint() {
    let data = make_dataset(&DatasetSpec::training(DynamicChoice::NoisyLine).with_count(10), 1).unwrap();
    for optimizer in [OptimizerKind::Adam, OptimizerKind::Rmsprop] {
        let opts = ConvexTrainOptions { epochs: 3, optimizer, ..ConvexTrainOptions::default() };
        let out = convex_train::<f64>(&data, &opts).unwrap();
        let p = &out.params;
        for i in 0..p.dim() {
            let row: f64 = (0..p.dim()).map(|j| p.w_hh.get(i, j)).sum::<f64>() + p.w_ih[i];
            assert!((row - 1.0).abs() < 1e-12);
            assert!((0..p.dim()).all(|j| p.w_hh.get(i, j) >= 0.0) && p.w_ih[i] >= 0.0);
        }
        assert_eq!(out.epoch_losses.len(), 3);
        assert!(spectral_radius(&p.w_hh) < 1.0);
    }
}

#[test]
fn spectral_radius_matches_eigenvalues_of_a_triangular_matrix() {
    let w = Matrix::from_vec(3, 3, vec![0.5, 0.2, 0.1, 0.0, 0.7, 0.2, 0.0, 0.0, 0.3]).unwrap();
    assert!((spectral_radius(&w) - 0.7).abs() < 1e-9);
}

#[test]
fn ma_search_beats_or_ties_the_default_on_its_own_set() {
    let data = make_dataset(&DatasetSpec::training(DynamicChoice::Mixed).with_count(30), 8).unwrap();
    let grid = MaGrid::default();
    let found = ma_grid_search(&data, &grid).unwrap();
    let mut default_losses: Vec<f64> = data
        .series
        .iter()
        .map(|s| trendlab_core::evalkit::series_loss(&ma_classify(&MaConfig::default(), &s.y).unwrap(), &s.labels).unwrap())
        .collect();
    let default_median = trendlab_core::evalkit::quantile(&mut default_losses, 0.5);
    assert!(found.median_loss <= default_median + 1e-12 || !grid.candidates().contains(&MaConfig::default()));
    assert!(found.best.mu_fast < found.best.mu_slow);
}

#[test]
fn ma_probabilities_agree_with_labels() {
    let s = GenConfig::training().generate(Dynamic::NoisyLine, 6).unwrap();
    let labels = ma_classify(&MaConfig::default(), &s.y).unwrap();
    let probs = ma_probabilities(&MaConfig::default(), &s.y).unwrap();
    assert!(labels.iter().zip(&probs).all(|(l, p)| p.label() == *l));
    assert!(dummy_probabilities::<f64>(10, 1).iter().all(|p| (p.sum() - 1.0).abs() < 1e-12));
    assert_ne!(dummy_classify(200, 1), vec![TrendLabel::Flat; 200]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ma_labels_ignore_level_shifts_and_negate_on_flips(
        y in prop::collection::vec(-50.0f64..50.0, 2..80),
        shift in -1e3f64..1e3,
    ) {
        let cfg = MaConfig::default();
        let base = ma_classify(&cfg, &y).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        // shifting changes rounding only; compare away from the band edges
        let (mut s, mut f) = (y[0], y[0]);
        for (k, v) in y.iter().enumerate() {
            s = cfg.mu_slow * s + (1.0 - cfg.mu_slow) * v;
            f = cfg.mu_fast * f + (1.0 - cfg.mu_fast) * v;
            if ((f - s).abs() - cfg.epsilon).abs() > 1e-6 {
                prop_assert_eq!(ma_classify(&cfg, &shifted).unwrap()[k], base[k]);
            }
        }
        let neg = ma_classify(&cfg, &flipped).unwrap();
        prop_assert!(neg.iter().zip(&base).all(|(a, b)| *a == b.negate()));
    }

    #[test]
    fn projection_yields_stochastic_rows(row in prop::collection::vec(-3.0f64..3.0, 1..10)) {
        let mut r = row.clone();
        project_stochastic_row(&mut r);
        prop_assert!(r.iter().all(|v| *v >= 0.0));
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
