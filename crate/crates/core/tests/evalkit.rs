use proptest::prelude::*;
use trendlab_core::classical::dummy_classify;
use trendlab_core::evalkit::*;
use trendlab_core::rng::{rng_for, standard_normal};
use trendlab_core::simgen::*;
use trendlab_core::{ProbTriple, TrendLabel};

fn normals(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 0);
    (0..n).map(|_| mean + sd * standard_normal(&mut rng)).collect()
}

#[test]
fn bootstrap_coverage_on_same_distribution() {
    let reps = 500;
    let covered = (0..reps)
        .filter(|&r| {
            let a = normals(60, 0.0, 1.0, 2 * r);
            let b = normals(60, 0.0, 1.0, 2 * r + 1);
            bootstrap_median_diff(&a, &b, 0.99, 2000, r).unwrap().contains(0.0)
        })
        .count();
    let cov = covered as f64 / reps as f64;
    assert!(cov >= 0.97, "coverage {cov}");
}

#[test]
fn bootstrap_detects_a_real_shift_and_mirrors_on_swap() {
    let a = normals(300, 0.0, 1.0, 1);
    let b = normals(300, 1.0, 1.0, 2);
    let ab = bootstrap_median_diff(&a, &b, 0.99, 4000, 9).unwrap();
    let ba = bootstrap_median_diff(&b, &a, 0.99, 4000, 9).unwrap();
    assert!(ab.ci_high < 0.0 && !ab.contains(0.0));
    assert_eq!(ab.point_diff, -ba.point_diff);
    // percentile interpolation of the negated statistics may round differently
    assert!((ab.ci_low + ba.ci_high).abs() < 1e-12);
    assert!((ab.ci_high + ba.ci_low).abs() < 1e-12);
}

fn planted_rows(n: usize, noise: f64, seed: u64) -> (Vec<String>, Vec<CategoricalRow>, Vec<(String, f64)>) {
    // loss = 0.4 + net effect + optimizer effect + dynamic effect + noise
    let features = vec!["net".to_string(), "opt".to_string(), "dyn".to_string()];
    let nets = [("gru", 0.0), ("lstm", 0.05), ("vanilla", 0.2)];
    let opts = [("adam", 0.0), ("rmsp", -0.03)];
    let dyns = [("ms", 0.0), ("nl", -0.1), ("ou", 0.07)];
    let mut rng = rng_for(seed, 4);
    let rows = (0..n)
        .map(|i| {
            let (nn, ne) = nets[i % 3];
            let (on, oe) = opts[(i / 3) % 2];
            let (dn, de) = dyns[(i / 7) % 3];
            CategoricalRow {
                y: 0.4 + ne + oe + de + noise * standard_normal(&mut rng),
                levels: vec![nn.into(), on.into(), dn.into()],
            }
        })
        .collect();
    let truth = vec![
        ("intercept".into(), 0.4),
        ("net=lstm".into(), 0.05),
        ("net=vanilla".into(), 0.2),
        ("opt=rmsp".into(), -0.03),
        ("dyn=nl".into(), -0.1),
        ("dyn=ou".into(), 0.07),
    ];
    (features, rows, truth)
}

#[test]
fn ols_recovers_planted_coefficients() {
    let (features, rows, truth) = planted_rows(10_000, 0.1, 3);
    let (design, y) = DesignMatrix::from_categorical(&features, &rows).unwrap();
    let fit = ols_fit(&design, &y).unwrap();
    assert_eq!(fit.names, truth.iter().map(|t| t.0.clone()).collect::<Vec<_>>());
    for (k, (name, beta)) in truth.iter().enumerate() {
        let z = (fit.coefficients[k] - beta) / fit.std_errors[k];
        assert!(z.abs() < 3.0, "{name}: {} vs {beta} (se {})", fit.coefficients[k], fit.std_errors[k]);
        assert!(fit.ci_low[k] <= fit.coefficients[k] && fit.coefficients[k] <= fit.ci_high[k]);
    }
    assert_eq!(fit.df, 10_000 - 6);
    // residuals are orthogonal to every design column
    for j in 0..design.n_cols() {
        let dot: f64 = design.rows.iter().zip(&fit.residuals).map(|(x, r)| x[j] * r).sum();
        assert!(dot.abs() < 1e-8, "column {j}: {dot}");
    }
}

#[test]
fn ols_is_exact_without_noise() {
    let (features, rows, truth) = planted_rows(500, 0.0, 5);
    let (design, y) = DesignMatrix::from_categorical(&features, &rows).unwrap();
    let fit = ols_fit(&design, &y).unwrap();
    for (k, (_, beta)) in truth.iter().enumerate() {
        assert!((fit.coefficients[k] - beta).abs() < 1e-10);
    }
}

#[test]
fn wasserstein_of_shifted_gaussians_is_the_shift() {
    let a = normals(10_000, 0.0, 1.0, 11);
    let b = normals(10_000, 1.0, 1.0, 12);
    assert!((wasserstein_1d(&a, &b) - 1.0).abs() < 0.05);
    // unequal sizes go through the quantile integral
    let c = normals(7_000, 1.0, 1.0, 13);
    assert!((wasserstein_1d(&a, &c) - 1.0).abs() < 0.05);
}

#[test]
fn dummy_floor_on_the_validation_set() {
    let data = make_dataset(&DatasetSpec::validation(), 0).unwrap();
    let mut total = 0.0;
    for (i, s) in data.series.iter().enumerate() {
        total += series_loss(&dummy_classify(s.len(), i as u64), &s.labels).unwrap();
    }
    let mean = total / data.len() as f64;
    assert!((mean - 2.0 / 3.0).abs() < 0.02, "mean loss {mean}");
}

#[test]
fn uniform_random_predictor_expectation() {
    let truth = vec![TrendLabel::Up; 50];
    let mean = (0..10_000).map(|s| series_loss(&dummy_classify(50, s), &truth).unwrap()).sum::<f64>() / 10_000.0;
    assert!((mean - 2.0 / 3.0).abs() < 0.01);
}

#[test]
fn calibration_finds_a_config_near_the_noise_floor() {
    let truth = NoisyLineConfig { gamma: 0.3, n_slopes: 3, sigma_max: 0.2, ..NoisyLineConfig::default() };
    let cfg = GenConfig { noisy_line: truth.clone(), ..GenConfig::training() };
    let target = calibration_returns(&generate_noisy_line(&truth, 31).unwrap()).unwrap();
    let search = CalibrationSearch { n_draws: 8, n_candidates: 200, seed: 4 };
    let found = calibrate(Dynamic::NoisyLine, &cfg, &target, &search).unwrap();
    let floor = distance_to_target(&cfg, Dynamic::NoisyLine, &target, search.n_draws, 77).unwrap();
    assert!(found.distance <= 1.5 * floor, "found {} vs self {}", found.distance, floor);
    let run = found.running_minimum();
    assert!(run.windows(2).all(|w| w[1] <= w[0]));
    assert!(found.distance >= 0.0);
}

#[test]
fn summary_is_ordered_per_group() {
    let data = make_dataset(&DatasetSpec::validation().with_count(30), 2).unwrap();
    let rows: Vec<LossRow> = data
        .series
        .iter()
        .enumerate()
        .map(|(i, s)| LossRow { series_id: i, dynamic: s.dynamic, loss: series_loss(&dummy_classify(s.len(), 5 + i as u64), &s.labels).unwrap() })
        .collect();
    let rep = summarize(&rows).unwrap();
    for g in rep.by_dynamic.iter().chain([&rep.overall]) {
        assert!(g.q1 <= g.median && g.median <= g.q3);
        assert!((g.iqr - (g.q3 - g.q1)).abs() < 1e-15);
    }
    assert_eq!(rep.overall.n, 30);
}

fn triple() -> impl Strategy<Value = ProbTriple<f64>> {
    (0.001f64..1.0, 0.001f64..1.0, 0.001f64..1.0).prop_map(|(a, b, c)| {
        let s = a + b + c;
        ProbTriple::new(a / s, b / s, 1.0 - a / s - b / s).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wasserstein_is_a_metric(
        a in prop::collection::vec(-5.0f64..5.0, 1..40),
        b in prop::collection::vec(-5.0f64..5.0, 1..40),
        c in prop::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let ab = wasserstein_1d(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein_1d(&b, &a)).abs() < 1e-12);
        prop_assert!(wasserstein_1d(&a, &a) < 1e-12);
        prop_assert!(ab <= wasserstein_1d(&a, &c) + wasserstein_1d(&c, &b) + 1e-9);
    }

    #[test]
    fn pooling_stays_on_the_simplex(seqs in prop::collection::vec(prop::collection::vec(triple(), 5), 1..6)) {
        let pooled = pool_probabilities(&seqs).unwrap();
        prop_assert_eq!(pooled.len(), 5);
        for p in &pooled {
            prop_assert!((p.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn series_loss_is_symmetric_and_bounded(
        a in prop::collection::vec(0usize..3, 1..60),
        seed in any::<u64>(),
    ) {
        let x: Vec<TrendLabel> = a.iter().map(|i| TrendLabel::from_class_index(*i)).collect();
        let y = dummy_classify(x.len(), seed);
        let l = series_loss(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert_eq!(l, series_loss(&y, &x).unwrap());
        prop_assert_eq!(series_loss(&x, &x).unwrap(), 0.0);
    }
}
