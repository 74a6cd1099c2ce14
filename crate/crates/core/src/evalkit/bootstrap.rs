use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::quantile_sorted;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// `median(a) - median(b)` on the original samples.
    pub point_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub n_resamples: usize,
}

impl BootstrapResult {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    quantile_sorted(xs, 0.5)
}

fn check(level: f64, n_resamples: usize) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("confidence level must be in (0, 1), got {level}")));
    }
    if n_resamples == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    Ok(())
}

/// Lexicographic order on (length, values) so the two arms get their random
/// streams by content rather than by argument position; swapping `a` and `b`
/// then exactly negates every resampled statistic.
fn canonical_first(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let key = |s: &[Vec<f64>]| -> Vec<f64> {
        let mut k = vec![s.iter().map(Vec::len).sum::<usize>() as f64];
        k.extend(s.iter().flatten().copied());
        k
    };
    let (ka, kb) = (key(a), key(b));
    let ord = ka.len().cmp(&kb.len()).then_with(|| {
        ka.iter().zip(&kb).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
    });
    ord != Ordering::Greater
}

fn resample_strata<R: Rng>(strata: &[Vec<f64>], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    for s in strata {
        for _ in 0..s.len() {
            out.push(s[rng.random_range(0..s.len())]);
        }
    }
}

fn run(a: &[Vec<f64>], b: &[Vec<f64>], level: f64, n_resamples: usize, seed: u64) -> Result<BootstrapResult> {
    check(level, n_resamples)?;
    let na: usize = a.iter().map(Vec::len).sum();
    let nb: usize = b.iter().map(Vec::len).sum();
    if na == 0 || nb == 0 {
        return Err(Error::Empty("bootstrap needs two non-empty samples".into()));
    }
    let a_first = canonical_first(a, b);
    let mut stats: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, r as u64));
            let (mut x, mut y) = (Vec::with_capacity(na.max(nb)), Vec::with_capacity(na.max(nb)));
            if a_first {
                resample_strata(a, &mut rng, &mut x);
                resample_strata(b, &mut rng, &mut y);
            } else {
                resample_strata(b, &mut rng, &mut y);
                resample_strata(a, &mut rng, &mut x);
            }
            median(&mut x) - median(&mut y)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let mut all_a: Vec<f64> = a.iter().flatten().copied().collect();
    let mut all_b: Vec<f64> = b.iter().flatten().copied().collect();
    Ok(BootstrapResult {
        point_diff: median(&mut all_a) - median(&mut all_b),
        ci_low: quantile_sorted(&stats, alpha),
        ci_high: quantile_sorted(&stats, 1.0 - alpha),
        level,
        n_resamples,
    })
}

/// Percentile interval for `median(a) - median(b)`, each sample resampled
/// independently with replacement. Resample `r` uses its own seed derived from
/// `seed`, so the result does not depend on thread scheduling.
pub fn bootstrap_median_diff(a: &[f64], b: &[f64], level: f64, n_resamples: usize, seed: u64) -> Result<BootstrapResult> {
    run(&[a.to_vec()], &[b.to_vec()], level, n_resamples, seed)
}

/// Same statistic, but each resample draws within strata (for instance one
/// stratum per validation dynamic) and pools the strata before the median.
pub fn bootstrap_median_diff_stratified(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    level: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    run(a, b, level, n_resamples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_cover_zero() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = bootstrap_median_diff(&a, &a, 0.99, 2000, 1).unwrap();
        assert!(r.contains(0.0));
        assert_eq!(r.point_diff, 0.0);
    }

    #[test]
    fn shift_oracle() {
        let a: Vec<f64> = (0..200).map(|i| 0.001 * (i % 7) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        let r = bootstrap_median_diff(&a, &b, 0.99, 2000, 2).unwrap();
        assert!(!r.contains(0.0));
        assert!((r.ci_low + 1.0).abs() < 0.01 && (r.ci_high + 1.0).abs() < 0.01);
    }

    #[test]
    fn swapping_mirrors_the_interval() {
        let a: Vec<f64> = (0..31).map(|i| (i as f64 * 0.71).cos()).collect();
        let b: Vec<f64> = (0..25).map(|i| (i as f64 * 0.19).sin() + 0.2).collect();
        let ab = bootstrap_median_diff(&a, &b, 0.95, 1000, 5).unwrap();
        let ba = bootstrap_median_diff(&b, &a, 0.95, 1000, 5).unwrap();
        assert_eq!(ab.point_diff, -ba.point_diff);
        assert!((ab.ci_low + ba.ci_high).abs() < 1e-12);
        assert!((ab.ci_high + ba.ci_low).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_validated() {
        let a = [0.1, 0.5, 0.3];
        let b = [0.2, 0.2, 0.9, 0.4];
        assert_eq!(bootstrap_median_diff(&a, &b, 0.9, 300, 7).unwrap(), bootstrap_median_diff(&a, &b, 0.9, 300, 7).unwrap());
        assert!(bootstrap_median_diff(&a, &[], 0.9, 300, 7).is_err());
        assert!(bootstrap_median_diff(&a, &b, 1.0, 300, 7).is_err());
    }

    #[test]
    fn stratified_with_one_stratum_matches_pooled() {
        let a = vec![0.1, 0.5, 0.3, 0.8];
        let b = vec![0.2, 0.2, 0.9];
        let p = bootstrap_median_diff(&a, &b, 0.9, 500, 3).unwrap();
        let s = bootstrap_median_diff_stratified(&[a], &[b], 0.9, 500, 3).unwrap();
        assert_eq!(p, s);
    }
}
