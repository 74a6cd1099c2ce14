use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Relative size below which a diagonal entry of `R` marks a dependent column.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// One observation for a regression on categorical features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalRow {
    pub y: f64,
    /// One level per feature, aligned with the feature names.
    pub levels: Vec<String>,
}

impl DesignMatrix {
    /// Intercept plus one indicator per level of each feature, dropping the
    /// first level (in sorted order) so the columns stay independent. Column
    /// names read `feature=level`.
    pub fn from_categorical(features: &[String], rows: &[CategoricalRow]) -> Result<(Self, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::Empty("regression without rows".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.levels.len() != features.len()) {
            return Err(Error::LengthMismatch { expected: features.len(), got: r.levels.len() });
        }
        let mut names = vec!["intercept".to_string()];
        let mut kept: Vec<Vec<String>> = Vec::with_capacity(features.len());
        for (f, name) in features.iter().enumerate() {
            let levels: BTreeSet<&String> = rows.iter().map(|r| &r.levels[f]).collect();
            if levels.len() < 2 {
                return Err(Error::Input(format!("feature `{name}` has fewer than two observed levels")));
            }
            let rest: Vec<String> = levels.into_iter().skip(1).cloned().collect();
            names.extend(rest.iter().map(|l| format!("{name}={l}")));
            kept.push(rest);
        }
        let design = rows
            .iter()
            .map(|r| {
                let mut x = vec![1.0];
                for (f, levels) in kept.iter().enumerate() {
                    x.extend(levels.iter().map(|l| if *l == r.levels[f] { 1.0 } else { 0.0 }));
                }
                x
            })
            .collect();
        Ok((Self { names, rows: design }, rows.iter().map(|r| r.y).collect()))
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// 95% interval bounds from the Student-t quantile at `df`.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub df: usize,
    /// Unbiased residual variance.
    pub sigma2: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Least squares through a Householder QR of the design; standard errors from
/// `sigma^2 (R^T R)^{-1}`, two-sided p-values from Student-t with `n - p`
/// degrees of freedom.
pub fn ols_fit(design: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    let n = design.rows.len();
    let p = design.n_cols();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if p == 0 || n <= p {
        return Err(Error::Input(format!("need more rows than columns, got {n} rows and {p} columns")));
    }
    if let Some(i) = design.rows.iter().position(|r| r.len() != p) {
        return Err(Error::Shape(format!("design row {i} has {} entries, expected {p}", design.rows[i].len())));
    }
    if design.rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in regression data".into()));
    }
    let x = DMatrix::from_fn(n, p, |i, j| design.rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let dependent: Vec<usize> = (0..p).filter(|&j| r[(j, j)].abs() <= RANK_TOL * scale.max(f64::MIN_POSITIVE)).collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(collinear_names(&x, &dependent, &design.names)));
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| Error::RankDeficient(design.names.clone()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient(design.names.clone()))?;

    let fitted = &x * &beta;
    let resid = &yv - fitted;
    let df = n - p;
    let rss = resid.norm_squared();
    let sigma2 = rss / df as f64;
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Input(e.to_string()))?;
    let t_crit = dist.inverse_cdf(0.975);
    let mut out = OlsFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        std_errors: Vec::with_capacity(p),
        t_stats: Vec::with_capacity(p),
        p_values: Vec::with_capacity(p),
        ci_low: Vec::with_capacity(p),
        ci_high: Vec::with_capacity(p),
        df,
        sigma2,
        r_squared,
        residuals: resid.iter().copied().collect(),
    };
    for j in 0..p {
        let var = sigma2 * r_inv.row(j).iter().map(|v| v * v).sum::<f64>();
        let se = var.sqrt();
        let b = beta[j];
        let (t, pv) = if se > 0.0 {
            let t = b / se;
            (t, 2.0 * (1.0 - dist.cdf(t.abs())))
        } else if b == 0.0 {
            (0.0, 1.0)
        } else {
            (b.signum() * f64::INFINITY, 0.0)
        };
        out.std_errors.push(se);
        out.t_stats.push(t);
        out.p_values.push(pv);
        out.ci_low.push(b - t_crit * se);
        out.ci_high.push(b + t_crit * se);
    }
    Ok(out)
}

/// Each dependent column together with the earlier columns that reproduce it.
fn collinear_names(x: &DMatrix<f64>, dependent: &[usize], names: &[String]) -> Vec<String> {
    let mut out = BTreeSet::new();
    for &j in dependent {
        out.insert(j);
        if j == 0 {
            continue;
        }
        let sub = x.columns(0, j).into_owned();
        let target = x.column(j).into_owned();
        if let Ok(svd) = sub.svd(true, true).solve(&target, 1e-10) {
            for (k, c) in svd.iter().enumerate() {
                if c.abs() > 1e-8 {
                    out.insert(k);
                }
            }
        }
    }
    out.into_iter().map(|j| names[j].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(y: f64, levels: &[&str]) -> CategoricalRow {
        CategoricalRow { y, levels: levels.iter().map(|s| s.to_string()).collect() }
    }

    #[test]
    fn noiseless_binary_feature_is_exact() {
        let rows: Vec<CategoricalRow> =
            (0..10).map(|i| if i % 2 == 0 { cat(2.0, &["a"]) } else { cat(5.0, &["b"]) }).collect();
        let (d, y) = DesignMatrix::from_categorical(&["x".into()], &rows).unwrap();
        assert_eq!(d.names, vec!["intercept", "x=b"]);
        let fit = ols_fit(&d, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn duplicated_column_is_named() {
        let d = DesignMatrix {
            names: vec!["intercept".into(), "u".into(), "v".into()],
            rows: (0..6).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect(),
        };
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        match ols_fit(&d, &y) {
            Err(Error::RankDeficient(cols)) => {
                assert!(cols.contains(&"u".to_string()) && cols.contains(&"v".to_string()))
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn single_level_feature_is_rejected() {
        let rows = vec![cat(1.0, &["a"]), cat(2.0, &["a"]), cat(3.0, &["a"])];
        assert!(DesignMatrix::from_categorical(&["x".into()], &rows).is_err());
    }

    #[test]
    fn known_small_regression() {
        // y = 1 + 2x + e with e = (+.1, -.1, -.1, +.1): slope stays 2
        let d = DesignMatrix {
            names: vec!["intercept".into(), "x".into()],
            rows: (0..4).map(|i| vec![1.0, i as f64]).collect(),
        };
        let y = [1.1, 2.9, 4.9, 7.1];
        let f = ols_fit(&d, &y).unwrap();
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((f.coefficients[0] - 1.0).abs() < 1e-12);
        // sigma2 = 0.04 / 2; var(slope) = sigma2 / sum (x - 1.5)^2 = 0.02 / 5
        assert!((f.std_errors[1] - (0.02f64 / 5.0).sqrt()).abs() < 1e-12);
        assert_eq!(f.df, 2);
    }
}
