use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::TrendLabel;
use crate::simgen::Dynamic;

/// Fraction of steps where the predicted label differs from the truth.
pub fn series_loss(predicted: &[TrendLabel], truth: &[TrendLabel]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), got: predicted.len() });
    }
    if truth.is_empty() {
        return Err(Error::Empty("loss of an empty label sequence".into()));
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Linearly interpolated quantile (`h = (n - 1) q`). Sorts `xs` in place.
/// Panics on an empty slice.
pub fn quantile(xs: &mut [f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of an empty sample");
    xs.sort_by(f64::total_cmp);
    quantile_sorted(xs, q)
}

pub(crate) fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let h = (xs.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub series_id: usize,
    pub dynamic: Dynamic,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl GroupSummary {
    fn of(group: &str, losses: &[f64]) -> Self {
        let mut v = losses.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        Self { group: group.to_string(), n: v.len(), median: quantile_sorted(&v, 0.5), q1, q3, iqr: q3 - q1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_series: Vec<LossRow>,
    /// One entry per dynamic present, in tag order.
    pub by_dynamic: Vec<GroupSummary>,
    pub overall: GroupSummary,
}

impl EvalReport {
    pub fn group(&self, dynamic: Dynamic) -> Option<&GroupSummary> {
        self.by_dynamic.iter().find(|g| g.group == dynamic.as_str())
    }
}

pub fn summarize(rows: &[LossRow]) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::Empty("no losses to summarize".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(0.0..=1.0).contains(&r.loss)) {
        return Err(Error::Input(format!("loss {} of series {} outside [0, 1]", r.loss, r.series_id)));
    }
    let mut groups: BTreeMap<Dynamic, Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.dynamic).or_default().push(r.loss);
    }
    let all: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    Ok(EvalReport {
        per_series: rows.to_vec(),
        by_dynamic: groups.iter().map(|(d, v)| GroupSummary::of(d.as_str(), v)).collect(),
        overall: GroupSummary::of("all", &all),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TrendLabel::*;

    #[test]
    fn loss_examples() {
        assert_eq!(series_loss(&[Up, Flat], &[Up, Flat]).unwrap(), 0.0);
        assert_eq!(series_loss(&[Up, Down], &[Down, Up]).unwrap(), 1.0);
        assert_eq!(series_loss(&[Up, Down, Flat, Up], &[Up, Up, Flat, Flat]).unwrap(), 0.5);
        assert!(series_loss(&[Up], &[Up, Down]).is_err());
    }

    #[test]
    fn interpolated_quartiles() {
        let rows: Vec<LossRow> = [0.1, 0.2, 0.3, 0.4]
            .iter()
            .enumerate()
            .map(|(i, l)| LossRow { series_id: i, dynamic: Dynamic::NoisyLine, loss: *l })
            .collect();
        let r = summarize(&rows).unwrap();
        assert!((r.overall.median - 0.25).abs() < 1e-12);
        assert!((r.overall.q1 - 0.175).abs() < 1e-12);
        assert!((r.overall.q3 - 0.325).abs() < 1e-12);
        assert_eq!(r.by_dynamic.len(), 1);
    }

    #[test]
    fn single_loss_has_zero_iqr() {
        let r = summarize(&[LossRow { series_id: 0, dynamic: Dynamic::MarkovSwitch, loss: 0.4 }]).unwrap();
        assert_eq!((r.overall.q1, r.overall.median, r.overall.q3, r.overall.iqr), (0.4, 0.4, 0.4, 0.0));
        assert!(summarize(&[]).is_err());
    }
}
