use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use trendlab_core::evalkit::{
    bootstrap_median_diff, ols_fit, quantile, CategoricalRow, DesignMatrix, DEFAULT_RESAMPLES,
};
use trendlab_core::rng::derive_seed;
use trendlab_core::Error as CoreError;

use crate::eval::PerSeriesRow;
use crate::runlog::RunLog;
use crate::svg::{scale, Svg};

pub const GROUPINGS: [&str; 6] = ["estimator", "net", "optimizer", "train_dynamic", "dynamic", "source"];
const OLS_DEFAULT: [&str; 4] = ["net", "optimizer", "train_dynamic", "dynamic"];

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `per_series.csv` from `eval`; repeat to pool several runs.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Column to group losses by; repeatable. One of estimator, net,
    /// optimizer, train_dynamic, dynamic, source (input file).
    #[arg(long = "by")]
    pub by: Vec<String>,
    /// Categorical regressors of the loss OLS, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ols_features: Option<Vec<String>>,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareRun {
    pub inputs: Vec<PathBuf>,
    pub by: Vec<String>,
    /// `None` uses every default regressor with at least two levels.
    pub ols_features: Option<Vec<String>>,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for CompareRun {
    fn default() -> Self {
        Self { inputs: Vec::new(), by: Vec::new(), ols_features: None, resamples: DEFAULT_RESAMPLES, level: 0.99, seed: 0 }
    }
}

#[derive(Debug, Clone)]
struct LossRecord {
    fields: BTreeMap<&'static str, String>,
    loss: f64,
}

impl LossRecord {
    fn get(&self, col: &str) -> &str {
        self.fields.get(col).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Serialize)]
struct PairRow {
    group_a: String,
    group_b: String,
    n_a: usize,
    n_b: usize,
    median_a: f64,
    median_b: f64,
    median_diff: f64,
    ci_low: f64,
    ci_high: f64,
    level: f64,
    contains_zero: bool,
}

#[derive(Debug, Serialize)]
struct OlsRow<'a> {
    term: &'a str,
    coefficient: f64,
    std_err: f64,
    t: f64,
    p_value: f64,
    ci_low: f64,
    ci_high: f64,
}

fn source_labels(inputs: &[PathBuf]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in inputs {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let parent = p.parent().and_then(|d| d.file_name()).map(|s| s.to_string_lossy().into_owned());
        let base = match parent {
            Some(d) if !d.is_empty() => format!("{d}/{stem}"),
            _ => stem,
        };
        let mut label = base.clone();
        let mut k = 2;
        while out.contains(&label) {
            label = format!("{base}#{k}");
            k += 1;
        }
        out.push(label);
    }
    out
}

fn read_losses(inputs: &[PathBuf]) -> Result<Vec<LossRecord>> {
    let labels = source_labels(inputs);
    let mut out = Vec::new();
    for (p, source) in inputs.iter().zip(labels) {
        let mut r = csv::Reader::from_path(p).with_context(|| format!("opening {}", p.display()))?;
        for (i, row) in r.deserialize::<PerSeriesRow>().enumerate() {
            let row = row.with_context(|| format!("{}: malformed row {}", p.display(), i + 2))?;
            let Some(loss) = row.loss else { continue };
            let fields = BTreeMap::from([
                ("estimator", row.estimator),
                ("net", row.net),
                ("optimizer", row.optimizer),
                ("train_dynamic", row.train_dynamic),
                ("dynamic", row.dynamic),
                ("source", source.clone()),
            ]);
            out.push(LossRecord { fields, loss });
        }
    }
    Ok(out)
}

fn groups(records: &[LossRecord], col: &str) -> BTreeMap<String, Vec<f64>> {
    let mut g: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        g.entry(r.get(col).to_string()).or_default().push(r.loss);
    }
    g
}

fn median(v: &[f64]) -> f64 {
    quantile(&mut v.to_vec(), 0.5)
}

pub fn run(a: CompareArgs) -> Result<()> {
    let mut cfg: CompareRun = crate::load_config(a.config.as_deref())?;
    cfg.inputs.extend(a.inputs);
    cfg.by.extend(a.by);
    if cfg.by.is_empty() {
        cfg.by.push("estimator".into());
    }
    cfg.ols_features = a.ols_features.or(cfg.ols_features);
    cfg.resamples = a.resamples.unwrap_or(cfg.resamples);
    cfg.level = a.level.unwrap_or(cfg.level);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if cfg.inputs.is_empty() {
        bail!("no loss files given (--input)");
    }
    for col in cfg.by.iter().chain(cfg.ols_features.iter().flatten()) {
        if !GROUPINGS.contains(&col.as_str()) {
            bail!("unknown column `{col}` (expected one of {})", GROUPINGS.join(", "));
        }
    }

    let records = read_losses(&cfg.inputs)?;
    if records.is_empty() {
        bail!("no successful losses in the input files");
    }
    crate::create_dir(&a.out_dir)?;
    let mut log = RunLog::new("compare", Some(cfg.seed), &cfg)?;
    for p in &cfg.inputs {
        log = log.input(p);
    }

    let mut pair_index = 0u64;
    for col in &cfg.by {
        let g = groups(&records, col);
        if let Some((name, v)) = g.iter().find(|(_, v)| v.len() < 2) {
            bail!("group `{name}` of `{col}` has {} observation(s); at least 2 are needed", v.len());
        }
        let path = a.out_dir.join(format!("bootstrap_{col}.csv"));
        let mut w = crate::csv_writer(&path)?;
        let keys: Vec<&String> = g.keys().collect();
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                let (xa, xb) = (&g[keys[i]], &g[keys[j]]);
                let seed = derive_seed(cfg.seed, pair_index);
                pair_index += 1;
                let b = bootstrap_median_diff(xa, xb, cfg.level, cfg.resamples, seed)
                    .with_context(|| format!("bootstrap {} vs {}", keys[i], keys[j]))?;
                w.serialize(PairRow {
                    group_a: keys[i].clone(),
                    group_b: keys[j].clone(),
                    n_a: xa.len(),
                    n_b: xb.len(),
                    median_a: median(xa),
                    median_b: median(xb),
                    median_diff: b.point_diff,
                    ci_low: b.ci_low,
                    ci_high: b.ci_high,
                    level: b.level,
                    contains_zero: b.contains(0.0),
                })?;
            }
        }
        w.flush()?;
        let svg_path = a.out_dir.join(format!("boxplot_{col}.svg"));
        crate::write_text(&svg_path, &boxplot(col, &g))?;
        log = log.output(&path).output(&svg_path);
    }

    let features: Vec<String> = match &cfg.ols_features {
        Some(f) => f.clone(),
        None => OLS_DEFAULT.iter().filter(|c| groups(&records, c).len() > 1).map(|c| c.to_string()).collect(),
    };
    let rows: Vec<CategoricalRow> = records
        .iter()
        .map(|r| CategoricalRow { y: r.loss, levels: features.iter().map(|f| r.get(f).to_string()).collect() })
        .collect();
    let ols_path = a.out_dir.join("ols.csv");
    let ols_result = DesignMatrix::from_categorical(&features, &rows).and_then(|(d, y)| ols_fit(&d, &y));
    let ols_meta = match ols_result {
        Ok(fit) => {
            let mut w = crate::csv_writer(&ols_path)?;
            for k in 0..fit.names.len() {
                w.serialize(OlsRow {
                    term: &fit.names[k],
                    coefficient: fit.coefficients[k],
                    std_err: fit.std_errors[k],
                    t: fit.t_stats[k],
                    p_value: fit.p_values[k],
                    ci_low: fit.ci_low[k],
                    ci_high: fit.ci_high[k],
                })?;
            }
            w.flush()?;
            log = log.output(&ols_path);
            serde_json::json!({ "features": features, "n": rows.len(), "df": fit.df, "sigma2": fit.sigma2, "r_squared": fit.r_squared })
        }
        // an explicit feature list must fit; the automatic one may be collinear
        Err(e @ CoreError::RankDeficient(_)) if cfg.ols_features.is_none() => {
            log::warn!("skipping OLS: {e}");
            println!("OLS skipped: {e}; choose regressors with --ols-features");
            serde_json::json!({ "features": features, "error": e.to_string() })
        }
        Err(e) => return Err(e).context("loss OLS"),
    };
    let summary_path = a.out_dir.join("compare_summary.json");
    crate::write_json(&summary_path, &serde_json::json!({ "n_losses": records.len(), "ols": ols_meta }))?;
    log.output(&summary_path).write(&a.out_dir.join("compare.run.json"))?;
    println!("compared {} losses by {} -> {}", records.len(), cfg.by.join(", "), a.out_dir.display());
    Ok(())
}

/// Quartile box, median bar and Tukey whiskers per group; points beyond the
/// whiskers are drawn individually.
pub fn boxplot(title: &str, groups: &BTreeMap<String, Vec<f64>>) -> String {
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 60.0);
    let slot = 90.0;
    let width = left + right + slot * groups.len().max(1) as f64;
    let height = 360.0;
    let (lo, hi) = groups.values().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi.max(lo + 1e-9)) } else { (0.0, 1.0) };
    let y = |v: f64| scale(v, lo, hi, height - bottom, top);
    let mut s = Svg::new(width, height);
    s.text(width / 2.0, 24.0, 14.0, "middle", &format!("loss by {title}"));
    s.line(left, top, left, height - bottom, "black", 1.0);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        s.line(left - 4.0, y(v), left, y(v), "black", 1.0);
        s.text(left - 6.0, y(v) + 4.0, 10.0, "end", &format!("{v:.2}"));
    }
    for (i, (name, vals)) in groups.iter().enumerate() {
        let mut v = vals.clone();
        v.sort_by(f64::total_cmp);
        let (q1, med, q3) = (quantile(&mut v, 0.25), quantile(&mut v, 0.5), quantile(&mut v, 0.75));
        let reach = 1.5 * (q3 - q1);
        let w_lo = v.iter().copied().find(|x| *x >= q1 - reach).unwrap_or(q1);
        let w_hi = v.iter().rev().copied().find(|x| *x <= q3 + reach).unwrap_or(q3);
        let cx = left + slot * (i as f64 + 0.5);
        s.line(cx, y(w_lo), cx, y(q1), "black", 1.0);
        s.line(cx, y(q3), cx, y(w_hi), "black", 1.0);
        s.line(cx - 12.0, y(w_lo), cx + 12.0, y(w_lo), "black", 1.0);
        s.line(cx - 12.0, y(w_hi), cx + 12.0, y(w_hi), "black", 1.0);
        s.rect(cx - 25.0, y(q3), 50.0, (y(q1) - y(q3)).max(0.5), "#9ecae1", "black");
        s.line(cx - 25.0, y(med), cx + 25.0, y(med), "#d62728", 2.0);
        for x in v.iter().filter(|x| **x < w_lo || **x > w_hi) {
            s.circle(cx, y(*x), 2.0, "#555555");
        }
        s.text(cx, height - bottom + 18.0, 11.0, "middle", name);
        s.text(cx, height - bottom + 32.0, 9.0, "middle", &format!("n={}", v.len()));
    }
    s.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_sources_get_distinct_labels() {
        let l = source_labels(&[PathBuf::from("a/per_series.csv"), PathBuf::from("a/per_series.csv")]);
        assert_eq!(l, vec!["a/per_series".to_string(), "a/per_series#2".to_string()]);
    }

    #[test]
    fn boxplot_lists_every_group() {
        let g = BTreeMap::from([("x".to_string(), vec![0.1, 0.2, 0.3]), ("y".to_string(), vec![0.5, 0.6, 0.9, 0.1])]);
        let svg = boxplot("net", &g);
        assert!(svg.contains(">x</text>") && svg.contains(">y</text>"));
        assert!(svg.contains("n=4"));
    }
}
