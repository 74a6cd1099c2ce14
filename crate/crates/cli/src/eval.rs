use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trendlab_core::classical::{dummy_probabilities, MaConfig};
use trendlab_core::evalkit::{pool_probabilities, series_loss, summarize, GroupSummary, LossRow};
use trendlab_core::mle::{Estimator, SlidingWindowConfig};
use trendlab_core::rng::derive_seed;
use trendlab_core::simgen::read_jsonl_path;
use trendlab_core::{load_model, Dataset, Probs, Series, StoredModel, TrendLabel};

use crate::runlog::RunLog;
use crate::train::ModelLabels;

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validation dataset (JSON lines).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model file; repeat for several.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Directory whose `*.model.json` files are all evaluated.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Untrained estimator: dummy, ma, nle or oue. Repeatable.
    #[arg(long = "builtin")]
    pub builtins: Vec<String>,
    /// Also score the mean of the N best estimators' probabilities.
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalRun {
    pub data: Option<PathBuf>,
    pub models: Vec<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub builtins: Vec<String>,
    pub pool: Option<usize>,
    pub seed: u64,
}

/// Window used by the untrained `nle` and `oue` estimators.
pub const BUILTIN_WINDOW: SlidingWindowConfig = SlidingWindowConfig {
    eta: 50,
    epsilon: 0.0,
    stride: 1,
    epsilon_mode: trendlab_core::mle::EpsilonMode::Absolute,
};

enum Scorer {
    Model(StoredModel),
    Dummy { seed: u64 },
}

impl Scorer {
    fn probabilities(&self, id: usize, s: &Series) -> trendlab_core::Result<Vec<Probs>> {
        match self {
            Scorer::Model(m) => m.probabilities(s),
            Scorer::Dummy { seed } => Ok(dummy_probabilities(s.len(), derive_seed(*seed, id as u64))),
        }
    }
}

struct Entry {
    name: String,
    labels: ModelLabels,
    scorer: Scorer,
}

fn builtin(name: &str, seed: u64) -> Result<Entry> {
    let scorer = match name {
        "dummy" => Scorer::Dummy { seed },
        "ma" => Scorer::Model(StoredModel::MovingAverage(MaConfig::default())),
        "nle" => Scorer::Model(StoredModel::SlidingMle { estimator: Estimator::Nle, window: BUILTIN_WINDOW }),
        "oue" => Scorer::Model(StoredModel::SlidingMle { estimator: Estimator::Oue, window: BUILTIN_WINDOW }),
        other => bail!("unknown builtin estimator `{other}` (expected dummy, ma, nle or oue)"),
    };
    let none = || "none".to_string();
    Ok(Entry { name: name.to_string(), labels: ModelLabels { net: name.to_string(), optimizer: none(), train_dynamic: none() }, scorer })
}

fn model_name(path: &Path) -> String {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    name.trim_end_matches(".json").trim_end_matches(".model").to_string()
}

fn load_entry(path: &Path) -> Result<Entry> {
    let file = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    let kind = file.model.kind().to_string();
    let labels = match file.meta.get("labels") {
        Some(v) => serde_json::from_value(v.clone()).with_context(|| format!("model {} has malformed labels", path.display()))?,
        None => ModelLabels { net: kind, optimizer: "none".into(), train_dynamic: "none".into() },
    };
    Ok(Entry { name: model_name(path), labels, scorer: Scorer::Model(file.model) })
}

/// One estimator's outcome on one series.
struct Scored {
    probs: Option<Vec<Probs>>,
    loss: std::result::Result<f64, String>,
}

fn score(entry: &Entry, data: &Dataset) -> Vec<Scored> {
    data.series
        .par_iter()
        .enumerate()
        .map(|(i, s)| match entry.scorer.probabilities(i, s) {
            Ok(p) => {
                let labels: Vec<TrendLabel> = p.iter().map(Probs::label).collect();
                let loss = series_loss(&labels, &s.labels).map_err(|e| e.to_string());
                Scored { probs: Some(p), loss }
            }
            Err(e) => Scored { probs: None, loss: Err(e.to_string()) },
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub labels: ModelLabels,
    pub n_failed: usize,
    pub by_dynamic: Vec<GroupSummary>,
    pub overall: Option<GroupSummary>,
}

#[derive(Debug, Serialize)]
pub struct EvalSummary {
    pub dataset: PathBuf,
    pub n_series: usize,
    pub pooled_members: Vec<String>,
    pub estimators: Vec<EstimatorSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PerSeriesRow {
    pub estimator: String,
    pub net: String,
    pub optimizer: String,
    pub train_dynamic: String,
    pub series_id: usize,
    pub dynamic: String,
    pub loss: Option<f64>,
    pub status: String,
}

fn summarize_entry(name: &str, labels: &ModelLabels, scored: &[Scored], data: &Dataset) -> Result<EstimatorSummary> {
    let rows: Vec<LossRow> = scored
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.loss.as_ref().ok().map(|l| LossRow { series_id: i, dynamic: data.series[i].dynamic, loss: *l }))
        .collect();
    let n_failed = scored.len() - rows.len();
    let (by_dynamic, overall) = if rows.is_empty() {
        (Vec::new(), None)
    } else {
        let rep = summarize(&rows)?;
        (rep.by_dynamic, Some(rep.overall))
    };
    Ok(EstimatorSummary { name: name.to_string(), labels: labels.clone(), n_failed, by_dynamic, overall })
}

pub fn run(a: EvalArgs) -> Result<()> {
    let mut cfg: EvalRun = crate::load_config(a.config.as_deref())?;
    cfg.data = a.data.or(cfg.data);
    cfg.models.extend(a.models);
    cfg.model_dir = a.model_dir.or(cfg.model_dir);
    cfg.builtins.extend(a.builtins);
    cfg.pool = a.pool.or(cfg.pool);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let Some(data_path) = cfg.data.clone() else { bail!("no validation dataset given (--data)") };

    if let Some(dir) = &cfg.model_dir {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".model.json"))
            .collect();
        found.sort();
        cfg.models.extend(found);
    }
    let mut entries = Vec::new();
    for p in &cfg.models {
        entries.push(load_entry(p)?);
    }
    for b in &cfg.builtins {
        entries.push(builtin(b, cfg.seed)?);
    }
    if entries.is_empty() {
        bail!("nothing to evaluate: pass --model, --model-dir or --builtin");
    }
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.name.clone()) {
            bail!("estimator name `{}` appears twice", e.name);
        }
    }

    let data = read_jsonl_path(&data_path).with_context(|| format!("reading dataset {}", data_path.display()))?;
    if data.is_empty() {
        bail!("empty dataset: {}", data_path.display());
    }

    let mut names = Vec::new();
    let mut all_labels = Vec::new();
    let mut results = Vec::new();
    for e in &entries {
        log::info!("evaluating {}", e.name);
        results.push(score(e, &data));
        names.push(e.name.clone());
        all_labels.push(e.labels.clone());
    }
    let mut summaries = Vec::new();
    for i in 0..entries.len() {
        summaries.push(summarize_entry(&names[i], &all_labels[i], &results[i], &data)?);
    }

    let mut pooled_members = Vec::new();
    if let Some(n) = cfg.pool {
        if n < 2 {
            bail!("pooling needs at least two estimators, got --pool {n}");
        }
        // the dummy never joins a pool
        let mut ranked: Vec<usize> = (0..entries.len())
            .filter(|&i| !matches!(entries[i].scorer, Scorer::Dummy { .. }) && summaries[i].overall.is_some())
            .collect();
        if ranked.len() < n {
            bail!("pooling {n} estimators but only {} are eligible", ranked.len());
        }
        ranked.sort_by(|&x, &y| {
            let mx = summaries[x].overall.as_ref().map_or(f64::INFINITY, |g| g.median);
            let my = summaries[y].overall.as_ref().map_or(f64::INFINITY, |g| g.median);
            mx.total_cmp(&my).then(x.cmp(&y))
        });
        ranked.truncate(n);
        pooled_members = ranked.iter().map(|&i| names[i].clone()).collect();
        let pooled: Vec<Scored> = (0..data.len())
            .into_par_iter()
            .map(|k| {
                let members: Option<Vec<Vec<Probs>>> = ranked.iter().map(|&i| results[i][k].probs.clone()).collect();
                let Some(members) = members else {
                    return Scored { probs: None, loss: Err("a pooled member failed on this series".into()) };
                };
                match pool_probabilities(&members) {
                    Ok(p) => {
                        let labels: Vec<TrendLabel> = p.iter().map(Probs::label).collect();
                        let loss = series_loss(&labels, &data.series[k].labels).map_err(|e| e.to_string());
                        Scored { probs: Some(p), loss }
                    }
                    Err(e) => Scored { probs: None, loss: Err(e.to_string()) },
                }
            })
            .collect();
        let name = "pooled".to_string();
        if seen.contains(&name) {
            bail!("estimator name `pooled` is reserved for the pooled estimator");
        }
        let labels = ModelLabels { net: "pooled".into(), optimizer: "none".into(), train_dynamic: "none".into() };
        summaries.push(summarize_entry(&name, &labels, &pooled, &data)?);
        results.push(pooled);
        names.push(name);
        all_labels.push(labels);
    }

    crate::create_dir(&a.out_dir)?;
    let per_series = a.out_dir.join("per_series.csv");
    let mut w = crate::csv_writer(&per_series)?;
    for (i, res) in results.iter().enumerate() {
        for (k, s) in res.iter().enumerate() {
            w.serialize(PerSeriesRow {
                estimator: names[i].clone(),
                net: all_labels[i].net.clone(),
                optimizer: all_labels[i].optimizer.clone(),
                train_dynamic: all_labels[i].train_dynamic.clone(),
                series_id: k,
                dynamic: data.series[k].dynamic.to_string(),
                loss: s.loss.as_ref().ok().copied(),
                status: match &s.loss {
                    Ok(_) => "ok".to_string(),
                    Err(e) => e.clone(),
                },
            })?;
        }
    }
    w.flush()?;

    let table = median_table(&summaries);
    let table_path = a.out_dir.join("median_table.csv");
    let mut w = crate::csv_writer(&table_path)?;
    for row in &table {
        w.write_record(row)?;
    }
    w.flush()?;

    let summary_path = a.out_dir.join("summary.json");
    let summary = EvalSummary { dataset: data_path.clone(), n_series: data.len(), pooled_members, estimators: summaries };
    crate::write_json(&summary_path, &summary)?;

    let mut log = RunLog::new("eval", Some(cfg.seed), &cfg)?.input(&data_path);
    for p in &cfg.models {
        log = log.input(p);
    }
    log.output(&per_series).output(&table_path).output(&summary_path).write(&a.out_dir.join("eval.run.json"))?;

    println!("median loss per dynamic ({} series)", data.len());
    for row in &table {
        println!("{}", row.iter().map(|c| format!("{c:>16}")).collect::<String>());
    }
    let failed: usize = summary.estimators.iter().map(|e| e.n_failed).sum();
    if failed > 0 {
        println!("{failed} series evaluations failed; see {}", per_series.display());
    }
    Ok(())
}

/// Rows = dynamics then `all`, columns = estimators; cells are median losses.
fn median_table(summaries: &[EstimatorSummary]) -> Vec<Vec<String>> {
    let mut groups: Vec<String> = Vec::new();
    for s in summaries {
        for g in &s.by_dynamic {
            if !groups.contains(&g.group) {
                groups.push(g.group.clone());
            }
        }
    }
    groups.sort();
    groups.push("all".into());
    let mut out = vec![std::iter::once("dynamic".to_string()).chain(summaries.iter().map(|s| s.name.clone())).collect()];
    for g in &groups {
        let mut row = vec![g.clone()];
        for s in summaries {
            let cell = if g == "all" {
                s.overall.as_ref()
            } else {
                s.by_dynamic.iter().find(|x| &x.group == g)
            };
            row.push(cell.map_or(String::new(), |c| format!("{:.4}", c.median)));
        }
        out.push(row);
    }
    out
}
