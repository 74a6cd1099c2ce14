use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trendlab_core::classical::{convex_train, ma_grid_search, ConvexTrainOptions, MaGrid};
use trendlab_core::mle::{hmm_fit, tune_sliding_window, EpsilonMode, Estimator, HmmOptions};
use trendlab_core::rng::derive_seed;
use trendlab_core::simgen::read_jsonl_path;
use trendlab_core::tensornet::{train as train_rnn, CellKind, OptimizerKind, RnnSpec, TrainOptions};
use trendlab_core::{save_model, Dataset, Error as CoreError, ModelFile, StoredModel};

use crate::runlog::RunLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Stacked recurrent net (vanilla, GRU or LSTM).
    Rnn,
    /// Identity-activation net with stochastic weight rows.
    Convex,
    /// Moving-average crossover, tuned on the grid.
    Ma,
    /// Three-state Gaussian HMM on log-returns.
    Hmm,
    /// Sliding-window noisy-line slope, tuned on the grid.
    Nle,
    /// Sliding-window OU drift, tuned on the grid.
    Oue,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset (JSON lines, role `train`).
    #[arg(long, required_unless_present = "sweep")]
    pub data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long, required_unless_present = "sweep")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep manifest; trains every triplet it lists into `--out-dir`.
    #[arg(long, conflicts_with_all = ["data", "out"], requires = "out_dir")]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub model: ModelKind,
    /// Recurrent structure; the defaults are the GRU baseline.
    pub net: RnnSpec,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// 200 for recurrent nets, 20 for the convex net.
    pub epochs: Option<usize>,
    pub seed: u64,
    pub convex_dim: usize,
    pub hmm: HmmOptions,
    pub ma_grid: MaGrid,
    pub window_etas: Vec<usize>,
    pub window_epsilons: Vec<f64>,
    pub epsilon_mode: EpsilonMode,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            model: ModelKind::Rnn,
            net: RnnSpec::baseline(),
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.005,
            epochs: None,
            seed: 0,
            convex_dim: 5,
            hmm: HmmOptions::default(),
            ma_grid: MaGrid::default(),
            window_etas: vec![10, 20, 50, 100, 200],
            window_epsilons: vec![0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
            epsilon_mode: EpsilonMode::Absolute,
        }
    }
}

impl TrainRun {
    fn resolved(mut self) -> Self {
        self.epochs = Some(self.epochs.unwrap_or(match self.model {
            ModelKind::Convex => ConvexTrainOptions::default().epochs,
            _ => TrainOptions::default().epochs,
        }));
        self.hmm.seed = self.seed;
        self
    }

    fn epochs(&self) -> usize {
        self.epochs.unwrap_or(0)
    }
}

/// A trained classifier plus its per-epoch (or per-iteration) log.
pub struct Trained {
    pub file: ModelFile,
    pub log_header: [&'static str; 2],
    pub log_rows: Vec<f64>,
}

/// Grouping labels stored in every model file and read back by `eval`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModelLabels {
    pub net: String,
    pub optimizer: String,
    pub train_dynamic: String,
}

fn train_dynamic(data: &Dataset) -> String {
    let comp = data.composition();
    match comp.keys().collect::<Vec<_>>().as_slice() {
        [one] => one.as_str().to_string(),
        _ => "mixed".to_string(),
    }
}

pub fn train_one(run: &TrainRun, data: &Dataset, dataset_name: &str) -> Result<Trained, CoreError> {
    let run = run.clone().resolved();
    let (model, log_header, log_rows, net, optimizer) = match run.model {
        ModelKind::Rnn => {
            let opts = TrainOptions {
                optimizer: run.optimizer,
                learning_rate: run.learning_rate,
                epochs: run.epochs(),
                seed: run.seed,
            };
            let out = train_rnn::<f64>(&run.net, data, &opts)?;
            (StoredModel::Rnn(out.model), ["epoch", "loss"], out.epoch_losses, run.net.cell.to_string(), run.optimizer.to_string())
        }
        ModelKind::Convex => {
            let opts = ConvexTrainOptions {
                m: run.convex_dim,
                optimizer: run.optimizer,
                learning_rate: run.learning_rate,
                epochs: run.epochs(),
                seed: run.seed,
            };
            let out = convex_train::<f64>(data, &opts)?;
            (StoredModel::ConvexNet(out.params), ["epoch", "loss"], out.epoch_losses, "convex".into(), run.optimizer.to_string())
        }
        ModelKind::Ma => {
            let found = ma_grid_search(data, &run.ma_grid)?;
            (StoredModel::MovingAverage(found.best), ["candidate", "median_loss"], vec![found.median_loss], "ma".into(), "grid".into())
        }
        ModelKind::Hmm => {
            let fit = hmm_fit(data, &run.hmm)?;
            (StoredModel::Hmm(fit.model), ["iteration", "log_likelihood"], fit.log_likelihoods, "hmm".into(), "em".into())
        }
        ModelKind::Nle | ModelKind::Oue => {
            let est = if run.model == ModelKind::Nle { Estimator::Nle } else { Estimator::Oue };
            let found = tune_sliding_window(data, est, &run.window_etas, &run.window_epsilons, run.epsilon_mode)?;
            let m = StoredModel::SlidingMle { estimator: est, window: found.best };
            (m, ["candidate", "median_loss"], vec![found.median_loss], est.to_string(), "grid".into())
        }
    };
    let labels = ModelLabels { net, optimizer, train_dynamic: train_dynamic(data) };
    let file = ModelFile::new(model)
        .with_meta("labels", &labels)?
        .with_meta("train", &run)?
        .with_meta("dataset", dataset_name)?
        .with_meta("dataset_composition", data.composition())?;
    Ok(Trained { file, log_header, log_rows })
}

fn write_log(path: &Path, t: &Trained) -> Result<()> {
    let mut w = crate::csv_writer(path)?;
    w.write_record(t.log_header)?;
    for (i, v) in t.log_rows.iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(a: TrainArgs) -> Result<()> {
    if let Some(manifest) = &a.sweep {
        let dir = a.out_dir.as_deref().expect("clap requires --out-dir with --sweep");
        return run_sweep(manifest, dir);
    }
    let (data_path, out) = (a.data.as_deref().expect("clap"), a.out.as_deref().expect("clap"));
    let mut run: TrainRun = crate::load_config(a.config.as_deref())?;
    if let Some(m) = a.model {
        run.model = m;
    }
    if let Some(c) = a.cell {
        run.net.cell = c;
    }
    run.net.n_layers = a.layers.unwrap_or(run.net.n_layers);
    run.net.hidden_dim = a.hidden.unwrap_or(run.net.hidden_dim);
    run.net.dropout = a.dropout.unwrap_or(run.net.dropout);
    run.learning_rate = a.lr.unwrap_or(run.learning_rate);
    run.optimizer = a.optimizer.unwrap_or(run.optimizer);
    run.epochs = a.epochs.or(run.epochs);
    run.seed = a.seed.unwrap_or(run.seed);

    let data = read_jsonl_path(data_path).with_context(|| format!("reading dataset {}", data_path.display()))?;
    let trained = train_one(&run, &data, &data_path.display().to_string())
        .with_context(|| format!("training {:?} model", run.model))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        crate::create_dir(parent)?;
    }
    save_model(out, &trained.file).with_context(|| format!("writing {}", out.display()))?;
    let log_path = crate::sibling(out, "log.csv");
    write_log(&log_path, &trained)?;
    RunLog::new("train", Some(run.seed), run.clone().resolved())?
        .input(data_path)
        .output(out)
        .output(&log_path)
        .write(&crate::sibling(out, "run.json"))?;
    println!("trained {} model on {} series -> {}", trained.file.model.kind(), data.len(), out.display());
    Ok(())
}

/// Grid of recurrent triplets: every dataset crossed with every
/// hyper-parameter combination. Defaults are the desk-scale training grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepManifest {
    pub seed: u64,
    pub epochs: usize,
    /// Tag -> training dataset; relative paths are resolved against the manifest.
    pub datasets: BTreeMap<String, PathBuf>,
    pub cells: Vec<CellKind>,
    pub n_layers: Vec<usize>,
    pub hidden_dims: Vec<usize>,
    pub dropouts: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub optimizers: Vec<OptimizerKind>,
}

impl Default for SweepManifest {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 50,
            datasets: BTreeMap::new(),
            cells: CellKind::ALL.to_vec(),
            n_layers: vec![1, 2],
            hidden_dims: vec![20],
            dropouts: vec![0.0, 0.1],
            learning_rates: vec![0.01, 0.1, 1.0],
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Rmsprop],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Triplet {
    id: String,
    dataset: String,
    run: TrainRun,
}

impl SweepManifest {
    fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::new();
        for tag in self.datasets.keys() {
            for &cell in &self.cells {
                for &n_layers in &self.n_layers {
                    for &hidden_dim in &self.hidden_dims {
                        for &dropout in &self.dropouts {
                            for &learning_rate in &self.learning_rates {
                                for &optimizer in &self.optimizers {
                                    let idx = out.len();
                                    let run = TrainRun {
                                        model: ModelKind::Rnn,
                                        net: RnnSpec { cell, n_layers, hidden_dim, dropout, ..RnnSpec::baseline() },
                                        optimizer,
                                        learning_rate,
                                        epochs: Some(self.epochs),
                                        seed: derive_seed(self.seed, idx as u64),
                                        ..TrainRun::default()
                                    };
                                    let id = format!(
                                        "{idx:04}_{tag}_{cell}_l{n_layers}_h{hidden_dim}_d{dropout}_lr{learning_rate}_{optimizer}"
                                    );
                                    out.push(Triplet { id, dataset: tag.clone(), run });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    id: String,
    dataset: String,
    cell: String,
    n_layers: usize,
    hidden_dim: usize,
    dropout: f64,
    learning_rate: f64,
    optimizer: String,
    seed: u64,
    status: &'static str,
    exit_code: u8,
    epochs_run: usize,
    final_loss: Option<f64>,
    model: String,
    message: String,
}

fn run_sweep(manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let manifest: SweepManifest = crate::load_config(Some(manifest_path))?;
    if manifest.datasets.is_empty() {
        bail!("sweep manifest {} lists no datasets", manifest_path.display());
    }
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let mut data = BTreeMap::new();
    for (tag, p) in &manifest.datasets {
        let p = if p.is_absolute() { p.clone() } else { base.join(p) };
        let d = read_jsonl_path(&p).with_context(|| format!("reading dataset `{tag}` from {}", p.display()))?;
        data.insert(tag.clone(), d);
    }
    crate::create_dir(out_dir)?;
    let triplets = manifest.triplets();
    log::info!("sweep: {} triplets", triplets.len());

    let rows: Vec<Result<SweepRow>> = triplets
        .par_iter()
        .map(|t| {
            let spec = &t.run.net;
            let mut row = SweepRow {
                id: t.id.clone(),
                dataset: t.dataset.clone(),
                cell: spec.cell.to_string(),
                n_layers: spec.n_layers,
                hidden_dim: spec.hidden_dim,
                dropout: spec.dropout,
                learning_rate: t.run.learning_rate,
                optimizer: t.run.optimizer.to_string(),
                seed: t.run.seed,
                status: "converged",
                exit_code: 0,
                epochs_run: 0,
                final_loss: None,
                model: String::new(),
                message: String::new(),
            };
            match train_one(&t.run, &data[&t.dataset], &t.dataset) {
                Ok(trained) => {
                    let model = out_dir.join(format!("{}.model.json", t.id));
                    save_model(&model, &trained.file)?;
                    write_log(&out_dir.join(format!("{}.log.csv", t.id)), &trained)?;
                    row.epochs_run = trained.log_rows.len();
                    row.final_loss = trained.log_rows.last().copied();
                    row.model = format!("{}.model.json", t.id);
                }
                Err(CoreError::TrainingFailed { epoch, reason, epoch_losses }) => {
                    log::warn!("{}: failed at epoch {epoch}: {reason}", t.id);
                    row.status = "failed";
                    row.exit_code = 1;
                    row.epochs_run = epoch_losses.len();
                    row.final_loss = epoch_losses.last().copied().filter(|v| v.is_finite());
                    row.message = format!("epoch {epoch}: {reason}");
                }
                Err(e) => {
                    row.status = "error";
                    row.exit_code = 2;
                    row.message = e.to_string();
                }
            }
            Ok(row)
        })
        .collect();

    let log_path = out_dir.join("sweep_log.csv");
    let mut w = crate::csv_writer(&log_path)?;
    let (mut ok, mut failed) = (0, 0);
    for r in rows {
        let r = r?;
        if r.exit_code == 0 {
            ok += 1;
        } else {
            failed += 1;
        }
        w.serialize(&r)?;
    }
    w.flush()?;
    RunLog::new("train", Some(manifest.seed), serde_json::json!({ "manifest": &manifest, "triplets": triplets }))?
        .input(manifest_path)
        .output(&log_path)
        .write(&out_dir.join("train.run.json"))?;
    println!("sweep: {ok} converged, {failed} failed -> {}", log_path.display());
    Ok(())
}
