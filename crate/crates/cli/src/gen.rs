use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use trendlab_core::simgen::{make_dataset, write_jsonl_path, DatasetSpec, DynamicChoice, GenConfig, Role};
use trendlab_core::{Dataset, Dynamic};

use crate::runlog::RunLog;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// JSON document with any of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator configs (e.g. the output of `calibrate`); defaults to the role's preset.
    #[arg(long)]
    pub generators: Option<PathBuf>,
    #[arg(long)]
    pub role: Option<Role>,
    /// noisy_line, piecewise_ou, markov_switch or mixed.
    #[arg(long)]
    pub dynamic: Option<DynamicChoice>,
    /// Number of series; 300 for validation sets, 1000 otherwise.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step of the noisy-line clock.
    #[arg(long)]
    pub noisy_line_dt: Option<f64>,
    /// Multiplies every noise parameter.
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Also write the first series as an `index,price` CSV.
    #[arg(long)]
    pub export_prices: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenRun {
    pub role: Role,
    pub dynamic: DynamicChoice,
    pub count: Option<usize>,
    pub seed: u64,
    pub noisy_line_dt: Option<f64>,
    pub noise_scale: Option<f64>,
    pub generators: Option<GenConfig>,
}

impl Default for GenRun {
    fn default() -> Self {
        Self {
            role: Role::Validation,
            dynamic: DynamicChoice::Mixed,
            count: None,
            seed: 0,
            noisy_line_dt: None,
            noise_scale: None,
            generators: None,
        }
    }
}

impl GenRun {
    /// The dataset spec this run produces, with every default filled in.
    pub fn resolve(&self) -> DatasetSpec {
        let mut config = self.generators.clone().unwrap_or_else(|| GenConfig::for_role(self.role));
        if let Some(dt) = self.noisy_line_dt {
            config = config.with_noisy_line_dt(dt);
        }
        if let Some(s) = self.noise_scale {
            config.noise_scale = s;
        }
        let count = self.count.unwrap_or(match self.role {
            Role::Validation => 300,
            Role::Train | Role::Test => 1000,
        });
        DatasetSpec { role: self.role, dynamic: self.dynamic, count, config }
    }
}

pub fn run(a: GenArgs) -> Result<()> {
    let mut cfg: GenRun = crate::load_config(a.config.as_deref())?;
    if let Some(p) = &a.generators {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.generators = Some(serde_json::from_str(&text).with_context(|| format!("parsing generator config {}", p.display()))?);
    }
    if let Some(r) = a.role {
        cfg.role = r;
    }
    if let Some(d) = a.dynamic {
        cfg.dynamic = d;
    }
    cfg.count = a.count.or(cfg.count);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.noisy_line_dt = a.noisy_line_dt.or(cfg.noisy_line_dt);
    cfg.noise_scale = a.noise_scale.or(cfg.noise_scale);

    let spec = cfg.resolve();
    let data = make_dataset(&spec, cfg.seed).context("invalid generator configuration")?;
    write_jsonl_path(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;

    let mut log = RunLog::new("gen", Some(cfg.seed), &spec)?.output(&a.out);
    if let Some(p) = &a.export_prices {
        export_prices(&data, p)?;
        log = log.output(p);
    }
    log.write(&crate::sibling(&a.out, "run.json"))?;

    println!("{} series ({} set, seed {}) -> {}", data.len(), spec.role, cfg.seed, a.out.display());
    for (d, n) in data.composition() {
        println!("  {d:<14} {n}");
    }
    Ok(())
}

/// The first series as prices that `calibrate` maps back to the same returns:
/// Markov-switch levels are prices already, the other dynamics model the
/// log-price.
fn export_prices(data: &Dataset, path: &Path) -> Result<()> {
    let s = &data.series[0];
    let mut w = crate::csv_writer(path)?;
    w.write_record(["index", "price"])?;
    for (i, y) in s.y.iter().enumerate() {
        let price = if s.dynamic == Dynamic::MarkovSwitch { *y } else { y.exp() };
        w.write_record([i.to_string(), price.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
