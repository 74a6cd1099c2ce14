use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, NaiveDate, NaiveDateTime};
use clap::Args;
use serde::{Deserialize, Serialize};
use trendlab_core::evalkit::{calibrate, CalibrationSearch};
use trendlab_core::simgen::GenConfig;
use trendlab_core::Dynamic;

use crate::runlog::RunLog;

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Two columns: integer index or ISO-8601 date, then price. An optional
    /// header line is skipped.
    #[arg(long)]
    pub csv: PathBuf,
    /// Dynamic whose parameters are searched.
    #[arg(long)]
    pub dynamic: Option<Dynamic>,
    /// Generator configs the search starts from (other dynamics are copied through).
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Best generator config, loadable by `gen --generators`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateRun {
    pub dynamic: Dynamic,
    pub base: Option<GenConfig>,
    pub search: CalibrationSearch,
}

impl Default for CalibrateRun {
    fn default() -> Self {
        Self { dynamic: Dynamic::MarkovSwitch, base: None, search: CalibrationSearch::default() }
    }
}

/// The calibrated generators plus how they were found. Extra fields are
/// ignored when the file is read back as a `GenConfig`.
#[derive(Debug, Serialize)]
struct CalibrationOutput<'a> {
    #[serde(flatten)]
    config: &'a GenConfig,
    calibration: CalibrationInfo<'a>,
}

#[derive(Debug, Serialize)]
struct CalibrationInfo<'a> {
    source: &'a Path,
    dynamic: Dynamic,
    n_prices: usize,
    distance: f64,
    best_index: usize,
    search: CalibrationSearch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stamp {
    Index(i64),
    Time(NaiveDateTime),
}

fn parse_stamp(s: &str) -> Option<Stamp> {
    if let Ok(i) = s.parse::<i64>() {
        return Some(Stamp::Index(i));
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0).map(Stamp::Time);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(Stamp::Time(t.naive_utc()));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(Stamp::Time)
}

/// Prices from a `stamp,price` CSV. Stamps must be all integers or all dates,
/// strictly increasing; prices must be finite and positive.
pub fn read_prices(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut prices = Vec::new();
    let mut last: Option<Stamp> = None;
    for rec in r.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            bail!("{}: line {line}: expected 2 columns (date or index, price), found {}", path.display(), rec.len());
        }
        let (stamp, price) = (&rec[0], &rec[1]);
        let stamp_parsed = parse_stamp(stamp);
        let price_parsed = price.parse::<f64>();
        if line == 1 && stamp_parsed.is_none() && price_parsed.is_err() {
            continue; // header
        }
        let Some(stamp) = stamp_parsed else {
            bail!("{}: line {line}: `{stamp}` is neither an integer index nor an ISO-8601 date", path.display());
        };
        let price = match price_parsed {
            Ok(p) if p.is_finite() => p,
            _ => bail!("{}: line {line}: price `{price}` is not a number", path.display()),
        };
        if price <= 0.0 {
            bail!("{}: line {line}: price {price} is not positive", path.display());
        }
        if let Some(prev) = last {
            let increasing = match (prev, stamp) {
                (Stamp::Index(a), Stamp::Index(b)) => b > a,
                (Stamp::Time(a), Stamp::Time(b)) => b > a,
                _ => bail!("{}: line {line}: mixes integer indices and dates", path.display()),
            };
            if !increasing {
                bail!("{}: line {line}: `{}` does not come after the previous row", path.display(), &rec[0]);
            }
        }
        last = Some(stamp);
        prices.push(price);
    }
    if prices.len() < 2 {
        bail!("{}: need at least two prices, found {}", path.display(), prices.len());
    }
    Ok(prices)
}

pub fn run(a: CalibrateArgs) -> Result<()> {
    let mut cfg: CalibrateRun = crate::load_config(a.config.as_deref())?;
    if let Some(d) = a.dynamic {
        cfg.dynamic = d;
    }
    if let Some(p) = &a.base {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        cfg.base = Some(serde_json::from_str(&text).with_context(|| format!("parsing generator config {}", p.display()))?);
    }
    cfg.search.n_candidates = a.candidates.unwrap_or(cfg.search.n_candidates);
    cfg.search.n_draws = a.draws.unwrap_or(cfg.search.n_draws);
    cfg.search.seed = a.seed.unwrap_or(cfg.search.seed);
    let base = cfg.base.clone().unwrap_or_else(GenConfig::training);
    cfg.base = Some(base.clone());

    let prices = read_prices(&a.csv)?;
    // every dynamic is compared on log-price increments
    let target: Vec<f64> = prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let result = calibrate(cfg.dynamic, &base, &target, &cfg.search).context("calibration")?;

    let out = CalibrationOutput {
        config: &result.config,
        calibration: CalibrationInfo {
            source: &a.csv,
            dynamic: cfg.dynamic,
            n_prices: prices.len(),
            distance: result.distance,
            best_index: result.best_index,
            search: cfg.search,
        },
    };
    crate::write_json(&a.out, &out)?;
    let cand_path = crate::sibling(&a.out, "candidates.csv");
    let mut w = crate::csv_writer(&cand_path)?;
    w.write_record(["candidate", "distance", "running_min"])?;
    for (i, (d, m)) in result.candidate_distances.iter().zip(result.running_minimum()).enumerate() {
        w.write_record([i.to_string(), d.to_string(), m.to_string()])?;
    }
    w.flush()?;
    RunLog::new("calibrate", Some(cfg.search.seed), &cfg)?
        .input(&a.csv)
        .output(&a.out)
        .output(&cand_path)
        .write(&crate::sibling(&a.out, "run.json"))?;
    println!(
        "best {} config: W1 distance {:.6} (candidate {} of {}) -> {}",
        cfg.dynamic,
        result.distance,
        result.best_index,
        result.candidate_distances.len(),
        a.out.display()
    );
    Ok(())
}
