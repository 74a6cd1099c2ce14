//! The `trendlab` command-line tool.
//!
//! Every command takes an optional `--config` JSON document holding its
//! parameters; flags given on the command line override the document. The
//! resolved parameters are written next to the outputs as `*.run.json` so a run
//! can be repeated exactly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

pub mod calibrate;
pub mod compare;
pub mod eval;
pub mod gen;
pub mod plot;
pub mod report;
pub mod runlog;
pub mod svg;
pub mod train;

#[derive(Debug, Parser)]
#[command(name = "trendlab", version, about = "Simulate, train and compare trend classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset (JSON lines).
    Gen(gen::GenArgs),
    /// Train one classifier, or every triplet of a sweep manifest.
    Train(train::TrainArgs),
    /// Score classifiers on a validation dataset.
    Eval(eval::EvalArgs),
    /// Bootstrap and OLS comparison of per-series losses.
    Compare(compare::CompareArgs),
    /// Fit a generator config to a price CSV.
    Calibrate(calibrate::CalibrateArgs),
    /// Project a model's hidden states on up/flat/down series.
    PlotState(plot::PlotStateArgs),
    /// Assemble evaluation and comparison outputs into a Markdown report.
    Report(report::ReportArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Compare(a) => compare::run(a),
        Command::Calibrate(a) => calibrate::run(a),
        Command::PlotState(a) => plot::run(a),
        Command::Report(a) => report::run(a),
    }
}

/// Reads a JSON config document, or the type's defaults when no path is given.
pub(crate) fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// `dir/name.ext` -> `dir/name.<suffix>`, e.g. the run log of an output file.
pub(crate) fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// CSV writer that renders floats with Rust's shortest round-trip formatting.
pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}
