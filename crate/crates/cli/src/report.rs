use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde_json::Value;

use crate::runlog::RunLog;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of `eval`.
    #[arg(long)]
    pub eval_dir: PathBuf,
    /// Output directory of `compare`.
    #[arg(long)]
    pub compare_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(rec?.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn markdown_table(rows: &[Vec<String>], out: &mut String) {
    let Some((head, body)) = rows.split_first() else { return };
    let _ = writeln!(out, "| {} |", head.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
    for r in body {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn fmt_num(v: &Value) -> String {
    v.as_f64().map_or_else(|| v.to_string(), |x| format!("{x:.4}"))
}

pub fn run(a: ReportArgs) -> Result<()> {
    let summary_path = a.eval_dir.join("summary.json");
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let mut log = RunLog::new("report", None, serde_json::json!({ "eval_dir": &a.eval_dir, "compare_dir": &a.compare_dir }))?
        .input(&summary_path);

    let mut md = String::from("# Trend classifier report\n\n");
    let _ = writeln!(md, "Validation set: `{}` ({} series).\n", summary["dataset"].as_str().unwrap_or("?"), summary["n_series"]);

    md.push_str("## Median loss\n\n");
    let table_path = a.eval_dir.join("median_table.csv");
    markdown_table(&read_csv(&table_path)?, &mut md);
    log = log.input(&table_path);

    md.push_str("## Dispersion\n\n| estimator | median | q1 | q3 | IQR | failed |\n|---|---|---|---|---|---|\n");
    for e in summary["estimators"].as_array().into_iter().flatten() {
        let o = &e["overall"];
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} |",
            e["name"].as_str().unwrap_or("?"),
            fmt_num(&o["median"]),
            fmt_num(&o["q1"]),
            fmt_num(&o["q3"]),
            fmt_num(&o["iqr"]),
            e["n_failed"]
        );
    }
    md.push('\n');
    if let Some(members) = summary["pooled_members"].as_array().filter(|m| !m.is_empty()) {
        let names: Vec<&str> = members.iter().filter_map(Value::as_str).collect();
        let _ = writeln!(md, "Pooled estimator: mean probabilities of {}.\n", names.join(", "));
    }

    if let Some(dir) = &a.compare_dir {
        let mut boots: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                let n = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                n.starts_with("bootstrap_") && n.ends_with(".csv")
            })
            .collect();
        boots.sort();
        for p in boots {
            let col = p.file_stem().unwrap().to_string_lossy().trim_start_matches("bootstrap_").to_string();
            let _ = writeln!(md, "## Median differences by {col}\n");
            markdown_table(&read_csv(&p)?, &mut md);
            let svg = format!("boxplot_{col}.svg");
            if dir.join(&svg).exists() {
                let _ = writeln!(md, "![loss by {col}]({})\n", dir.join(&svg).display());
            }
            log = log.input(&p);
        }
        let ols = dir.join("ols.csv");
        if ols.exists() {
            md.push_str("## Loss regression\n\n");
            markdown_table(&read_csv(&ols)?, &mut md);
            log = log.input(&ols);
        }
    }

    crate::write_text(&a.out, &md)?;
    log.output(&a.out).write(&crate::sibling(&a.out, "run.json"))?;
    println!("report -> {}", a.out.display());
    Ok(())
}
