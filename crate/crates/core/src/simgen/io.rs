//! JSON-lines dataset files and per-series CSV export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Dynamic, GenParams, Role, Series};
use crate::error::{Error, Result};
use crate::label::TrendLabel;

#[derive(Serialize)]
struct RecordRef<'a> {
    role: Role,
    seed: u64,
    dynamic: Dynamic,
    t: &'a [f64],
    y: &'a [f64],
    labels: &'a [TrendLabel],
    gen_params: &'a GenParams,
}

#[derive(Deserialize)]
struct Record {
    role: Role,
    seed: u64,
    dynamic: Dynamic,
    t: Vec<f64>,
    y: Vec<f64>,
    labels: Vec<TrendLabel>,
    gen_params: GenParams,
}

/// One JSON object per line: `role, seed, dynamic, t, y, labels, gen_params`.
pub fn write_jsonl<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    for s in &dataset.series {
        let rec = RecordRef {
            role: dataset.role,
            seed: s.seed,
            dynamic: s.dynamic,
            t: &s.t,
            y: &s.y,
            labels: &s.labels,
            gen_params: &s.gen_params,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_path(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    write_jsonl(dataset, BufWriter::new(f))
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Dataset> {
    let mut role = None;
    let mut series = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Input(format!("dataset line {}: {e}", lineno + 1)))?;
        match role {
            None => role = Some(rec.role),
            Some(r) if r != rec.role => {
                return Err(Error::Input(format!(
                    "dataset line {}: role {} differs from {}",
                    lineno + 1,
                    rec.role,
                    r
                )))
            }
            _ => {}
        }
        let s = Series {
            seed: rec.seed,
            dynamic: rec.dynamic,
            t: rec.t,
            y: rec.y,
            labels: rec.labels,
            gen_params: rec.gen_params,
        };
        s.validate().map_err(|e| Error::Input(format!("dataset line {}: {e}", lineno + 1)))?;
        series.push(s);
    }
    let role = role.ok_or_else(|| Error::Empty("dataset file has no series".into()))?;
    Ok(Dataset { role, series })
}

pub fn read_jsonl_path(path: impl AsRef<Path>) -> Result<Dataset> {
    read_jsonl(BufReader::new(File::open(path)?))
}

/// `t,y,label` rows with a header.
pub fn write_csv<W: Write>(series: &Series, mut w: W) -> Result<()> {
    writeln!(w, "t,y,label")?;
    for ((t, y), l) in series.t.iter().zip(&series.y).zip(&series.labels) {
        writeln!(w, "{t},{y},{}", l.value())?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{make_dataset, DatasetSpec, DynamicChoice};

    #[test]
    fn jsonl_round_trip_is_exact() {
        let spec = DatasetSpec::training(DynamicChoice::Mixed).with_count(6);
        let ds = make_dataset(&spec, 3).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&ds, &mut buf).unwrap();
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, ds);
        let mut buf2 = Vec::new();
        write_jsonl(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let err = read_jsonl(&b"{\"role\":\"train\"}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(matches!(read_jsonl(&b""[..]), Err(Error::Empty(_))));
    }

    #[test]
    fn csv_has_header_and_one_row_per_point() {
        let spec = DatasetSpec::training(DynamicChoice::NoisyLine).with_count(1);
        let ds = make_dataset(&spec, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds.series[0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y,label\n"));
        assert_eq!(text.lines().count(), ds.series[0].len() + 1);
    }
}
