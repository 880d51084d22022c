use std::io::{Read, Write};
use std::path::Path;

use super::config::NormKind;
use super::{RiskPoint, Stat, SweepResult};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 15] = [
    "family",
    "capacity",
    "repeat_count",
    "train_sq_mean",
    "train_sq_std",
    "test_sq_mean",
    "test_sq_std",
    "train_01_mean",
    "train_01_std",
    "test_01_mean",
    "test_01_std",
    "norm_mean",
    "norm_std",
    "norm_kind",
    "status",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

fn stat_fields(s: Option<Stat>) -> [String; 2] {
    match s {
        Some(s) => [s.mean.to_string(), s.std.to_string()],
        None => [String::new(), String::new()],
    }
}

/// Writes the header and one row per point, in order. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(points: &[RiskPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in points {
        let mut row = vec![
            p.family.clone(),
            p.capacity.to_string(),
            p.repeat_count.to_string(),
        ];
        for s in [p.train_sq, p.test_sq, p.train_01, p.test_01, p.norm] {
            row.extend(stat_fields(s));
        }
        row.push(p.norm_kind.name().to_string());
        row.push(p.status.clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(&result.points, std::io::BufWriter::new(file))
}

fn parse_stat(mean: &str, std: &str) -> Result<Option<Stat>> {
    if mean.is_empty() {
        return Ok(None);
    }
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Csv(format!("bad number {s:?}")))
    };
    Ok(Some(Stat {
        mean: num(mean)?,
        std: num(std)?,
    }))
}

/// Parses a CSV written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<RiskPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv(format!("unexpected header {header:?}")));
    }
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| {
            f(i).parse::<i64>()
                .map_err(|_| Error::Csv(format!("bad integer {:?}", f(i))))
        };
        points.push(RiskPoint {
            family: f(0).to_string(),
            capacity: int(1)?,
            repeat_count: int(2)? as usize,
            train_sq: parse_stat(f(3), f(4))?,
            test_sq: parse_stat(f(5), f(6))?,
            train_01: parse_stat(f(7), f(8))?,
            test_01: parse_stat(f(9), f(10))?,
            norm: parse_stat(f(11), f(12))?,
            norm_kind: NormKind::from_name(f(13))
                .ok_or_else(|| Error::Csv(format!("unknown norm kind {:?}", f(13))))?,
            status: f(14).to_string(),
        });
    }
    Ok(points)
}

/// Config echo, thresholds under both criteria, and run metadata as JSON.
pub fn emit_metadata(result: &SweepResult, path: &Path) -> Result<()> {
    let doc = serde_json::json!({
        "config": result.config,
        "threshold": result.threshold(),
        "threshold_squared": result.threshold_squared,
        "threshold_zero_one": result.threshold_zero_one,
        "metadata": result.metadata,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
