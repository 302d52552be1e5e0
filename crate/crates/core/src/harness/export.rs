use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, MetricsRow};

pub const CSV_COLUMNS: [&str; 17] = [
    "scheme",
    "n",
    "rate_bits",
    "gamma",
    "jam_rule",
    "jam_set",
    "strategy",
    "trials",
    "p_err_hat",
    "p_err_ci",
    "alpha_hat",
    "beta_hat",
    "ab_ci",
    "stealth_gap",
    "status",
    "p_err_innocent",
    "p_err_active",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn io_err(path: &str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.to_string(), cause: e.to_string() }
}

pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.n.to_string(),
            opt(r.rate_bits),
            r.gamma.to_string(),
            r.jam_rule.clone(),
            r.jam_set.clone(),
            r.strategy.clone(),
            r.trials.to_string(),
            opt(r.p_err_hat),
            opt(r.p_err_ci),
            opt(r.alpha_hat),
            opt(r.beta_hat),
            opt(r.ab_ci),
            opt(r.stealth_gap),
            r.status.clone(),
            opt(r.p_err_innocent),
            opt(r.p_err_active),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[MetricsRow], mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)
}

pub fn read_rows_json(path: &Path) -> Result<Vec<MetricsRow>, HarnessError> {
    let p = path.display().to_string();
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(|e| io_err(&p, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&p, e))
}

/// Writes `rows` to `path`.
pub fn export(rows: &[MetricsRow], format: Format, path: &Path) -> Result<(), HarnessError> {
    let p = path.display().to_string();
    let file = File::create(path).map_err(|e| io_err(&p, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(rows, &mut out).map_err(|e| io_err(&p, e))?,
        Format::Json => write_json(rows, &mut out).map_err(|e| io_err(&p, e))?,
    }
    out.flush().map_err(|e| io_err(&p, e))
}

/// Any flat row type as CSV (header from the field names) or pretty JSON.
pub fn write_records<T: Serialize, W: Write>(rows: &[T], format: Format, mut out: W) -> Result<(), String> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r).map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| e.to_string())?;
            writeln!(out).map_err(|e| e.to_string())
        }
    }
}
