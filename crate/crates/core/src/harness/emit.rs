//! Aggregate-row emission: CSV with an exact header, or JSON. Floats use
//! shortest round-trip formatting; the +infinity sentinel serializes as the
//! literal `inf` so divergent metrics survive round-trips.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::aggregate::AggregateRow;
use super::sweep::parse_value;

pub const AGGREGATE_HEADER: &str =
    "task,setting,seed_count,cell_params,iteration,metric,mean,median,q10,q90,stderr";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::UnknownValue {
                key: "format".into(),
                got: other.into(),
                allowed: "csv, json".into(),
            }),
        }
    }
}

fn fmt_float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Write aggregate rows to `path`. Rows must be nonempty.
pub fn emit(rows: &[AggregateRow], format: OutputFormat, path: &Path) -> Result<()> {
    assert!(!rows.is_empty(), "emit requires at least one row");
    let body = match format {
        OutputFormat::Csv => {
            let mut s = String::with_capacity(rows.len() * 96 + 64);
            s.push_str(AGGREGATE_HEADER);
            s.push('\n');
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.task,
                    r.setting,
                    r.seed_count,
                    r.cell_params,
                    r.iteration,
                    r.metric,
                    fmt_float(r.mean),
                    fmt_float(r.median),
                    fmt_float(r.q10),
                    fmt_float(r.q90),
                    fmt_float(r.stderr)
                ));
            }
            s
        }
        OutputFormat::Json => {
            let arr: Vec<serde_json::Value> = rows.iter().map(row_to_json).collect();
            let mut s = serde_json::to_string_pretty(&arr).expect("plain values serialize");
            s.push('\n');
            s
        }
    };
    fs::write(path, body)?;
    Ok(())
}

fn json_float(v: f64) -> serde_json::Value {
    if v.is_infinite() {
        serde_json::Value::String("inf".to_string())
    } else {
        serde_json::Number::from_f64(v)
            .map(serde_json::Value::Number)
            .expect("finite floats are representable")
    }
}

fn row_to_json(r: &AggregateRow) -> serde_json::Value {
    serde_json::json!({
        "task": r.task,
        "setting": r.setting,
        "seed_count": r.seed_count,
        "cell_params": r.cell_params,
        "iteration": r.iteration,
        "metric": r.metric,
        "mean": json_float(r.mean),
        "median": json_float(r.median),
        "q10": json_float(r.q10),
        "q90": json_float(r.q90),
        "stderr": json_float(r.stderr),
    })
}

/// Parse an aggregate CSV back into rows (exact inverse of the CSV emitter
/// for values produced by it).
pub fn load_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != AGGREGATE_HEADER {
        return Err(Error::Parse {
            line: 1,
            col: 1,
            msg: format!("unexpected aggregate header `{header}`"),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::Parse {
                line: i + 2,
                col: 1,
                msg: "expected 11 fields".into(),
            });
        }
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: i + 2,
                col: 1,
                msg: format!("bad integer `{s}`"),
            })
        };
        rows.push(AggregateRow {
            task: f[0].to_string(),
            setting: f[1].to_string(),
            seed_count: parse_usize(f[2])?,
            cell_params: f[3].to_string(),
            iteration: parse_usize(f[4])? as u32,
            metric: f[5].to_string(),
            mean: parse_value(f[6])?,
            median: parse_value(f[7])?,
            q10: parse_value(f[8])?,
            q90: parse_value(f[9])?,
            stderr: parse_value(f[10])?,
        });
    }
    Ok(rows)
}
