use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "round,f_gap_last,f_gap_avg,dist_sq_v,dist_sq_x,lambda_used,s_used,cum_comm_rounds,cum_vectors,cum_oracle_total,cum_oracle_parallel,potential_sdane,potential_acc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl TraceFormat {
    /// Guesses the format from a file extension; anything but `.jsonl` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => TraceFormat::Jsonl,
            _ => TraceFormat::Csv,
        }
    }
}

/// Metrics after a round. Round 0 describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub round: usize,
    pub f_gap_last: f64,
    pub f_gap_avg: f64,
    pub dist_sq_v: f64,
    pub dist_sq_x: f64,
    pub lambda_used: f64,
    pub s_used: usize,
    pub cum_comm_rounds: u64,
    pub cum_vectors: u64,
    pub cum_oracle_total: u64,
    /// Sum over rounds of the largest per-client call count.
    pub cum_oracle_parallel: u64,
    pub potential_sdane: Option<f64>,
    pub potential_acc: Option<f64>,
}

/// 17 significant digits; non-finite values use Rust's spelling.
fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{x}\"")
    }
}

fn csv_row(r: &TraceRecord) -> String {
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.round,
        fmt_float(r.f_gap_last),
        fmt_float(r.f_gap_avg),
        fmt_float(r.dist_sq_v),
        fmt_float(r.dist_sq_x),
        fmt_float(r.lambda_used),
        r.s_used,
        r.cum_comm_rounds,
        r.cum_vectors,
        r.cum_oracle_total,
        r.cum_oracle_parallel,
        opt(r.potential_sdane),
        opt(r.potential_acc),
    )
}

fn json_row(r: &TraceRecord) -> String {
    let opt = |v: Option<f64>| v.map(fmt_json_float).unwrap_or_else(|| "null".into());
    let mut s = String::with_capacity(320);
    write!(
        s,
        "{{\"round\":{},\"f_gap_last\":{},\"f_gap_avg\":{},\"dist_sq_v\":{},\"dist_sq_x\":{},\"lambda_used\":{},\"s_used\":{},\"cum_comm_rounds\":{},\"cum_vectors\":{},\"cum_oracle_total\":{},\"cum_oracle_parallel\":{},\"potential_sdane\":{},\"potential_acc\":{}}}",
        r.round,
        fmt_json_float(r.f_gap_last),
        fmt_json_float(r.f_gap_avg),
        fmt_json_float(r.dist_sq_v),
        fmt_json_float(r.dist_sq_x),
        fmt_json_float(r.lambda_used),
        r.s_used,
        r.cum_comm_rounds,
        r.cum_vectors,
        r.cum_oracle_total,
        r.cum_oracle_parallel,
        opt(r.potential_sdane),
        opt(r.potential_acc),
    )
    .expect("writing to a String");
    s
}

/// Serializes records to a string in the given format.
pub fn render_trace(records: &[TraceRecord], format: TraceFormat) -> String {
    let mut out = String::new();
    if format == TraceFormat::Csv {
        out.push_str(TRACE_HEADER);
        out.push('\n');
    }
    for r in records {
        out.push_str(&match format {
            TraceFormat::Csv => csv_row(r),
            TraceFormat::Jsonl => json_row(r),
        });
        out.push('\n');
    }
    out
}

pub fn write_trace(records: &[TraceRecord], path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(render_trace(records, format).as_bytes())?;
    f.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Trace(msg.into())
}

fn parse_float(field: &str, name: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| bad(format!("{name}: not a number: {field:?}")))
}

fn parse_int<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
    field.trim().parse().map_err(|_| bad(format!("{name}: not an integer: {field:?}")))
}

fn read_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(bad("unexpected CSV header"));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 13 {
            return Err(bad(format!("expected 13 fields, found {}", row.len())));
        }
        let opt = |i: usize, name: &str| -> Result<Option<f64>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                parse_float(&row[i], name).map(Some)
            }
        };
        out.push(TraceRecord {
            round: parse_int(&row[0], "round")?,
            f_gap_last: parse_float(&row[1], "f_gap_last")?,
            f_gap_avg: parse_float(&row[2], "f_gap_avg")?,
            dist_sq_v: parse_float(&row[3], "dist_sq_v")?,
            dist_sq_x: parse_float(&row[4], "dist_sq_x")?,
            lambda_used: parse_float(&row[5], "lambda_used")?,
            s_used: parse_int(&row[6], "s_used")?,
            cum_comm_rounds: parse_int(&row[7], "cum_comm_rounds")?,
            cum_vectors: parse_int(&row[8], "cum_vectors")?,
            cum_oracle_total: parse_int(&row[9], "cum_oracle_total")?,
            cum_oracle_parallel: parse_int(&row[10], "cum_oracle_parallel")?,
            potential_sdane: opt(11, "potential_sdane")?,
            potential_acc: opt(12, "potential_acc")?,
        });
    }
    Ok(out)
}

fn json_float(obj: &Value, name: &str) -> Result<Option<f64>> {
    match obj.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n.as_f64().map(Some).ok_or_else(|| bad(format!("{name}: bad number"))),
        Some(Value::String(s)) => parse_float(s, name).map(Some),
        Some(_) => Err(bad(format!("{name}: expected a number"))),
    }
}

fn json_required(obj: &Value, name: &str) -> Result<f64> {
    json_float(obj, name)?.ok_or_else(|| bad(format!("missing field {name}")))
}

fn json_int(obj: &Value, name: &str) -> Result<u64> {
    obj.get(name).and_then(Value::as_u64).ok_or_else(|| bad(format!("{name}: expected a non-negative integer")))
}

fn read_jsonl(text: &str) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", lineno + 1)))?;
        out.push(TraceRecord {
            round: json_int(&v, "round")? as usize,
            f_gap_last: json_required(&v, "f_gap_last")?,
            f_gap_avg: json_required(&v, "f_gap_avg")?,
            dist_sq_v: json_required(&v, "dist_sq_v")?,
            dist_sq_x: json_required(&v, "dist_sq_x")?,
            lambda_used: json_required(&v, "lambda_used")?,
            s_used: json_int(&v, "s_used")? as usize,
            cum_comm_rounds: json_int(&v, "cum_comm_rounds")?,
            cum_vectors: json_int(&v, "cum_vectors")?,
            cum_oracle_total: json_int(&v, "cum_oracle_total")?,
            cum_oracle_parallel: json_int(&v, "cum_oracle_parallel")?,
            potential_sdane: json_float(&v, "potential_sdane")?,
            potential_acc: json_float(&v, "potential_acc")?,
        });
    }
    Ok(out)
}

/// Parses a trace in either format; CSV is recognised by its header line.
pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>> {
    if text.starts_with("round,") {
        read_csv(text)
    } else {
        read_jsonl(text)
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let mut text = String::new();
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_trace(&text)
}
