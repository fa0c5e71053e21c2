//! CSV persistence. Every float is written with 17 significant digits, so a
//! write/read cycle returns the exact same bits.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::aggregate::SummaryRow;
use super::run::{RegretTrace, TraceRow};

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("not a number: '{s}'")))
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse::<T>().map_err(|_| Error::invalid(format!("not an integer: '{s}'")))
}

fn write_atomic(path: &Path, bytes: Vec<u8>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn traces_to_csv(traces: &[RegretTrace]) -> Result<Vec<u8>> {
    let dim = traces
        .iter()
        .flat_map(|t| t.rows.first())
        .map(|r| r.x.len())
        .next()
        .ok_or_else(|| Error::invalid("no trace rows to write"))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "trial".into(), "eval_index".into(), "node_id".into(), "tick".into()];
    header.extend((0..dim).map(|i| format!("x_{i}")));
    header.extend(["y".to_string(), "best_so_far".into(), "immediate_regret".into()]);
    w.write_record(&header)?;
    for t in traces {
        for r in &t.rows {
            if r.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.x.len() });
            }
            let mut rec = vec![t.method.clone(), t.trial.to_string(), r.eval_index.to_string(), r.node_id.to_string(), r.tick.to_string()];
            rec.extend(r.x.iter().map(|v| fmt_num(*v)));
            rec.push(fmt_num(r.y));
            rec.push(fmt_num(r.best_so_far));
            rec.push(r.immediate_regret.map(fmt_num).unwrap_or_default());
            w.write_record(&rec)?;
        }
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Err(Error::invalid("empty summary"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "eval_index", "mean", "median", "ci_lo", "ci_hi"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.eval_index.to_string(),
            fmt_num(r.mean),
            fmt_num(r.median),
            fmt_num(r.ci_lo),
            fmt_num(r.ci_hi),
        ])?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

/// Writes the trace table. Nothing is written for an empty list.
pub fn write_traces(path: &Path, traces: &[RegretTrace]) -> Result<()> {
    let bytes = traces_to_csv(traces)?;
    write_atomic(path, bytes)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let bytes = summary_to_csv(rows)?;
    write_atomic(path, bytes)
}

/// Reads a trace table back. `n_init` and `flags` are not stored and come
/// back as zero.
pub fn read_traces(path: &Path) -> Result<Vec<RegretTrace>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let dim = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.len() != 8 + dim || &header[0] != "method" {
        return Err(Error::invalid("unexpected trace header"));
    }
    let mut out: Vec<RegretTrace> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let method = rec[0].to_string();
        let trial: usize = parse_int(&rec[1])?;
        let x = (0..dim).map(|i| parse_num(&rec[5 + i])).collect::<Result<Vec<_>>>()?;
        let regret = &rec[7 + dim];
        let row = TraceRow {
            eval_index: parse_int(&rec[2])?,
            node_id: parse_int(&rec[3])?,
            tick: parse_int(&rec[4])?,
            x,
            y: parse_num(&rec[5 + dim])?,
            best_so_far: parse_num(&rec[6 + dim])?,
            immediate_regret: if regret.is_empty() { None } else { Some(parse_num(regret)?) },
        };
        match out.last_mut() {
            Some(t) if t.method == method && t.trial == trial => t.rows.push(row),
            _ => out.push(RegretTrace { method, trial, n_init: 0, rows: vec![row], flags: 0 }),
        }
    }
    Ok(out)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["method", "eval_index", "mean", "median", "ci_lo", "ci_hi"] {
        return Err(Error::invalid("unexpected summary header"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(SummaryRow {
            method: rec[0].to_string(),
            eval_index: parse_int(&rec[1])?,
            mean: parse_num(&rec[2])?,
            median: parse_num(&rec[3])?,
            ci_lo: parse_num(&rec[4])?,
            ci_hi: parse_num(&rec[5])?,
            n: 0,
        });
    }
    Ok(out)
}
