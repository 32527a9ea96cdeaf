//! Delimited-text ingestion.
//!
//! Events: `user<TAB>item<TAB>timestamp` per line. Comma and `::` separated lines
//! are accepted too; with more than three fields the last one is the timestamp.
//! Series: one real value per line. In both formats a first line whose leading
//! token is not numeric is treated as a header.

use std::io::BufRead;

use crate::error::{LatticeError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub user: String,
    pub item: String,
    pub timestamp: i64,
}

fn fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains("::") {
        line.split("::").map(str::trim).collect()
    } else {
        line.split(',').map(str::trim).collect()
    }
}

fn is_numeric(tok: &str) -> bool {
    tok.parse::<f64>().is_ok()
}

fn content_lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(LatticeError::from))
        .filter(|r| match r {
            Ok((_, l)) => !l.trim().is_empty() && !l.trim_start().starts_with('#'),
            Err(_) => true,
        })
}

pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (n, entry) in content_lines(reader).enumerate() {
        let (line_no, line) = entry?;
        let f = fields(&line);
        if n == 0 && !is_numeric(f[0]) {
            continue;
        }
        if f.len() < 3 {
            return Err(LatticeError::Parse {
                line: line_no,
                msg: format!("expected user, item, timestamp; got {} field(s)", f.len()),
            });
        }
        let ts = f[f.len() - 1];
        let timestamp = ts
            .parse::<i64>()
            .or_else(|_| ts.parse::<f64>().map(|v| v as i64))
            .map_err(|_| LatticeError::Parse {
                line: line_no,
                msg: format!("bad timestamp {ts:?}"),
            })?;
        out.push(Event {
            user: f[0].to_string(),
            item: f[1].to_string(),
            timestamp,
        });
    }
    if out.is_empty() {
        return Err(LatticeError::EmptyDataset);
    }
    Ok(out)
}

pub fn read_series<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, entry) in content_lines(reader).enumerate() {
        let (line_no, line) = entry?;
        let tok = fields(&line)[0];
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if n == 0 => continue,
            _ => {
                return Err(LatticeError::Parse {
                    line: line_no,
                    msg: format!("bad value {tok:?}"),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(LatticeError::EmptyDataset);
    }
    Ok(out)
}
