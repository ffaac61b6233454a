//! CSV output for traces and Monte Carlo summaries.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::Path;

use super::{EpisodeTrace, McSummary};
use crate::error::{Error, Result};

fn num(out: &mut String, v: f64) {
    if v.is_finite() {
        let _ = write!(out, "{v:.16e}");
    } else {
        let _ = write!(out, "{v}");
    }
}

pub fn trace_header(s: usize, d: usize) -> String {
    let mut cols = vec![
        "k".to_string(),
        "y_r".into(),
        "y".into(),
        "z".into(),
        "u".into(),
    ];
    cols.extend((1..=s).map(|i| format!("pi_{i}")));
    for i in 1..=s {
        cols.extend((1..=d).map(|j| format!("w_hat_{i}_{j}")));
    }
    cols.join(",")
}

/// `k,y_r,y,z,u,pi_1..pi_s,w_hat_1_1..w_hat_s_d`, one row per step.
pub fn trace_csv(trace: &EpisodeTrace) -> String {
    let mut out = trace_header(trace.subsystems, trace.dim);
    out.push('\n');
    for i in 0..trace.len() {
        let _ = write!(out, "{}", trace.k[i]);
        for v in [trace.y_r[i], trace.y[i], trace.z[i], trace.u[i]]
            .into_iter()
            .chain(trace.posteriors[i].iter().copied())
            .chain(trace.w_hat[i].iter().copied())
        {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

/// Per-run rows `controller,run,seed,j_bar_run`, then an aggregate block
/// `controller,runs_ok,runs_failed,j_bar_mean`. Failed runs carry `NaN`.
pub fn summary_csv(summaries: &[McSummary]) -> Result<String> {
    let mut out = String::from("controller,run,seed,j_bar_run\n");
    for s in summaries {
        if s.window.lo < 1 || s.window.lo > s.window.hi {
            return Err(Error::EmptyWindow {
                lo: s.window.lo,
                hi: s.window.hi,
                steps: 0,
            });
        }
        for r in &s.runs {
            let _ = write!(out, "{},{},{},", s.controller, r.run, r.seed);
            num(&mut out, r.j_bar.unwrap_or(f64::NAN));
            out.push('\n');
        }
    }
    out.push_str("controller,runs_ok,runs_failed,j_bar_mean\n");
    for s in summaries {
        let _ = write!(out, "{},{},{},", s.controller, s.runs_ok(), s.runs_failed());
        num(&mut out, s.j_bar);
        out.push('\n');
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str, overwrite: bool) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut opts = OpenOptions::new();
    opts.write(true);
    if overwrite {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::FileExists(path.to_path_buf())
        } else {
            io(e)
        }
    })?;
    file.write_all(contents.as_bytes()).map_err(io)
}

pub fn write_trace_csv(
    trace: &EpisodeTrace,
    path: impl AsRef<Path>,
    overwrite: bool,
) -> Result<()> {
    write_file(path.as_ref(), &trace_csv(trace), overwrite)
}

pub fn write_summary_csv(
    summaries: &[McSummary],
    path: impl AsRef<Path>,
    overwrite: bool,
) -> Result<()> {
    let text = summary_csv(summaries)?;
    write_file(path.as_ref(), &text, overwrite)
}

/// A trace CSV read back as header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ParsedTrace {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn parse_trace_csv(text: &str) -> Result<ParsedTrace> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::invalid("csv", "missing header"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid("csv", format!("row {}: {e}", i + 1)))?;
            if row.len() != header.len() {
                return Err(Error::invalid(
                    "csv",
                    format!(
                        "row {} has {} fields, header has {}",
                        i + 1,
                        row.len(),
                        header.len()
                    ),
                ));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedTrace { header, rows })
}
