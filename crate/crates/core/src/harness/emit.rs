use super::{csv_err, SweepRow};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown output format `{s}`"))),
        }
    }
}

const CSV_HEADER: [&str; 14] = [
    "problem_id",
    "kappa_inf",
    "kappa_2",
    "method",
    "m",
    "k",
    "tau",
    "converged",
    "steps",
    "total_inner",
    "per_step",
    "nbe_final",
    "ferr_final",
    "divergence_reason",
];

fn csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let per_step: Vec<String> = r.per_step.iter().map(|c| c.to_string()).collect();
        let reason = match (&r.error, &r.divergence_reason) {
            (Some(e), _) => format!("Error: {e}"),
            (None, Some(d)) => d.clone(),
            (None, None) => String::new(),
        };
        w.write_record([
            r.problem_id.clone(),
            format!("{:e}", r.kappa_inf),
            format!("{:e}", r.kappa_2),
            r.method.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            format!("{:e}", r.tau),
            r.converged.to_string(),
            r.steps.to_string(),
            r.total_inner.to_string(),
            per_step.join(";"),
            format!("{:e}", r.nbe_final),
            format!("{:e}", r.ferr_final),
            reason,
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

/// One line per problem, one column per method, cells in `total (c1,...)`
/// form.
fn markdown_string(rows: &[SweepRow]) -> String {
    let mut methods = Vec::new();
    let mut problems: Vec<&SweepRow> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !problems.iter().any(|p| p.problem_id == r.problem_id) {
            problems.push(r);
        }
    }
    let mut out = String::from("| problem | kappa_inf | kappa_2 |");
    for m in &methods {
        let _ = write!(out, " {m} |");
    }
    out.push_str("\n|---|---|---|");
    out.push_str(&"---|".repeat(methods.len()));
    out.push('\n');
    for p in problems {
        let _ = write!(out, "| {} | {:.2e} | {:.2e} |", p.problem_id, p.kappa_inf, p.kappa_2);
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.problem_id == p.problem_id && r.method == *m)
                .map_or_else(String::new, |r| r.cell());
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out
}

/// Serializes rows; the output depends only on the rows.
pub fn emit_to_string(rows: &[SweepRow], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => csv_string(rows),
        OutputFormat::Markdown => Ok(markdown_string(rows)),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::Serialize(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn emit(rows: &[SweepRow], format: OutputFormat, path: &Path) -> Result<()> {
    let text = emit_to_string(rows, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
