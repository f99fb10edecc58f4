use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use crate::verification::{sort_reports, AuditReport, Bound};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no audit reports to emit")]
    Empty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned human-readable table.
    Text,
    /// One JSON record per audit.
    JsonLines,
}

/// 17 significant digits: enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn bound_text(b: Bound) -> String {
    match b {
        Bound::AtMost(t) => format!("<= {t:e}"),
        Bound::AtLeast(t) => format!(">= {t:e}"),
        Bound::Info => "-".into(),
    }
}

fn sorted(reports: &[AuditReport]) -> Vec<AuditReport> {
    let mut v = reports.to_vec();
    sort_reports(&mut v);
    v
}

pub fn render_text(reports: &[AuditReport]) -> String {
    let reports = sorted(reports);
    let mut out = String::new();
    let passed = reports.iter().filter(|r| r.pass()).count();
    let overall = if passed == reports.len() { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "overall: {overall} ({passed}/{} audits pass)", reports.len());
    for r in &reports {
        let _ = writeln!(out);
        let _ = writeln!(out, "[{}] {}", r.name(), if r.pass() { "pass" } else { "FAIL" });
        for (k, v) in &r.provenance {
            let _ = writeln!(out, "  provenance {k} = {v}");
        }
        let width = r.metrics().iter().map(|m| m.name.len()).max().unwrap_or(0);
        for m in r.metrics() {
            let status = match (m.bound, m.pass()) {
                (Bound::Info, _) => "info",
                (_, true) => "ok",
                (_, false) => "FAIL",
            };
            let _ = writeln!(out, "  {:<width$}  {:>24}  {:<12}  {status}", m.name, num(m.value), bound_text(m.bound));
        }
        for n in &r.notes {
            let _ = writeln!(out, "  note: {n}");
        }
    }
    out
}

fn record(r: &AuditReport) -> Value {
    let metrics: Vec<Value> = r
        .metrics()
        .iter()
        .map(|m| {
            let (kind, limit) = match m.bound {
                Bound::AtMost(t) => ("at-most", json!(t)),
                Bound::AtLeast(t) => ("at-least", json!(t)),
                Bound::Info => ("info", Value::Null),
            };
            json!({ "name": m.name, "value": m.value, "bound": kind, "tolerance": limit, "pass": m.pass() })
        })
        .collect();
    json!({ "name": r.name(), "pass": r.pass(), "metrics": metrics, "provenance": r.provenance, "notes": r.notes })
}

pub fn render_json_lines(reports: &[AuditReport]) -> String {
    sorted(reports).iter().map(|r| record(r).to_string() + "\n").collect()
}

/// Write reports sorted by audit name.
pub fn emit_report(reports: &[AuditReport], format: ReportFormat, path: &Path) -> Result<(), OutputError> {
    if reports.is_empty() {
        return Err(OutputError::Empty);
    }
    let body = match format {
        ReportFormat::Text => render_text(reports),
        ReportFormat::JsonLines => render_json_lines(reports),
    };
    std::fs::write(path, body).map_err(io_err(path))
}

/// CSV with a header row; every value at 17 significant digits.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|x| num(*x)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

/// Whitespace-separated columns under a `#` header line.
pub fn write_series(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), OutputError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    let len = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "# {}", header.join("  "))?;
        for k in 0..len {
            let line: Vec<String> = columns.iter().map(|c| num(c[k])).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()
    };
    emit().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(name: &str, ok: bool) -> AuditReport {
        let mut r = AuditReport::new(name);
        r.push("err", if ok { 0.5 } else { 2.0 }, Bound::AtMost(1.0)).push("n", 3.0, Bound::Info);
        r
    }

    #[test]
    fn json_lines_one_record_per_audit_sorted() {
        let text = render_json_lines(&[sample("b", true), sample("a", true)]);
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["name"], "a");
        assert!(lines.iter().all(|l| l["pass"] == true));
        assert_eq!(lines[0]["metrics"][0]["tolerance"], 1.0);
        assert_eq!(lines[0]["metrics"][1]["tolerance"], Value::Null);
    }

    #[test]
    fn text_reports_overall_status() {
        let text = render_text(&[sample("x", true), sample("y", false)]);
        assert!(text.starts_with("overall: FAIL (1/2 audits pass)"));
        assert!(text.contains("[y] FAIL"));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = emit_report(&[sample("x", true)], ReportFormat::Text, Path::new("")).unwrap_err();
        assert!(matches!(err, OutputError::Io { ref path, .. } if path.as_os_str().is_empty()));
        assert!(matches!(emit_report(&[], ReportFormat::Text, Path::new("r.txt")), Err(OutputError::Empty)));
    }

    #[test]
    fn csv_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let v = 0.1 + 0.2;
        write_csv(&p, &["t [s]".into(), "x [m]".into()], vec![vec![0.0, v]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let cell: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(cell, v);
    }
}
