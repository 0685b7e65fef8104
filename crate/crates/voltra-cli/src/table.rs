//! CSV and run-manifest emission.
//!
//! CSV is RFC-4180-flavoured: header row, comma separators, LF line endings,
//! minimal quoting (only fields containing a comma, quote or newline).
//! Floats are written with 17 significant digits so a read-back reproduces
//! them bitwise.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn push_row(out: &mut String, row: &[String]) {
    let escaped: Vec<String> = row.iter().map(|f| escape(f)).collect();
    out.push_str(&escaped.join(","));
    out.push('\n');
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<usize> {
    let mut out = String::new();
    let head: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    push_row(&mut out, &head);
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "ragged CSV row");
        push_row(&mut out, row);
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(rows.len())
}

/// Everything needed to reproduce the run: version, command, thread count,
/// artifact list, a few result headlines and the verbatim config text.
pub fn write_manifest(
    path: &Path,
    command: &str,
    threads: Option<usize>,
    artifacts: &[String],
    summary: &[(String, String)],
    config_text: &str,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "voltra {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "command: {command}");
    let _ = writeln!(
        out,
        "threads: {}",
        threads.map_or_else(|| "default".to_string(), |n| n.to_string())
    );
    let _ = writeln!(out, "artifacts: {}", artifacts.join(", "));
    if !summary.is_empty() {
        out.push_str("summary:\n");
        for (k, v) in summary {
            let _ = writeln!(out, "    {k}: {v}");
        }
    }
    out.push_str("config:\n");
    for line in config_text.lines() {
        let _ = writeln!(out, "    {line}");
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
