//! CSV and JSON writers.

use std::io::Write;

use anyhow::Result;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, CONFIG_BEGIN, CONFIG_END};

/// Bumped whenever a command's column layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Run-level numbers such as divergence counts.
    pub stats: Map<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Nine significant digits, fixed notation for moderate magnitudes.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp).max(0) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn version_line(cfg: &RunConfig) -> String {
    format!(
        "inopo {} | {} schema {SCHEMA_VERSION}",
        env!("CARGO_PKG_VERSION"),
        cfg.command
    )
}

pub fn write_csv(
    w: &mut dyn Write,
    cfg: &RunConfig,
    table: &Table,
    note: Option<&str>,
) -> Result<()> {
    writeln!(w, "# {}", version_line(cfg))?;
    if let Some(n) = note {
        writeln!(w, "# {n}")?;
    }
    for (k, v) in &table.stats {
        writeln!(w, "# stat {k} = {v}")?;
    }
    writeln!(w, "{CONFIG_BEGIN}")?;
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            writeln!(w, "#")?;
        } else {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "{CONFIG_END}")?;
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_json(
    w: &mut dyn Write,
    cfg: &RunConfig,
    table: &Table,
    note: Option<&str>,
) -> Result<()> {
    let doc = json!({
        "version": version_line(cfg),
        "note": note,
        "config": cfg,
        "columns": table.columns,
        "rows": table.rows,
        "stats": table.stats,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}
