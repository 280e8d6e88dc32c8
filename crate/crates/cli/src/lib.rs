//! Batch front end: resolves a run configuration, dispatches to the
//! analysis and writes plot-ready CSV or JSON.

pub mod commands;
pub mod config;
pub mod grid;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{Context, Result};

pub use config::{Args, RunConfig};
pub use output::Table;

/// Runs one resolved configuration and writes its output.
pub fn run(cfg: &RunConfig, figure: Option<config::Figure>) -> Result<()> {
    if let Some(n) = cfg.threads {
        // Only the first call in a process can size the global pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread count not applied: {e}");
        }
    }
    let table = commands::run_command(cfg).with_context(|| format!("{} failed", cfg.command))?;
    let note = figure.map(|f| format!("figure {}", f.name()));
    let mut out: Box<dyn Write> = match &cfg.output.path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match cfg.output.format {
        config::Format::Csv => output::write_csv(&mut out, cfg, &table, note.as_deref())?,
        config::Format::Json => output::write_json(&mut out, cfg, &table, note.as_deref())?,
    }
    out.flush()?;
    Ok(())
}
