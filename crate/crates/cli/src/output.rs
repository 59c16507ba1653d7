//! CSV tables and JSON sidecars.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// A cell in an output table.
pub enum Cell {
    Real(f64),
    Count(usize),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits: enough to round-trip any f64.
            Cell::Real(x) => format!("{x:.16e}"),
            Cell::Count(n) => n.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

pub fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let sink: Box<dyn Write> = match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(sink);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
