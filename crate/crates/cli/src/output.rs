//! Tabular and JSON writers. Every file starts with a metadata record.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value as Json};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// Metadata echoed into every output: tool version, subcommand, full
/// command line, plus command-specific fields.
pub fn meta(command: &str, extra: Json) -> Json {
    let mut m = json!({
        "tool": "mid",
        "version": VERSION,
        "command": command,
        "argv": std::env::args().collect::<Vec<_>>(),
    });
    if let (Some(obj), Json::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    m
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// CSV with a leading `# {json}` comment line.
pub fn csv_text(meta: &Json, table: &Table) -> Result<String> {
    let mut buf = format!("# {meta}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header)?;
        for r in &table.rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(buf)?)
}

pub fn json_text(meta: &Json, data: Json) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&json!({ "meta": meta, "data": data }))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `out`, or stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn write_json_file(path: &Path, value: &Json) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(Some(path), &s)
}

/// Shortest round-trip form; exponent notation at the extremes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
