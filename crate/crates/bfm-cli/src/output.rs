use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use bfm::data::{emit_series, write_atomic, PlotFormat, PlotSeries};

use crate::args::{replay_config, Format, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use crate::error::CliError;

/// Where a run writes, and what it has written so far.
pub struct Run {
    pub dir: PathBuf,
    pub command: &'static str,
    pub flags: Vec<(String, String)>,
    inputs: Vec<Value>,
    outputs: Vec<String>,
}

pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn new(dir: PathBuf, command: &'static str, flags: Vec<(String, String)>) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self {
            dir,
            command,
            flags,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn record_input(&mut self, source: &str, bytes: &[u8]) {
        self.inputs
            .push(json!({ "source": source, "sha256": sha256_hex(bytes) }));
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_series(&mut self, stem: &str, series: &[PlotSeries], format: Format) -> Result<(), CliError> {
        let (ext, fmt) = match format {
            Format::Csv => ("csv", PlotFormat::Csv),
            Format::Svg => ("svg", PlotFormat::Svg),
        };
        let name = format!("{stem}.{ext}");
        emit_series(series, &self.dir.join(&name), fmt)?;
        self.outputs.push(name);
        Ok(())
    }

    /// Writes `run.conf` (replayable with `--config`) and `manifest.json`.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let replay = replay_config(&self.flags);
        self.write("run.conf", replay.as_bytes())?;
        let mut flags = Map::new();
        for (k, v) in &self.flags {
            flags.insert(k.clone(), Value::String(v.clone()));
        }
        let manifest = json!({
            "tool": "bfm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "flags": flags,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "replay": format!("bfm {} --config run.conf", self.command),
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Fixed-width number for tables: plain decimals in a readable range,
/// scientific otherwise.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.4e}")
    }
}

/// Left-aligned first column, right-aligned rest.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate().take(cols) {
            width[k] = width[k].max(c.chars().count());
        }
    }
    let fmt_row = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            if k == 0 {
                s.push_str(&format!("{c:<w$}", w = width[0]));
            } else {
                s.push_str(&format!("  {c:>w$}", w = width[k]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = fmt_row(header.to_vec());
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&fmt_row(r.iter().map(String::as_str).collect()));
    }
    out
}
