//! Artifact writing. Everything is rendered in memory first and then moved
//! into place with write-then-rename, so a failed run leaves no partial files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pdc_core::{Error, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// A CSV table held in memory.
pub struct Table {
    name: String,
    bytes: Vec<u8>,
}

impl Table {
    pub fn new(
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(io_error)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|v| format_number(*v)))
                .map_err(io_error)?;
        }
        let bytes = w.into_inner().map_err(|e| io_error(e.into_error()))?;
        Ok(Self {
            name: name.to_string(),
            bytes,
        })
    }

    pub fn file_name(&self) -> &str {
        &self.name
    }
}

/// Shortest round-trip text; scientific notation outside [1e-4, 1e15).
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::Config {
        path: "output".into(),
        message: e.to_string(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_error(format!("{}: {e}", path.display()))
    })
}

/// Writes each table and one JSON sidecar `<command>.json` describing the
/// run. Returns the paths written.
pub fn write_artifacts(
    dir: &Path,
    command: &str,
    tables: &[Table],
    config: &RunConfig,
    results: Value,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for t in tables {
        let p = dir.join(&t.name);
        write_atomic(&p, &t.bytes)?;
        written.push(p);
    }
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let sidecar = json!({
        "command": command,
        "version": concat!("v", env!("CARGO_PKG_VERSION")),
        "timestamp_unix": timestamp,
        "seed": config.observables.ensemble.seed,
        "ensemble_size": config.observables.ensemble.pulses,
        "files": tables.iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
        "results": results,
        "config": config,
    });
    let p = dir.join(format!("{command}.json"));
    let text = serde_json::to_string_pretty(&sidecar).map_err(io_error)?;
    write_atomic(&p, text.as_bytes())?;
    written.push(p);
    Ok(written)
}

/// One `key=value` summary line.
pub fn summary_line(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_renders_header_and_rows() {
        let t = Table::new(
            "x.csv",
            &["a", "b"],
            vec![vec![1.0, 0.5], vec![-2.0, 1e-20]],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(t.bytes).unwrap(),
            "a,b\n1,0.5\n-2,1e-20\n"
        );
    }

    #[test]
    fn summary_format() {
        assert_eq!(
            summary_line(&[("a", "1".into()), ("b", "x".into())]),
            "a=1 b=x"
        );
    }
}
