use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{write_atomic, FORMAT_VERSION};
use crate::error::{Error, Result};

use super::Command;

/// Config echo, master seed and artifact version. No timestamps, so reruns
/// stay byte-identical.
pub(crate) fn provenance(command: &Command) -> Value {
    let config = serde_json::to_value(command).unwrap_or(Value::Null);
    let seed = config
        .as_object()
        .and_then(|o| o.values().next())
        .and_then(find_seed)
        .unwrap_or(Value::Null);
    json!({
        "tool": "flowbench",
        "version": env!("CARGO_PKG_VERSION"),
        "format_version": FORMAT_VERSION,
        "master_seed": seed,
        "config": config,
    })
}

fn find_seed(v: &Value) -> Option<Value> {
    let o = v.as_object()?;
    if let Some(s) = o.get("seed") {
        return Some(s.clone());
    }
    o.values().find_map(find_seed)
}

/// `body` with a `provenance` key added, pretty-printed.
pub(crate) fn write_json(path: &Path, body: &impl Serialize, prov: &Value) -> Result<()> {
    let bytes = json_bytes(body, prov)?;
    ensure_parent(path)?;
    write_atomic(path, &bytes)
}

pub(crate) fn json_bytes(body: &impl Serialize, prov: &Value) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(body)?;
    match v.as_object_mut() {
        Some(o) => {
            o.insert("provenance".into(), prov.clone());
        }
        None => v = json!({ "result": v, "provenance": prov }),
    }
    let mut bytes = serde_json::to_vec_pretty(&v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".provenance.json");
    path.with_file_name(name)
}

/// Writes a CSV and its provenance sidecar.
pub(crate) fn write_csv(path: &Path, bytes: &[u8], prov: &Value) -> Result<()> {
    ensure_parent(path)?;
    write_atomic(path, bytes)?;
    let mut side = serde_json::to_vec_pretty(prov)?;
    side.push(b'\n');
    write_atomic(&sidecar_path(path), &side)
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// A CSV built in memory from string records.
pub(crate) struct CsvBuf {
    w: csv::Writer<Vec<u8>>,
}

impl CsvBuf {
    pub(crate) fn new(header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        Ok(Self { w })
    }

    pub(crate) fn row(&mut self, rec: &[String]) -> Result<()> {
        self.w.write_record(rec)?;
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<Vec<u8>> {
        self.w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
    }
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}
