use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::spec::ExperimentSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment lines naming the tool, command and every resolved spec entry.
pub fn csv_preamble(command: &str, spec: &ExperimentSpec) -> String {
    let mut out = format!("# perishgood {VERSION}\n# command={command}\n");
    for (k, v) in &spec.entries {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

pub fn csv_document(command: &str, spec: &ExperimentSpec, header: &str, rows: &[String]) -> String {
    let mut out = csv_preamble(command, spec);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    out
}

/// Wraps `payload` with the tool version, command and spec.
pub fn json_document(command: &str, spec: &ExperimentSpec, payload: Value) -> Result<String> {
    let mut doc = Map::new();
    doc.insert("tool".into(), json!("perishgood"));
    doc.insert("version".into(), json!(VERSION));
    doc.insert("command".into(), json!(command));
    doc.insert("spec".into(), json!(spec.entries));
    if let Value::Object(fields) = payload {
        doc.extend(fields);
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
    text.push('\n');
    Ok(text)
}

/// Display form that keeps `inf` readable in CSV.
pub fn number(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        x.to_string()
    }
}

/// JSON form of a possibly infinite number.
pub fn json_number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(number(x))
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_spec(dir: &Path, spec: &ExperimentSpec) -> Result<()> {
    write_file(dir, "spec.txt", &spec.to_text())
}

pub fn print(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes())?;
    stdout.flush()?;
    Ok(())
}
