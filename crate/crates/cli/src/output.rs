//! Artifact plumbing shared by every subcommand: provenance stamping and the
//! single-line JSON diagnostics that go with the exit-code contract.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use velo_core::{Error, Result, ENGINE_VERSION};

/// Provenance block embedded in every JSON artifact and written as
/// `provenance.json` into every output directory.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub engine_version: &'static str,
    pub config_hash: String,
}

impl Meta {
    pub fn new(config_hash: &str) -> Meta {
        Meta { engine_version: ENGINE_VERSION, config_hash: config_hash.to_string() }
    }
}

/// Serialize `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Create `dir` and drop a `provenance.json` into it naming the command,
/// engine version, and config hash that produced its artifacts.
pub fn prepare_output_dir(dir: &Path, meta: &Meta, command: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("provenance.json"),
        &json!({
            "engine_version": meta.engine_version,
            "config_hash": meta.config_hash,
            "command": command,
        }),
    )
}

/// Exit code and single-line JSON diagnostic for an error. Parse and
/// validation problems are `config` (2), malformed inputs are `data` (3),
/// and everything that breaks mid-run is `runtime` (4).
pub fn diagnostic(err: &Error) -> (i32, String) {
    let (class, code, message) = match err {
        Error::Config(m) => ("config", 2, m.clone()),
        Error::Data(m) => ("data", 3, m.clone()),
        Error::Runtime(m) => ("runtime", 4, m.clone()),
        Error::Io(e) => ("runtime", 4, format!("io: {e}")),
        Error::Json(e) => ("data", 3, format!("json: {e}")),
        Error::Csv(e) => ("data", 3, format!("csv: {e}")),
    };
    let line = json!({"error": {"class": class, "message": message}}).to_string();
    (code, line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_are_single_line_json_with_the_right_code() {
        let cases = [
            (Error::config("bad flag\nwith detail"), 2, "config"),
            (Error::data("row 7 broken"), 3, "data"),
            (Error::runtime("thread died"), 4, "runtime"),
        ];
        for (err, code, class) in cases {
            let (got, line) = diagnostic(&err);
            assert_eq!(got, code);
            assert!(!line.contains('\n'), "{line}");
            let v: serde_json::Value = serde_json::from_str(&line).unwrap();
            assert_eq!(v["error"]["class"], class);
            assert!(v["error"]["message"].as_str().unwrap().len() > 3);
        }
    }
}
