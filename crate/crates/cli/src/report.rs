//! Artifact emission: `summary.json` plus fixed-header CSV tables.
//!
//! Scalars are kept in a sorted map and floats are printed in shortest
//! round-trip form, so identical runs produce byte-identical artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ConfigEcho;
use crate::CliError;

#[derive(Serialize)]
pub struct Summary {
    pub version: String,
    pub command: String,
    pub params: ConfigEcho,
    pub scalars: Map<String, Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Accumulates scalars and pass/fail checks for one command run.
#[derive(Default)]
pub struct Report {
    scalars: Map<String, Value>,
    checks: Vec<Check>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn num(&mut self, key: &str, v: f64) {
        // Non-finite values have no JSON number form; null keeps the key
        // visible instead of silently dropping it.
        self.scalars.insert(
            key.to_string(),
            serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number),
        );
    }

    pub fn int(&mut self, key: &str, v: u64) {
        self.scalars.insert(key.to_string(), Value::from(v));
    }

    pub fn flag(&mut self, key: &str, v: bool) {
        self.scalars.insert(key.to_string(), Value::from(v));
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn into_summary(self, command: &str, params: ConfigEcho) -> Summary {
        let passed = self.all_passed();
        Summary {
            version: format!("kgmp {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            params,
            scalars: self.scalars,
            checks: self.checks,
            passed,
        }
    }
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<PathBuf, CliError> {
    let path = dir.join("summary.json");
    let body = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Run(format!("cannot serialize summary: {e}")))?;
    write_text(&path, &(body + "\n"))?;
    Ok(path)
}

pub fn write_table(
    dir: &Path,
    file: &str,
    header: &str,
    rows: &[String],
) -> Result<PathBuf, CliError> {
    let path = dir.join(file);
    let mut body = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    body.push_str(header);
    body.push('\n');
    for row in rows {
        body.push_str(row);
        body.push('\n');
    }
    write_text(&path, &body)?;
    Ok(path)
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Run(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

/// Shortest round-trip float formatting; `NaN` for missing values.
pub fn fnum(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_serialize_sorted_and_non_finite_goes_null() {
        let mut rep = Report::new();
        rep.num("zeta", 1.5);
        rep.num("alpha", f64::NAN);
        rep.int("mid", 3);
        rep.check("ok", true, "fine");
        let text = serde_json::to_string(&rep.scalars).unwrap();
        assert_eq!(text, r#"{"alpha":null,"mid":3,"zeta":1.5}"#);
        assert!(rep.all_passed());
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-308, 12345.6789] {
            assert_eq!(fnum(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fnum(f64::NAN), "NaN");
    }
}
