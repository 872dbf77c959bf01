//! Run manifest and JSON output with 17-significant-digit floats.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Pretty JSON with 17-significant-digit floats.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    quasikdv::io::to_json_pretty(value).expect("artifact values serialize")
}

/// `{"kind", "message"}`.
pub fn error_record(kind: &str, message: &str) -> Value {
    json!({ "kind": kind, "message": message })
}

/// One pass/fail acceptance check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<"`, `"<="`, `">="` or `"=="`.
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<", threshold, value < threshold)
    }
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<=", threshold, value <= threshold)
    }
    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">=", threshold, value >= threshold)
    }
    pub fn equals(name: &str, value: f64, target: f64) -> Self {
        Self::new(name, value, "==", target, value == target)
    }
    fn new(name: &str, value: f64, relation: &'static str, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            relation,
            threshold,
            pass,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub wall_time_s: f64,
    pub status: &'static str,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

/// Collects stages, checks and artifacts of one run.
pub struct Recorder {
    pub dir: PathBuf,
    pub stages: Vec<Stage>,
    pub checks: Vec<Check>,
    pub summary: serde_json::Map<String, Value>,
    pending: Vec<String>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            stages: Vec::new(),
            checks: Vec::new(),
            summary: serde_json::Map::new(),
            pending: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers an artifact of the running stage.
    pub fn artifact(&mut self, name: impl Into<String>) {
        self.pending.push(name.into());
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> quasikdv::Result<()> {
        let text = quasikdv::io::to_json_pretty(value)?;
        self.write_text(name, &text)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> quasikdv::Result<()> {
        std::fs::write(self.path(name), text)?;
        self.artifact(name);
        Ok(())
    }

    pub fn write_with<F>(&mut self, name: &str, f: F) -> quasikdv::Result<()>
    where
        F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> quasikdv::Result<()>,
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(self.path(name))?);
        f(&mut w)?;
        w.flush()?;
        self.artifact(name);
        Ok(())
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    /// Runs one stage, recording its wall time, artifacts and any error.
    pub fn stage<T, F>(&mut self, name: &str, f: F) -> quasikdv::Result<T>
    where
        F: FnOnce(&mut Self) -> quasikdv::Result<T>,
    {
        let start = Instant::now();
        self.pending.clear();
        let out = f(self);
        let (status, error) = match &out {
            Ok(_) => ("ok", None),
            Err(e) => ("error", Some(error_record(e.kind(), &e.to_string()))),
        };
        self.stages.push(Stage {
            name: name.into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            status,
            artifacts: std::mem::take(&mut self.pending),
            error,
        });
        out
    }
}

/// `sha256` of the canonical (sorted-key, compact) JSON config echo.
pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("Value serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Assembles the manifest.
pub fn manifest(
    config: &Value,
    threads: usize,
    rec: &Recorder,
    error: Option<Value>,
    wall_time_s: f64,
) -> Value {
    let all_pass = rec.checks.iter().all(|c| c.pass);
    json!({
        "tool": "quasikdv",
        "versions": {
            "quasikdv": quasikdv::VERSION,
            "quasikdv-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": config,
        "config_hash": config_hash(config),
        "threads": threads,
        "status": if error.is_some() { "error" } else if all_pass { "pass" } else { "fail" },
        "error": error,
        "stages": rec.stages,
        "checks": rec.checks,
        "summary": rec.summary,
        "wall_time_s": wall_time_s,
    })
}
