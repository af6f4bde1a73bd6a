//! Report envelopes and deterministic serialization.
//!
//! Every CLI run emits one JSON report wrapped in a fixed envelope: tool
//! name and version, the subcommand, the RNG algorithm tag, the seed (when
//! the run is stochastic), the echoed parameters, and the overall verdict.
//! Serialization is fully deterministic — struct field order, no
//! timestamps, shortest-roundtrip float formatting — so identical runs
//! produce byte-identical files.

use crate::error::Result;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const TOOL_NAME: &str = "expansion-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Identifier of the counter-based generator used for all randomness.
pub const RNG_ALGORITHM: &str = "splitmix64-ctr/v1";

#[derive(Debug, Clone, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub rng: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: serde_json::Value,
    /// Overall verdict of the run; `None` for purely descriptive commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    pub report: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: &str, params: serde_json::Value, report: T) -> Self {
        ReportEnvelope {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command: command.to_string(),
            rng: RNG_ALGORITHM,
            seed: None,
            params,
            pass: None,
            report,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    /// Pretty JSON with a trailing newline (the canonical on-disk form).
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes text to a file, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Renders rows as CSV: header line, then comma-joined fields with `{}`
/// (shortest-roundtrip) float formatting. No quoting is performed; field
/// values must not contain commas or newlines.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Formats an f64 for CSV/JSON-adjacent text output (shortest roundtrip).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
