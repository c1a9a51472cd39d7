use serde_json::{json, Value};

use crossmap_core::extraction::ProbeError;
use crossmap_core::io::FormatError;
use crossmap_core::{AlgebraError, TransformError, ValidationReport};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Invalid = 1,
    Usage = 2,
    Probe = 3,
}

/// A failed command: exit status plus the findings reported on stderr.
#[derive(Debug)]
pub struct Failure {
    pub status: ExitStatus,
    pub message: String,
    pub details: Value,
}

impl Failure {
    pub fn new(status: ExitStatus, message: impl Into<String>, details: Value) -> Self {
        Failure {
            status,
            message: message.into(),
            details,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::new(ExitStatus::Usage, message, Value::Null)
    }

    pub fn io(path: &str, err: std::io::Error) -> Self {
        Failure::usage(format!("{path}: {err}"))
    }

    pub fn format(path: &str, err: FormatError) -> Self {
        let details = json!({ "file": path, "line": err.line() });
        Failure::new(ExitStatus::Usage, format!("{path}: {err}"), details)
    }

    pub fn invalid_map(path: &str, report: ValidationReport) -> Self {
        let summary = report
            .errors()
            .map(|f| f.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Failure::new(
            ExitStatus::Invalid,
            format!("{path}: not a valid crossmap: {summary}"),
            json!({ "file": path, "report": report }),
        )
    }

    pub fn transform(err: TransformError) -> Self {
        let message = err.to_string();
        Failure::new(ExitStatus::Invalid, message, transform_details(&err))
    }

    pub fn algebra(step: usize, err: AlgebraError) -> Self {
        let details = match &err {
            AlgebraError::ChainCoverage { unmatched } => {
                json!({ "step": step, "unmatched_keys": unmatched })
            }
            _ => json!({ "step": step }),
        };
        Failure::new(
            ExitStatus::Invalid,
            format!("composition step {step}: {err}"),
            details,
        )
    }

    pub fn probe(err: ProbeError) -> Self {
        Failure::new(ExitStatus::Probe, err.to_string(), Value::Null)
    }

    /// Text lines for stderr, or a JSON document when `json` is set.
    pub fn render(&self, json: bool) -> String {
        if json {
            let doc = json!({
                "status": self.status as i32,
                "error": self.message,
                "details": self.details,
            });
            serde_json::to_string_pretty(&doc).expect("serialisable")
        } else {
            let mut out = format!("error: {}", self.message);
            for line in detail_lines(&self.details) {
                out.push_str("\n  ");
                out.push_str(&line);
            }
            out
        }
    }
}

fn transform_details(err: &TransformError) -> Value {
    match err {
        TransformError::Uncovered(coverage) => json!({
            "uncovered_keys": coverage.uncovered_keys,
            "mass_at_risk": coverage.mass_at_risk,
        }),
        TransformError::InvalidArray(findings) => json!({ "array_findings": findings }),
        TransformError::AtStep { step, error } => {
            json!({ "step": step, "cause": transform_details(error) })
        }
        TransformError::KeyCollision(keys) => json!({ "colliding_keys": keys }),
    }
}

fn detail_lines(details: &Value) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(keys) = details.get("uncovered_keys").and_then(Value::as_array) {
        for key in keys {
            lines.push(format!(
                "uncovered key {}",
                key.as_str().unwrap_or_default()
            ));
        }
        if let Some(mass) = details.get("mass_at_risk").and_then(Value::as_str) {
            lines.push(format!("mass at risk {mass}"));
        }
    }
    if let Some(findings) = details
        .pointer("/report/findings")
        .and_then(Value::as_array)
    {
        for f in findings {
            lines.push(format!(
                "{} {}: {}",
                f["severity"].as_str().unwrap_or_default(),
                f["code"].as_str().unwrap_or_default(),
                f["message"].as_str().unwrap_or_default()
            ));
        }
    }
    if let Some(findings) = details.get("array_findings").and_then(Value::as_array) {
        for f in findings {
            lines.push(format!(
                "{} {} ({})",
                f["key"].as_str().unwrap_or_default(),
                f["kind"].as_str().unwrap_or_default(),
                f["hint"].as_str().unwrap_or_default()
            ));
        }
    }
    if let Some(sources) = details
        .get("nonconforming_sources")
        .and_then(Value::as_array)
    {
        for s in sources {
            lines.push(format!(
                "source {} total {} ({})",
                s["key"].as_str().unwrap_or_default(),
                s["total"].as_str().unwrap_or_default(),
                s["reason"].as_str().unwrap_or_default()
            ));
        }
    }
    if let Some(sources) = details.get("inexact_sources").and_then(Value::as_array) {
        for s in sources {
            lines.push(format!(
                "source {} total {} (within tolerance, not exactly 1)",
                s["key"].as_str().unwrap_or_default(),
                s["total"].as_str().unwrap_or_default()
            ));
        }
    }
    if let Some(cause) = details.get("cause") {
        lines.extend(detail_lines(cause));
    }
    lines
}
