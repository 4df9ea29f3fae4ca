//! JSON-lines interaction logs and agent profiles, and the flat JSON
//! engine configuration.
//!
//! A log line carries exactly five fields:
//!
//! ```text
//! {"trustor":"A","trustee":"B","rating":0.6,"category":"c1","time":5}
//! ```
//!
//! Blank lines are skipped. Line numbers in errors are 1-based.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile, TrustConfig};
use crate::model::{AgentId, AgentProfile, Interaction, TaskCategory};

const LOG_FIELDS: [&str; 5] = ["trustor", "trustee", "rating", "category", "time"];

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            Some(field) => write!(f, "line {}: field `{}`: {}", self.line, field, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Line(LineError),
}

/// Records accepted in input order, plus the rejected lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub interactions: Vec<Interaction>,
    pub errors: Vec<LineError>,
}

/// Parses a JSON-lines interaction log. In strict mode the first bad line
/// aborts parsing.
pub fn parse_log<R: BufRead>(reader: R, strict: bool) -> Result<ParsedLog, IngestError> {
    let mut parsed = ParsedLog::default();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line, index + 1) {
            Ok(interaction) => parsed.interactions.push(interaction),
            Err(e) if strict => return Err(IngestError::Line(e)),
            Err(e) => parsed.errors.push(e),
        }
    }
    Ok(parsed)
}

fn parse_record(line: &str, number: usize) -> Result<Interaction, LineError> {
    let err = |field: Option<&str>, message: String| LineError {
        line: number,
        field: field.map(str::to_owned),
        message,
    };
    let object: Map<String, Value> = match serde_json::from_str(line) {
        Ok(Value::Object(map)) => map,
        Ok(_) => return Err(err(None, "expected a JSON object".into())),
        Err(e) => return Err(err(None, format!("invalid JSON: {e}"))),
    };
    if let Some(extra) = object.keys().find(|k| !LOG_FIELDS.contains(&k.as_str())) {
        return Err(err(Some(extra), "unknown field".into()));
    }

    let text = |field: &'static str| -> Result<String, LineError> {
        match object.get(field) {
            None => Err(err(Some(field), "missing".into())),
            Some(Value::String(s)) if !s.is_empty() => Ok(s.clone()),
            Some(Value::String(_)) => Err(err(Some(field), "must be non-empty".into())),
            Some(_) => Err(err(Some(field), "must be a string".into())),
        }
    };
    let number_field = |field: &'static str| -> Result<f64, LineError> {
        match object.get(field) {
            None => Err(err(Some(field), "missing".into())),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| err(Some(field), "must be a number".into())),
        }
    };

    let trustor = text("trustor")?;
    let trustee = text("trustee")?;
    let rating = number_field("rating")?;
    let category = text("category")?;
    let time = number_field("time")?;

    if !(0.0..=1.0).contains(&rating) {
        return Err(err(Some("rating"), format!("{rating} outside [0,1]")));
    }
    if trustor == trustee {
        return Err(err(Some("trustee"), "self-interaction".into()));
    }
    if !(time.is_finite() && time >= 0.0) {
        return Err(err(Some("time"), format!("{time} must be non-negative")));
    }
    Ok(Interaction {
        trustor: AgentId::from(trustor),
        trustee: AgentId::from(trustee),
        rating,
        category: TaskCategory::from(category),
        time,
    })
}

/// Writes interactions as JSON lines in the given order.
pub fn write_log<W: Write>(mut out: W, log: &[Interaction]) -> std::io::Result<()> {
    for interaction in log {
        serde_json::to_writer(&mut out, interaction)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses JSON-lines agent profiles: `{"id":..,"completed":[..],"able":[..]}`.
pub fn parse_profiles<R: BufRead>(reader: R) -> Result<Vec<AgentProfile>, IngestError> {
    let mut profiles = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let profile: AgentProfile = serde_json::from_str(&line).map_err(|e| {
            IngestError::Line(LineError {
                line: index + 1,
                field: None,
                message: e.to_string(),
            })
        })?;
        if profile.id.as_str().is_empty() {
            return Err(IngestError::Line(LineError {
                line: index + 1,
                field: Some("id".into()),
                message: "must be non-empty".into(),
            }));
        }
        profiles.push(profile);
    }
    Ok(profiles)
}

pub fn write_profiles<W: Write>(mut out: W, profiles: &[AgentProfile]) -> std::io::Result<()> {
    for profile in profiles {
        serde_json::to_writer(&mut out, profile)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a flat JSON config. Empty text yields the defaults.
pub fn parse_config(text: &str) -> Result<TrustConfig, ConfigError> {
    if text.trim().is_empty() {
        return Ok(TrustConfig::default());
    }
    let file: ConfigFile =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    TrustConfig::from_file(&file)
}

pub fn load_config(path: &Path) -> Result<TrustConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}
