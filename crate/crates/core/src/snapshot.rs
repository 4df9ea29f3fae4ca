//! Single-file snapshot container for an environment and, optionally, its
//! reputation model.
//!
//! ```text
//! agent-trust-snapshot 1
//! {"version":1,"snapshot_time":..,"decay_rate":..,"config_digest":".."}
//! {"agent":{..}}                       one per agent
//! {"edge":{"src":..,"dst":..,"stats":{..}}}
//! {"activity":{"agent":..,"category":..,"count":..,"last_time":..}}
//! {"reputation":{..}}                  optional, at most once
//! sha256 <hex digest of every preceding byte>
//! ```
//!
//! Floats are written in shortest round-trip form, so loading reproduces
//! every value bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::TrustConfig;
use crate::model::{
    AgentId, AgentProfile, CategoryActivity, EdgeStats, Environment, TaskCategory,
};
use crate::reputation::ReputationModel;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "agent-trust-snapshot";
const CHECKSUM_PREFIX: &str = "sha256 ";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: u32 },
    #[error("snapshot checksum mismatch or missing (file truncated or corrupted)")]
    Checksum,
    #[error("malformed snapshot: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub environment: Environment,
    pub reputation: Option<ReputationModel>,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    snapshot_time: f64,
    decay_rate: f64,
    config_digest: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Agent(AgentProfile),
    Edge {
        src: AgentId,
        dst: AgentId,
        stats: EdgeStats,
    },
    Activity {
        agent: AgentId,
        category: TaskCategory,
        count: u64,
        last_time: f64,
    },
    Reputation(ReputationModel),
}

fn push_json<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("snapshot records serialize");
    out.push(b'\n');
}

/// Encodes a snapshot. `config` only contributes its digest.
pub fn to_bytes(
    env: &Environment,
    reputation: Option<&ReputationModel>,
    config: &TrustConfig,
) -> Vec<u8> {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n").into_bytes();
    push_json(
        &mut out,
        &Header {
            version: FORMAT_VERSION,
            snapshot_time: env.snapshot_time,
            decay_rate: env.decay_rate,
            config_digest: config.digest(),
        },
    );
    for profile in env.agents.values() {
        push_json(&mut out, &Record::Agent(profile.clone()));
    }
    for (src, row) in &env.edges {
        for (dst, stats) in row {
            push_json(
                &mut out,
                &Record::Edge {
                    src: src.clone(),
                    dst: dst.clone(),
                    stats: stats.clone(),
                },
            );
        }
    }
    for (agent, per_category) in &env.activity {
        for (category, a) in per_category {
            push_json(
                &mut out,
                &Record::Activity {
                    agent: agent.clone(),
                    category: category.clone(),
                    count: a.count,
                    last_time: a.last_time,
                },
            );
        }
    }
    if let Some(model) = reputation {
        push_json(&mut out, &Record::Reputation(model.clone()));
    }
    let digest = hex::encode(Sha256::digest(&out));
    out.extend_from_slice(format!("{CHECKSUM_PREFIX}{digest}\n").as_bytes());
    out
}

/// Decodes a snapshot. The version line is checked first, then the
/// checksum, then the content.
pub fn from_bytes(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    check_version(bytes)?;
    let body = verify_checksum(bytes)?;
    let text = std::str::from_utf8(body)
        .map_err(|e| SnapshotError::Malformed(format!("not UTF-8: {e}")))?;
    let mut lines = text.lines().skip(1);

    let header: Header = match lines.next() {
        Some(line) => serde_json::from_str(line)
            .map_err(|e| SnapshotError::Malformed(format!("header: {e}")))?,
        None => return Err(SnapshotError::Malformed("missing header".into())),
    };
    if header.version != FORMAT_VERSION {
        return Err(SnapshotError::VersionMismatch {
            found: header.version.to_string(),
            expected: FORMAT_VERSION,
        });
    }

    let mut agents = BTreeMap::new();
    let mut edges: BTreeMap<AgentId, BTreeMap<AgentId, EdgeStats>> = BTreeMap::new();
    let mut activity: BTreeMap<AgentId, BTreeMap<TaskCategory, CategoryActivity>> =
        BTreeMap::new();
    let mut reputation = None;
    for (offset, line) in lines.enumerate() {
        let record: Record = serde_json::from_str(line).map_err(|e| {
            SnapshotError::Malformed(format!("record line {}: {e}", offset + 3))
        })?;
        match record {
            Record::Agent(profile) => {
                if agents.insert(profile.id.clone(), profile).is_some() {
                    return Err(SnapshotError::Malformed("duplicate agent".into()));
                }
            }
            Record::Edge { src, dst, stats } => {
                if !agents.contains_key(&src) || !agents.contains_key(&dst) {
                    return Err(SnapshotError::Malformed(format!(
                        "edge {src} -> {dst} references an undeclared agent"
                    )));
                }
                if edges.entry(src).or_default().insert(dst, stats).is_some() {
                    return Err(SnapshotError::Malformed("duplicate edge".into()));
                }
            }
            Record::Activity {
                agent,
                category,
                count,
                last_time,
            } => {
                if !agents.contains_key(&agent) {
                    return Err(SnapshotError::Malformed(format!(
                        "activity for undeclared agent {agent}"
                    )));
                }
                activity
                    .entry(agent)
                    .or_default()
                    .insert(category, CategoryActivity { count, last_time });
            }
            Record::Reputation(model) => {
                if reputation.replace(model).is_some() {
                    return Err(SnapshotError::Malformed(
                        "more than one reputation block".into(),
                    ));
                }
            }
        }
    }

    Ok(Snapshot {
        environment: Environment {
            snapshot_time: header.snapshot_time,
            decay_rate: header.decay_rate,
            agents,
            edges,
            activity,
        },
        reputation,
        config_digest: header.config_digest,
    })
}

fn check_version(bytes: &[u8]) -> Result<(), SnapshotError> {
    let Some(end) = bytes.iter().position(|&b| b == b'\n') else {
        // A file cut inside its first line cannot carry a checksum.
        return Err(SnapshotError::Checksum);
    };
    let first = String::from_utf8_lossy(&bytes[..end]);
    let found = match first.strip_prefix(MAGIC).and_then(|r| r.strip_prefix(' ')) {
        Some(v) => v,
        None => return Err(SnapshotError::Malformed("not an agent-trust snapshot".into())),
    };
    if found != FORMAT_VERSION.to_string() {
        return Err(SnapshotError::VersionMismatch {
            found: found.to_string(),
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Returns the checksummed body (everything before the trailer line).
fn verify_checksum(bytes: &[u8]) -> Result<&[u8], SnapshotError> {
    let content = bytes.strip_suffix(b"\n").ok_or(SnapshotError::Checksum)?;
    let start = content
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |i| i + 1);
    let (body, trailer) = content.split_at(start);
    let expected = std::str::from_utf8(trailer)
        .ok()
        .and_then(|t| t.strip_prefix(CHECKSUM_PREFIX))
        .ok_or(SnapshotError::Checksum)?;
    if hex::encode(Sha256::digest(body)) != expected {
        return Err(SnapshotError::Checksum);
    }
    Ok(body)
}

/// Writes the snapshot to a temporary sibling, then renames it into place.
pub fn save_snapshot(
    path: &Path,
    env: &Environment,
    reputation: Option<&ReputationModel>,
    config: &TrustConfig,
) -> Result<(), SnapshotError> {
    let bytes = to_bytes(env, reputation, config);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    from_bytes(&std::fs::read(path)?)
}
