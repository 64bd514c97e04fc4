//! Simulated cluster of non-colluding servers, each holding one or more
//! tensor cores, executing dispersed multilinear operations and the
//! TT-rounding communication protocol over a byte-exact wire format.
//!
//! Every dispersed operation is numerically transparent: with equal seeds
//! it produces cores bitwise-identical to the in-process functions in
//! `tnvault-core`, because both paths call the same per-core step
//! functions in the same order.

mod cluster;
mod node;
pub mod transport;
pub mod wire;

pub use cluster::{spawn_cluster, ClusterHandle, LocalOpKind};
pub use transport::TransportKind;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::WireMessage;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("too few servers: {0} (need at least 2)")]
    TooFewServers(usize),
    #[error("transport unavailable: {0}")]
    TransportUnavailable(String),
    #[error("unknown server {0}")]
    UnknownServer(usize),
    #[error("misaligned shares: {0}")]
    MisalignedShares(String),
    #[error("hash mismatch on fragment {0}")]
    HashMismatch(String),
    #[error("missing fragment {0}")]
    MissingFragment(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("dispersed tt_round needs one core per server: {nodes} nodes, {cores} cores")]
    ClusterSizeMismatch { nodes: usize, cores: usize },
    #[error("node error: {0}")]
    NodeError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Decomp(#[from] tnvault_core::decomp::DecompError),
    #[error(transparent)]
    Tensor(#[from] tnvault_core::TensorError),
    #[error(transparent)]
    CoreIo(#[from] tnvault_core::io::IoError),
    #[error(transparent)]
    Share(#[from] tnvault_share::ShareError),
}

impl SimError {
    /// Short classifier carried inside node error replies so the
    /// coordinator can rebuild the right variant.
    pub(crate) fn code(&self) -> &'static str {
        match self {
            SimError::HashMismatch(_) => "hash_mismatch",
            SimError::MissingFragment(_) => "missing_fragment",
            SimError::ProtocolViolation(_) => "protocol_violation",
            _ => "other",
        }
    }

    pub(crate) fn from_node_error(msg: &WireMessage) -> SimError {
        let value: serde_json::Value = serde_json::from_slice(&msg.payload).unwrap_or_default();
        let text = value
            .get("message")
            .and_then(|m| m.as_str())
            .unwrap_or("unparseable node error")
            .to_string();
        match value.get("code").and_then(|c| c.as_str()) {
            Some("hash_mismatch") => SimError::HashMismatch(text),
            Some("missing_fragment") => SimError::MissingFragment(text),
            Some("protocol_violation") => SimError::ProtocolViolation(text),
            _ => SimError::NodeError(text),
        }
    }
}

/// One observed message, as recorded by the endpoint that sent or received
/// it. No wall-clock timestamps: logs from different transports must be
/// identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub owner: String,
    pub seq: u64,
    pub dir: String,
    pub peer: String,
    pub msg_type: String,
    pub bytes: usize,
    pub payload_sha256: String,
    pub op: String,
    pub purpose: String,
}

/// Protocol log as JSON lines.
pub fn log_to_jsonl(entries: &[LogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("log entry serializes"));
        out.push('\n');
    }
    out
}
