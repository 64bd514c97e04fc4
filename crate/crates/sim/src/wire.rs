//! Byte-exact wire format.
//!
//! Every message: magic "TNW1", one type byte (0 = TensorBlob,
//! 1 = OpRequest, 2 = OpDone, 3 = Error), little-endian u64 payload length,
//! then the payload. TensorBlob payloads are exactly the ".dt" tensor
//! format; the control payloads are JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::SimError;

pub const WIRE_MAGIC: [u8; 4] = *b"TNW1";

/// Refuse absurd frames rather than attempting the allocation.
pub const MAX_PAYLOAD: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgType {
    TensorBlob = 0,
    OpRequest = 1,
    OpDone = 2,
    Error = 3,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(MsgType::TensorBlob),
            1 => Some(MsgType::OpRequest),
            2 => Some(MsgType::OpDone),
            3 => Some(MsgType::Error),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MsgType::TensorBlob => "tensor_blob",
            MsgType::OpRequest => "op_request",
            MsgType::OpDone => "op_done",
            MsgType::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl WireMessage {
    pub fn request(req: &Request) -> Self {
        Self {
            msg_type: MsgType::OpRequest,
            payload: serde_json::to_vec(req).expect("request serializes"),
        }
    }

    pub fn done(done: &Done) -> Self {
        Self {
            msg_type: MsgType::OpDone,
            payload: serde_json::to_vec(done).expect("done serializes"),
        }
    }

    pub fn blob(bytes: Vec<u8>) -> Self {
        Self {
            msg_type: MsgType::TensorBlob,
            payload: bytes,
        }
    }

    pub fn error(message: &str) -> Self {
        Self::error_with_code(message, "other")
    }

    pub fn error_with_code(message: &str, code: &str) -> Self {
        Self {
            msg_type: MsgType::Error,
            payload: serde_json::to_vec(&serde_json::json!({
                "message": message,
                "code": code,
            }))
            .expect("error serializes"),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&WIRE_MAGIC)?;
        w.write_all(&[self.msg_type as u8])?;
        w.write_all(&(self.payload.len() as u64).to_le_bytes())?;
        w.write_all(&self.payload)?;
        w.flush()
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, SimError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != WIRE_MAGIC {
            return Err(SimError::ProtocolViolation(format!(
                "bad magic {magic:?}"
            )));
        }
        let mut type_byte = [0u8; 1];
        r.read_exact(&mut type_byte)?;
        let msg_type = MsgType::from_byte(type_byte[0]).ok_or_else(|| {
            SimError::ProtocolViolation(format!("unknown message type {}", type_byte[0]))
        })?;
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)?;
        let len = u64::from_le_bytes(len_bytes);
        if len > MAX_PAYLOAD {
            return Err(SimError::ProtocolViolation(format!(
                "payload length {len} exceeds cap"
            )));
        }
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Self { msg_type, payload })
    }

    pub fn parse_request(&self) -> Result<Request, SimError> {
        serde_json::from_slice(&self.payload)
            .map_err(|e| SimError::ProtocolViolation(format!("bad request payload: {e}")))
    }

    pub fn parse_done(&self) -> Result<Done, SimError> {
        serde_json::from_slice(&self.payload)
            .map_err(|e| SimError::ProtocolViolation(format!("bad done payload: {e}")))
    }

    pub fn parse_error(&self) -> String {
        serde_json::from_slice::<serde_json::Value>(&self.payload)
            .ok()
            .and_then(|v| v.get("message").and_then(|m| m.as_str()).map(String::from))
            .unwrap_or_else(|| "unparseable node error".into())
    }
}

/// Per-fragment function a node applies during a dispersed local op.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum LocalFunction {
    TtAddCore { is_first: bool, is_last: bool },
    TtHadamardCore,
    TuckerCore { op_kind: String },
    TuckerFactor { op_kind: String },
}

/// Coordinator-to-node control messages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Request {
    /// Followed immediately by a TensorBlob with the fragment bytes.
    Store {
        op: String,
        fragment_id: String,
        core_index: usize,
        content_hash: String,
    },
    LocalOp {
        op: String,
        a_fragment: String,
        b_fragment: String,
        out_fragment: String,
        #[serde(flatten)]
        function: LocalFunction,
    },
    RoundRl {
        op: String,
        in_fragment: String,
        out_fragment: String,
        recv_from_right: bool,
        send_to_left: bool,
    },
    RoundLr {
        op: String,
        in_fragment: String,
        out_fragment: String,
        recv_from_left: bool,
        send_to_right: bool,
        rel_tol: f64,
        randomize: bool,
        delta: f64,
        step: usize,
        step_seed: u64,
    },
    /// Node replies with a TensorBlob of the fragment.
    Fetch { fragment_id: String },
    FetchLog,
    Shutdown,
}

/// Node-to-coordinator completion messages.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Done {
    Stored {
        fragment_id: String,
    },
    LocalDone {
        out_fragment: String,
        shape: Vec<usize>,
        content_hash: String,
    },
    RoundDone {
        out_fragment: String,
        shape: Vec<usize>,
        content_hash: String,
    },
    Log {
        entries: Vec<crate::LogEntry>,
    },
    Bye,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_roundtrip_byte_exact() {
        let msg = WireMessage::blob(vec![1, 2, 3, 4, 5]);
        let mut buf = Vec::new();
        msg.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"TNW1");
        assert_eq!(buf[4], 0);
        assert_eq!(u64::from_le_bytes(buf[5..13].try_into().unwrap()), 5);
        let back = WireMessage::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn bad_magic_rejected() {
        let msg = WireMessage::error("x");
        let mut buf = Vec::new();
        msg.write_to(&mut buf).unwrap();
        buf[0] = b'Z';
        assert!(matches!(
            WireMessage::read_from(&mut buf.as_slice()),
            Err(SimError::ProtocolViolation(_))
        ));
    }

    #[test]
    fn request_json_roundtrip() {
        let req = Request::LocalOp {
            op: "tt_add".into(),
            a_fragment: "a".into(),
            b_fragment: "b".into(),
            out_fragment: "c".into(),
            function: LocalFunction::TtAddCore {
                is_first: true,
                is_last: false,
            },
        };
        let msg = WireMessage::request(&req);
        let back = msg.parse_request().unwrap();
        match back {
            Request::LocalOp { function, .. } => match function {
                LocalFunction::TtAddCore { is_first, is_last } => {
                    assert!(is_first);
                    assert!(!is_last);
                }
                _ => panic!("wrong function"),
            },
            _ => panic!("wrong request"),
        }
    }
}
