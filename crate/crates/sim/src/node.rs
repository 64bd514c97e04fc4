//! Server node: holds fragments, executes per-core operations on request,
//! and exchanges only rank-sized factor matrices with its chain neighbors.
//! Every message in or out is appended to the node's protocol log.

use std::collections::HashMap;
use std::str::FromStr;

use tnvault_core::io::{dt_bytes, dt_from_bytes};
use tnvault_core::ops::{
    tt_add_core, tt_hadamard_core, tt_round_lr_absorb, tt_round_lr_step, tt_round_rl_absorb,
    tt_round_rl_step, tucker_binary_core, tucker_binary_factor, TuckerOp,
};
use tnvault_core::tensor::{DenseTensor, Matrix};
use tnvault_share::sha256_hex;

use crate::transport::Link;
use crate::wire::{Done, LocalFunction, MsgType, Request, WireMessage};
use crate::{LogEntry, SimError};

const COORD: &str = "coord";

pub(crate) struct Node {
    id: usize,
    coord: Link,
    left: Option<Link>,
    right: Option<Link>,
    fragments: HashMap<String, DenseTensor>,
    log: Vec<LogEntry>,
    seq: u64,
    current_op: String,
}

impl Node {
    pub(crate) fn new(id: usize, coord: Link, left: Option<Link>, right: Option<Link>) -> Self {
        Self {
            id,
            coord,
            left,
            right,
            fragments: HashMap::new(),
            log: Vec::new(),
            seq: 0,
            current_op: String::new(),
        }
    }

    pub(crate) fn run(mut self) {
        loop {
            let msg = match self.recv(LinkSel::Coord, "control") {
                Ok(m) => m,
                Err(_) => return, // coordinator hung up
            };
            if msg.msg_type != MsgType::OpRequest {
                self.reply_error("expected an op request");
                continue;
            }
            let req = match msg.parse_request() {
                Ok(r) => r,
                Err(e) => {
                    self.reply_error(&e.to_string());
                    continue;
                }
            };
            match self.dispatch(req) {
                Ok(true) => {}
                Ok(false) => return,
                Err(e) => self.reply_failure(&e),
            }
        }
    }

    /// Returns Ok(false) on shutdown.
    fn dispatch(&mut self, req: Request) -> Result<bool, SimError> {
        match req {
            Request::Store {
                op,
                fragment_id,
                core_index: _,
                content_hash,
            } => {
                self.current_op = op;
                let blob = self.recv(LinkSel::Coord, "core")?;
                if blob.msg_type != MsgType::TensorBlob {
                    return Err(SimError::ProtocolViolation(
                        "store must be followed by a tensor blob".into(),
                    ));
                }
                if sha256_hex(&blob.payload) != content_hash {
                    return Err(SimError::HashMismatch(fragment_id));
                }
                let tensor = dt_from_bytes(&blob.payload)?;
                self.fragments.insert(fragment_id.clone(), tensor);
                self.reply_done(&Done::Stored { fragment_id });
                Ok(true)
            }
            Request::LocalOp {
                op,
                a_fragment,
                b_fragment,
                out_fragment,
                function,
            } => {
                self.current_op = op;
                let a = self.take_fragment(&a_fragment)?;
                let b = self.take_fragment(&b_fragment)?;
                let out = match function {
                    LocalFunction::TtAddCore { is_first, is_last } => {
                        tt_add_core(&a, &b, is_first, is_last)?
                    }
                    LocalFunction::TtHadamardCore => tt_hadamard_core(&a, &b)?,
                    LocalFunction::TuckerCore { op_kind } => {
                        let kind = TuckerOp::from_str(&op_kind)
                            .map_err(SimError::ProtocolViolation)?;
                        tucker_binary_core(kind, &a, &b)?
                    }
                    LocalFunction::TuckerFactor { op_kind } => {
                        let kind = TuckerOp::from_str(&op_kind)
                            .map_err(SimError::ProtocolViolation)?;
                        let fa = Matrix::from_tensor(&a)?;
                        let fb = Matrix::from_tensor(&b)?;
                        tucker_binary_factor(kind, &fa, &fb)?.to_tensor()
                    }
                };
                // operands stay resident; the result registers under a new id
                self.fragments.insert(a_fragment, a);
                self.fragments.insert(b_fragment, b);
                let done = Done::LocalDone {
                    out_fragment: out_fragment.clone(),
                    shape: out.shape().to_vec(),
                    content_hash: sha256_hex(&dt_bytes(&out)),
                };
                self.fragments.insert(out_fragment, out);
                self.reply_done(&done);
                Ok(true)
            }
            Request::RoundRl {
                op,
                in_fragment,
                out_fragment,
                recv_from_right,
                send_to_left,
            } => {
                self.current_op = op;
                let mut core = self.take_fragment(&in_fragment)?;
                if recv_from_right {
                    let blob = self.recv(LinkSel::Right, "triangular_factor")?;
                    if blob.msg_type != MsgType::TensorBlob {
                        return Err(SimError::ProtocolViolation(
                            "expected a triangular factor from the right".into(),
                        ));
                    }
                    let l = Matrix::from_tensor(&dt_from_bytes(&blob.payload)?)?;
                    core = tt_round_rl_absorb(&core, &l)?;
                }
                if send_to_left {
                    let (q_core, l) = tt_round_rl_step(&core)?;
                    core = q_core;
                    let msg = WireMessage::blob(dt_bytes(&l.to_tensor()));
                    self.send(LinkSel::Left, &msg, "triangular_factor")?;
                }
                let done = Done::RoundDone {
                    out_fragment: out_fragment.clone(),
                    shape: core.shape().to_vec(),
                    content_hash: sha256_hex(&dt_bytes(&core)),
                };
                self.fragments.insert(out_fragment, core);
                self.reply_done(&done);
                Ok(true)
            }
            Request::RoundLr {
                op,
                in_fragment,
                out_fragment,
                recv_from_left,
                send_to_right,
                rel_tol,
                randomize,
                delta,
                step,
                step_seed,
            } => {
                self.current_op = op;
                let mut core = self.take_fragment(&in_fragment)?;
                if recv_from_left {
                    let blob = self.recv(LinkSel::Left, "weighted_factor")?;
                    if blob.msg_type != MsgType::TensorBlob {
                        return Err(SimError::ProtocolViolation(
                            "expected a weighted factor from the left".into(),
                        ));
                    }
                    let w = Matrix::from_tensor(&dt_from_bytes(&blob.payload)?)?;
                    core = tt_round_lr_absorb(&core, &w)?;
                }
                if send_to_right {
                    let (new_core, w, _rec) =
                        tt_round_lr_step(&core, rel_tol, randomize, delta, step, step_seed)?;
                    core = new_core;
                    let msg = WireMessage::blob(dt_bytes(&w.to_tensor()));
                    self.send(LinkSel::Right, &msg, "weighted_factor")?;
                }
                let done = Done::RoundDone {
                    out_fragment: out_fragment.clone(),
                    shape: core.shape().to_vec(),
                    content_hash: sha256_hex(&dt_bytes(&core)),
                };
                self.fragments.insert(out_fragment, core);
                self.reply_done(&done);
                Ok(true)
            }
            Request::Fetch { fragment_id } => {
                self.current_op = "fetch".into();
                let tensor = self.take_fragment(&fragment_id)?;
                let msg = WireMessage::blob(dt_bytes(&tensor));
                self.fragments.insert(fragment_id, tensor);
                self.send(LinkSel::Coord, &msg, "core")?;
                Ok(true)
            }
            Request::FetchLog => {
                self.current_op = "fetch_log".into();
                let done = Done::Log {
                    entries: self.log.clone(),
                };
                // the log reply itself is not logged
                let msg = WireMessage::done(&done);
                msg.write_to(&mut self.coord)?;
                Ok(true)
            }
            Request::Shutdown => {
                let msg = WireMessage::done(&Done::Bye);
                msg.write_to(&mut self.coord)?;
                Ok(false)
            }
        }
    }

    fn take_fragment(&mut self, id: &str) -> Result<DenseTensor, SimError> {
        self.fragments
            .remove(id)
            .ok_or_else(|| SimError::MissingFragment(id.to_string()))
    }

    fn reply_done(&mut self, done: &Done) {
        let msg = WireMessage::done(done);
        let _ = self.send(LinkSel::Coord, &msg, "control");
    }

    fn reply_error(&mut self, text: &str) {
        let msg = WireMessage::error(text);
        let _ = self.send(LinkSel::Coord, &msg, "control");
    }

    fn reply_failure(&mut self, err: &SimError) {
        let msg = WireMessage::error_with_code(&err.to_string(), err.code());
        let _ = self.send(LinkSel::Coord, &msg, "control");
    }

    fn peer_name(&self, sel: LinkSel) -> String {
        match sel {
            LinkSel::Coord => COORD.into(),
            LinkSel::Left => format!("node{}", self.id - 1),
            LinkSel::Right => format!("node{}", self.id + 1),
        }
    }

    fn send(&mut self, sel: LinkSel, msg: &WireMessage, purpose: &str) -> Result<(), SimError> {
        let entry = LogEntry {
            owner: format!("node{}", self.id),
            seq: self.seq,
            dir: "send".into(),
            peer: self.peer_name(sel),
            msg_type: msg.msg_type.name().into(),
            bytes: msg.payload.len(),
            payload_sha256: sha256_hex(&msg.payload),
            op: self.current_op.clone(),
            purpose: purpose.into(),
        };
        self.seq += 1;
        self.log.push(entry);
        let link = self.link(sel)?;
        msg.write_to(link)?;
        Ok(())
    }

    fn recv(&mut self, sel: LinkSel, purpose: &str) -> Result<WireMessage, SimError> {
        let peer = self.peer_name(sel);
        let msg = WireMessage::read_from(self.link(sel)?)?;
        let entry = LogEntry {
            owner: format!("node{}", self.id),
            seq: self.seq,
            dir: "recv".into(),
            peer,
            msg_type: msg.msg_type.name().into(),
            bytes: msg.payload.len(),
            payload_sha256: sha256_hex(&msg.payload),
            op: self.current_op.clone(),
            purpose: purpose.into(),
        };
        self.seq += 1;
        self.log.push(entry);
        Ok(msg)
    }

    fn link(&mut self, sel: LinkSel) -> Result<&mut Link, SimError> {
        match sel {
            LinkSel::Coord => Ok(&mut self.coord),
            LinkSel::Left => self.left.as_mut().ok_or_else(|| {
                SimError::ProtocolViolation("node has no left neighbor".into())
            }),
            LinkSel::Right => self.right.as_mut().ok_or_else(|| {
                SimError::ProtocolViolation("node has no right neighbor".into())
            }),
        }
    }
}

#[derive(Clone, Copy)]
enum LinkSel {
    Coord,
    Left,
    Right,
}
