//! Coordinator side: spawns server nodes, distributes fragments, sequences
//! dispersed operations, and gathers results and protocol logs.

use std::thread::JoinHandle;
use std::time::{SystemTime, UNIX_EPOCH};

use rand_chacha_seed::IdMint;
use tnvault_core::decomp::Scheme;
use tnvault_core::linalg::derive_seed;
use tnvault_core::ops::TuckerOp;
use tnvault_share::{
    sha256_hex, FragmentEntry, ShareManifest, ShareSet, ShareStructure,
};

use crate::node::Node;
use crate::transport::{link_pair, Link, TransportKind};
use crate::wire::{Done, LocalFunction, MsgType, Request, WireMessage};
use crate::{LogEntry, SimError};

/// Deterministic fragment-id minting without dragging an RNG dependency
/// into the public surface.
mod rand_chacha_seed {
    pub struct IdMint {
        state: u64,
    }

    impl IdMint {
        pub fn new(seed: u64) -> Self {
            Self { state: seed }
        }

        pub fn next_id(&mut self) -> String {
            // splitmix64 stream
            let mut next = || {
                self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = self.state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^ (z >> 31)
            };
            format!("{:016x}{:016x}", next(), next())
        }
    }
}

/// Which dispersed local operation to run core-by-core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalOpKind {
    TtAdd,
    TtHadamard,
    Tucker(TuckerOp),
}

impl LocalOpKind {
    fn label(&self) -> String {
        match self {
            LocalOpKind::TtAdd => "tt_add".into(),
            LocalOpKind::TtHadamard => "tt_hadamard".into(),
            LocalOpKind::Tucker(op) => format!("tucker_{op}"),
        }
    }
}

/// Handle to a running cluster of `n` simulated non-colluding servers.
pub struct ClusterHandle {
    n: usize,
    links: Vec<Link>,
    joins: Vec<JoinHandle<()>>,
    log: Vec<LogEntry>,
    seq: u64,
    current_op: String,
}

/// Spawn `n >= 2` server nodes chained left-to-right, each connected to the
/// coordinator. `ports` (local-sockets only) supplies fixed port numbers,
/// coordinator links first, then neighbor links.
pub fn spawn_cluster(
    n: usize,
    transport: TransportKind,
    ports: Option<&[u16]>,
) -> Result<ClusterHandle, SimError> {
    if n < 2 {
        return Err(SimError::TooFewServers(n));
    }
    let mut port_iter = ports.unwrap_or(&[]).iter().copied();
    let mut next_port = move || port_iter.next();

    let mut coord_links = Vec::with_capacity(n);
    let mut node_coord_ends = Vec::with_capacity(n);
    for _ in 0..n {
        let (coord_end, node_end) = link_pair(transport, next_port())?;
        coord_links.push(coord_end);
        node_coord_ends.push(Some(node_end));
    }
    let mut left_ends: Vec<Option<Link>> = (0..n).map(|_| None).collect();
    let mut right_ends: Vec<Option<Link>> = (0..n).map(|_| None).collect();
    for i in 0..n - 1 {
        let (right_of_i, left_of_next) = link_pair(transport, next_port())?;
        right_ends[i] = Some(right_of_i);
        left_ends[i + 1] = Some(left_of_next);
    }

    let mut joins = Vec::with_capacity(n);
    for id in 0..n {
        let coord = node_coord_ends[id].take().expect("unclaimed");
        let left = left_ends[id].take();
        let right = right_ends[id].take();
        let node = Node::new(id, coord, left, right);
        joins.push(std::thread::spawn(move || node.run()));
    }

    Ok(ClusterHandle {
        n,
        links: coord_links,
        joins,
        log: Vec::new(),
        seq: 0,
        current_op: String::new(),
    })
}

impl ClusterHandle {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    fn send(&mut self, node: usize, msg: &WireMessage, purpose: &str) -> Result<(), SimError> {
        if node >= self.n {
            return Err(SimError::UnknownServer(node));
        }
        self.log.push(LogEntry {
            owner: "coord".into(),
            seq: self.seq,
            dir: "send".into(),
            peer: format!("node{node}"),
            msg_type: msg.msg_type.name().into(),
            bytes: msg.payload.len(),
            payload_sha256: sha256_hex(&msg.payload),
            op: self.current_op.clone(),
            purpose: purpose.into(),
        });
        self.seq += 1;
        msg.write_to(&mut self.links[node])?;
        Ok(())
    }

    fn recv(&mut self, node: usize, purpose: &str) -> Result<WireMessage, SimError> {
        if node >= self.n {
            return Err(SimError::UnknownServer(node));
        }
        let msg = WireMessage::read_from(&mut self.links[node])?;
        self.log.push(LogEntry {
            owner: "coord".into(),
            seq: self.seq,
            dir: "recv".into(),
            peer: format!("node{node}"),
            msg_type: msg.msg_type.name().into(),
            bytes: msg.payload.len(),
            payload_sha256: sha256_hex(&msg.payload),
            op: self.current_op.clone(),
            purpose: purpose.into(),
        });
        self.seq += 1;
        Ok(msg)
    }

    fn expect_done(&mut self, node: usize) -> Result<Done, SimError> {
        let msg = self.recv(node, "control")?;
        match msg.msg_type {
            MsgType::OpDone => msg.parse_done(),
            MsgType::Error => Err(SimError::from_node_error(&msg)),
            other => Err(SimError::ProtocolViolation(format!(
                "expected op_done, got {}",
                other.name()
            ))),
        }
    }

    /// Send every fragment to its assigned server; receivers re-verify
    /// hashes. Idempotent: re-sending a manifest replaces the fragments.
    pub fn distribute(
        &mut self,
        shares: &ShareSet,
        manifest: &ShareManifest,
    ) -> Result<(), SimError> {
        self.current_op = "distribute".into();
        for entry in &manifest.fragments {
            if entry.server_id >= self.n {
                return Err(SimError::UnknownServer(entry.server_id));
            }
            let bytes = shares
                .get(&entry.fragment_id)
                .ok_or_else(|| SimError::MissingFragment(entry.fragment_id.clone()))?;
            let req = Request::Store {
                op: "distribute".into(),
                fragment_id: entry.fragment_id.clone(),
                core_index: entry.core_index,
                content_hash: entry.content_hash.clone(),
            };
            self.send(entry.server_id, &WireMessage::request(&req), "control")?;
            self.send(
                entry.server_id,
                &WireMessage::blob(bytes.to_vec()),
                "core",
            )?;
            match self.expect_done(entry.server_id)? {
                Done::Stored { fragment_id } if fragment_id == entry.fragment_id => {}
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "unexpected store reply {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Run a per-core binary operation with zero inter-node tensor traffic.
    /// Both operands must be distributed with aligned core-to-server maps.
    pub fn dispersed_local_op(
        &mut self,
        kind: LocalOpKind,
        a: &ShareManifest,
        b: &ShareManifest,
        seed: u64,
    ) -> Result<ShareManifest, SimError> {
        self.current_op = kind.label();
        if a.scheme != b.scheme {
            return Err(SimError::MisalignedShares(format!(
                "scheme {} vs {}",
                a.scheme, b.scheme
            )));
        }
        if a.fragments.len() != b.fragments.len() {
            return Err(SimError::MisalignedShares(format!(
                "{} fragments vs {}",
                a.fragments.len(),
                b.fragments.len()
            )));
        }
        if a.permutation_seeds != b.permutation_seeds {
            return Err(SimError::MisalignedShares(
                "operands carry different mode permutations".into(),
            ));
        }
        let expected_scheme = match kind {
            LocalOpKind::TtAdd | LocalOpKind::TtHadamard => Scheme::Tt,
            LocalOpKind::Tucker(_) => Scheme::Tucker,
        };
        if a.scheme != expected_scheme {
            return Err(SimError::MisalignedShares(format!(
                "{} expects {expected_scheme} shares, got {}",
                kind.label(),
                a.scheme
            )));
        }
        let count = a.fragments.len();
        let mut by_index_a = vec![None; count];
        let mut by_index_b = vec![None; count];
        for f in &a.fragments {
            by_index_a[f.core_index] = Some(f);
        }
        for f in &b.fragments {
            by_index_b[f.core_index] = Some(f);
        }

        let mut mint = IdMint::new(derive_seed(seed, 0x10CA1));
        let mut entries = Vec::with_capacity(count);
        for idx in 0..count {
            let fa = by_index_a[idx].ok_or_else(|| {
                SimError::MisalignedShares(format!("operand a misses core {idx}"))
            })?;
            let fb = by_index_b[idx].ok_or_else(|| {
                SimError::MisalignedShares(format!("operand b misses core {idx}"))
            })?;
            if fa.server_id != fb.server_id {
                return Err(SimError::MisalignedShares(format!(
                    "core {idx} lives on node {} for a but node {} for b",
                    fa.server_id, fb.server_id
                )));
            }
            let function = match kind {
                LocalOpKind::TtAdd => LocalFunction::TtAddCore {
                    is_first: idx == 0,
                    is_last: idx == count - 1,
                },
                LocalOpKind::TtHadamard => LocalFunction::TtHadamardCore,
                LocalOpKind::Tucker(op) => {
                    if idx == 0 {
                        LocalFunction::TuckerCore {
                            op_kind: op.to_string(),
                        }
                    } else {
                        LocalFunction::TuckerFactor {
                            op_kind: op.to_string(),
                        }
                    }
                }
            };
            let out_fragment = mint.next_id();
            let req = Request::LocalOp {
                op: kind.label(),
                a_fragment: fa.fragment_id.clone(),
                b_fragment: fb.fragment_id.clone(),
                out_fragment: out_fragment.clone(),
                function,
            };
            self.send(fa.server_id, &WireMessage::request(&req), "control")?;
            match self.expect_done(fa.server_id)? {
                Done::LocalDone {
                    out_fragment: got,
                    shape,
                    content_hash,
                } if got == out_fragment => {
                    entries.push(FragmentEntry {
                        fragment_id: out_fragment,
                        server_id: fa.server_id,
                        content_hash,
                        core_index: idx,
                        shape,
                    });
                }
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "unexpected local-op reply {other:?}"
                    )))
                }
            }
        }
        Ok(manifest_from_entries(
            a.scheme,
            entries,
            a.permutation_seeds.clone(),
            a.structure.tree.clone(),
        ))
    }

    /// Dispersed TT-rounding: right-to-left triangular factors flow left,
    /// then left-to-right weighted factors flow right. Requires one core
    /// per server (n = N). Bitwise-identical to the in-process rounding for
    /// equal seeds.
    pub fn dispersed_tt_round(
        &mut self,
        manifest: &ShareManifest,
        epsilon: f64,
        randomize: bool,
        delta: f64,
        seed: u64,
    ) -> Result<ShareManifest, SimError> {
        self.current_op = "tt_round".into();
        if manifest.scheme != Scheme::Tt {
            return Err(SimError::MisalignedShares(format!(
                "tt_round expects tt shares, got {}",
                manifest.scheme
            )));
        }
        let count = manifest.fragments.len();
        if count != self.n {
            return Err(SimError::ClusterSizeMismatch {
                nodes: self.n,
                cores: count,
            });
        }
        let mut by_index: Vec<Option<&FragmentEntry>> = vec![None; count];
        for f in &manifest.fragments {
            by_index[f.core_index] = Some(f);
        }
        let in_ids: Vec<String> = (0..count)
            .map(|idx| {
                by_index[idx]
                    .map(|f| {
                        if f.server_id != idx {
                            Err(SimError::MisalignedShares(format!(
                                "core {idx} must live on node {idx}, found node {}",
                                f.server_id
                            )))
                        } else {
                            Ok(f.fragment_id.clone())
                        }
                    })
                    .unwrap_or_else(|| {
                        Err(SimError::MisalignedShares(format!("missing core {idx}")))
                    })
            })
            .collect::<Result<_, _>>()?;

        let rel_tol = epsilon / ((count - 1) as f64).sqrt();
        let mut mint = IdMint::new(derive_seed(seed, 0xD15C));
        let rl_ids: Vec<String> = (0..count).map(|_| mint.next_id()).collect();
        let lr_ids: Vec<String> = (0..count).map(|_| mint.next_id()).collect();

        // Right-to-left orthogonalization: every node gets its request up
        // front; the data dependency serializes them through the chain.
        for k in (0..count).rev() {
            let req = Request::RoundRl {
                op: "tt_round".into(),
                in_fragment: in_ids[k].clone(),
                out_fragment: rl_ids[k].clone(),
                recv_from_right: k < count - 1,
                send_to_left: k > 0,
            };
            self.send(k, &WireMessage::request(&req), "control")?;
        }
        for k in 0..count {
            match self.expect_done(k)? {
                Done::RoundDone { out_fragment, .. } if out_fragment == rl_ids[k] => {}
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "unexpected rl reply from node {k}: {other:?}"
                    )))
                }
            }
        }

        // Left-to-right compression sweep.
        for (k, lr_id) in lr_ids.iter().enumerate() {
            let req = Request::RoundLr {
                op: "tt_round".into(),
                in_fragment: rl_ids[k].clone(),
                out_fragment: lr_id.clone(),
                recv_from_left: k > 0,
                send_to_right: k < count - 1,
                rel_tol,
                randomize,
                delta,
                step: k,
                step_seed: derive_seed(seed, k as u64),
            };
            self.send(k, &WireMessage::request(&req), "control")?;
        }
        let mut entries = Vec::with_capacity(count);
        for (k, lr_id) in lr_ids.iter().enumerate() {
            match self.expect_done(k)? {
                Done::RoundDone {
                    out_fragment,
                    shape,
                    content_hash,
                } if out_fragment == *lr_id => {
                    entries.push(FragmentEntry {
                        fragment_id: out_fragment,
                        server_id: k,
                        content_hash,
                        core_index: k,
                        shape,
                    });
                }
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "unexpected lr reply from node {k}: {other:?}"
                    )))
                }
            }
        }
        Ok(manifest_from_entries(
            Scheme::Tt,
            entries,
            manifest.permutation_seeds.clone(),
            None,
        ))
    }

    /// Pull every fragment of a manifest back to the coordinator,
    /// verifying content hashes.
    pub fn collect(&mut self, manifest: &ShareManifest) -> Result<ShareSet, SimError> {
        self.current_op = "collect".into();
        let mut out = ShareSet::new();
        for entry in &manifest.fragments {
            if entry.server_id >= self.n {
                return Err(SimError::UnknownServer(entry.server_id));
            }
            let req = Request::Fetch {
                fragment_id: entry.fragment_id.clone(),
            };
            self.send(entry.server_id, &WireMessage::request(&req), "control")?;
            let msg = self.recv(entry.server_id, "core")?;
            match msg.msg_type {
                MsgType::TensorBlob => {
                    if sha256_hex(&msg.payload) != entry.content_hash {
                        return Err(SimError::HashMismatch(entry.fragment_id.clone()));
                    }
                    out.insert(entry.fragment_id.clone(), msg.payload);
                }
                MsgType::Error => return Err(SimError::from_node_error(&msg)),
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "expected tensor blob, got {}",
                        other.name()
                    )))
                }
            }
        }
        Ok(out)
    }

    /// All protocol log entries: node logs in node order, then the
    /// coordinator's own entries (log fetching itself is not recorded).
    pub fn fetch_logs(&mut self) -> Result<Vec<LogEntry>, SimError> {
        let mut merged = Vec::new();
        for node in 0..self.n {
            let req = Request::FetchLog;
            WireMessage::request(&req).write_to(&mut self.links[node])?;
            let msg = WireMessage::read_from(&mut self.links[node])?;
            match msg.msg_type {
                MsgType::OpDone => match msg.parse_done()? {
                    Done::Log { entries } => merged.extend(entries),
                    other => {
                        return Err(SimError::ProtocolViolation(format!(
                            "expected log, got {other:?}"
                        )))
                    }
                },
                MsgType::Error => return Err(SimError::from_node_error(&msg)),
                other => {
                    return Err(SimError::ProtocolViolation(format!(
                        "expected log reply, got {}",
                        other.name()
                    )))
                }
            }
        }
        merged.extend(self.log.iter().cloned());
        Ok(merged)
    }

    /// Stop every node and join its thread.
    pub fn shutdown(mut self) -> Result<(), SimError> {
        for node in 0..self.n {
            WireMessage::request(&Request::Shutdown).write_to(&mut self.links[node])?;
            let msg = WireMessage::read_from(&mut self.links[node])?;
            if msg.msg_type != MsgType::OpDone {
                return Err(SimError::ProtocolViolation(format!(
                    "expected bye, got {}",
                    msg.msg_type.name()
                )));
            }
        }
        for join in self.joins.drain(..) {
            join.join()
                .map_err(|_| SimError::ProtocolViolation("node thread panicked".into()))?;
        }
        Ok(())
    }
}

fn manifest_from_entries(
    scheme: Scheme,
    entries: Vec<FragmentEntry>,
    permutation_seeds: Option<Vec<u64>>,
    tree: Option<tnvault_core::decomp::DimTree>,
) -> ShareManifest {
    let (ranks, mode_sizes) = structure_from_shapes(scheme, &entries);
    ShareManifest {
        scheme,
        hash_algorithm: "sha-256".into(),
        fragments: entries,
        permutation_seeds,
        structure: ShareStructure {
            ranks,
            mode_sizes,
            tree,
        },
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    }
}

fn structure_from_shapes(scheme: Scheme, entries: &[FragmentEntry]) -> (Vec<usize>, Vec<usize>) {
    let mut shapes: Vec<&[usize]> = Vec::new();
    let mut ordered: Vec<&FragmentEntry> = entries.iter().collect();
    ordered.sort_by_key(|f| f.core_index);
    for f in &ordered {
        shapes.push(&f.shape);
    }
    match scheme {
        Scheme::Tt | Scheme::Tr => {
            let mut ranks = vec![shapes[0][0]];
            ranks.extend(shapes.iter().map(|s| s[2]));
            let modes = shapes.iter().map(|s| s[1]).collect();
            (ranks, modes)
        }
        Scheme::Tucker => {
            let ranks = shapes[0].to_vec();
            let modes = shapes[1..].iter().map(|s| s[0]).collect();
            (ranks, modes)
        }
        Scheme::Ht => {
            let ranks = shapes.iter().map(|s| *s.last().expect("nonempty")).collect();
            let modes = Vec::new();
            (ranks, modes)
        }
    }
}
