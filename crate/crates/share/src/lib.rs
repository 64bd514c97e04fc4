//! Secret-share dispersal for tensor-network representations.
//!
//! A decomposition's cores become fragments: each is serialized to the
//! ".dt" byte format, hashed, given a random 128-bit identifier, and
//! assigned to a server. The manifest carries the assignment, the
//! SHA-256 content hashes, the tensor structure, and the per-mode
//! permutation seeds needed to reconstruct. Conversions to and from the
//! classical additive secret-sharing scheme run over the TT format.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use tnvault_core::decomp::{
    rht, rtd, tr_svd, tt_svd, uniform_rank_map, DecompError, DecompositionReport, DimTree,
    Representation, Scheme, TTRepresentation,
};
use tnvault_core::io::{dt_bytes, dt_from_bytes, IoError};
use tnvault_core::linalg::derive_seed;
use tnvault_core::ops::tt_add;
use tnvault_core::tensor::DenseTensor;

#[derive(Debug, Error)]
pub enum ShareError {
    #[error("too few servers: need at least 2, at most one per fragment ({fragments}); got {requested}")]
    TooFewServers { requested: usize, fragments: usize },
    #[error("seed count mismatch: {got} seeds for {want} modes")]
    SeedCountMismatch { got: usize, want: usize },
    #[error("missing fragment {0}")]
    MissingFragment(String),
    #[error("hash mismatch on fragment {0}")]
    HashMismatch(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Tensor(#[from] tnvault_core::TensorError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Dispersal parameters: TT/TR decompose to a tolerance, Tucker/HT to
/// target ranks.
#[derive(Debug, Clone)]
pub enum ShareParams {
    Epsilon(f64),
    Ranks(Vec<usize>),
}

/// One dispersed core/factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FragmentEntry {
    pub fragment_id: String,
    pub server_id: usize,
    pub content_hash: String,
    pub core_index: usize,
    pub shape: Vec<usize>,
}

/// Structure needed to reassemble the representation from fragments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShareStructure {
    pub ranks: Vec<usize>,
    pub mode_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<DimTree>,
}

/// Dispersal metadata: everything a reader with access needs, and the only
/// place the fragment-to-server map exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShareManifest {
    pub scheme: Scheme,
    pub hash_algorithm: String,
    pub fragments: Vec<FragmentEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation_seeds: Option<Vec<u64>>,
    pub structure: ShareStructure,
    pub created_at: u64,
}

impl ShareManifest {
    /// Canonical JSON (sorted keys) so manifest hashes are stable.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ShareError> {
        serde_json::from_str(s).map_err(|e| ShareError::InvalidManifest(e.to_string()))
    }

    pub fn fragment(&self, fragment_id: &str) -> Option<&FragmentEntry> {
        self.fragments.iter().find(|f| f.fragment_id == fragment_id)
    }
}

/// Fragment bytes keyed by fragment id; each value is a ".dt" file image.
#[derive(Debug, Clone, Default)]
pub struct ShareSet {
    fragments: BTreeMap<String, Vec<u8>>,
}

impl ShareSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fragment_id: String, bytes: Vec<u8>) {
        self.fragments.insert(fragment_id, bytes);
    }

    pub fn get(&self, fragment_id: &str) -> Option<&[u8]> {
        self.fragments.get(fragment_id).map(|v| v.as_slice())
    }

    pub fn remove(&mut self, fragment_id: &str) -> Option<Vec<u8>> {
        self.fragments.remove(fragment_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.fragments.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex_encode(&h.finalize())
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 * bytes.len());
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn fresh_fragment_id(rng: &mut ChaCha20Rng) -> String {
    let hi: u64 = rng.random();
    let lo: u64 = rng.random();
    format!("{hi:016x}{lo:016x}")
}

/// Run the chosen randomized decomposition, optionally permute mode
/// indices, and disperse the cores over `n_servers` round robin.
pub fn generate_shares(
    a: &DenseTensor,
    scheme: Scheme,
    params: &ShareParams,
    delta: f64,
    n_servers: usize,
    permute_modes: bool,
    seed: u64,
) -> Result<(ShareSet, ShareManifest, DecompositionReport), ShareError> {
    let (mut rep, report) = decompose(a, scheme, params, delta, seed)?;
    let n_fragments = rep.fragments().len();
    if n_servers < 2 || n_servers > n_fragments {
        return Err(ShareError::TooFewServers {
            requested: n_servers,
            fragments: n_fragments,
        });
    }

    let permutation_seeds = if permute_modes {
        let seeds: Vec<u64> = (0..a.ndim() as u64)
            .map(|k| derive_seed(seed, 0x5EED_0000 + k))
            .collect();
        apply_mode_permutations(&mut rep, &seeds, false)?;
        Some(seeds)
    } else {
        None
    };

    let mut id_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0xF1D5));
    build_share_set(&rep, permutation_seeds, n_servers, &mut id_rng).map(|(s, m)| (s, m, report))
}

fn decompose(
    a: &DenseTensor,
    scheme: Scheme,
    params: &ShareParams,
    delta: f64,
    seed: u64,
) -> Result<(Representation, DecompositionReport), ShareError> {
    let rep = match (scheme, params) {
        (Scheme::Tt, ShareParams::Epsilon(eps)) => {
            let (tt, report) = tt_svd(a, *eps, true, delta, seed)?;
            (Representation::Tt(tt), report)
        }
        (Scheme::Tr, ShareParams::Epsilon(eps)) => {
            let (tr, report) = tr_svd(a, *eps, true, delta, seed)?;
            (Representation::Tr(tr), report)
        }
        (Scheme::Tucker, ShareParams::Ranks(ranks)) => {
            let (tk, report) = rtd(a, ranks, true, delta, seed)?;
            (Representation::Tucker(tk), report)
        }
        (Scheme::Ht, ShareParams::Ranks(ranks)) => {
            let tree = DimTree::balanced(a.ndim())?;
            let rank_map = if ranks.len() == tree.nodes.len() {
                ranks.clone()
            } else if ranks.len() == 1 {
                uniform_rank_map(&tree, a.shape(), ranks[0])
            } else {
                return Err(ShareError::InvalidManifest(format!(
                    "ht wants one uniform rank or {} per-node ranks, got {}",
                    tree.nodes.len(),
                    ranks.len()
                )));
            };
            let (ht, report) = rht(a, &tree, &rank_map, true, delta, seed)?;
            (Representation::Ht(ht), report)
        }
        (s, ShareParams::Epsilon(_)) => {
            return Err(ShareError::InvalidManifest(format!(
                "{s} takes ranks, not a tolerance"
            )))
        }
        (s, ShareParams::Ranks(_)) => {
            return Err(ShareError::InvalidManifest(format!(
                "{s} takes a tolerance, not ranks"
            )))
        }
    };
    Ok(rep)
}

/// Core-to-server assignment policy. Round robin by core index is the
/// default; the seeded random mode shuffles the cores first and then deals
/// them out, so it stays balanced while the placement looks random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Assignment {
    #[default]
    RoundRobin,
    SeededRandom,
}

/// Disperse an existing representation (already randomized/permuted as the
/// caller wishes) round robin.
pub fn shares_from_representation(
    rep: &Representation,
    permutation_seeds: Option<Vec<u64>>,
    n_servers: usize,
    seed: u64,
) -> Result<(ShareSet, ShareManifest), ShareError> {
    shares_with_assignment(rep, permutation_seeds, n_servers, Assignment::RoundRobin, seed)
}

/// As [`shares_from_representation`] with an explicit assignment policy.
pub fn shares_with_assignment(
    rep: &Representation,
    permutation_seeds: Option<Vec<u64>>,
    n_servers: usize,
    assignment: Assignment,
    seed: u64,
) -> Result<(ShareSet, ShareManifest), ShareError> {
    let n_fragments = rep.fragments().len();
    if n_servers < 2 || n_servers > n_fragments {
        return Err(ShareError::TooFewServers {
            requested: n_servers,
            fragments: n_fragments,
        });
    }
    let mut id_rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0xF1D5));
    build_share_set_with(rep, permutation_seeds, n_servers, assignment, seed, &mut id_rng)
}

fn build_share_set(
    rep: &Representation,
    permutation_seeds: Option<Vec<u64>>,
    n_servers: usize,
    id_rng: &mut ChaCha20Rng,
) -> Result<(ShareSet, ShareManifest), ShareError> {
    build_share_set_with(
        rep,
        permutation_seeds,
        n_servers,
        Assignment::RoundRobin,
        0,
        id_rng,
    )
}

fn build_share_set_with(
    rep: &Representation,
    permutation_seeds: Option<Vec<u64>>,
    n_servers: usize,
    assignment: Assignment,
    seed: u64,
    id_rng: &mut ChaCha20Rng,
) -> Result<(ShareSet, ShareManifest), ShareError> {
    let fragments = rep.fragments();
    let server_of: Vec<usize> = match assignment {
        Assignment::RoundRobin => (0..fragments.len()).map(|i| i % n_servers).collect(),
        Assignment::SeededRandom => {
            let order = permutation_from_seed(
                fragments.len(),
                derive_seed(seed, 0xA551_6E),
            );
            let mut servers = vec![0usize; fragments.len()];
            for (slot, &core_index) in order.iter().enumerate() {
                servers[core_index] = slot % n_servers;
            }
            servers
        }
    };
    let mut share_set = ShareSet::new();
    let mut entries = Vec::with_capacity(fragments.len());
    for (core_index, tensor) in fragments.iter().enumerate() {
        let bytes = dt_bytes(tensor);
        let fragment_id = fresh_fragment_id(id_rng);
        entries.push(FragmentEntry {
            fragment_id: fragment_id.clone(),
            server_id: server_of[core_index],
            content_hash: sha256_hex(&bytes),
            core_index,
            shape: tensor.shape().to_vec(),
        });
        share_set.insert(fragment_id, bytes);
    }
    let manifest = ShareManifest {
        scheme: rep.scheme(),
        hash_algorithm: "sha-256".into(),
        fragments: entries,
        permutation_seeds,
        structure: ShareStructure {
            ranks: rep.ranks(),
            mode_sizes: rep.mode_sizes(),
            tree: rep.tree().cloned(),
        },
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok((share_set, manifest))
}

/// Index permutation of length `n` derived from one seed.
pub fn permutation_from_seed(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Permute (or unpermute) the mode indices of every mode, one seed per
/// mode. Forward permutation relabels index i to position perm^{-1}(i);
/// applying with `inverse = true` restores the original representation
/// bit for bit.
pub fn apply_mode_permutations(
    rep: &mut Representation,
    seeds: &[u64],
    inverse: bool,
) -> Result<(), ShareError> {
    let sizes = rep.mode_sizes();
    if seeds.len() != sizes.len() {
        return Err(ShareError::SeedCountMismatch {
            got: seeds.len(),
            want: sizes.len(),
        });
    }
    for (mode, (&seed, &size)) in seeds.iter().zip(&sizes).enumerate() {
        let perm = permutation_from_seed(size, seed);
        let applied = if inverse {
            invert_permutation(&perm)
        } else {
            perm
        };
        rep.permute_mode_indices(mode, &applied)?;
    }
    Ok(())
}

/// Verify hashes, reassemble the representation, undo permutations, and
/// reconstruct the dense tensor.
pub fn reconstruct_from_shares(
    manifest: &ShareManifest,
    shares: &ShareSet,
) -> Result<DenseTensor, ShareError> {
    let rep = representation_from_shares(manifest, shares)?;
    Ok(rep.reconstruct()?)
}

/// As [`reconstruct_from_shares`] but stopping at the representation.
pub fn representation_from_shares(
    manifest: &ShareManifest,
    shares: &ShareSet,
) -> Result<Representation, ShareError> {
    let mut ordered: Vec<(usize, &FragmentEntry)> = manifest
        .fragments
        .iter()
        .map(|f| (f.core_index, f))
        .collect();
    ordered.sort_by_key(|(i, _)| *i);
    let mut tensors = Vec::with_capacity(ordered.len());
    for (_, entry) in &ordered {
        let bytes = shares
            .get(&entry.fragment_id)
            .ok_or_else(|| ShareError::MissingFragment(entry.fragment_id.clone()))?;
        if sha256_hex(bytes) != entry.content_hash {
            return Err(ShareError::HashMismatch(entry.fragment_id.clone()));
        }
        tensors.push(dt_from_bytes(bytes)?);
    }
    let mut rep = Representation::from_fragments(
        manifest.scheme,
        &manifest.structure.mode_sizes,
        manifest.structure.tree.as_ref(),
        tensors,
    )?;
    if let Some(seeds) = &manifest.permutation_seeds {
        apply_mode_permutations(&mut rep, seeds, true)?;
    }
    Ok(rep)
}

/// Convert classical additive shares (tensors summing to the secret) to
/// randomized TT shares, one train per party.
pub fn additive_to_tn(
    shares: &[DenseTensor],
    epsilon: f64,
    delta: f64,
    seeds: &[u64],
) -> Result<Vec<TTRepresentation>, ShareError> {
    if shares.is_empty() {
        return Err(ShareError::InvalidManifest("no additive shares".into()));
    }
    if seeds.len() != shares.len() {
        return Err(ShareError::SeedCountMismatch {
            got: seeds.len(),
            want: shares.len(),
        });
    }
    let shape = shares[0].shape();
    for (i, s) in shares.iter().enumerate() {
        if s.shape() != shape {
            return Err(ShareError::InvalidManifest(format!(
                "share {i} has shape {:?}, expected {shape:?}",
                s.shape()
            )));
        }
    }
    shares
        .iter()
        .zip(seeds)
        .map(|(share, &seed)| {
            tt_svd(share, epsilon, true, delta, seed)
                .map(|(tt, _)| tt)
                .map_err(ShareError::from)
        })
        .collect()
}

/// Fold a set of TT shares back into one train by repeated addition.
pub fn tt_sum(shares: &[TTRepresentation]) -> Result<TTRepresentation, ShareError> {
    let mut it = shares.iter();
    let first = it
        .next()
        .ok_or_else(|| ShareError::InvalidManifest("no shares to sum".into()))?;
    let mut acc = first.clone();
    for s in it {
        acc = tt_add(&acc, s)?;
    }
    Ok(acc)
}

/// Convert a TT share back to the classical additive scheme: the first
/// `n_parties - 1` outputs are independent uniform tensors, the last is the
/// reconstruction minus their sum, so the outputs sum to the secret exactly.
pub fn tn_to_additive(
    tt: &TTRepresentation,
    n_parties: usize,
    seed: u64,
) -> Result<Vec<DenseTensor>, ShareError> {
    if n_parties < 2 {
        return Err(ShareError::TooFewServers {
            requested: n_parties,
            fragments: usize::MAX,
        });
    }
    let secret = tt.reconstruct()?;
    let amplitude = secret
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let shape = secret.shape().to_vec();
    let mut outputs: Vec<DenseTensor> = (0..n_parties - 1)
        .map(|_| DenseTensor::from_fn(&shape, |_| rng.random_range(-amplitude..amplitude)))
        .collect();
    let mut last = secret;
    for share in &outputs {
        last = last.sub(share)?;
    }
    outputs.push(last);
    Ok(outputs)
}
