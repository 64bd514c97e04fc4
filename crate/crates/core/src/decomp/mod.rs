//! Tensor-network representations (TT, TR, Tucker, HT), the randomized
//! decomposition algorithms that produce them, exact reconstruction, and the
//! noise-padding mitigation.

mod ht;
mod tr;
mod tt;
mod tucker;

pub use ht::{rht, tolerance_rank_map, uniform_rank_map};
pub use tr::tr_svd;
pub use tt::tt_svd;
pub use tucker::{rtd, tolerance_ranks};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, PerturbationRecord};
use crate::tensor::{DenseTensor, Matrix, TensorError};

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("rank too large: requested {requested} exceeds mode size {size}")]
    RankTooLarge { requested: usize, size: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tensor-network format tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tt,
    Tr,
    Tucker,
    Ht,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::Tt => "tt",
            Scheme::Tr => "tr",
            Scheme::Tucker => "tucker",
            Scheme::Ht => "ht",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tt" => Ok(Scheme::Tt),
            "tr" => Ok(Scheme::Tr),
            "tucker" => Ok(Scheme::Tucker),
            "ht" => Ok(Scheme::Ht),
            other => Err(format!("unknown scheme '{other}' (expected tt|tr|tucker|ht)")),
        }
    }
}

/// Tensor train: a cascade of 3rd-order cores, core k shaped
/// `[R_{k-1}, I_k, R_k]` with boundary ranks 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TTRepresentation {
    cores: Vec<DenseTensor>,
}

impl TTRepresentation {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self, DecompError> {
        validate_chain(&cores, true)?;
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn num_modes(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Rank chain `R_0..R_N` (both boundary entries are 1).
    pub fn ranks(&self) -> Vec<usize> {
        chain_ranks(&self.cores)
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// Contract the train back to a dense tensor.
    pub fn reconstruct(&self) -> Result<DenseTensor, DecompError> {
        let first = &self.cores[0];
        let mut acc = Matrix::new(
            first.shape()[1],
            first.shape()[2],
            first.data().to_vec(),
        )
        .map_err(DecompError::from)?;
        for core in &self.cores[1..] {
            let (r, i, r2) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let core_mat = Matrix::new(r, i * r2, core.data().to_vec())?;
            let prod = acc.multiply(&core_mat)?;
            let rows = prod.rows() * i;
            acc = Matrix::new(rows, r2, prod.into_data())?;
        }
        Ok(DenseTensor::new(self.mode_sizes(), acc.into_data())?)
    }

    pub(crate) fn replace_core(&mut self, k: usize, core: DenseTensor) {
        self.cores[k] = core;
    }
}

/// Tensor ring: as TT but with a closed bond `R_0 = R_N >= 1`; reconstruction
/// traces over the ring bond.
#[derive(Debug, Clone, PartialEq)]
pub struct TRRepresentation {
    cores: Vec<DenseTensor>,
}

impl TRRepresentation {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self, DecompError> {
        validate_chain(&cores, false)?;
        let r0 = cores[0].shape()[0];
        let rn = cores[cores.len() - 1].shape()[2];
        if r0 != rn {
            return Err(DecompError::InvalidRepresentation(format!(
                "ring bond mismatch: R_0 = {r0}, R_N = {rn}"
            )));
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        chain_ranks(&self.cores)
    }

    pub fn param_count(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor, DecompError> {
        let n = self.cores.len();
        let first = &self.cores[0];
        let (r0, i1, r1) = (first.shape()[0], first.shape()[1], first.shape()[2]);
        if n == 1 {
            // trace over the single bond
            let mut data = vec![0.0; i1];
            for i in 0..i1 {
                for r in 0..r0 {
                    data[i] += first.get(&[r, i, r]);
                }
            }
            return Ok(DenseTensor::new(vec![i1], data)?);
        }
        // Chain cores 1..N into W[(r1, i2..iN), r0].
        let second = &self.cores[1];
        let mut w = Matrix::new(
            second.shape()[0] * second.shape()[1],
            second.shape()[2],
            second.data().to_vec(),
        )?;
        for core in &self.cores[2..] {
            let (r, i, r2) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let core_mat = Matrix::new(r, i * r2, core.data().to_vec())?;
            let prod = w.multiply(&core_mat)?;
            let rows = prod.rows() * i;
            w = Matrix::new(rows, r2, prod.into_data())?;
        }
        let rest: usize = self.mode_sizes()[1..].iter().product();
        // G1 as (I1, R0*R1) with r0 fastest.
        let g1 = first
            .permute_axes(&[1, 0, 2])?
            .reshape(&[i1, r0 * r1])?;
        let g1_mat = Matrix::new(i1, r0 * r1, g1.into_data())?;
        // W as (R0*R1, rest) with r0 fastest: [R1, rest, R0] -> [R0, R1, rest].
        let w_t = DenseTensor::new(vec![r1, rest, r0], w.into_data())?
            .permute_axes(&[2, 0, 1])?;
        let w_mat = Matrix::new(r0 * r1, rest, w_t.into_data())?;
        let out = g1_mat.multiply(&w_mat)?;
        Ok(DenseTensor::new(self.mode_sizes(), out.into_data())?)
    }

    pub(crate) fn replace_core(&mut self, k: usize, core: DenseTensor) {
        self.cores[k] = core;
    }
}

/// Tucker format: core tensor plus one factor matrix per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerRepresentation {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerRepresentation {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self, DecompError> {
        if factors.len() != core.ndim() {
            return Err(DecompError::InvalidRepresentation(format!(
                "{} factors for an order-{} core",
                factors.len(),
                core.ndim()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.cols() != core.shape()[k] {
                return Err(DecompError::InvalidRepresentation(format!(
                    "factor {k} has {} columns but core mode {k} has size {}",
                    f.cols(),
                    core.shape()[k]
                )));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    /// Multilinear ranks `R_1..R_N` (the core's mode sizes).
    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().to_vec()
    }

    pub fn param_count(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.rows() * f.cols()).sum::<usize>()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor, DecompError> {
        let mut out = self.core.clone();
        for (k, f) in self.factors.iter().enumerate() {
            out = out.mode_product(f, k)?;
        }
        Ok(out)
    }

    pub(crate) fn replace_factor(&mut self, k: usize, f: Matrix) {
        self.factors[k] = f;
    }
}

/// Binary dimension tree over contiguous mode ranges. Node 0 is the root;
/// leaves carry single modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// First mode covered by this node (0-based, inclusive).
    pub lo: usize,
    /// Last mode covered (inclusive).
    pub hi: usize,
    /// Indices of the (left, right) children; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

impl DimTree {
    /// Balanced, left-heavy tree over modes `0..n` in natural order.
    pub fn balanced(n: usize) -> Result<Self, DecompError> {
        if n == 0 {
            return Err(DecompError::InvalidTree("no modes".into()));
        }
        let mut nodes = Vec::new();
        fn build(nodes: &mut Vec<TreeNode>, lo: usize, hi: usize) -> usize {
            let id = nodes.len();
            nodes.push(TreeNode {
                lo,
                hi,
                children: None,
            });
            if lo < hi {
                let len = hi - lo + 1;
                let left_len = len.div_ceil(2);
                let l = build(nodes, lo, lo + left_len - 1);
                let r = build(nodes, lo + left_len, hi);
                nodes[id].children = Some((l, r));
            }
            id
        }
        build(&mut nodes, 0, n - 1);
        Ok(Self { nodes })
    }

    pub fn num_modes(&self) -> usize {
        self.nodes[0].hi - self.nodes[0].lo + 1
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_none()
    }

    pub fn leaf_for_mode(&self, mode: usize) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.children.is_none() && n.lo == mode && n.hi == mode)
    }

    /// Check that the tree is a proper binary dimension tree over `0..n`.
    pub fn validate(&self, n: usize) -> Result<(), DecompError> {
        if self.nodes.is_empty() {
            return Err(DecompError::InvalidTree("empty tree".into()));
        }
        if self.nodes[0].lo != 0 || self.nodes[0].hi != n - 1 {
            return Err(DecompError::InvalidTree(format!(
                "root covers {}..={} but tensor has {n} modes",
                self.nodes[0].lo, self.nodes[0].hi
            )));
        }
        let mut covered = vec![false; n];
        for (id, node) in self.nodes.iter().enumerate() {
            if node.lo > node.hi || node.hi >= n {
                return Err(DecompError::InvalidTree(format!(
                    "node {id} covers invalid range {}..={}",
                    node.lo, node.hi
                )));
            }
            match node.children {
                Some((l, r)) => {
                    if l >= self.nodes.len() || r >= self.nodes.len() {
                        return Err(DecompError::InvalidTree(format!(
                            "node {id} references missing children"
                        )));
                    }
                    let (ln, rn) = (&self.nodes[l], &self.nodes[r]);
                    if ln.lo != node.lo || rn.hi != node.hi || ln.hi + 1 != rn.lo {
                        return Err(DecompError::InvalidTree(format!(
                            "children of node {id} do not split {}..={}",
                            node.lo, node.hi
                        )));
                    }
                }
                None => {
                    if node.lo != node.hi {
                        return Err(DecompError::InvalidTree(format!(
                            "leaf node {id} covers more than one mode"
                        )));
                    }
                    if covered[node.lo] {
                        return Err(DecompError::InvalidTree(format!(
                            "mode {} covered by two leaves",
                            node.lo
                        )));
                    }
                    covered[node.lo] = true;
                }
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(DecompError::InvalidTree(
                "leaves do not cover every mode".into(),
            ));
        }
        Ok(())
    }
}

/// Hierarchical Tucker: transfer cores on internal tree nodes, factor
/// matrices on leaves; the root has rank 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HTRepresentation {
    tree: DimTree,
    mode_sizes: Vec<usize>,
    /// One entry per tree node: internal nodes hold `[R_l, R_r, R_t]`
    /// transfer cores, leaves hold `I_k x R_k` factors stored as 2-mode
    /// tensors.
    node_tensors: Vec<DenseTensor>,
}

impl HTRepresentation {
    pub fn new(
        tree: DimTree,
        mode_sizes: Vec<usize>,
        node_tensors: Vec<DenseTensor>,
    ) -> Result<Self, DecompError> {
        tree.validate(mode_sizes.len())?;
        if node_tensors.len() != tree.nodes.len() {
            return Err(DecompError::InvalidRepresentation(format!(
                "{} node tensors for {} tree nodes",
                node_tensors.len(),
                tree.nodes.len()
            )));
        }
        let rep = Self {
            tree,
            mode_sizes,
            node_tensors,
        };
        rep.check_links()?;
        Ok(rep)
    }

    fn check_links(&self) -> Result<(), DecompError> {
        if self.node_rank(0) != 1 {
            return Err(DecompError::InvalidRepresentation(
                "root rank must be 1".into(),
            ));
        }
        for (id, node) in self.tree.nodes.iter().enumerate() {
            let t = &self.node_tensors[id];
            match node.children {
                Some((l, r)) => {
                    if t.ndim() != 3 {
                        return Err(DecompError::InvalidRepresentation(format!(
                            "internal node {id} must hold a 3rd-order transfer core"
                        )));
                    }
                    if t.shape()[0] != self.node_rank(l) || t.shape()[1] != self.node_rank(r) {
                        return Err(DecompError::InvalidRepresentation(format!(
                            "transfer core {id} does not match child ranks"
                        )));
                    }
                }
                None => {
                    if t.ndim() != 2 || t.shape()[0] != self.mode_sizes[node.lo] {
                        return Err(DecompError::InvalidRepresentation(format!(
                            "leaf node {id} must hold an I_k x R_k factor"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn tree(&self) -> &DimTree {
        &self.tree
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.mode_sizes.clone()
    }

    pub fn node_tensors(&self) -> &[DenseTensor] {
        &self.node_tensors
    }

    /// Rank of tree node `id`: trailing mode of its transfer core or the
    /// column count of its leaf factor.
    pub fn node_rank(&self, id: usize) -> usize {
        let t = &self.node_tensors[id];
        *t.shape().last().expect("nonempty shape")
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.tree.nodes.len())
            .map(|id| self.node_rank(id))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.node_tensors.iter().map(|t| t.len()).sum()
    }

    pub fn reconstruct(&self) -> Result<DenseTensor, DecompError> {
        let full = self.expand_node(0)?;
        // Root matrix is (prod I, 1); relabel to the mode sizes.
        Ok(DenseTensor::new(self.mode_sizes.clone(), full.into_data())?)
    }

    /// Dense basis for node `id`: a (prod of covered mode sizes) x R_t matrix.
    fn expand_node(&self, id: usize) -> Result<Matrix, DecompError> {
        let node = &self.tree.nodes[id];
        let t = &self.node_tensors[id];
        match node.children {
            None => Ok(Matrix::from_tensor(t)?),
            Some((l, r)) => {
                let ul = self.expand_node(l)?;
                let ur = self.expand_node(r)?;
                // B_t: [R_l, R_r, R_t]; U_t[(il, ir), rt] =
                //   sum_{rl, rr} U_l[il, rl] U_r[ir, rr] B[rl, rr, rt]
                let expanded = t
                    .mode_product(&ul, 0)?
                    .mode_product(&ur, 1)?;
                let (dl, dr, rt) = (
                    expanded.shape()[0],
                    expanded.shape()[1],
                    expanded.shape()[2],
                );
                Ok(Matrix::new(dl * dr, rt, expanded.into_data())?)
            }
        }
    }

    pub(crate) fn replace_node(&mut self, id: usize, t: DenseTensor) {
        self.node_tensors[id] = t;
    }
}

fn chain_ranks(cores: &[DenseTensor]) -> Vec<usize> {
    let mut ranks = Vec::with_capacity(cores.len() + 1);
    ranks.push(cores[0].shape()[0]);
    for c in cores {
        ranks.push(c.shape()[2]);
    }
    ranks
}

fn validate_chain(cores: &[DenseTensor], open_boundary: bool) -> Result<(), DecompError> {
    if cores.is_empty() {
        return Err(DecompError::InvalidRepresentation("no cores".into()));
    }
    for (k, c) in cores.iter().enumerate() {
        if c.ndim() != 3 {
            return Err(DecompError::InvalidRepresentation(format!(
                "core {k} has order {}, expected 3",
                c.ndim()
            )));
        }
    }
    for k in 0..cores.len() - 1 {
        if cores[k].shape()[2] != cores[k + 1].shape()[0] {
            return Err(DecompError::InvalidRepresentation(format!(
                "rank mismatch between cores {k} and {}: {} vs {}",
                k + 1,
                cores[k].shape()[2],
                cores[k + 1].shape()[0]
            )));
        }
    }
    if open_boundary {
        let r0 = cores[0].shape()[0];
        let rn = cores[cores.len() - 1].shape()[2];
        if r0 != 1 || rn != 1 {
            return Err(DecompError::InvalidRepresentation(format!(
                "boundary ranks must be 1, got R_0 = {r0}, R_N = {rn}"
            )));
        }
    }
    Ok(())
}

/// Any tensor-network representation, for surfaces (sharing, files, CLI)
/// that handle all formats uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Tt(TTRepresentation),
    Tr(TRRepresentation),
    Tucker(TuckerRepresentation),
    Ht(HTRepresentation),
}

impl Representation {
    pub fn scheme(&self) -> Scheme {
        match self {
            Representation::Tt(_) => Scheme::Tt,
            Representation::Tr(_) => Scheme::Tr,
            Representation::Tucker(_) => Scheme::Tucker,
            Representation::Ht(_) => Scheme::Ht,
        }
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        match self {
            Representation::Tt(r) => r.mode_sizes(),
            Representation::Tr(r) => r.mode_sizes(),
            Representation::Tucker(r) => r.mode_sizes(),
            Representation::Ht(r) => r.mode_sizes(),
        }
    }

    pub fn ranks(&self) -> Vec<usize> {
        match self {
            Representation::Tt(r) => r.ranks(),
            Representation::Tr(r) => r.ranks(),
            Representation::Tucker(r) => r.ranks(),
            Representation::Ht(r) => r.ranks(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Representation::Tt(r) => r.param_count(),
            Representation::Tr(r) => r.param_count(),
            Representation::Tucker(r) => r.param_count(),
            Representation::Ht(r) => r.param_count(),
        }
    }

    pub fn reconstruct(&self) -> Result<DenseTensor, DecompError> {
        match self {
            Representation::Tt(r) => r.reconstruct(),
            Representation::Tr(r) => r.reconstruct(),
            Representation::Tucker(r) => r.reconstruct(),
            Representation::Ht(r) => r.reconstruct(),
        }
    }

    pub fn tree(&self) -> Option<&DimTree> {
        match self {
            Representation::Ht(r) => Some(r.tree()),
            _ => None,
        }
    }

    /// Cores/factors in fragment order. TT/TR: core k. Tucker: index 0 is
    /// the core tensor, index k+1 is factor k. HT: tree-node order.
    pub fn fragments(&self) -> Vec<DenseTensor> {
        match self {
            Representation::Tt(r) => r.cores().to_vec(),
            Representation::Tr(r) => r.cores().to_vec(),
            Representation::Tucker(r) => {
                let mut out = vec![r.core().clone()];
                out.extend(r.factors().iter().map(|f| f.to_tensor()));
                out
            }
            Representation::Ht(r) => r.node_tensors().to_vec(),
        }
    }

    /// Rebuild a representation from fragments laid out by [`fragments`].
    pub fn from_fragments(
        scheme: Scheme,
        mode_sizes: &[usize],
        tree: Option<&DimTree>,
        fragments: Vec<DenseTensor>,
    ) -> Result<Self, DecompError> {
        match scheme {
            Scheme::Tt => Ok(Representation::Tt(TTRepresentation::new(fragments)?)),
            Scheme::Tr => Ok(Representation::Tr(TRRepresentation::new(fragments)?)),
            Scheme::Tucker => {
                if fragments.len() < 2 {
                    return Err(DecompError::InvalidRepresentation(
                        "tucker needs a core and at least one factor".into(),
                    ));
                }
                let mut it = fragments.into_iter();
                let core = it.next().expect("nonempty");
                let factors = it
                    .map(|t| Matrix::from_tensor(&t).map_err(DecompError::from))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Representation::Tucker(TuckerRepresentation::new(
                    core, factors,
                )?))
            }
            Scheme::Ht => {
                let tree = tree
                    .ok_or_else(|| DecompError::InvalidTree("ht requires a dimension tree".into()))?
                    .clone();
                Ok(Representation::Ht(HTRepresentation::new(
                    tree,
                    mode_sizes.to_vec(),
                    fragments,
                )?))
            }
        }
    }

    /// Re-index mode `mode` by `perm` in the one core/factor that carries it
    /// (the middle axis of TT/TR core k; the rows of Tucker/HT factor k).
    /// `new[i] = old[perm[i]]`.
    pub fn permute_mode_indices(
        &mut self,
        mode: usize,
        perm: &[usize],
    ) -> Result<(), DecompError> {
        let sizes = self.mode_sizes();
        if mode >= sizes.len() || perm.len() != sizes[mode] {
            return Err(DecompError::InvalidArgument(format!(
                "permutation of length {} for mode {mode} of size {}",
                perm.len(),
                sizes.get(mode).copied().unwrap_or(0)
            )));
        }
        match self {
            Representation::Tt(r) => {
                let core = permute_middle_axis(&r.cores()[mode], perm)?;
                r.replace_core(mode, core);
            }
            Representation::Tr(r) => {
                let core = permute_middle_axis(&r.cores()[mode], perm)?;
                r.replace_core(mode, core);
            }
            Representation::Tucker(r) => {
                let f = permute_rows(&r.factors()[mode], perm);
                r.replace_factor(mode, f);
            }
            Representation::Ht(r) => {
                let leaf = r.tree().leaf_for_mode(mode).ok_or_else(|| {
                    DecompError::InvalidTree(format!("no leaf carries mode {mode}"))
                })?;
                let f = Matrix::from_tensor(&r.node_tensors()[leaf])?;
                r.replace_node(leaf, permute_rows(&f, perm).to_tensor());
            }
        }
        Ok(())
    }
}

fn permute_middle_axis(core: &DenseTensor, perm: &[usize]) -> Result<DenseTensor, DecompError> {
    let (r, i, r2) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let mut out = DenseTensor::zeros(&[r, i, r2]);
    let mut data = vec![0.0; core.len()];
    for c in 0..r2 {
        for j in 0..i {
            let src = perm[j];
            for a in 0..r {
                data[a + r * (j + i * c)] = core.data()[a + r * (src + i * c)];
            }
        }
    }
    out = DenseTensor::new(out.shape().to_vec(), data)?;
    Ok(out)
}

fn permute_rows(m: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |r, c| m.get(perm[r], c))
}

/// Everything a decomposition run reports besides the representation itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub scheme: Scheme,
    pub achieved_ranks: Vec<usize>,
    pub perturbations: Vec<PerturbationRecord>,
    pub decompose_seconds: f64,
    pub relative_error: Option<f64>,
    pub notes: Vec<String>,
}

impl DecompositionReport {
    pub(crate) fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            achieved_ranks: Vec::new(),
            perturbations: Vec::new(),
            decompose_seconds: 0.0,
            relative_error: None,
            notes: Vec::new(),
        }
    }
}

/// Embed `a` in the leading corner of an enlarged tensor whose remaining
/// entries are uniform noise in `[-amplitude, amplitude]`. The original block
/// is recoverable exactly by slicing.
pub fn pad_noise(
    a: &DenseTensor,
    pad: &[usize],
    amplitude: f64,
    seed: u64,
) -> Result<DenseTensor, DecompError> {
    if pad.len() != a.ndim() {
        return Err(DecompError::InvalidArgument(format!(
            "{} pad sizes for an order-{} tensor",
            pad.len(),
            a.ndim()
        )));
    }
    if amplitude <= 0.0 {
        return Err(DecompError::InvalidArgument(
            "noise amplitude must be positive".into(),
        ));
    }
    let shape: Vec<usize> = a.shape().iter().zip(pad).map(|(s, p)| s + p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DenseTensor::from_fn(&shape, |_| rng.random_range(-amplitude..amplitude));
    // Overwrite the leading block with the original values.
    let mut data = out.data().to_vec();
    let out_strides = crate::tensor::strides_of(&shape);
    let mut idx = vec![0usize; a.ndim()];
    for &v in a.data() {
        let lin: usize = idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum();
        data[lin] = v;
        for (i, s) in idx.iter_mut().zip(a.shape()) {
            *i += 1;
            if *i < *s {
                break;
            }
            *i = 0;
        }
    }
    out = DenseTensor::new(shape, data)?;
    Ok(out)
}
