//! Randomized hierarchical Tucker decomposition by recursive node-wise
//! truncated HOSVD over a binary dimension tree.
//!
//! At each internal node the node basis is reshaped to a 3rd-order tensor
//! over (left child modes, right child modes, node rank) and the two child
//! modes are truncated; the third mode stays untouched so the parent linkage
//! survives. Children then recurse on their (perturbed) factor matrices.

use std::time::Instant;

use crate::linalg::truncated_svd;
use crate::tensor::{DenseTensor, Matrix};

use super::tucker::hosvd_sweep;
use super::{DecompError, DecompositionReport, DimTree, HTRepresentation, Scheme};

pub fn rht(
    a: &DenseTensor,
    tree: &DimTree,
    rank_map: &[usize],
    randomize: bool,
    delta: f64,
    seed: u64,
) -> Result<(HTRepresentation, DecompositionReport), DecompError> {
    let n = a.ndim();
    tree.validate(n)?;
    if rank_map.len() != tree.nodes.len() {
        return Err(DecompError::InvalidArgument(format!(
            "{} ranks for {} tree nodes",
            rank_map.len(),
            tree.nodes.len()
        )));
    }
    if rank_map[0] != 1 {
        return Err(DecompError::InvalidArgument(
            "root rank must be 1".into(),
        ));
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        if rank_map[id] == 0 {
            return Err(DecompError::InvalidArgument(format!(
                "rank for node {id} is 0"
            )));
        }
        if node.children.is_none() && rank_map[id] > a.shape()[node.lo] {
            return Err(DecompError::RankTooLarge {
                requested: rank_map[id],
                size: a.shape()[node.lo],
            });
        }
    }
    if randomize && !(delta > 0.0 && delta <= 1.0) {
        return Err(DecompError::Linalg(
            crate::linalg::LinalgError::InvalidThreshold(delta),
        ));
    }

    let started = Instant::now();
    let total: usize = a.shape().iter().product();
    let root_basis = Matrix::new(total, 1, a.data().to_vec())?;

    let mut builder = Builder {
        a,
        tree,
        rank_map,
        randomize,
        delta,
        seed,
        node_tensors: vec![None; tree.nodes.len()],
        report: DecompositionReport::new(Scheme::Ht),
    };
    builder.visit(0, root_basis)?;

    let node_tensors = builder
        .node_tensors
        .into_iter()
        .map(|t| t.expect("every node visited"))
        .collect();
    let rep = HTRepresentation::new(tree.clone(), a.shape().to_vec(), node_tensors)?;
    let mut report = builder.report;
    report.achieved_ranks = rep.ranks();
    report.decompose_seconds = started.elapsed().as_secs_f64();
    Ok((rep, report))
}

struct Builder<'a> {
    a: &'a DenseTensor,
    tree: &'a DimTree,
    rank_map: &'a [usize],
    randomize: bool,
    delta: f64,
    seed: u64,
    node_tensors: Vec<Option<DenseTensor>>,
    report: DecompositionReport,
}

impl Builder<'_> {
    /// Decompose node `id` given its basis matrix (dim_t x R_t).
    fn visit(&mut self, id: usize, basis: Matrix) -> Result<(), DecompError> {
        let node = &self.tree.nodes[id];
        match node.children {
            None => {
                self.node_tensors[id] = Some(basis.to_tensor());
                Ok(())
            }
            Some((l, r)) => {
                let dim_l: usize = self.a.shape()[self.tree.nodes[l].lo..=self.tree.nodes[l].hi]
                    .iter()
                    .product();
                let dim_r: usize = self.a.shape()[self.tree.nodes[r].lo..=self.tree.nodes[r].hi]
                    .iter()
                    .product();
                let rt = basis.cols();
                let node_tensor =
                    DenseTensor::new(vec![dim_l, dim_r, rt], basis.into_data())?;
                let spec = [Some(self.rank_map[l]), Some(self.rank_map[r]), None];
                let node_seed = crate::linalg::derive_seed(self.seed, id as u64);
                let outcome =
                    hosvd_sweep(&node_tensor, &spec, self.randomize, self.delta, node_seed)?;
                let mut factors = outcome.factors;
                self.report.perturbations.extend(outcome.records);
                self.node_tensors[id] = Some(outcome.core);
                self.visit(l, factors[0].take().expect("left factored"))?;
                self.visit(r, factors[1].take().expect("right factored"))?;
                Ok(())
            }
        }
    }
}

/// Per-node ranks meeting a relative error target: each non-root node keeps
/// the smallest rank whose discarded tail energy of the original tensor's
/// group matricization stays within its share of `eps^2`.
pub fn tolerance_rank_map(
    a: &DenseTensor,
    tree: &DimTree,
    eps: f64,
) -> Result<Vec<usize>, DecompError> {
    tree.validate(a.ndim())?;
    let truncated = tree.nodes.len() - 1;
    let per_node_tol = (eps / (truncated as f64).sqrt()).min(0.999);
    let mut ranks = Vec::with_capacity(tree.nodes.len());
    for (id, node) in tree.nodes.iter().enumerate() {
        if id == 0 {
            ranks.push(1);
            continue;
        }
        let pre: usize = a.shape()[..node.lo].iter().product();
        let mid: usize = a.shape()[node.lo..=node.hi].iter().product();
        let post: usize = a.shape()[node.hi + 1..].iter().product();
        let grouped = a.reshape(&[pre, mid, post])?;
        let svd = truncated_svd(
            &grouped.matricize(1)?,
            crate::linalg::TruncationRule::RelTol(per_node_tol),
        )?;
        ranks.push(svd.rank());
    }
    Ok(ranks)
}

/// Per-node rank map with a uniform target rank, capped by what each node
/// can carry; the root is pinned to rank 1.
pub fn uniform_rank_map(tree: &DimTree, shape: &[usize], rank: usize) -> Vec<usize> {
    tree.nodes
        .iter()
        .enumerate()
        .map(|(id, node)| {
            if id == 0 {
                1
            } else {
                let dim: usize = shape[node.lo..=node.hi].iter().product();
                rank.min(dim).max(1)
            }
        })
        .collect()
}
