//! Share arithmetic: multilinear operations executed directly on Tucker and
//! TT representations, TT matrix-operator application, and (randomized)
//! TT-rounding.
//!
//! Rank laws: interior ranks add under linear operations and multiply under
//! bilinear ones. The per-core step functions are public because the
//! dispersed simulator runs the identical math node by node; both paths must
//! agree bitwise.

use crate::decomp::{DecompError, TTRepresentation, TuckerRepresentation};
use crate::linalg::{
    derive_seed, lq_factor, sample_perturbation, truncated_svd, PerturbationRecord,
    TruncationRule,
};
use crate::tensor::{DenseTensor, Matrix};

/// The four Tucker constructions for dispersed arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuckerOp {
    Add,
    DirectSum,
    Hadamard,
    Kronecker,
}

impl std::fmt::Display for TuckerOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TuckerOp::Add => "add",
            TuckerOp::DirectSum => "direct_sum",
            TuckerOp::Hadamard => "hadamard",
            TuckerOp::Kronecker => "kronecker",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TuckerOp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(TuckerOp::Add),
            "direct_sum" => Ok(TuckerOp::DirectSum),
            "hadamard" => Ok(TuckerOp::Hadamard),
            "kronecker" => Ok(TuckerOp::Kronecker),
            other => Err(format!("unknown tucker op '{other}'")),
        }
    }
}

/// Core-tensor part of a Tucker binary op.
pub fn tucker_binary_core(
    kind: TuckerOp,
    a: &DenseTensor,
    b: &DenseTensor,
) -> Result<DenseTensor, DecompError> {
    let out = match kind {
        TuckerOp::Add | TuckerOp::DirectSum => a.direct_sum(b)?,
        TuckerOp::Hadamard | TuckerOp::Kronecker => a.kronecker(b)?,
    };
    Ok(out)
}

/// Factor-matrix part of a Tucker binary op.
pub fn tucker_binary_factor(
    kind: TuckerOp,
    a: &Matrix,
    b: &Matrix,
) -> Result<Matrix, DecompError> {
    let out = match kind {
        TuckerOp::Add => a.partial_direct_sum(b)?,
        TuckerOp::DirectSum => a.direct_sum(b),
        TuckerOp::Hadamard => a.partial_kronecker(b)?,
        TuckerOp::Kronecker => a.kronecker(b),
    };
    Ok(out)
}

/// Tucker share arithmetic: add and Hadamard require equal mode sizes,
/// direct sum and Kronecker only equal order.
pub fn tucker_binary(
    kind: TuckerOp,
    a: &TuckerRepresentation,
    b: &TuckerRepresentation,
) -> Result<TuckerRepresentation, DecompError> {
    if a.core().ndim() != b.core().ndim() {
        return Err(DecompError::InvalidArgument(format!(
            "order mismatch: {} vs {}",
            a.core().ndim(),
            b.core().ndim()
        )));
    }
    if matches!(kind, TuckerOp::Add | TuckerOp::Hadamard) && a.mode_sizes() != b.mode_sizes() {
        return Err(DecompError::InvalidArgument(format!(
            "{kind} requires equal mode sizes, got {:?} vs {:?}",
            a.mode_sizes(),
            b.mode_sizes()
        )));
    }
    let core = tucker_binary_core(kind, a.core(), b.core())?;
    let factors = a
        .factors()
        .iter()
        .zip(b.factors())
        .map(|(fa, fb)| tucker_binary_factor(kind, fa, fb))
        .collect::<Result<Vec<_>, _>>()?;
    TuckerRepresentation::new(core, factors)
}

/// Core k of the TT sum: block-diagonal stacking over the rank modes, with
/// plain concatenation at the open boundaries.
pub fn tt_add_core(
    a: &DenseTensor,
    b: &DenseTensor,
    is_first: bool,
    is_last: bool,
) -> Result<DenseTensor, DecompError> {
    let (ra0, ia, ra1) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (rb0, ib, rb1) = (b.shape()[0], b.shape()[1], b.shape()[2]);
    if ia != ib {
        return Err(DecompError::InvalidArgument(format!(
            "mode size mismatch: {ia} vs {ib}"
        )));
    }
    let r0 = if is_first { ra0 } else { ra0 + rb0 };
    let r1 = if is_last { ra1 } else { ra1 + rb1 };
    let out = DenseTensor::from_fn(&[r0, ia, r1], |idx| {
        let (r, i, c) = (idx[0], idx[1], idx[2]);
        let from_a_row = r < ra0;
        let from_a_col = c < ra1;
        match (is_first, is_last) {
            (true, true) => a.get(&[r, i, c]) + b.get(&[r, i, c]),
            (true, false) => {
                if from_a_col {
                    a.get(&[0, i, c])
                } else {
                    b.get(&[0, i, c - ra1])
                }
            }
            (false, true) => {
                if from_a_row {
                    a.get(&[r, i, 0])
                } else {
                    b.get(&[r - ra0, i, 0])
                }
            }
            (false, false) => {
                if from_a_row && from_a_col {
                    a.get(&[r, i, c])
                } else if !from_a_row && !from_a_col {
                    b.get(&[r - ra0, i, c - ra1])
                } else {
                    0.0
                }
            }
        }
    });
    Ok(out)
}

/// Core k of the TT Hadamard product: the slice at each mode index is the
/// Kronecker product of the operand slices.
pub fn tt_hadamard_core(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor, DecompError> {
    let (ra0, ia, ra1) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let (rb0, ib, rb1) = (b.shape()[0], b.shape()[1], b.shape()[2]);
    if ia != ib {
        return Err(DecompError::InvalidArgument(format!(
            "mode size mismatch: {ia} vs {ib}"
        )));
    }
    let out = DenseTensor::from_fn(&[ra0 * rb0, ia, ra1 * rb1], |idx| {
        let (r, i, c) = (idx[0], idx[1], idx[2]);
        a.get(&[r / rb0, i, c / rb1]) * b.get(&[r % rb0, i, c % rb1])
    });
    Ok(out)
}

fn check_same_modes(a: &TTRepresentation, b: &TTRepresentation) -> Result<(), DecompError> {
    if a.mode_sizes() != b.mode_sizes() {
        return Err(DecompError::InvalidArgument(format!(
            "mode sizes differ: {:?} vs {:?}",
            a.mode_sizes(),
            b.mode_sizes()
        )));
    }
    Ok(())
}

/// TT addition; interior ranks add.
pub fn tt_add(a: &TTRepresentation, b: &TTRepresentation) -> Result<TTRepresentation, DecompError> {
    check_same_modes(a, b)?;
    let n = a.num_modes();
    let cores = a
        .cores()
        .iter()
        .zip(b.cores())
        .enumerate()
        .map(|(k, (ca, cb))| tt_add_core(ca, cb, k == 0, k == n - 1))
        .collect::<Result<Vec<_>, _>>()?;
    TTRepresentation::new(cores)
}

/// TT Hadamard (elementwise) product; interior ranks multiply.
pub fn tt_hadamard(
    a: &TTRepresentation,
    b: &TTRepresentation,
) -> Result<TTRepresentation, DecompError> {
    check_same_modes(a, b)?;
    let cores = a
        .cores()
        .iter()
        .zip(b.cores())
        .map(|(ca, cb)| tt_hadamard_core(ca, cb))
        .collect::<Result<Vec<_>, _>>()?;
    TTRepresentation::new(cores)
}

/// Matrix operator in TT format: 4th-order cores `[R_{k-1}, I_k, J_k, R_k]`
/// acting on vectors (TT trains) over the column modes `J_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTMatrixRepresentation {
    cores: Vec<DenseTensor>,
}

impl TTMatrixRepresentation {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self, DecompError> {
        if cores.is_empty() {
            return Err(DecompError::InvalidRepresentation("no cores".into()));
        }
        for (k, c) in cores.iter().enumerate() {
            if c.ndim() != 4 {
                return Err(DecompError::InvalidRepresentation(format!(
                    "operator core {k} has order {}, expected 4",
                    c.ndim()
                )));
            }
        }
        for k in 0..cores.len() - 1 {
            if cores[k].shape()[3] != cores[k + 1].shape()[0] {
                return Err(DecompError::InvalidRepresentation(format!(
                    "rank mismatch between operator cores {k} and {}",
                    k + 1
                )));
            }
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[3] != 1 {
            return Err(DecompError::InvalidRepresentation(
                "operator boundary ranks must be 1".into(),
            ));
        }
        Ok(Self { cores })
    }

    /// Rank-1 identity operator over the given mode sizes.
    pub fn identity(shape: &[usize]) -> Result<Self, DecompError> {
        let cores = shape
            .iter()
            .map(|&i| {
                DenseTensor::from_fn(&[1, i, i, 1], |idx| if idx[1] == idx[2] { 1.0 } else { 0.0 })
            })
            .collect();
        Self::new(cores)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn row_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn col_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[2]).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut out = vec![self.cores[0].shape()[0]];
        out.extend(self.cores.iter().map(|c| c.shape()[3]));
        out
    }
}

/// Matrix-by-vector product in TT format; result ranks are products of the
/// operand ranks.
pub fn tt_matvec(
    m: &TTMatrixRepresentation,
    x: &TTRepresentation,
) -> Result<TTRepresentation, DecompError> {
    if m.col_sizes() != x.mode_sizes() {
        return Err(DecompError::InvalidArgument(format!(
            "operator column modes {:?} do not match vector modes {:?}",
            m.col_sizes(),
            x.mode_sizes()
        )));
    }
    let cores = m
        .cores()
        .iter()
        .zip(x.cores())
        .map(|(mc, xc)| {
            let (ma0, i, j, ma1) = (
                mc.shape()[0],
                mc.shape()[1],
                mc.shape()[2],
                mc.shape()[3],
            );
            let (rx0, _, rx1) = (xc.shape()[0], xc.shape()[1], xc.shape()[2]);
            let rows = ma0 * rx0;
            let mut data = vec![0.0; rows * i * ma1 * rx1];
            for c1 in 0..ma1 {
                for d1 in 0..rx1 {
                    let c = c1 * rx1 + d1;
                    for ii in 0..i {
                        for c0 in 0..ma0 {
                            for d0 in 0..rx0 {
                                let mut acc = 0.0;
                                for jj in 0..j {
                                    acc += mc.get(&[c0, ii, jj, c1]) * xc.get(&[d0, jj, d1]);
                                }
                                let r = c0 * rx0 + d0;
                                data[r + rows * (ii + i * c)] = acc;
                            }
                        }
                    }
                }
            }
            DenseTensor::new(vec![rows, i, ma1 * rx1], data).map_err(DecompError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    TTRepresentation::new(cores)
}

/// Full contraction of two TT trains over all modes.
pub fn tt_inner(a: &TTRepresentation, b: &TTRepresentation) -> Result<f64, DecompError> {
    check_same_modes(a, b)?;
    // transfer matrix over the (rank_a, rank_b) pair, starting at (1, 1)
    let mut m = vec![1.0f64];
    let mut ra = 1usize;
    let mut rb = 1usize;
    for (ca, cb) in a.cores().iter().zip(b.cores()) {
        let (ra1, i, ra2) = (ca.shape()[0], ca.shape()[1], ca.shape()[2]);
        let (rb1, _, rb2) = (cb.shape()[0], cb.shape()[1], cb.shape()[2]);
        debug_assert_eq!((ra, rb), (ra1, rb1));
        let mut next = vec![0.0f64; ra2 * rb2];
        for ii in 0..i {
            for x in 0..ra1 {
                for y in 0..rb1 {
                    let w = m[x + ra1 * y];
                    if w == 0.0 {
                        continue;
                    }
                    for x2 in 0..ra2 {
                        let av = ca.get(&[x, ii, x2]);
                        if av == 0.0 {
                            continue;
                        }
                        for y2 in 0..rb2 {
                            next[x2 + ra2 * y2] += w * av * cb.get(&[y, ii, y2]);
                        }
                    }
                }
            }
        }
        m = next;
        ra = ra2;
        rb = rb2;
    }
    debug_assert_eq!(m.len(), 1);
    Ok(m[0])
}

/// Quadratic form `x^T A x` computed entirely in TT format.
pub fn tt_quadratic_form(
    m: &TTMatrixRepresentation,
    x: &TTRepresentation,
) -> Result<f64, DecompError> {
    tt_inner(x, &tt_matvec(m, x)?)
}

// --- TT-rounding -----------------------------------------------------------
//
// Right-to-left orthogonalization by LQ, then a left-to-right truncated-SVD
// sweep with the same perturbation scheme as TT-SVD. The four step functions
// are the exact protocol steps the dispersed simulator executes.

/// Right-to-left step at core k: LQ of the `[R_{k-1}, I_k R_k]` unfolding.
/// Returns the orthogonalized core and the triangular factor to pass left.
pub fn tt_round_rl_step(core: &DenseTensor) -> Result<(DenseTensor, Matrix), DecompError> {
    let (r0, i, r1) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let mat = Matrix::new(r0, i * r1, core.data().to_vec())?;
    let (l, q) = lq_factor(&mat)?;
    let new_r0 = q.rows();
    let new_core = DenseTensor::new(vec![new_r0, i, r1], q.into_data())?;
    Ok((new_core, l))
}

/// Absorb the triangular factor coming from the right: `core x_3 L^T`.
pub fn tt_round_rl_absorb(core: &DenseTensor, l: &Matrix) -> Result<DenseTensor, DecompError> {
    Ok(core.mode_product(&l.transpose(), 2)?)
}

/// Left-to-right step at core k: truncated SVD of the `[R_{k-1} I_k, R_k]`
/// unfolding, optional perturbation, and the weighted factor to pass right.
pub fn tt_round_lr_step(
    core: &DenseTensor,
    rel_tol: f64,
    randomize: bool,
    delta: f64,
    step: usize,
    step_seed: u64,
) -> Result<(DenseTensor, Matrix, Option<PerturbationRecord>), DecompError> {
    let (r0, i, r1) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let mat = Matrix::new(r0 * i, r1, core.data().to_vec())?;
    let svd = truncated_svd(&mat, TruncationRule::RelTol(rel_tol))?;
    let rank = svd.rank();
    let (u, w, rec) = if randomize {
        let rec = sample_perturbation(rank, delta, step, step_seed)?;
        let u = svd.u.scale_columns(&rec.inverse_entries())?;
        let w = svd.weighted_sv_t(&rec.entries);
        (u, w, Some(rec))
    } else {
        (svd.u.clone(), svd.weighted_sv_t(&vec![1.0; rank]), None)
    };
    let new_core = DenseTensor::new(vec![r0, i, rank], u.into_data())?;
    Ok((new_core, w, rec))
}

/// Absorb the weighted factor coming from the left: `core x_1 W`.
pub fn tt_round_lr_absorb(core: &DenseTensor, w: &Matrix) -> Result<DenseTensor, DecompError> {
    Ok(core.mode_product(w, 0)?)
}

/// TT-rounding: recompress a train to relative accuracy `epsilon`,
/// optionally re-randomizing every core on the way.
pub fn tt_round(
    a: &TTRepresentation,
    epsilon: f64,
    randomize: bool,
    delta: f64,
    seed: u64,
) -> Result<TTRepresentation, DecompError> {
    tt_round_detailed(a, epsilon, randomize, delta, seed).map(|(tt, _)| tt)
}

/// As [`tt_round`] but also returns the perturbation records drawn during
/// the compression sweep.
pub fn tt_round_detailed(
    a: &TTRepresentation,
    epsilon: f64,
    randomize: bool,
    delta: f64,
    seed: u64,
) -> Result<(TTRepresentation, Vec<PerturbationRecord>), DecompError> {
    let n = a.num_modes();
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(DecompError::InvalidArgument(format!(
            "error threshold must lie in (0, 1), got {epsilon}"
        )));
    }
    if randomize && !(delta > 0.0 && delta <= 1.0) {
        return Err(DecompError::Linalg(
            crate::linalg::LinalgError::InvalidThreshold(delta),
        ));
    }
    let mut cores = a.cores().to_vec();
    if n == 1 {
        return Ok((TTRepresentation::new(cores)?, Vec::new()));
    }
    let rel_tol = epsilon / ((n - 1) as f64).sqrt();

    for k in (1..n).rev() {
        let (q_core, l) = tt_round_rl_step(&cores[k])?;
        cores[k] = q_core;
        cores[k - 1] = tt_round_rl_absorb(&cores[k - 1], &l)?;
    }

    let mut records = Vec::new();
    for k in 0..n - 1 {
        let (new_core, w, rec) = tt_round_lr_step(
            &cores[k],
            rel_tol,
            randomize,
            delta,
            k,
            derive_seed(seed, k as u64),
        )?;
        cores[k] = new_core;
        cores[k + 1] = tt_round_lr_absorb(&cores[k + 1], &w)?;
        if let Some(rec) = rec {
            records.push(rec);
        }
    }
    Ok((TTRepresentation::new(cores)?, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::tt_svd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn random_tt(shape: &[usize], ranks: &[usize], seed: u64) -> TTRepresentation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.len();
        let mut cores = Vec::new();
        for k in 0..n {
            let r0 = if k == 0 { 1 } else { ranks[k - 1] };
            let r1 = if k == n - 1 { 1 } else { ranks[k] };
            cores.push(DenseTensor::from_fn(&[r0, shape[k], r1], |_| {
                rng.random_range(-1.0..1.0)
            }));
        }
        TTRepresentation::new(cores).unwrap()
    }

    fn random_tucker(shape: &[usize], ranks: &[usize], seed: u64) -> TuckerRepresentation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let core = DenseTensor::from_fn(ranks, |_| rng.random_range(-1.0..1.0));
        let factors = shape
            .iter()
            .zip(ranks)
            .map(|(&i, &r)| Matrix::from_fn(i, r, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        TuckerRepresentation::new(core, factors).unwrap()
    }

    #[test]
    fn tucker_add_matches_dense() {
        let a = random_tucker(&[4, 4, 4], &[2, 3, 2], 1);
        let b = random_tucker(&[4, 4, 4], &[3, 2, 2], 2);
        let sum = tucker_binary(TuckerOp::Add, &a, &b).unwrap();
        let dense = a
            .reconstruct()
            .unwrap()
            .add(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense.relative_error(&sum.reconstruct().unwrap()) < 1e-11);
        // rank sums
        assert_eq!(sum.ranks(), vec![5, 5, 4]);
    }

    #[test]
    fn tucker_hadamard_matches_dense_and_multiplies_ranks() {
        let a = random_tucker(&[3, 4, 3], &[2, 2, 3], 3);
        let b = random_tucker(&[3, 4, 3], &[2, 3, 2], 4);
        let prod = tucker_binary(TuckerOp::Hadamard, &a, &b).unwrap();
        let dense = a
            .reconstruct()
            .unwrap()
            .hadamard(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense.relative_error(&prod.reconstruct().unwrap()) < 1e-11);
        assert_eq!(prod.ranks(), vec![4, 6, 6]);
    }

    #[test]
    fn tucker_hadamard_with_rank_one_ones_is_identity() {
        let a = random_tucker(&[3, 3, 3], &[2, 2, 2], 5);
        let ones_core = DenseTensor::new(vec![1, 1, 1], vec![1.0]).unwrap();
        let ones_factors = vec![
            Matrix::from_fn(3, 1, |_, _| 1.0),
            Matrix::from_fn(3, 1, |_, _| 1.0),
            Matrix::from_fn(3, 1, |_, _| 1.0),
        ];
        let ones = TuckerRepresentation::new(ones_core, ones_factors).unwrap();
        let prod = tucker_binary(TuckerOp::Hadamard, &a, &ones).unwrap();
        let ra = a.reconstruct().unwrap();
        assert!(ra.relative_error(&prod.reconstruct().unwrap()) < 1e-12);
    }

    #[test]
    fn tucker_direct_sum_and_kronecker_match_dense() {
        let a = random_tucker(&[2, 3, 2], &[2, 2, 2], 6);
        let b = random_tucker(&[3, 2, 2], &[2, 2, 1], 7);
        let ds = tucker_binary(TuckerOp::DirectSum, &a, &b).unwrap();
        let dense_ds = a
            .reconstruct()
            .unwrap()
            .direct_sum(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense_ds.relative_error(&ds.reconstruct().unwrap()) < 1e-11);
        let kr = tucker_binary(TuckerOp::Kronecker, &a, &b).unwrap();
        let dense_kr = a
            .reconstruct()
            .unwrap()
            .kronecker(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense_kr.relative_error(&kr.reconstruct().unwrap()) < 1e-11);
    }

    #[test]
    fn tt_add_matches_dense_and_sums_ranks() {
        let a = random_tt(&[3, 4, 5], &[2, 3], 1);
        let b = random_tt(&[3, 4, 5], &[4, 1], 2);
        let sum = tt_add(&a, &b).unwrap();
        let dense = a
            .reconstruct()
            .unwrap()
            .add(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense.relative_error(&sum.reconstruct().unwrap()) < 1e-11);
        assert_eq!(sum.ranks(), vec![1, 6, 4, 1]);
    }

    #[test]
    fn tt_add_zero_is_identity() {
        let a = random_tt(&[3, 3, 3], &[2, 2], 3);
        let zero = TTRepresentation::new(vec![
            DenseTensor::zeros(&[1, 3, 1]),
            DenseTensor::zeros(&[1, 3, 1]),
            DenseTensor::zeros(&[1, 3, 1]),
        ])
        .unwrap();
        let sum = tt_add(&a, &zero).unwrap();
        let ra = a.reconstruct().unwrap();
        assert!(ra.relative_error(&sum.reconstruct().unwrap()) < 1e-12);
    }

    #[test]
    fn tt_hadamard_matches_dense_and_multiplies_ranks() {
        let a = random_tt(&[3, 3, 3], &[2, 3], 4);
        let b = random_tt(&[3, 3, 3], &[2, 2], 5);
        let prod = tt_hadamard(&a, &b).unwrap();
        let dense = a
            .reconstruct()
            .unwrap()
            .hadamard(&b.reconstruct().unwrap())
            .unwrap();
        assert!(dense.relative_error(&prod.reconstruct().unwrap()) < 1e-11);
        assert_eq!(prod.ranks(), vec![1, 4, 6, 1]);
    }

    #[test]
    fn tt_hadamard_with_ones_is_identity() {
        let a = random_tt(&[4, 3, 2], &[3, 2], 6);
        let ones = TTRepresentation::new(vec![
            DenseTensor::from_fn(&[1, 4, 1], |_| 1.0),
            DenseTensor::from_fn(&[1, 3, 1], |_| 1.0),
            DenseTensor::from_fn(&[1, 2, 1], |_| 1.0),
        ])
        .unwrap();
        let prod = tt_hadamard(&a, &ones).unwrap();
        let ra = a.reconstruct().unwrap();
        assert!(ra.relative_error(&prod.reconstruct().unwrap()) < 1e-12);
    }

    #[test]
    fn tt_matvec_identity_returns_input() {
        let x = random_tt(&[2, 3, 2], &[2, 2], 7);
        let id = TTMatrixRepresentation::identity(&[2, 3, 2]).unwrap();
        let y = tt_matvec(&id, &x).unwrap();
        let rx = x.reconstruct().unwrap();
        let ry = y.reconstruct().unwrap();
        assert!(rx.relative_error(&ry) < 1e-12);
    }

    #[test]
    fn tt_matvec_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // 2x2x2 operator with ranks (2,2), vector ranks (3,3)
        let m_cores = vec![
            DenseTensor::from_fn(&[1, 2, 2, 2], |_| rng.random_range(-1.0..1.0)),
            DenseTensor::from_fn(&[2, 2, 2, 2], |_| rng.random_range(-1.0..1.0)),
            DenseTensor::from_fn(&[2, 2, 2, 1], |_| rng.random_range(-1.0..1.0)),
        ];
        let op = TTMatrixRepresentation::new(m_cores).unwrap();
        let x = random_tt(&[2, 2, 2], &[3, 3], 9);
        let y = tt_matvec(&op, &x).unwrap();
        assert_eq!(y.ranks(), vec![1, 6, 6, 1]);

        // dense oracle: materialize the operator entrywise
        let rx = x.reconstruct().unwrap();
        let mut data = vec![0.0; 8];
        for i0 in 0..2 {
            for i1 in 0..2 {
                for i2 in 0..2 {
                    let mut acc = 0.0;
                    for j0 in 0..2 {
                        for j1 in 0..2 {
                            for j2 in 0..2 {
                                // operator entry: chain product over rank bonds
                                let mut entry = 0.0;
                                for r1 in 0..2 {
                                    for r2 in 0..2 {
                                        entry += op.cores()[0].get(&[0, i0, j0, r1])
                                            * op.cores()[1].get(&[r1, i1, j1, r2])
                                            * op.cores()[2].get(&[r2, i2, j2, 0]);
                                    }
                                }
                                acc += entry * rx.get(&[j0, j1, j2]);
                            }
                        }
                    }
                    data[i0 + 2 * (i1 + 2 * i2)] = acc;
                }
            }
        }
        let dense_y = DenseTensor::new(vec![2, 2, 2], data).unwrap();
        let ry = y.reconstruct().unwrap();
        assert!(dense_y.relative_error(&ry) < 1e-11);
    }

    #[test]
    fn tt_inner_is_squared_norm_on_self() {
        let a = random_tt(&[3, 4, 3], &[2, 3], 10);
        let dense = a.reconstruct().unwrap();
        let want = dense.frobenius_norm().powi(2);
        let got = tt_inner(&a, &a).unwrap();
        assert!((want - got).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn tt_inner_matches_dot_oracle_and_zero() {
        let a = random_tt(&[3, 3, 4], &[2, 2], 11);
        let b = random_tt(&[3, 3, 4], &[3, 2], 12);
        let da = a.reconstruct().unwrap();
        let db = b.reconstruct().unwrap();
        let want: f64 = da.data().iter().zip(db.data()).map(|(x, y)| x * y).sum();
        let got = tt_inner(&a, &b).unwrap();
        assert!((want - got).abs() <= 1e-11 * want.abs().max(1.0));

        let zero = TTRepresentation::new(vec![
            DenseTensor::zeros(&[1, 3, 1]),
            DenseTensor::zeros(&[1, 3, 1]),
            DenseTensor::zeros(&[1, 4, 1]),
        ])
        .unwrap();
        assert_eq!(tt_inner(&a, &zero).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_form_matches_dense() {
        let x = random_tt(&[2, 2, 2], &[2, 2], 13);
        let id = TTMatrixRepresentation::identity(&[2, 2, 2]).unwrap();
        let q = tt_quadratic_form(&id, &x).unwrap();
        let dense = x.reconstruct().unwrap();
        let want = dense.frobenius_norm().powi(2);
        assert!((q - want).abs() <= 1e-10 * want.max(1.0));
    }

    #[test]
    fn tt_round_restores_ranks_after_self_addition() {
        let t = random_tensor(&[6, 5, 6], 14);
        let (a, _) = tt_svd(&t, 0.2, false, 0.05, 1).unwrap();
        let doubled = tt_add(&a, &a).unwrap();
        let rounded = tt_round(&doubled, 1e-10, false, 0.05, 2).unwrap();
        let ra = a.ranks();
        let rr = rounded.ranks();
        for (x, y) in rr.iter().zip(&ra) {
            assert!(x <= y, "rounded ranks {rr:?} vs original {ra:?}");
        }
        let want = a.reconstruct().unwrap().scale(2.0);
        assert!(want.relative_error(&rounded.reconstruct().unwrap()) < 1e-8);
    }

    #[test]
    fn tt_round_noop_on_minimal_ranks() {
        let a = random_tt(&[4, 4, 4], &[2, 2], 15);
        let rounded = tt_round(&a, 1e-12, false, 0.05, 0).unwrap();
        assert_eq!(rounded.ranks(), a.ranks());
        let ra = a.reconstruct().unwrap();
        assert!(ra.relative_error(&rounded.reconstruct().unwrap()) < 1e-10);
    }

    #[test]
    fn tt_round_randomized_agrees_with_baseline() {
        let t = random_tensor(&[5, 6, 5], 16);
        let (a, _) = tt_svd(&t, 0.3, false, 0.05, 3).unwrap();
        let doubled = tt_add(&a, &a).unwrap();
        let base = tt_round(&doubled, 1e-10, false, 0.05, 4).unwrap();
        let (rand, records) = tt_round_detailed(&doubled, 1e-10, true, 0.05, 4).unwrap();
        let rb = base.reconstruct().unwrap();
        let rr = rand.reconstruct().unwrap();
        assert!(rb.relative_error(&rr) < 1e-10);
        assert_ne!(base, rand);
        assert!(!records.is_empty());
        for rec in &records {
            for d in &rec.entries {
                assert!(*d >= 0.05 && *d <= 1.0);
            }
        }
    }

    #[test]
    fn rl_sweep_leaves_orthonormal_rows() {
        let a = random_tt(&[4, 5, 4, 3], &[3, 4, 2], 17);
        let mut cores = a.cores().to_vec();
        for k in (1..cores.len()).rev() {
            let (q_core, l) = tt_round_rl_step(&cores[k]).unwrap();
            cores[k] = q_core;
            cores[k - 1] = tt_round_rl_absorb(&cores[k - 1], &l).unwrap();
        }
        for core in &cores[1..] {
            let (r0, i, r1) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            let m = Matrix::new(r0, i * r1, core.data().to_vec()).unwrap();
            for x in 0..r0 {
                for y in 0..r0 {
                    let dot: f64 = (0..i * r1).map(|c| m.get(x, c) * m.get(y, c)).sum();
                    let want = if x == y { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
        // value unchanged by orthogonalization
        let rebuilt = TTRepresentation::new(cores).unwrap();
        let ra = a.reconstruct().unwrap();
        assert!(ra.relative_error(&rebuilt.reconstruct().unwrap()) < 1e-11);
    }

    #[test]
    fn tt_round_idempotent_at_fixed_tolerance() {
        let t = random_tensor(&[6, 6, 6], 18);
        let (a, _) = tt_svd(&t, 0.3, false, 0.05, 5).unwrap();
        let once = tt_round(&a, 0.1, false, 0.05, 6).unwrap();
        let twice = tt_round(&once, 0.1, false, 0.05, 7).unwrap();
        let r1 = once.reconstruct().unwrap();
        let r2 = twice.reconstruct().unwrap();
        assert!(r1.relative_error(&r2) < 1e-10);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = random_tt(&[3, 3], &[2], 19);
        let b = random_tt(&[3, 4], &[2], 20);
        assert!(tt_add(&a, &b).is_err());
        assert!(tt_hadamard(&a, &b).is_err());
        assert!(tt_inner(&a, &b).is_err());
    }
}
