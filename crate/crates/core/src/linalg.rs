//! Matrix factorizations and perturbation sampling used by every
//! decomposition algorithm.
//!
//! Truncated SVD supports two rules: a fixed target rank, and a relative
//! tail-energy tolerance (keep the smallest r with
//! `sum_{i>r} s_i^2 <= tol^2 * ||m||_F^2`). Sign convention: the
//! largest-magnitude entry of each left singular vector is nonnegative, so
//! equal inputs give bitwise-equal factors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Matrix, TensorError};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid threshold {0}: perturbation threshold must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid truncation rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Rank-selection rule for [`truncated_svd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationRule {
    /// Keep `min(rank, numerical rank)` leading triples.
    FixedRank(usize),
    /// Keep the smallest rank whose discarded tail energy is at most
    /// `tol^2 * ||m||_F^2`; always keeps at least one triple.
    RelTol(f64),
}

/// Truncated SVD: `u * diag(s) * v^T` approximates the input.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// rows x r, orthonormal columns.
    pub u: Matrix,
    /// r singular values, descending, nonnegative.
    pub s: Vec<f64>,
    /// cols x r, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u * diag(s) * v^T`.
    pub fn reconstruct(&self) -> Matrix {
        let sv = self
            .v
            .scale_columns(&self.s)
            .expect("rank matches column count");
        self.u
            .multiply(&sv.transpose())
            .expect("inner dimensions agree")
    }

    /// `diag(weights) * diag(s) * v^T` with `weights` applied per triple;
    /// identity weights give the plain `s_i v_i^T` stack.
    pub fn weighted_sv_t(&self, weights: &[f64]) -> Matrix {
        let scaled: Vec<f64> = self
            .s
            .iter()
            .zip(weights)
            .map(|(s, w)| s * w)
            .collect();
        self.v
            .scale_columns(&scaled)
            .expect("rank matches column count")
            .transpose()
    }
}

/// Diagonal perturbation factors drawn from U([delta, 1]) for one SVD step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub entries: Vec<f64>,
    pub step: usize,
    pub seed: u64,
}

impl PerturbationRecord {
    pub fn inverse_entries(&self) -> Vec<f64> {
        self.entries.iter().map(|d| 1.0 / d).collect()
    }
}

/// Draw `rank` independent factors uniformly from `[delta, 1]`;
/// deterministic for a given seed.
pub fn sample_perturbation(
    rank: usize,
    delta: f64,
    step: usize,
    seed: u64,
) -> Result<PerturbationRecord, LinalgError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(LinalgError::InvalidThreshold(delta));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..rank)
        .map(|_| rng.random_range(delta..=1.0))
        .collect();
    Ok(PerturbationRecord {
        entries,
        step,
        seed,
    })
}

/// Derive the per-step RNG seed from a base seed. Both the in-process and
/// the dispersed execution paths use this, which is what makes them agree
/// bitwise.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    // splitmix64 over the tagged base
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x1234_5678_9ABC_DEF1);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Above this size the Gram-matrix eigenroute is used: much faster for the
// image-scale unfoldings, accurate as long as kept singular values stay
// well above sqrt(machine eps) relative to the largest, which the rank
// guard below enforces.
const GRAM_MIN_DIM: usize = 384;

const MAX_JACOBI_SWEEPS: usize = 64;

/// All singular triples of a matrix, ready for repeated truncation under
/// different rules without refactorizing.
#[derive(Debug, Clone)]
pub struct FullSvd {
    u: Matrix,
    sigma: Vec<f64>,
    v: Matrix,
    num_rank: usize,
    total_energy: f64,
}

impl FullSvd {
    /// Apply a rank-selection rule to the cached factorization.
    pub fn truncate(&self, rule: TruncationRule) -> Result<SvdResult, LinalgError> {
        match rule {
            TruncationRule::FixedRank(r) if r == 0 => {
                return Err(LinalgError::InvalidRule("fixed rank must be >= 1".into()))
            }
            TruncationRule::RelTol(t) if !(t > 0.0 && t < 1.0) => {
                return Err(LinalgError::InvalidRule(format!(
                    "relative tolerance must lie in (0, 1), got {t}"
                )));
            }
            _ => {}
        }
        let rank = match rule {
            TruncationRule::FixedRank(r) => r.min(self.num_rank.max(1)),
            TruncationRule::RelTol(tol) => {
                let budget = tol * tol * self.total_energy;
                let mut tail = self.total_energy;
                let mut r = self.sigma.len();
                for (i, s) in self.sigma.iter().enumerate() {
                    tail -= s * s;
                    if tail <= budget {
                        r = i + 1;
                        break;
                    }
                }
                r.min(self.num_rank.max(1))
            }
        };
        let rank = rank.max(1).min(self.sigma.len());
        let mut u = Matrix::from_fn(self.u.rows(), rank, |r, c| self.u.get(r, c));
        let mut v = Matrix::from_fn(self.v.rows(), rank, |r, c| self.v.get(r, c));
        let s: Vec<f64> = self.sigma[..rank].to_vec();
        canonicalize_signs(&mut u, &mut v);
        Ok(SvdResult { u, s, v })
    }
}

/// Full factorization via the size-appropriate route.
pub fn full_svd(m: &Matrix) -> Result<FullSvd, LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::InvalidRule("empty matrix".into()));
    }
    let min_dim = m.rows().min(m.cols());
    let (u, sigma, v) = if min_dim >= GRAM_MIN_DIM {
        gram_svd(m)?
    } else {
        dense_svd(m)?
    };
    // Numerical rank: singular values at the round-off floor carry no
    // information and their vectors are arbitrary.
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let floor = sigma_max * (m.rows().max(m.cols()) as f64) * f64::EPSILON;
    let num_rank = sigma.iter().take_while(|s| **s > floor).count();
    let total_energy: f64 = sigma.iter().map(|s| s * s).sum();
    Ok(FullSvd {
        u,
        sigma,
        v,
        num_rank,
        total_energy,
    })
}

/// Truncated SVD of `m` under the given rule.
pub fn truncated_svd(m: &Matrix, rule: TruncationRule) -> Result<SvdResult, LinalgError> {
    full_svd(m)?.truncate(rule)
}

// One-sided Jacobi with QR/LQ preprocessing. Slower than bidiagonalization
// but unconditionally robust on exactly rank-deficient unfoldings, which
// this crate meets constantly (rank-one tensors, rounding after addition);
// the iterative bidiagonal SVD in our linear-algebra backend returns wrong
// factors for those.
fn dense_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix), LinalgError> {
    if m.rows() >= m.cols() {
        let qr = m.to_nalgebra().qr();
        let (q, r) = (qr.q(), qr.r());
        let (ur, sigma, v) = jacobi_square(&Matrix::from_nalgebra(&r))?;
        let u = Matrix::from_nalgebra(&q).multiply(&ur)?;
        Ok((u, sigma, v))
    } else {
        let qr = m.to_nalgebra().transpose().qr();
        let (q, r) = (qr.q(), qr.r());
        // m = r^T q^T; svd(r^T) = u s vl^T gives v = q vl.
        let (u, sigma, vl) = jacobi_square(&Matrix::from_nalgebra(&r.transpose()))?;
        let v = Matrix::from_nalgebra(&q).multiply(&vl)?;
        Ok((u, sigma, v))
    }
}

/// One-sided Jacobi SVD of a square matrix: orthogonalize column pairs by
/// plane rotations, accumulate them into V, read `sigma` off the column
/// norms.
fn jacobi_square(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix), LinalgError> {
    let n = a.cols();
    debug_assert_eq!(a.rows(), n);
    let mut w = a.to_nalgebra();
    let mut v = nalgebra::DMatrix::<f64>::identity(n, n);
    // Rotations preserve the Frobenius norm, so this is a stable scale for
    // declaring a column numerically dead.
    let dead2 = {
        let frob2: f64 = w.iter().map(|x| x * x).sum();
        frob2 * f64::EPSILON * f64::EPSILON
    };
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                // Dead columns carry no information; rotating against them
                // cycles forever because their correlation stays O(1).
                if alpha <= dead2 || beta <= dead2 {
                    continue;
                }
                // Pairs already orthogonal to ~1e-14 relative stay put;
                // rotating at round-off level can cycle forever.
                if gamma.abs() <= 1e-14 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NumericalFailure(
            "Jacobi SVD did not converge".into(),
        ));
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        norms[y]
            .partial_cmp(&norms[x])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = Matrix::from_fn(n, n, |r, c| {
        let j = order[c];
        if norms[j] > 0.0 {
            w[(r, j)] / norms[j]
        } else {
            // canonical placeholder for a fully annihilated column
            if r == c {
                1.0
            } else {
                0.0
            }
        }
    });
    let v_m = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((u, sigma, v_m))
}

/// Eigendecomposition of the smaller-side Gram matrix. The singular vectors
/// of the long side are recovered as `M^T u / sigma`; directions at the
/// numerical floor are dropped by the caller's rank guard.
fn gram_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix), LinalgError> {
    let nm = m.to_nalgebra();
    let tall = m.rows() >= m.cols();
    let gram = if tall {
        nm.transpose() * &nm
    } else {
        &nm * nm.transpose()
    };
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| LinalgError::NumericalFailure("eigendecomposition did not converge".into()))?;
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sigma: Vec<f64> = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    let small = nalgebra::DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    // Recover the long-side factor column by column.
    let mut long = if tall { &nm * &small } else { nm.transpose() * &small };
    let floor = sigma.first().copied().unwrap_or(0.0) * f64::EPSILON;
    for (j, s) in sigma.iter().enumerate() {
        if *s > floor && *s > 0.0 {
            long.column_mut(j).scale_mut(1.0 / s);
        } else {
            long.column_mut(j).fill(0.0);
        }
    }
    let (u, v) = if tall {
        (Matrix::from_nalgebra(&long), Matrix::from_nalgebra(&small))
    } else {
        (Matrix::from_nalgebra(&small), Matrix::from_nalgebra(&long))
    };
    Ok((u, sigma, v))
}

fn canonicalize_signs(u: &mut Matrix, v: &mut Matrix) {
    for c in 0..u.cols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for r in 0..u.rows() {
            let a = u.get(r, c).abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if u.get(best, c) < 0.0 {
            for r in 0..u.rows() {
                let x = u.get(r, c);
                u.set(r, c, -x);
            }
            for r in 0..v.rows() {
                let x = v.get(r, c);
                v.set(r, c, -x);
            }
        }
    }
}

/// Truncated SVD of the product `a * b` without materializing it: both
/// factors are orthogonalized and the small core is decomposed. Exact for
/// any rank, and cheap when the shared dimension is small.
pub fn truncated_svd_of_product(
    a: &Matrix,
    b: &Matrix,
    rule: TruncationRule,
) -> Result<SvdResult, LinalgError> {
    if a.cols() != b.rows() {
        return Err(LinalgError::Tensor(TensorError::ShapeMismatch(format!(
            "{}x{} times {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        ))));
    }
    let shared = a.cols();
    if shared * 4 >= a.rows().min(b.cols()) {
        // shared dimension not small; the dense product is fine
        return truncated_svd(&a.multiply(b)?, rule);
    }
    // a = Q_a R_a, b = L_b Q_b, so a b = Q_a (R_a L_b) Q_b.
    let qr = a.to_nalgebra().qr();
    let q_a = Matrix::from_nalgebra(&qr.q());
    let r_a = Matrix::from_nalgebra(&qr.r());
    let (l_b, q_b) = lq_factor(b)?;
    let small = r_a.multiply(&l_b)?;
    let inner = truncated_svd(&small, rule)?;
    let mut u = q_a.multiply(&inner.u)?;
    let mut v = q_b.transpose().multiply(&inner.v)?;
    canonicalize_signs(&mut u, &mut v);
    Ok(SvdResult {
        u,
        s: inner.s,
        v,
    })
}

/// LQ factorization: `m = l * q` with `q` having orthonormal rows
/// (`r x cols`, `r = min(rows, cols)`) and `l` lower-triangular (`rows x r`).
pub fn lq_factor(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::InvalidRule("empty matrix".into()));
    }
    let qr = m.to_nalgebra().transpose().qr();
    let q_t = qr.q();
    let r_t = qr.r();
    // m^T = Q R  =>  m = R^T Q^T
    let l = Matrix::from_nalgebra(&r_t.transpose());
    let q = Matrix::from_nalgebra(&q_t.transpose());
    Ok((l, q))
}
