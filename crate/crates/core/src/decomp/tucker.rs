//! Randomized Tucker decomposition via sequential truncated HOSVD.
//!
//! Each mode takes a fixed-rank SVD of the current core's unfolding; the
//! transpose of the left factor shrinks the core. When randomizing, the core
//! absorbs `Delta U^T` while the factor keeps `U Delta^{-1}`, so the pair
//! cancels in the reconstruction. A post-pass folds the first factor back in
//! and re-decomposes that mode with a fresh perturbation.

use std::time::Instant;

use crate::linalg::{
    derive_seed, sample_perturbation, truncated_svd, PerturbationRecord, TruncationRule,
};
use crate::tensor::{DenseTensor, Matrix};

use super::{DecompError, DecompositionReport, Scheme, TuckerRepresentation};

pub(super) struct HosvdOutcome {
    pub core: DenseTensor,
    pub factors: Vec<Option<Matrix>>,
    pub records: Vec<PerturbationRecord>,
}

/// One truncated-HOSVD sweep. `rank_spec[k] = None` leaves mode k untouched
/// (no SVD, no factor). The randomized post-pass re-decomposes the first
/// truncated mode.
pub(super) fn hosvd_sweep(
    a: &DenseTensor,
    rank_spec: &[Option<usize>],
    randomize: bool,
    delta: f64,
    seed: u64,
) -> Result<HosvdOutcome, DecompError> {
    let n = a.ndim();
    debug_assert_eq!(rank_spec.len(), n);
    let mut core = a.clone();
    let mut factors: Vec<Option<Matrix>> = vec![None; n];
    let mut records = Vec::new();

    for k in 0..n {
        let Some(rank) = rank_spec[k] else { continue };
        let svd = truncated_svd(&core.matricize(k)?, TruncationRule::FixedRank(rank))?;
        let r = svd.rank();
        if randomize {
            let rec = sample_perturbation(r, delta, k, derive_seed(seed, k as u64))?;
            let du_t = svd.u.transpose().scale_rows(&rec.entries)?;
            core = core.mode_product(&du_t, k)?;
            factors[k] = Some(svd.u.scale_columns(&rec.inverse_entries())?);
            records.push(rec);
        } else {
            core = core.mode_product(&svd.u.transpose(), k)?;
            factors[k] = Some(svd.u);
        }
    }

    if randomize {
        if let Some(k0) = rank_spec.iter().position(|r| r.is_some()) {
            let folded = core.mode_product(factors[k0].as_ref().expect("factored"), k0)?;
            let rank = rank_spec[k0].expect("checked");
            let svd = truncated_svd(&folded.matricize(k0)?, TruncationRule::FixedRank(rank))?;
            let r = svd.rank();
            let rec = sample_perturbation(r, delta, n, derive_seed(seed, n as u64))?;
            let du_t = svd.u.transpose().scale_rows(&rec.entries)?;
            core = folded.mode_product(&du_t, k0)?;
            factors[k0] = Some(svd.u.scale_columns(&rec.inverse_entries())?);
            records.push(rec);
        }
    }

    Ok(HosvdOutcome {
        core,
        factors,
        records,
    })
}

/// Per-mode Tucker ranks meeting a relative error target: each mode keeps
/// the smallest rank whose discarded tail energy of the original tensor's
/// unfolding is at most `eps^2 / N` of the total, so the truncated HOSVD
/// error stays below `eps` overall.
pub fn tolerance_ranks(a: &DenseTensor, eps: f64) -> Result<Vec<usize>, DecompError> {
    let n = a.ndim();
    let per_mode_tol = eps / (n as f64).sqrt();
    let mut ranks = Vec::with_capacity(n);
    for k in 0..n {
        let svd = truncated_svd(
            &a.matricize(k)?,
            TruncationRule::RelTol(per_mode_tol.min(0.999)),
        )?;
        ranks.push(svd.rank());
    }
    Ok(ranks)
}

pub fn rtd(
    a: &DenseTensor,
    ranks: &[usize],
    randomize: bool,
    delta: f64,
    seed: u64,
) -> Result<(TuckerRepresentation, DecompositionReport), DecompError> {
    let n = a.ndim();
    if ranks.len() != n {
        return Err(DecompError::InvalidArgument(format!(
            "{} ranks for an order-{n} tensor",
            ranks.len()
        )));
    }
    for (k, (&r, &i)) in ranks.iter().zip(a.shape()).enumerate() {
        if r == 0 {
            return Err(DecompError::InvalidArgument(format!("rank for mode {k} is 0")));
        }
        if r > i {
            return Err(DecompError::RankTooLarge {
                requested: r,
                size: i,
            });
        }
    }
    if randomize && !(delta > 0.0 && delta <= 1.0) {
        return Err(DecompError::Linalg(
            crate::linalg::LinalgError::InvalidThreshold(delta),
        ));
    }

    let started = Instant::now();
    let spec: Vec<Option<usize>> = ranks.iter().map(|r| Some(*r)).collect();
    let outcome = hosvd_sweep(a, &spec, randomize, delta, seed)?;
    let factors: Vec<Matrix> = outcome
        .factors
        .into_iter()
        .map(|f| f.expect("every mode factored"))
        .collect();
    let rep = TuckerRepresentation::new(outcome.core, factors)?;
    let mut report = DecompositionReport::new(Scheme::Tucker);
    report.achieved_ranks = rep.ranks();
    report.perturbations = outcome.records;
    report.decompose_seconds = started.elapsed().as_secs_f64();
    Ok((rep, report))
}
