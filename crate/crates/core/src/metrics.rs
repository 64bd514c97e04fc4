//! Privacy-leakage and fidelity measurements: normalized L2-dissimilarity,
//! per-rank Pearson correlation between cores, histogram analysis,
//! normalized mutual information, compression ratio, and per-slice core
//! norm profiles.

use serde::Serialize;
use thiserror::Error;

use crate::decomp::Representation;
use crate::tensor::DenseTensor;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("original {0} has zero norm")]
    ZeroNormOriginal(usize),
    #[error("degenerate range: tensor {0} is constant")]
    DegenerateRange(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Mean of `||x_n - x'_n||_2 / ||x_n||_2` over paired originals and
/// reconstructions.
pub fn l2_dissimilarity(
    originals: &[DenseTensor],
    reconstructions: &[DenseTensor],
) -> Result<f64, MetricError> {
    if originals.is_empty() || originals.len() != reconstructions.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} originals vs {} reconstructions",
            originals.len(),
            reconstructions.len()
        )));
    }
    let mut total = 0.0;
    for (n, (x, xr)) in originals.iter().zip(reconstructions).enumerate() {
        if x.shape() != xr.shape() {
            return Err(MetricError::ShapeMismatch(format!(
                "pair {n}: {:?} vs {:?}",
                x.shape(),
                xr.shape()
            )));
        }
        let norm = x.frobenius_norm();
        if norm == 0.0 {
            return Err(MetricError::ZeroNormOriginal(n));
        }
        let diff = x
            .data()
            .iter()
            .zip(xr.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        total += diff / norm;
    }
    Ok(total / originals.len() as f64)
}

/// Per-rank slice correlation: for each index along `rank_axis`, the
/// absolute Pearson correlation of the two flattened slices. Slices with
/// zero variance on either side come back as `None` rather than a number.
pub fn pearson_per_rank(
    a: &DenseTensor,
    b: &DenseTensor,
    rank_axis: usize,
) -> Result<Vec<Option<f64>>, MetricError> {
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if rank_axis >= a.ndim() {
        return Err(MetricError::InvalidArgument(format!(
            "axis {rank_axis} of an order-{} tensor",
            a.ndim()
        )));
    }
    let size = a.shape()[rank_axis];
    let mut out = Vec::with_capacity(size);
    for r in 0..size {
        let xs = axis_slice(a, rank_axis, r);
        let ys = axis_slice(b, rank_axis, r);
        out.push(pearson(&xs, &ys));
    }
    Ok(out)
}

fn axis_slice(t: &DenseTensor, axis: usize, index: usize) -> Vec<f64> {
    let shape = t.shape();
    let mut idx = vec![0usize; shape.len()];
    idx[axis] = index;
    let count: usize = shape
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != axis)
        .map(|(_, s)| s)
        .product();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(t.get(&idx));
        for (k, s) in shape.iter().enumerate() {
            if k == axis {
                continue;
            }
            idx[k] += 1;
            if idx[k] < *s {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Absolute Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some((cov / (vx * vy).sqrt()).abs().min(1.0))
    }
}

/// Equal-width histogram over `[min, max]`; the maximum lands in the last
/// bin; a constant tensor puts everything in bin zero.
pub fn histogram(t: &DenseTensor, bins: usize) -> Result<Vec<u64>, MetricError> {
    if bins == 0 {
        return Err(MetricError::InvalidArgument("bins must be >= 1".into()));
    }
    let (lo, hi) = min_max(t.data());
    let mut counts = vec![0u64; bins];
    let width = hi - lo;
    for &v in t.data() {
        let bin = if width == 0.0 {
            0
        } else {
            (((v - lo) / width) * bins as f64).floor().min(bins as f64 - 1.0) as usize
        };
        counts[bin] += 1;
    }
    Ok(counts)
}

fn min_max(data: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Normalized mutual information `2 I(X;Y) / (H(X) + H(Y))`, estimated from
/// a joint histogram with `bins` equal-width bins per axis over each
/// tensor's own range.
pub fn nmi(x: &DenseTensor, y: &DenseTensor, bins: usize) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} vs {} elements",
            x.len(),
            y.len()
        )));
    }
    if bins < 2 {
        return Err(MetricError::InvalidArgument("bins must be >= 2".into()));
    }
    let (lx, hx) = min_max(x.data());
    let (ly, hy) = min_max(y.data());
    if hx == lx {
        return Err(MetricError::DegenerateRange(0));
    }
    if hy == ly {
        return Err(MetricError::DegenerateRange(1));
    }
    let bin_of = |v: f64, lo: f64, hi: f64| -> usize {
        (((v - lo) / (hi - lo)) * bins as f64)
            .floor()
            .min(bins as f64 - 1.0) as usize
    };
    let mut joint = vec![0u64; bins * bins];
    for (a, b) in x.data().iter().zip(y.data()) {
        joint[bin_of(*a, lx, hx) + bins * bin_of(*b, ly, hy)] += 1;
    }
    let mut marg_x = vec![0u64; bins];
    let mut marg_y = vec![0u64; bins];
    for i in 0..bins {
        for j in 0..bins {
            marg_x[i] += joint[i + bins * j];
            marg_y[j] += joint[i + bins * j];
        }
    }
    let total = x.len() as f64;
    // Entropies from sorted count multisets so nmi(x, y) == nmi(y, x)
    // exactly: the summation order no longer depends on operand order.
    let hx = entropy_from_counts(&marg_x, total);
    let hy = entropy_from_counts(&marg_y, total);
    let hxy = entropy_from_counts(&joint, total);
    let mi = hx + hy - hxy;
    Ok((2.0 * mi / (hx + hy)).clamp(0.0, 1.0))
}

fn entropy_from_counts(counts: &[u64], total: f64) -> f64 {
    let mut nonzero: Vec<u64> = counts.iter().copied().filter(|c| *c > 0).collect();
    nonzero.sort_unstable();
    nonzero
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Tensor-network parameter count divided by the dense element count.
pub fn compression_ratio(rep: &Representation) -> f64 {
    let dense: usize = rep.mode_sizes().iter().product();
    rep.param_count() as f64 / dense as f64
}

/// Frobenius norm of each mode-index slice of one core, plus the slices
/// rescaled to unit norm (zero slices are flagged and left as zeros).
#[derive(Debug, Clone, Serialize)]
pub struct SliceNormProfile {
    pub core_index: usize,
    pub axis: usize,
    pub factors: Vec<f64>,
    pub zero_slices: Vec<usize>,
}

/// Per-slice normalization factors for every core/factor of a
/// representation: the middle axis for TT/TR cores, rows for Tucker/HT
/// factors, skipped for core tensors without a mode index.
pub fn core_norm_profile(rep: &Representation) -> Vec<SliceNormProfile> {
    let fragments = rep.fragments();
    let mut out = Vec::new();
    for (core_index, frag) in fragments.iter().enumerate() {
        let axis = match rep {
            Representation::Tt(_) | Representation::Tr(_) => 1,
            Representation::Tucker(_) => {
                if core_index == 0 {
                    continue; // the core tensor carries no mode index
                }
                0
            }
            Representation::Ht(_) => {
                if frag.ndim() != 2 {
                    continue; // transfer cores carry no mode index
                }
                0
            }
        };
        let size = frag.shape()[axis];
        let mut factors = Vec::with_capacity(size);
        let mut zero_slices = Vec::new();
        for i in 0..size {
            let slice = axis_slice(frag, axis, i);
            let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                zero_slices.push(i);
            }
            factors.push(norm);
        }
        out.push(SliceNormProfile {
            core_index,
            axis,
            factors,
            zero_slices,
        });
    }
    out
}

/// The normalized (unit Frobenius) slice along `axis` at `index`, for
/// histogram and correlation analysis of core content.
pub fn normalized_slice(t: &DenseTensor, axis: usize, index: usize) -> Vec<f64> {
    let mut slice = axis_slice(t, axis, index);
    let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut slice {
            *v /= norm;
        }
    }
    slice
}
