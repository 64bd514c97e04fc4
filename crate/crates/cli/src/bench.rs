//! `tnvault bench`: reproducible benchmark suites over synthetic data.
//!
//! - `superdiagonal`: train decomposition of the 10x10x10 superdiagonal
//!   tensor, plain and noise-padded, cores and histograms to CSV.
//! - `timing`: decompose/reconstruct wall times for the six algorithm
//!   variants on a synthetic 600x600x3 image at image-scale ranks.
//! - `distortion-curve`: normalized L2-dissimilarity against compression
//!   ratio for all six variants.
//!
//! Everything except measured seconds is deterministic for a given seed.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tnvault_core::decomp::{
    pad_noise, rtd, tolerance_ranks, tr_svd, tt_svd, Representation,
};
use tnvault_core::io::save_dt;
use tnvault_core::metrics::{compression_ratio, histogram, l2_dissimilarity};
use tnvault_core::tensor::DenseTensor;

use crate::error::CliError;

#[derive(Clone, Copy)]
pub enum Suite {
    Superdiagonal,
    Timing,
    DistortionCurve,
}

impl std::str::FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "superdiagonal" => Ok(Suite::Superdiagonal),
            "timing" => Ok(Suite::Timing),
            "distortion-curve" => Ok(Suite::DistortionCurve),
            other => Err(format!(
                "unknown suite '{other}' (expected superdiagonal|timing|distortion-curve)"
            )),
        }
    }
}

pub fn run(suite: Suite, seed: u64, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    match suite {
        Suite::Superdiagonal => superdiagonal(seed, out),
        Suite::Timing => timing(seed, out),
        Suite::DistortionCurve => distortion_curve(seed, out),
    }
}

fn superdiagonal_tensor(n: usize) -> DenseTensor {
    DenseTensor::from_fn(&[n, n, n], |idx| {
        if idx[0] == idx[1] && idx[1] == idx[2] {
            1.0
        } else {
            0.0
        }
    })
}

fn superdiagonal(seed: u64, out: &Path) -> Result<(), CliError> {
    let t = superdiagonal_tensor(10);
    let padded = pad_noise(&t, &[2, 2, 2], 1.0, seed)?;
    let mut csv = String::from("case,variant,ranks,relative_error,exact\n");
    let mut hist_csv = String::from("case,variant,core,bin,count\n");
    for (case, tensor) in [("plain", &t), ("padded", &padded)] {
        for (variant, randomize) in [("tt_svd", false), ("rtt_svd", true)] {
            let (tt, report) = tt_svd(tensor, 1e-12, randomize, 0.05, seed)?;
            let rec = tt.reconstruct()?;
            let err = tensor.relative_error(&rec);
            writeln!(
                csv,
                "{case},{variant},{},{err:.12e},{}",
                rank_string(&report.achieved_ranks),
                err <= 1e-10
            )
            .expect("string write");
            for (k, core) in tt.cores().iter().enumerate() {
                save_dt(core, &out.join(format!("{case}_{variant}_core{k}.dt")))?;
                for (bin, count) in histogram(core, 64)?.iter().enumerate() {
                    writeln!(hist_csv, "{case},{variant},{k},{bin},{count}")
                        .expect("string write");
                }
            }
        }
    }
    std::fs::write(out.join("superdiagonal.csv"), csv)?;
    std::fs::write(out.join("superdiagonal_histograms.csv"), hist_csv)?;
    println!("superdiagonal suite written to {out:?}");
    Ok(())
}

fn rank_string(ranks: &[usize]) -> String {
    ranks
        .iter()
        .map(|r| r.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

/// Synthetic stand-in for a face image: low-rank structure with decaying
/// spectrum, spectrally-correlated channels, and a full-rank noise floor.
pub fn synthetic_image(h: usize, w: usize, c: usize, seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = 64usize.min(h.min(w));
    let mut us = Vec::with_capacity(terms);
    let mut vs = Vec::with_capacity(terms);
    let mut ws = Vec::with_capacity(terms);
    for k in 0..terms {
        let amp = (k as f64 + 1.0).powf(-1.2);
        us.push(
            (0..h)
                .map(|_| amp * rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        );
        vs.push(
            (0..w)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        );
        // channels share structure, as RGB planes do
        ws.push(
            (0..c)
                .map(|_| 1.0 + 0.05 * rng.random_range(-1.0..1.0))
                .collect::<Vec<f64>>(),
        );
    }
    let mut data = vec![0.0f64; h * w * c];
    for k in 0..terms {
        for ch in 0..c {
            let wk = ws[k][ch];
            for j in 0..w {
                let vw = vs[k][j] * wk;
                let base = h * (j + w * ch);
                for i in 0..h {
                    data[i + base] += us[k][i] * vw;
                }
            }
        }
    }
    // full-rank noise floor
    for v in &mut data {
        *v += 0.002 * rng.random_range(-1.0..1.0);
    }
    DenseTensor::new(vec![h, w, c], data).expect("valid shape")
}

struct TimingRow {
    algorithm: &'static str,
    ranks: String,
    cr: f64,
    decompose_s: f64,
    reconstruct_s: f64,
    rel_error: f64,
}

fn timing(seed: u64, out: &Path) -> Result<(), CliError> {
    let raw = synthetic_image(600, 600, 3, seed);
    // balanced shape so the train and the Tucker rank pattern conform
    let balanced = raw.permute_axes(&[0, 2, 1])?;
    let mut rows: Vec<TimingRow> = Vec::new();

    for (name, randomize) in [("HOSVD", false), ("rTD", true)] {
        let started = Instant::now();
        let (rep, report) = rtd(&balanced, &[350, 3, 350], randomize, 0.05, seed)?;
        let decompose_s = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let rec = rep.reconstruct()?;
        let reconstruct_s = started.elapsed().as_secs_f64();
        rows.push(TimingRow {
            algorithm: name,
            ranks: rank_string(&report.achieved_ranks),
            cr: compression_ratio(&Representation::Tucker(rep)),
            decompose_s,
            reconstruct_s,
            rel_error: balanced.relative_error(&rec),
        });
    }

    for (name, randomize) in [("TT-SVD", false), ("rTT-SVD", true)] {
        let started = Instant::now();
        let (rep, report) = tt_svd(&balanced, 0.05, randomize, 0.05, seed)?;
        let decompose_s = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let rec = rep.reconstruct()?;
        let reconstruct_s = started.elapsed().as_secs_f64();
        rows.push(TimingRow {
            algorithm: name,
            ranks: rank_string(&report.achieved_ranks),
            cr: compression_ratio(&Representation::Tt(rep)),
            decompose_s,
            reconstruct_s,
            rel_error: balanced.relative_error(&rec),
        });
    }

    for (name, randomize) in [("TR-SVD", false), ("rTR-SVD", true)] {
        let started = Instant::now();
        let (rep, report) = tr_svd(&raw, 0.05, randomize, 0.05, seed)?;
        let decompose_s = started.elapsed().as_secs_f64();
        let started = Instant::now();
        let rec = rep.reconstruct()?;
        let reconstruct_s = started.elapsed().as_secs_f64();
        rows.push(TimingRow {
            algorithm: name,
            ranks: rank_string(&report.achieved_ranks),
            cr: compression_ratio(&Representation::Tr(rep)),
            decompose_s,
            reconstruct_s,
            rel_error: raw.relative_error(&rec),
        });
    }

    let mut csv =
        String::from("algorithm,ranks,compression_ratio,decompose_s,reconstruct_s,rel_error\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{:.6},{:.4},{:.4},{:.6e}",
            r.algorithm, r.ranks, r.cr, r.decompose_s, r.reconstruct_s, r.rel_error
        )
        .expect("string write");
    }
    std::fs::write(out.join("timing.csv"), csv)?;

    let mut ratios = String::from("format,randomized_over_baseline\n");
    for pair in rows.chunks(2) {
        writeln!(
            ratios,
            "{},{:.4}",
            pair[0].algorithm,
            pair[1].decompose_s / pair[0].decompose_s.max(1e-9)
        )
        .expect("string write");
    }
    std::fs::write(out.join("timing_ratios.csv"), ratios)?;
    println!("timing suite written to {out:?}");
    Ok(())
}

fn distortion_curve(seed: u64, out: &Path) -> Result<(), CliError> {
    let t = synthetic_image(64, 64, 11, seed);
    let sweeps = [0.35, 0.25, 0.15, 0.08, 0.04];
    let mut csv = String::from("algorithm,eps,compression_ratio,l2_dissimilarity\n");
    for eps in sweeps {
        for (name, randomize) in [("TT-SVD", false), ("rTT-SVD", true)] {
            let (rep, _) = tt_svd(&t, eps, randomize, 0.05, seed)?;
            let rec = rep.reconstruct()?;
            let cr = compression_ratio(&Representation::Tt(rep));
            let l2 = l2_dissimilarity(
                std::slice::from_ref(&t),
                std::slice::from_ref(&rec),
            )?;
            writeln!(csv, "{name},{eps},{cr:.6},{l2:.6e}").expect("string write");
        }
        for (name, randomize) in [("TR-SVD", false), ("rTR-SVD", true)] {
            let (rep, _) = tr_svd(&t, eps, randomize, 0.05, seed)?;
            let rec = rep.reconstruct()?;
            let cr = compression_ratio(&Representation::Tr(rep));
            let l2 = l2_dissimilarity(
                std::slice::from_ref(&t),
                std::slice::from_ref(&rec),
            )?;
            writeln!(csv, "{name},{eps},{cr:.6},{l2:.6e}").expect("string write");
        }
        let ranks = tolerance_ranks(&t, eps)?;
        for (name, randomize) in [("HOSVD", false), ("rTD", true)] {
            let (rep, _) = rtd(&t, &ranks, randomize, 0.05, seed)?;
            let rec = rep.reconstruct()?;
            let cr = compression_ratio(&Representation::Tucker(rep));
            let l2 = l2_dissimilarity(
                std::slice::from_ref(&t),
                std::slice::from_ref(&rec),
            )?;
            writeln!(csv, "{name},{eps},{cr:.6},{l2:.6e}").expect("string write");
        }
    }
    std::fs::write(out.join("distortion_curve.csv"), csv)?;
    println!("distortion-curve suite written to {out:?}");
    Ok(())
}
