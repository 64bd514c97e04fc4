//! `tnvault decompose`: input tensor to randomized shares on disk.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tnvault_core::decomp::Scheme;
use tnvault_core::io::{load_tensor, TncSidecar};
use tnvault_core::metrics::compression_ratio;
use tnvault_core::tensor::DenseTensor;
use tnvault_share::{
    generate_shares, representation_from_shares, ShareManifest, ShareParams, ShareSet,
};

use crate::error::CliError;

/// Permutation applied to the input before decomposition, recorded so
/// reconstruction can undo it.
#[derive(Debug, Serialize, Deserialize)]
pub struct InputMeta {
    pub original_shape: Vec<usize>,
    pub permutation: Vec<usize>,
}

/// Balance heuristic for 3rd-order trains: the smallest mode moves to the
/// middle (a height x width x channels image becomes height x channels x
/// width).
pub fn balancing_permutation(shape: &[usize]) -> Option<Vec<usize>> {
    if shape.len() != 3 {
        return None;
    }
    let mut smallest = 0;
    for (k, &s) in shape.iter().enumerate() {
        if s < shape[smallest] {
            smallest = k;
        }
    }
    if smallest == 1 || shape[smallest] * 4 > *shape.iter().max().unwrap() {
        return None;
    }
    let others: Vec<usize> = (0..3).filter(|k| *k != smallest).collect();
    Some(vec![others[0], smallest, others[1]])
}

pub struct DecomposeArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub scheme: Scheme,
    pub eps: Option<f64>,
    pub ranks: Option<Vec<usize>>,
    pub delta: f64,
    pub seed: u64,
    pub servers: Option<usize>,
    pub permute_modes: bool,
    pub no_auto_permute: bool,
}

pub fn run(args: DecomposeArgs) -> Result<(), CliError> {
    let mut tensor = load_tensor(&args.input)?;
    let original_shape = tensor.shape().to_vec();
    let stem = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("input")
        .to_string();

    let params = match (args.scheme, &args.eps, &args.ranks) {
        (Scheme::Tt | Scheme::Tr, Some(eps), None) => {
            if !(*eps > 0.0 && *eps < 1.0) {
                return Err(CliError::Usage(format!(
                    "--eps must lie in (0, 1), got {eps}"
                )));
            }
            ShareParams::Epsilon(*eps)
        }
        (Scheme::Tucker | Scheme::Ht, None, Some(ranks)) => ShareParams::Ranks(ranks.clone()),
        (Scheme::Tt | Scheme::Tr, _, _) => {
            return Err(CliError::Usage(format!(
                "{} takes --eps (and no --ranks)",
                args.scheme
            )))
        }
        (Scheme::Tucker | Scheme::Ht, _, _) => {
            return Err(CliError::Usage(format!(
                "{} takes --ranks (and no --eps)",
                args.scheme
            )))
        }
    };

    // Trains and Tucker rank patterns want the small channel mode in the
    // middle; rings keep the raw orientation.
    let wants_balance = matches!(args.scheme, Scheme::Tt | Scheme::Tucker);
    let permutation = if args.no_auto_permute || !wants_balance {
        None
    } else {
        balancing_permutation(tensor.shape())
    };
    if let Some(perm) = &permutation {
        tensor = tensor.permute_axes(perm)?;
        eprintln!(
            "note: input permuted to {:?} for a balanced train",
            tensor.shape()
        );
    }

    let n_servers = args.servers.unwrap_or_else(|| tensor.ndim().max(2));
    let (shares, manifest, mut report) = generate_shares(
        &tensor,
        args.scheme,
        &params,
        args.delta,
        n_servers,
        args.permute_modes,
        args.seed,
    )?;

    let rep = representation_from_shares(&manifest, &shares)?;
    let reconstructed = rep.reconstruct()?;
    report.relative_error = Some(tensor.relative_error(&reconstructed));

    write_outputs(
        &args.out,
        &stem,
        &shares,
        &manifest,
        &report,
        compression_ratio(&rep),
        permutation.map(|p| InputMeta {
            original_shape,
            permutation: p,
        }),
    )?;
    println!(
        "decomposed {:?} as {} into {} fragments (ranks {:?}, error {:.3e})",
        args.input,
        args.scheme,
        manifest.fragments.len(),
        manifest.structure.ranks,
        report.relative_error.unwrap_or(f64::NAN)
    );
    Ok(())
}

fn write_outputs(
    out: &Path,
    stem: &str,
    shares: &ShareSet,
    manifest: &ShareManifest,
    report: &tnvault_core::decomp::DecompositionReport,
    cr: f64,
    input_meta: Option<InputMeta>,
) -> Result<(), CliError> {
    let fragments_dir = out.join("fragments");
    let cores_dir = out.join("cores");
    std::fs::create_dir_all(&fragments_dir)?;
    std::fs::create_dir_all(&cores_dir)?;

    for id in shares.ids() {
        std::fs::write(
            fragments_dir.join(format!("{id}.dt")),
            shares.get(id).expect("listed id"),
        )?;
    }

    // representation surface: one .tnc per core plus its JSON sidecar
    let mut ordered: Vec<_> = manifest.fragments.iter().collect();
    ordered.sort_by_key(|f| f.core_index);
    for entry in ordered {
        let bytes = shares.get(&entry.fragment_id).expect("listed id");
        let stem = format!("core_{:03}.tnc", entry.core_index);
        std::fs::write(cores_dir.join(&stem), bytes)?;
        let sidecar = TncSidecar {
            format: manifest.scheme,
            core_index: entry.core_index,
            ranks: manifest.structure.ranks.clone(),
            mode_sizes: manifest.structure.mode_sizes.clone(),
            tree: manifest.structure.tree.clone(),
        };
        sidecar.save(&cores_dir.join(format!("{stem}.json")))?;
    }

    std::fs::write(
        out.join(format!("{stem}.manifest.json")),
        manifest.to_canonical_json(),
    )?;
    let report_json = serde_json::json!({
        "report": report,
        "compression_ratio": cr,
    });
    std::fs::write(
        out.join("report.json"),
        serde_json::to_string_pretty(&report_json)?,
    )?;
    if let Some(meta) = input_meta {
        std::fs::write(
            out.join("input_meta.json"),
            serde_json::to_string_pretty(&serde_json::to_value(&meta)?)?,
        )?;
    }
    Ok(())
}

/// Reconstruct a share set from a fragments directory.
pub fn shares_from_dir(dir: &Path, manifest: &ShareManifest) -> Result<ShareSet, CliError> {
    let mut shares = ShareSet::new();
    for entry in &manifest.fragments {
        let path = dir.join(format!("{}.dt", entry.fragment_id));
        match std::fs::read(&path) {
            Ok(bytes) => shares.insert(entry.fragment_id.clone(), bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::Share(tnvault_share::ShareError::MissingFragment(
                    entry.fragment_id.clone(),
                )))
            }
            Err(e) => return Err(CliError::Io(e)),
        }
    }
    Ok(shares)
}

/// Undo a recorded input permutation.
pub fn unpermute(tensor: DenseTensor, meta: &InputMeta) -> Result<DenseTensor, CliError> {
    let mut inverse = vec![0usize; meta.permutation.len()];
    for (i, &p) in meta.permutation.iter().enumerate() {
        inverse[p] = i;
    }
    Ok(tensor.permute_axes(&inverse)?)
}
