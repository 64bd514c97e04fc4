//! `tnvault reconstruct`: manifest plus fragments back to a dense tensor.

use std::path::PathBuf;

use tnvault_core::io::{load_tensor, save_dt};
use tnvault_share::{reconstruct_from_shares, ShareManifest};

use crate::decompose::{shares_from_dir, unpermute, InputMeta};
use crate::error::CliError;

pub struct ReconstructArgs {
    pub manifest: PathBuf,
    pub fragments: Option<PathBuf>,
    pub out: PathBuf,
    pub verify: Option<PathBuf>,
}

pub fn run(args: ReconstructArgs) -> Result<(), CliError> {
    let manifest_text = std::fs::read_to_string(&args.manifest)?;
    let manifest = ShareManifest::from_json(&manifest_text)?;
    let manifest_dir = args
        .manifest
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let fragments_dir = args
        .fragments
        .unwrap_or_else(|| manifest_dir.join("fragments"));
    let shares = shares_from_dir(&fragments_dir, &manifest)?;
    let mut tensor = reconstruct_from_shares(&manifest, &shares)?;

    // undo any balancing permutation recorded next to the manifest
    let meta_path = manifest_dir.join("input_meta.json");
    if meta_path.exists() {
        let meta: InputMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)?;
        tensor = unpermute(tensor, &meta)?;
    }

    save_dt(&tensor, &args.out)?;
    println!("reconstructed {:?} -> {:?}", tensor.shape(), args.out);

    if let Some(original_path) = args.verify {
        let original = load_tensor(&original_path)?;
        if original.shape() != tensor.shape() {
            return Err(CliError::Usage(format!(
                "verify target has shape {:?}, reconstruction {:?}",
                original.shape(),
                tensor.shape()
            )));
        }
        let err = original.relative_error(&tensor);
        println!("relative error vs {original_path:?}: {err:.6e}");
    }
    Ok(())
}
