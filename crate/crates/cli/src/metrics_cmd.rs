//! `tnvault metrics`: privacy/fidelity measurements emitted as CSV and JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use tnvault_core::io::load_tensor;
use tnvault_core::metrics::{histogram, l2_dissimilarity, nmi, pearson_per_rank};
use tnvault_core::tensor::DenseTensor;
use tnvault_share::ShareManifest;

use crate::error::CliError;

pub enum MetricsArgs {
    Nmi {
        a: PathBuf,
        b: PathBuf,
        bins: usize,
    },
    Pearson {
        a: PathBuf,
        b: PathBuf,
        /// 1-based mode index of the rank axis.
        axis: usize,
    },
    L2 {
        originals: PathBuf,
        recons: PathBuf,
    },
    Histogram {
        input: PathBuf,
        bins: usize,
    },
    Compression {
        manifest: PathBuf,
    },
}

pub fn run(args: MetricsArgs, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    match args {
        MetricsArgs::Nmi { a, b, bins } => {
            let ta = load_tensor(&a)?;
            let tb = load_tensor(&b)?;
            let value = nmi(&ta, &tb, bins)?;
            write_report(
                out,
                "nmi",
                json!({
                    "metric": "nmi",
                    "params": { "bins": bins },
                    "operands": [a, b],
                    "value": value,
                }),
                &[("value".into(), vec![Some(value)])],
            )?;
            println!("nmi = {value:.6}");
        }
        MetricsArgs::Pearson { a, b, axis } => {
            if axis == 0 {
                return Err(CliError::Usage("--axis is 1-based".into()));
            }
            let ta = load_tensor(&a)?;
            let tb = load_tensor(&b)?;
            let values = pearson_per_rank(&ta, &tb, axis - 1)?;
            let mean: f64 = {
                let defined: Vec<f64> = values.iter().flatten().copied().collect();
                if defined.is_empty() {
                    f64::NAN
                } else {
                    defined.iter().sum::<f64>() / defined.len() as f64
                }
            };
            write_report(
                out,
                "pearson",
                json!({
                    "metric": "pearson_per_rank",
                    "params": { "axis": axis },
                    "operands": [a, b],
                    "values": values,
                    "mean_defined": if mean.is_nan() { None } else { Some(mean) },
                }),
                &[("abs_pearson".into(), values)],
            )?;
            println!("pearson per rank written ({} entries)", ta.shape()[axis - 1]);
        }
        MetricsArgs::L2 { originals, recons } => {
            let xs = tensors_in_dir(&originals)?;
            let ys = tensors_in_dir(&recons)?;
            let value = l2_dissimilarity(&xs, &ys)?;
            write_report(
                out,
                "l2",
                json!({
                    "metric": "l2_dissimilarity",
                    "operands": [originals, recons],
                    "pairs": xs.len(),
                    "value": value,
                }),
                &[("value".into(), vec![Some(value)])],
            )?;
            println!("l2 dissimilarity = {value:.6e}");
        }
        MetricsArgs::Histogram { input, bins } => {
            let t = load_tensor(&input)?;
            let counts = histogram(&t, bins)?;
            let values: Vec<Option<f64>> = counts.iter().map(|c| Some(*c as f64)).collect();
            write_report(
                out,
                "histogram",
                json!({
                    "metric": "histogram",
                    "params": { "bins": bins },
                    "operands": [input],
                    "counts": counts,
                }),
                &[("count".into(), values)],
            )?;
            println!("histogram with {bins} bins written");
        }
        MetricsArgs::Compression { manifest } => {
            let m = ShareManifest::from_json(&std::fs::read_to_string(&manifest)?)?;
            let params: usize = m
                .fragments
                .iter()
                .map(|f| f.shape.iter().product::<usize>())
                .sum();
            let dense: usize = m.structure.mode_sizes.iter().product();
            let value = params as f64 / dense as f64;
            write_report(
                out,
                "compression",
                json!({
                    "metric": "compression_ratio",
                    "operands": [manifest],
                    "parameters": params,
                    "dense_elements": dense,
                    "value": value,
                }),
                &[("value".into(), vec![Some(value)])],
            )?;
            println!("compression ratio = {value:.6}");
        }
    }
    Ok(())
}

fn tensors_in_dir(dir: &Path) -> Result<Vec<DenseTensor>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("dt" | "tnc" | "csv" | "pgm" | "ppm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no tensor files under {dir:?}")));
    }
    paths.iter().map(|p| Ok(load_tensor(p)?)).collect()
}

fn write_report(
    out: &Path,
    name: &str,
    json_value: serde_json::Value,
    columns: &[(String, Vec<Option<f64>>)],
) -> Result<(), CliError> {
    std::fs::write(
        out.join(format!("metric_{name}.json")),
        serde_json::to_string_pretty(&json_value)?,
    )?;
    let mut csv = String::from("metric,index,");
    csv.push_str(
        &columns
            .iter()
            .map(|(h, _)| h.clone())
            .collect::<Vec<_>>()
            .join(","),
    );
    csv.push('\n');
    let rows = columns.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    for i in 0..rows {
        write!(csv, "{name},{i}").expect("string write");
        for (_, values) in columns {
            match values.get(i).copied().flatten() {
                Some(v) => write!(csv, ",{v:.12e}").expect("string write"),
                None => csv.push_str(",undefined"),
            }
        }
        csv.push('\n');
    }
    std::fs::write(out.join(format!("metric_{name}.csv")), csv)?;
    Ok(())
}
