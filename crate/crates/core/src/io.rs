//! File formats: the ".dt" binary tensor format, CSV ingestion for 2-D
//! data, 8-bit PGM/PPM image ingestion, and the ".tnc" representation
//! sidecar.
//!
//! ".dt" layout, byte-exact: magic "DTEN", u8 version = 1, u8 ndims, then
//! ndims little-endian u64 mode sizes, then the values as little-endian
//! IEEE-754 f64 in column-major order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomp::{DimTree, Scheme};
use crate::tensor::{DenseTensor, TensorError};

pub const DT_MAGIC: [u8; 4] = *b"DTEN";
pub const DT_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad format: {0}")]
    Format(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn write_dt<W: Write>(t: &DenseTensor, w: &mut W) -> Result<(), IoError> {
    w.write_all(&DT_MAGIC)?;
    w.write_all(&[DT_VERSION, t.ndim() as u8])?;
    for &s in t.shape() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dt<R: Read>(r: &mut R) -> Result<DenseTensor, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != DT_MAGIC {
        return Err(IoError::Format(format!("bad magic {magic:?}")));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != DT_VERSION {
        return Err(IoError::Format(format!("unsupported version {}", head[0])));
    }
    let ndims = head[1] as usize;
    if ndims == 0 {
        return Err(IoError::Format("tensor order must be >= 1".into()));
    }
    let mut shape = Vec::with_capacity(ndims);
    let mut buf8 = [0u8; 8];
    for _ in 0..ndims {
        r.read_exact(&mut buf8)?;
        shape.push(u64::from_le_bytes(buf8) as usize);
    }
    let count: usize = shape.iter().product();
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut buf8)?;
        data.push(f64::from_le_bytes(buf8));
    }
    Ok(DenseTensor::new(shape, data)?)
}

pub fn dt_bytes(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(6 + 8 * t.ndim() + 8 * t.len());
    write_dt(t, &mut out).expect("in-memory write");
    out
}

pub fn dt_from_bytes(bytes: &[u8]) -> Result<DenseTensor, IoError> {
    let mut cur = bytes;
    read_dt(&mut cur)
}

pub fn save_dt(t: &DenseTensor, path: &Path) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path)?;
    write_dt(t, &mut f)
}

pub fn load_dt(path: &Path) -> Result<DenseTensor, IoError> {
    let mut f = std::fs::File::open(path)?;
    read_dt(&mut f)
}

/// Numeric CSV into a 2-D tensor; rows become the first mode.
pub fn read_csv_tensor<R: Read>(r: &mut R) -> Result<DenseTensor, IoError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|e| {
                    IoError::Format(format!("line {}: bad number '{cell}': {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(IoError::Format(format!(
                    "line {}: {} columns, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Format("empty csv".into()));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DenseTensor::from_fn(&[nr, nc], |idx| rows[idx[0]][idx[1]]))
}

/// 8-bit PGM (P2/P5) into a 2-D tensor or PPM (P3/P6) into a 3-D tensor
/// with RGB channels stacked as the third mode; pixel values map to floats
/// in [0, 255]. Rows are the first mode.
pub fn read_pnm<R: Read>(r: &mut R) -> Result<DenseTensor, IoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 2 {
        return Err(IoError::Format("truncated pnm".into()));
    }
    let magic = &bytes[..2];
    let (binary, channels) = match magic {
        b"P2" => (false, 1),
        b"P5" => (true, 1),
        b"P3" => (false, 3),
        b"P6" => (true, 3),
        _ => {
            return Err(IoError::Format(format!(
                "unsupported pnm magic {:?}",
                String::from_utf8_lossy(magic)
            )))
        }
    };
    let mut pos = 2usize;
    let mut header = Vec::new();
    while header.len() < 3 {
        skip_pnm_whitespace(&bytes, &mut pos)?;
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let token = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| IoError::Format("non-ascii header".into()))?;
        header.push(
            token
                .parse::<usize>()
                .map_err(|e| IoError::Format(format!("bad header token '{token}': {e}")))?,
        );
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if maxval == 0 || maxval > 255 {
        return Err(IoError::Format(format!(
            "only 8-bit images supported, maxval {maxval}"
        )));
    }
    let count = width * height * channels;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        pos += 1; // single whitespace after maxval
        if bytes.len() < pos + count {
            return Err(IoError::Format("truncated pixel data".into()));
        }
        pixels.extend(bytes[pos..pos + count].iter().map(|&b| b as f64));
    } else {
        while pixels.len() < count {
            skip_pnm_whitespace(&bytes, &mut pos)?;
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let token = std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| IoError::Format("non-ascii pixel".into()))?;
            pixels.push(token.parse::<f64>().map_err(|e| {
                IoError::Format(format!("bad pixel '{token}': {e}"))
            })?);
        }
    }
    // pixels run row-major, channel-interleaved; rows are the first mode
    let t = if channels == 1 {
        DenseTensor::from_fn(&[height, width], |idx| pixels[idx[0] * width + idx[1]])
    } else {
        DenseTensor::from_fn(&[height, width, 3], |idx| {
            pixels[(idx[0] * width + idx[1]) * 3 + idx[2]]
        })
    };
    Ok(t)
}

fn skip_pnm_whitespace(bytes: &[u8], pos: &mut usize) -> Result<(), IoError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return Err(IoError::Format("truncated pnm header".into()));
    }
    Ok(())
}

/// Load a tensor by extension: `.dt`/`.tnc` binary, `.csv`, `.pgm`/`.ppm`.
pub fn load_tensor(path: &Path) -> Result<DenseTensor, IoError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mut f = std::fs::File::open(path)?;
    match ext.as_str() {
        "dt" | "tnc" => read_dt(&mut f),
        "csv" => read_csv_tensor(&mut f),
        "pgm" | "ppm" | "pnm" => read_pnm(&mut f),
        other => Err(IoError::Format(format!(
            "unsupported input extension '{other}'"
        ))),
    }
}

/// JSON sidecar written next to each ".tnc" core file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TncSidecar {
    pub format: Scheme,
    pub core_index: usize,
    pub ranks: Vec<usize>,
    pub mode_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<DimTree>,
}

impl TncSidecar {
    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        let json = serde_json::to_value(self)?;
        std::fs::write(path, serde_json::to_string_pretty(&json)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dt_roundtrip_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = DenseTensor::from_fn(&[3, 4, 2], |_| rng.random_range(-1.0..1.0));
        let bytes = dt_bytes(&t);
        assert_eq!(&bytes[..4], b"DTEN");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], 3);
        assert_eq!(bytes.len(), 6 + 3 * 8 + 24 * 8);
        let back = dt_from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn dt_rejects_bad_magic() {
        let t = DenseTensor::zeros(&[2, 2]);
        let mut bytes = dt_bytes(&t);
        bytes[0] = b'X';
        assert!(dt_from_bytes(&bytes).is_err());
    }

    #[test]
    fn csv_rows_first_mode() {
        let text = "1, 2, 3\n4, 5, 6\n";
        let t = read_csv_tensor(&mut text.as_bytes()).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.get(&[1, 0]), 4.0);
        assert_eq!(t.get(&[0, 2]), 3.0);
    }

    #[test]
    fn csv_ragged_rejected() {
        let text = "1,2\n3\n";
        assert!(read_csv_tensor(&mut text.as_bytes()).is_err());
    }

    #[test]
    fn pgm_binary_roundtrip() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 10, 20, 30]);
        let t = read_pnm(&mut bytes.as_slice()).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.get(&[0, 1]), 128.0);
        assert_eq!(t.get(&[1, 2]), 30.0);
    }

    #[test]
    fn ppm_channels_stack_third_mode() {
        let mut bytes = b"P6 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[
            10, 20, 30, 40, 50, 60, //
            70, 80, 90, 100, 110, 120,
        ]);
        let t = read_pnm(&mut bytes.as_slice()).unwrap();
        assert_eq!(t.shape(), &[2, 2, 3]);
        assert_eq!(t.get(&[0, 0, 0]), 10.0);
        assert_eq!(t.get(&[0, 1, 2]), 60.0);
        assert_eq!(t.get(&[1, 0, 1]), 80.0);
    }

    #[test]
    fn ascii_pgm_parses() {
        let text = "P2\n3 1\n255\n1 2 3\n";
        let t = read_pnm(&mut text.as_bytes()).unwrap();
        assert_eq!(t.shape(), &[1, 3]);
        assert_eq!(t.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn sidecar_roundtrip() {
        let dir = std::env::temp_dir().join("tnc_sidecar_test");
        std::fs::create_dir_all(&dir).unwrap();
        let sc = TncSidecar {
            format: Scheme::Tt,
            core_index: 1,
            ranks: vec![1, 4, 4, 1],
            mode_sizes: vec![5, 5, 5],
            tree: None,
        };
        let path = dir.join("core_001.tnc.json");
        sc.save(&path).unwrap();
        let back = TncSidecar::load(&path).unwrap();
        assert_eq!(back.ranks, sc.ranks);
        assert_eq!(back.format, Scheme::Tt);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
