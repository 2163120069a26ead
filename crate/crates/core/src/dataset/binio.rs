//! Little-endian payload files.
//!
//! Point-cloud file: `u32 count`, then `count × 3` `f32`.
//! Feature file: `u32 count`, `u32 dim`, then `count × dim` `f32` rows.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

fn read_f32s(bytes: &[u8], at: usize, n: usize) -> Vec<f32> {
    bytes[at..at + 4 * n]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect()
}

fn bad(path: &Path, msg: impl Into<String>) -> Error {
    Error::Validation(vec![format!("{}: {}", path.display(), msg.into())])
}

pub fn encode_cloud(points: &[[f32; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + points.len() * 12);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8], path: &Path) -> Result<Vec<[f32; 3]>> {
    let count = read_u32(bytes, 0).ok_or_else(|| bad(path, "truncated header"))? as usize;
    if bytes.len() != 4 + count * 12 {
        return Err(bad(
            path,
            format!("expected {} bytes for {count} points, found {}", 4 + count * 12, bytes.len()),
        ));
    }
    Ok(read_f32s(bytes, 4, count * 3)
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect())
}

pub fn write_cloud(path: &Path, points: &[[f32; 3]]) -> Result<()> {
    fs::write(path, encode_cloud(points)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: &Path) -> Result<Vec<[f32; 3]>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cloud(&bytes, path)
}

pub fn encode_features(rows: &[Vec<f32>], dim: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + rows.len() * dim * 4);
    out.extend_from_slice(&(rows.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::shape("feature row", &[i, r.len()], &[dim]));
        }
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns `(dim, rows)`.
pub fn decode_features(bytes: &[u8], path: &Path) -> Result<(usize, Vec<Vec<f32>>)> {
    let count = read_u32(bytes, 0).ok_or_else(|| bad(path, "truncated header"))? as usize;
    let dim = read_u32(bytes, 4).ok_or_else(|| bad(path, "truncated header"))? as usize;
    if dim == 0 {
        return Err(bad(path, "feature dimension is zero"));
    }
    if bytes.len() != 8 + count * dim * 4 {
        return Err(bad(
            path,
            format!(
                "expected {} bytes for {count}×{dim} features, found {}",
                8 + count * dim * 4,
                bytes.len()
            ),
        ));
    }
    let flat = read_f32s(bytes, 8, count * dim);
    Ok((dim, flat.chunks_exact(dim).map(<[f32]>::to_vec).collect()))
}

pub fn write_features(path: &Path, rows: &[Vec<f32>], dim: usize) -> Result<()> {
    fs::write(path, encode_features(rows, dim)?).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<(usize, Vec<Vec<f32>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}
