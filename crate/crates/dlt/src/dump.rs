// SPDX-License-Identifier: Apache-2.0

//! Binary dump of a [`PathSample`].
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `DLTPATHS` |
//! | 8 | 4 | format version (`1`) |
//! | 12 | 4 | `d` |
//! | 16 | 8 | `n` (grid steps) |
//! | 24 | 8 | `n_paths` |
//! | 32 | 8 | seed |
//! | 40 | 8 | horizon `T` (f64) |
//! | 48 | 1 | model kind (`0` bi-fBm, `1` sub-fBm) |
//! | 49 | 1 | fallback flag |
//! | 50 | 6 | zero padding |
//! | 56 | 8 | `H0` (f64) |
//! | 64 | 8 | `K0` (f64) |
//! | 72 | ... | `n_paths * d * n` f64 values, row-major `(path, coord, step)` |

use std::io::{self, Read, Write};

use dlt_core::covariance::ModelKind;
use dlt_core::{CovarianceModel, PathSample, TimeGrid};

pub const MAGIC: [u8; 8] = *b"DLTPATHS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 72;

pub fn write_sample<W: Write>(sample: &PathSample, mut w: W) -> io::Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(sample.d as u32).to_le_bytes());
    header.extend_from_slice(&(sample.grid.n() as u64).to_le_bytes());
    header.extend_from_slice(&(sample.n_paths as u64).to_le_bytes());
    header.extend_from_slice(&sample.seed.to_le_bytes());
    header.extend_from_slice(&sample.grid.horizon().to_le_bytes());
    header.push(match sample.model.kind() {
        ModelKind::BiFbm => 0,
        ModelKind::SubFbm => 1,
    });
    header.push(sample.fallback as u8);
    header.extend_from_slice(&[0; 6]);
    header.extend_from_slice(&sample.model.h0().to_le_bytes());
    header.extend_from_slice(&sample.model.k0().to_le_bytes());
    w.write_all(&header)?;
    let mut body = Vec::with_capacity(sample.values.len() * 8);
    for v in &sample.values {
        body.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&body)?;
    w.flush()
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_sample<R: Read>(mut r: R) -> io::Result<PathSample> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)?;
    if h[..8] != MAGIC {
        return Err(invalid("bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(h[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(h[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(invalid(format!("unsupported version {version}")));
    }
    let d = u32_at(12) as usize;
    let n = u64_at(16) as usize;
    let n_paths = u64_at(24) as usize;
    let seed = u64_at(32);
    let grid = TimeGrid::new(f64_at(40), n).map_err(|e| invalid(e.to_string()))?;
    let (h0, k0) = (f64_at(56), f64_at(64));
    let model = match h[48] {
        0 => CovarianceModel::bifbm(h0, k0),
        1 => CovarianceModel::subfbm(h0),
        k => return Err(invalid(format!("unknown model kind {k}"))),
    }
    .map_err(|e| invalid(e.to_string()))?;
    let fallback = h[49] != 0;
    let count = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(n_paths))
        .ok_or_else(|| invalid("sample size overflows"))?;
    let mut body = vec![0u8; count * 8];
    r.read_exact(&mut body)?;
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(PathSample { grid, d, n_paths, values, seed, model, fallback })
}
