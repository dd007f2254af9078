//! Binary field dumps.
//!
//! Layout, all little endian: the magic `IWSK`, `u32` version (1), `u32` N_h,
//! `u32` N_y, `f64` b, `f64` L_y, then `N_h·N_y` coefficients as `(re, im)`
//! pairs of `f64`, Hermite index outer and Fourier index inner in storage
//! order.

use std::io::{Read, Write};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"IWSK";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, u: &SpectralField) -> Result<()> {
    let g = u.grid();
    let mut buf = Vec::with_capacity(32 + 16 * u.coeffs().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.n_modes() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n_y() as u32).to_le_bytes());
    buf.extend_from_slice(&g.b().to_le_bytes());
    buf.extend_from_slice(&g.l_y().to_le_bytes());
    for c in u.coeffs().iter() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Header of a snapshot: `(N_h, N_y, b, L_y)`.
pub type SnapshotHeader = (usize, usize, f64, f64);

/// Reads a snapshot onto `grid`, which must match the header.
pub fn read_snapshot<R: Read>(r: R, grid: &Arc<Grid>) -> Result<SpectralField> {
    let (header, coeffs) = read_raw(r)?;
    let (n_h, n_y, b, l_y) = header;
    if n_h != grid.n_modes() || n_y != grid.n_y() || b != grid.b() || l_y != grid.l_y() {
        return Err(Error::GridMismatch);
    }
    SpectralField::from_coeffs(grid, coeffs)
}

/// Reads the header and the coefficient array without a grid.
pub fn read_raw<R: Read>(mut r: R) -> Result<(SnapshotHeader, Array2<Complex64>)> {
    let mut head = [0u8; 32];
    r.read_exact(&mut head)
        .map_err(|_| Error::Snapshot("truncated header".into()))?;
    if &head[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes"));
    let float = |i: usize| f64::from_le_bytes(head[i..i + 8].try_into().expect("8 bytes"));
    if word(4) != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {}", word(4))));
    }
    let (n_h, n_y) = (word(8) as usize, word(12) as usize);
    let (b, l_y) = (float(16), float(24));
    let len = n_h
        .checked_mul(n_y)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Snapshot("dimensions overflow".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != len {
        return Err(Error::Snapshot(format!(
            "expected {len} data bytes, found {}",
            body.len()
        )));
    }
    let values: Vec<Complex64> = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    let coeffs =
        Array2::from_shape_vec((n_h, n_y), values).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok(((n_h, n_y, b, l_y), coeffs))
}
