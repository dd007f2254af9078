//! Hermite × Fourier discretization of the `(x, y)` plane.
//!
//! `y` lives on the periodic box `[-L_y, L_y)` with `N_y` Fourier modes
//! `ξₖ = (π/L_y)·k`, stored in FFT order `0, 1, …, N_y/2−1, −N_y/2, …, −1`.
//! A field is `ψ(x, y) = Σ c_{n,k} χₙ(x) e^{iξₖy} / √(2L_y)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::hermite::{HermiteBasis, NodeTable};

#[derive(Debug)]
pub struct Grid {
    basis: HermiteBasis,
    l_y: f64,
    n_y: usize,
    xi: Vec<f64>,
    physical: Mutex<HashMap<usize, Arc<PhysicalGrid>>>,
}

impl Grid {
    /// Checks `L_y > 0` and that `N_y` is even and at least 4.
    pub fn new(basis: HermiteBasis, l_y: f64, n_y: usize) -> Result<Arc<Grid>> {
        if !(l_y > 0.0) || !l_y.is_finite() {
            return Err(invalid(format!("L_y must be positive, got {l_y}")));
        }
        if n_y < 4 || !n_y.is_multiple_of(2) {
            return Err(invalid(format!(
                "N_y must be even and at least 4, got {n_y}"
            )));
        }
        let xi = (0..n_y)
            .map(|idx| PI / l_y * mode_index(idx, n_y) as f64)
            .collect();
        Ok(Arc::new(Grid {
            basis,
            l_y,
            n_y,
            xi,
            physical: Mutex::new(HashMap::new()),
        }))
    }

    /// Shorthand for a grid on the default `2N_h + 8`-node basis.
    pub fn standard(b: f64, n_modes: usize, l_y: f64, n_y: usize) -> Result<Arc<Grid>> {
        Grid::new(HermiteBasis::new(b, n_modes)?, l_y, n_y)
    }

    pub fn basis(&self) -> &HermiteBasis {
        &self.basis
    }

    pub fn b(&self) -> f64 {
        self.basis.b()
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn l_y(&self) -> f64 {
        self.l_y
    }

    /// Fourier frequencies in storage order; the Nyquist entry is `-π N_y / (2L_y)`.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Storage index of the Nyquist mode.
    pub fn nyquist(&self) -> usize {
        self.n_y / 2
    }

    /// Multiplier of `∂_y` on column `idx`. The Nyquist mode is cosine-only and
    /// has no first derivative.
    pub fn dy_symbol(&self, idx: usize) -> f64 {
        if idx == self.nyquist() {
            0.0
        } else {
            self.xi[idx]
        }
    }

    /// Same discretization parameters (fields on such grids can be mixed).
    pub fn compatible(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other)
            || (self.b() == other.b()
                && self.n_modes() == other.n_modes()
                && self.basis.n_quad() == other.basis.n_quad()
                && self.n_y == other.n_y
                && self.l_y == other.l_y)
    }

    /// Collocation grid for products of `2s` fields: `s(N_h−1)+1` nodes in `x`
    /// on the `e^{-s·b·x²}` rule and `s·N_y` points in `y`. For `s = 1` this is
    /// the square grid on which the transforms are unitary.
    pub fn physical(&self, s: usize) -> Arc<PhysicalGrid> {
        let s = s.max(1);
        let mut cache = self.physical.lock().unwrap_or_else(|e| e.into_inner());
        cache
            .entry(s)
            .or_insert_with(|| Arc::new(PhysicalGrid::new(self, s)))
            .clone()
    }
}

/// Signed Fourier index of storage slot `idx`.
pub fn mode_index(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Tensor grid of `x` quadrature nodes and equispaced `y` points, with the
/// transforms to and from coefficient space.
pub struct PhysicalGrid {
    x: NodeTable,
    ys: Vec<f64>,
    n_y: usize,
    l_y: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PhysicalGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhysicalGrid")
            .field("n_x", &self.x.len())
            .field("n_y_points", &self.ys.len())
            .finish()
    }
}

impl PhysicalGrid {
    fn new(grid: &Grid, s: usize) -> Self {
        let x = NodeTable::for_products(grid.b(), grid.n_modes(), s);
        let m = s * grid.n_y;
        let h = 2.0 * grid.l_y / m as f64;
        // FFT-ordered points: the same set as -L_y + l·h, wrapped.
        let ys = (0..m).map(|l| mode_index(l, m) as f64 * h).collect();
        let mut planner = FftPlanner::new();
        PhysicalGrid {
            x,
            ys,
            n_y: grid.n_y,
            l_y: grid.l_y,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn xs(&self) -> &[f64] {
        self.x.nodes()
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn x_rule(&self) -> &NodeTable {
        &self.x
    }

    /// Coefficients (`N_h × N_y`) to Hermite rows on the `y` points (`N_h × M`).
    pub fn rows_to_y(&self, coeffs: &Array2<Complex64>) -> Array2<Complex64> {
        let m = self.ys.len();
        let n_y = self.n_y;
        let scale = (2.0 * self.l_y).sqrt().recip();
        let mut out = Array2::zeros((coeffs.nrows(), m));
        for (src, mut dst) in coeffs.rows().into_iter().zip(out.rows_mut()) {
            let buf = dst.as_slice_mut().expect("standard layout");
            for (idx, &c) in src.iter().enumerate() {
                let slot = if idx < n_y / 2 { idx } else { m - (n_y - idx) };
                buf[slot] = c * scale;
            }
            self.inverse.process(buf);
        }
        out
    }

    /// Inverse of [`rows_to_y`](Self::rows_to_y), truncating to `N_y` modes.
    pub fn rows_from_y(&self, rows: Array2<Complex64>) -> Array2<Complex64> {
        let m = self.ys.len();
        let n_y = self.n_y;
        let scale = (2.0 * self.l_y).sqrt() / m as f64;
        let mut rows = rows;
        let mut out = Array2::zeros((rows.nrows(), n_y));
        for (mut src, mut dst) in rows.rows_mut().into_iter().zip(out.rows_mut()) {
            let buf = src.as_slice_mut().expect("standard layout");
            self.forward.process(buf);
            for (idx, d) in dst.iter_mut().enumerate() {
                let slot = if idx < n_y / 2 { idx } else { m - (n_y - idx) };
                *d = buf[slot] * scale;
            }
        }
        out
    }

    /// Values on the tensor grid, `N_x × M`.
    pub fn to_physical(&self, coeffs: &Array2<Complex64>) -> Array2<Complex64> {
        let rows = self.rows_to_y(coeffs);
        synth_x(self.x.values(), &rows)
    }

    /// Projects tensor-grid values back to `N_h × N_y` coefficients.
    pub fn from_physical(&self, values: &Array2<Complex64>) -> Array2<Complex64> {
        let rows = project_x(self.x.values(), self.x.weights(), values);
        self.rows_from_y(rows)
    }
}

/// `out[i, l] = Σₙ table[i, n] · rows[n, l]`.
pub(crate) fn synth_x(table: &Array2<f64>, rows: &Array2<Complex64>) -> Array2<Complex64> {
    let (n_x, n_h) = table.dim();
    let m = rows.ncols();
    let mut out = Array2::<Complex64>::zeros((n_x, m));
    let src = rows.as_slice().expect("standard layout");
    for i in 0..n_x {
        let dst = out.row_mut(i).into_slice().expect("standard layout");
        for n in 0..n_h {
            let t = table[[i, n]];
            let row = &src[n * m..(n + 1) * m];
            for (d, r) in dst.iter_mut().zip(row) {
                *d += r * t;
            }
        }
    }
    out
}

/// `out[n, l] = Σᵢ wᵢ · table[i, n] · values[i, l]`.
pub(crate) fn project_x(
    table: &Array2<f64>,
    weights: &[f64],
    values: &Array2<Complex64>,
) -> Array2<Complex64> {
    let (n_x, n_h) = table.dim();
    let m = values.ncols();
    let mut out = Array2::<Complex64>::zeros((n_h, m));
    let src = values.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    for i in 0..n_x {
        let row = &src[i * m..(i + 1) * m];
        for n in 0..n_h {
            let t = weights[i] * table[[i, n]];
            for (d, r) in dst[n * m..(n + 1) * m].iter_mut().zip(row) {
                *d += r * t;
            }
        }
    }
    out
}
