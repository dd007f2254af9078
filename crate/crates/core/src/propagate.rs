//! Exact linear flows: `e^{-iθH}`, `e^{i(t/2)∂_y²}` and `e^{-itH_ε/ε²}`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::hermite::{coupling_v, shifted_overlap};

/// Leaked mass above which a shift counts as unresolved.
pub const LEAKAGE_LIMIT: f64 = 1e-8;

/// `e^{-i·arg}` with the argument reduced to `[0, 2π)` first.
pub fn phase(arg: f64) -> Complex64 {
    Complex64::from_polar(1.0, -arg.rem_euclid(TAU))
}

/// `e^{-iθH} u`: Hermite row `n` picks up `e^{-iθEₙ}`.
pub fn flow_h(u: &SpectralField, theta: f64) -> SpectralField {
    let basis = u.grid().basis();
    let mut out = u.clone();
    for (n, mut row) in out.coeffs_mut().rows_mut().into_iter().enumerate() {
        let p = phase(theta * basis.eigenvalue(n));
        row.mapv_inplace(|c| c * p);
    }
    out
}

/// `e^{i(t/2)∂_y²} u`: Fourier column `k` picks up `e^{-itξₖ²/2}`.
pub fn flow_y(u: &SpectralField, t: f64) -> SpectralField {
    let xi = u.grid().xi().to_vec();
    let mut out = u.clone();
    for (k, mut col) in out.coeffs_mut().columns_mut().into_iter().enumerate() {
        let p = phase(0.5 * t * xi[k] * xi[k]);
        col.mapv_inplace(|c| c * p);
    }
    out
}

/// The flow `e^{-itH_ε/ε²}` diagonalized column by column.
///
/// On Fourier column `k`, `H_ε` acts on Hermite coefficients as the
/// tridiagonal matrix `diag(Eₙ) + ε²ξₖ²/2 + εbξₖ·V` (with `V` the matrix of
/// `x`). Up to the constant, this is the oscillator recentred at
/// `-aₖ`, `aₖ = εξₖ/b`, so its eigenvectors are the translates `χₙ(x + aₖ)`
/// expressed in the truncated basis.
#[derive(Debug, Clone)]
pub struct DisplacementTable {
    grid: Arc<Grid>,
    eps: f64,
    shifts: Vec<f64>,
    /// Per column, `N_h × N_h` eigenvectors (column-major) and eigenvalues.
    vectors: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    leakage: f64,
}

impl DisplacementTable {
    pub fn new(grid: &Arc<Grid>, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid(format!("epsilon must be positive, got {eps}")));
        }
        let b = grid.b();
        let n_h = grid.n_modes();
        let mut shifts = Vec::with_capacity(grid.n_y());
        let mut vectors = Vec::with_capacity(grid.n_y());
        let mut values = Vec::with_capacity(grid.n_y());
        for k in 0..grid.n_y() {
            let xi = grid.xi()[k];
            let xi_c = grid.dy_symbol(k);
            shifts.push(eps * xi_c / b);
            let offset = 0.5 * eps * eps * xi * xi;
            if xi_c == 0.0 {
                let mut q = vec![0.0; n_h * n_h];
                (0..n_h).for_each(|n| q[n * n_h + n] = 1.0);
                vectors.push(q);
                values.push(
                    (0..n_h)
                        .map(|n| grid.basis().eigenvalue(n) + offset)
                        .collect(),
                );
                continue;
            }
            let a = DMatrix::from_fn(n_h, n_h, |m, n| {
                if m == n {
                    grid.basis().eigenvalue(n) + offset
                } else {
                    eps * b * xi_c * coupling_v(m, n, b)
                }
            });
            let eig = SymmetricEigen::new(a);
            vectors.push(eig.eigenvectors.as_slice().to_vec());
            values.push(eig.eigenvalues.as_slice().to_vec());
        }
        let a_max = shifts.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let leakage = top_mode_leakage(b, n_h, a_max);
        Ok(DisplacementTable {
            grid: grid.clone(),
            eps,
            shifts,
            vectors,
            values,
            leakage,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `aₖ = εξₖ/b` per column (zero on the Nyquist column).
    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// `D[m][n] = ⟨χₘ, χₙ(· + aₖ)⟩` for column `k`.
    pub fn overlap(&self, k: usize) -> Result<ndarray::Array2<f64>> {
        if k >= self.shifts.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.shifts.len(),
            });
        }
        Ok(shifted_overlap(
            self.grid.b(),
            self.grid.n_modes(),
            self.shifts[k],
        ))
    }

    /// Mass of the top two modes lost from the basis at the largest shift.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// True when the largest shift leaks more than [`LEAKAGE_LIMIT`].
    pub fn unresolved(&self) -> bool {
        self.leakage > LEAKAGE_LIMIT
    }

    /// `max |QᵀQ − I|` over all columns.
    pub fn orthogonality_defect(&self) -> f64 {
        let n_h = self.grid.n_modes();
        let mut worst = 0.0f64;
        for q in &self.vectors {
            for i in 0..n_h {
                for j in 0..n_h {
                    let dot: f64 = (0..n_h).map(|r| q[i * n_h + r] * q[j * n_h + r]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - want).abs());
                }
            }
        }
        worst
    }

    /// `e^{-itH_ε/ε²} u`.
    pub fn flow(&self, u: &SpectralField, t: f64) -> Result<SpectralField> {
        if !self.grid.compatible(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let n_h = self.grid.n_modes();
        let scale = t / (self.eps * self.eps);
        let mut out = u.clone();
        let coeffs = out.coeffs_mut();
        let mut proj = vec![Complex64::new(0.0, 0.0); n_h];
        let mut col = vec![Complex64::new(0.0, 0.0); n_h];
        for k in 0..self.grid.n_y() {
            let q = &self.vectors[k];
            let mu = &self.values[k];
            for n in 0..n_h {
                col[n] = coeffs[[n, k]];
            }
            // proj = diag(phase) · Qᵀ c
            for (j, p) in proj.iter_mut().enumerate() {
                let qj = &q[j * n_h..(j + 1) * n_h];
                let dot: Complex64 = qj.iter().zip(&col).map(|(a, c)| c * *a).sum();
                *p = dot * phase(scale * mu[j]);
            }
            for n in 0..n_h {
                coeffs[[n, k]] = (0..n_h).map(|j| proj[j] * q[j * n_h + n]).sum();
            }
        }
        Ok(out)
    }
}

/// `build_displacement` under its descriptive name.
pub fn build_displacement(grid: &Arc<Grid>, eps: f64) -> Result<DisplacementTable> {
    DisplacementTable::new(grid, eps)
}

/// `e^{-itH_ε/ε²} u` through a prebuilt table; the table's `ε` must match.
pub fn flow_full_linear(
    u: &SpectralField,
    t: f64,
    eps: f64,
    table: &DisplacementTable,
) -> Result<SpectralField> {
    if eps != table.eps() {
        return Err(invalid(format!(
            "table built for epsilon {}, asked for {eps}",
            table.eps()
        )));
    }
    table.flow(u, t)
}

fn top_mode_leakage(b: f64, n_h: usize, a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let d = shifted_overlap(b, n_h, a);
    (n_h.saturating_sub(2)..n_h)
        .map(|n| 1.0 - d.column(n).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> Arc<Grid> {
        Grid::standard(1.0, 12, 16.0, 16).unwrap()
    }

    fn rand_u(g: &Arc<Grid>, seed: u64) -> SpectralField {
        random_field(g, &mut ChaCha8Rng::seed_from_u64(seed), None)
    }

    #[test]
    fn flow_h_period_and_ground_state() {
        let g = grid();
        for n in 0..12 {
            let u = SpectralField::mode(&g, n, 3).unwrap();
            let v = flow_h(&u, 2.0 * PI);
            assert!(v.distance(&(&u * -1.0)).unwrap() < 1e-13, "n={n}");
        }
        let u = SpectralField::mode(&g, 0, 1).unwrap();
        let v = flow_h(&u, 0.7);
        assert!(
            v.distance(&u.scaled(Complex64::from_polar(1.0, -0.35)))
                .unwrap()
                < 1e-15
        );
        let w = rand_u(&g, 1);
        assert!((flow_h(&w, 123.4).l2_norm() - w.l2_norm()).abs() < 1e-14);
    }

    #[test]
    fn flow_y_properties() {
        let g = grid();
        let u = rand_u(&g, 2);
        let v = flow_y(&u, 0.9);
        for n in 0..12 {
            assert_eq!(v.coeffs()[[n, 0]], u.coeffs()[[n, 0]]);
        }
        assert!((v.sigma_norm(2) - u.sigma_norm(2)).abs() < 1e-12);
        assert!(flow_y(&v, -0.9).distance(&u).unwrap() < 1e-13);
        let a = flow_h(&flow_y(&u, 0.4), 1.1);
        let b = flow_y(&flow_h(&u, 1.1), 0.4);
        assert!(a.distance(&b).unwrap() < 1e-15);
    }

    #[test]
    fn overlap_and_orthogonality() {
        let d = shifted_overlap(1.0, 32, 1.0);
        assert!((d[[0, 0]] - (-0.25f64).exp()).abs() < 1e-14);
        // Orthogonality on the modes a shift of 1 keeps inside the basis.
        let keep = 16;
        let mut worst = 0.0f64;
        for i in 0..keep {
            for j in 0..keep {
                let dot: f64 = (0..32).map(|m| d[[m, i]] * d[[m, j]]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst < 1e-10, "{worst}");
        let back = shifted_overlap(1.0, 32, -1.0);
        let prod = d.dot(&back);
        for i in 0..keep {
            for j in 0..keep {
                assert!((prod[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        let id = shifted_overlap(1.0, 8, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!((id[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn table_basics() {
        let g = grid();
        let t = DisplacementTable::new(&g, 0.1).unwrap();
        assert_eq!(t.shifts()[0], 0.0);
        assert_eq!(t.shifts()[g.nyquist()], 0.0);
        assert!((t.shifts()[1] - 0.1 * PI / 16.0).abs() < 1e-16);
        assert!(
            t.orthogonality_defect() < 1e-12,
            "{}",
            t.orthogonality_defect()
        );
        // The top mode couples to the first dropped one at order a·√N_h.
        assert!(t.unresolved());
        assert!(!DisplacementTable::new(&g, 1e-5).unwrap().unresolved());
        assert!(DisplacementTable::new(&g, 0.0).is_err());
        let d = t.overlap(1).unwrap();
        assert!((d[[0, 0]] - (-t.shifts()[1].powi(2) / 4.0).exp()).abs() < 1e-14);

        let wide = Grid::standard(1.0, 8, 1.0, 64).unwrap();
        assert!(DisplacementTable::new(&wide, 0.5).unwrap().unresolved());
    }

    #[test]
    fn zero_column_matches_flow_h() {
        let g = grid();
        let t = DisplacementTable::new(&g, 0.1).unwrap();
        let u = SpectralField::mode(&g, 5, 0).unwrap();
        let a = t.flow(&u, 0.37).unwrap();
        let b = flow_h(&u, 0.37 / 0.01);
        assert!(a.distance(&b).unwrap() < 1e-13);
    }

    #[test]
    fn unitary_and_group() {
        let g = grid();
        let t = DisplacementTable::new(&g, 0.1).unwrap();
        let u = rand_u(&g, 4);
        let v = t.flow(&u, 0.3).unwrap();
        assert!((v.l2_norm() - u.l2_norm()).abs() < 1e-12);
        let w = t.flow(&t.flow(&u, 0.1).unwrap(), 0.2).unwrap();
        assert!(w.distance(&v).unwrap() < 1e-9);
        assert!(t.flow(&v, -0.3).unwrap().distance(&u).unwrap() < 1e-12);
        let other = Grid::standard(1.0, 12, 8.0, 16).unwrap();
        assert!(t.flow(&SpectralField::zeros(&other), 1.0).is_err());
        assert!(flow_full_linear(&u, 1.0, 0.2, &t).is_err());
    }

    #[test]
    fn generator_consistency() {
        // R(h) = (U(h)u − u)/h + (i/ε²)H_ε u is first order; the Richardson
        // combination 2R(h/2) − R(h) is second order.
        let g = Grid::standard(1.0, 8, 16.0, 16).unwrap();
        let eps = 0.5;
        let t = DisplacementTable::new(&g, eps).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(5), Some(3));
        let hu = u.apply_h_eps(eps);
        let resid = |h: f64| {
            let mut r = &t.flow(&u, h).unwrap() - &u;
            r = &r * (1.0 / h);
            r.axpy(Complex64::new(0.0, 1.0 / (eps * eps)), &hu).unwrap();
            r
        };
        let (r1, r2, r4) = (resid(1e-3), resid(5e-4), resid(2.5e-4));
        let ratio = r1.l2_norm() / r2.l2_norm();
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
        let rich1 = &(&r2 * 2.0) - &r1;
        let rich2 = &(&r4 * 2.0) - &r2;
        let ratio = rich1.l2_norm() / rich2.l2_norm();
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }
}
