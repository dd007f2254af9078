//! Fields as Hermite × Fourier coefficient arrays, with the linear operators
//! and norms of the model.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::coupling::Coupling;
use crate::error::{invalid, Error, Result};
use crate::grid::{mode_index, Grid, PhysicalGrid};
use crate::hermite::coupling_v;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `c_{n,k}` of `ψ = Σ c_{n,k} χₙ(x) e^{iξₖy} / √(2L_y)`.
///
/// Rows are Hermite modes, columns Fourier modes in FFT order. With this
/// normalization the `L²` norm is the Euclidean norm of the coefficients.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: Array2::zeros((grid.n_modes(), grid.n_y())),
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Array2<Complex64>) -> Result<Self> {
        if coeffs.dim() != (grid.n_modes(), grid.n_y()) {
            return Err(Error::SizeMismatch {
                expected: grid.n_modes() * grid.n_y(),
                got: coeffs.len(),
            });
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs: coeffs.as_standard_layout().into_owned(),
        })
    }

    /// `χₙ(x) e^{iξₖy}/√(2L_y)` for storage column `k`.
    pub fn mode(grid: &Arc<Grid>, n: usize, k: usize) -> Result<Self> {
        check_mode(grid, n)?;
        if k >= grid.n_y() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: grid.n_y(),
            });
        }
        let mut u = SpectralField::zeros(grid);
        u.coeffs[[n, k]] = Complex64::new(1.0, 0.0);
        Ok(u)
    }

    /// `(Σₙ aₙ χₙ(x)) · g(y)`, with `g` projected onto the Fourier modes.
    pub fn separable(
        grid: &Arc<Grid>,
        hermite: &[Complex64],
        profile: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        if hermite.len() > grid.n_modes() {
            return Err(Error::SizeMismatch {
                expected: grid.n_modes(),
                got: hermite.len(),
            });
        }
        let g = project_profile(grid, profile);
        let mut u = SpectralField::zeros(grid);
        for (n, &a) in hermite.iter().enumerate() {
            u.coeffs
                .row_mut(n)
                .iter_mut()
                .zip(&g)
                .for_each(|(c, g)| *c = a * g);
        }
        Ok(u)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Array2<Complex64> {
        self.coeffs
    }

    fn with_coeffs(&self, coeffs: Array2<Complex64>) -> Self {
        SpectralField {
            grid: self.grid.clone(),
            coeffs,
        }
    }

    fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid.compatible(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    /// `⟨u, v⟩ = ∫ u v̄`, linear in the first argument.
    pub fn inner(&self, other: &SpectralField) -> Result<Complex64> {
        self.check_grid(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// `‖u − v‖_{L²}`.
    pub fn distance(&self, other: &SpectralField) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        self.with_coeffs(self.coeffs.mapv(|c| c * a))
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: Complex64, other: &SpectralField) -> Result<()> {
        self.check_grid(other)?;
        self.coeffs.zip_mut_with(&other.coeffs, |c, o| *c += a * o);
        Ok(())
    }

    /// `H u`: row `n` times `Eₙ`.
    pub fn apply_h(&self) -> Self {
        let basis = self.grid.basis();
        let mut out = self.coeffs.clone();
        for (n, mut row) in out.rows_mut().into_iter().enumerate() {
            let e = basis.eigenvalue(n);
            row.mapv_inplace(|c| c * e);
        }
        self.with_coeffs(out)
    }

    /// `∂_y u`: column `k` times `iξₖ` (zero on the Nyquist column).
    pub fn apply_dy(&self) -> Self {
        let mut out = self.coeffs.clone();
        for (k, mut col) in out.columns_mut().into_iter().enumerate() {
            let f = Complex64::new(0.0, self.grid.dy_symbol(k));
            col.mapv_inplace(|c| c * f);
        }
        self.with_coeffs(out)
    }

    /// `∂_y² u`: column `k` times `−ξₖ²`.
    pub fn apply_dyy(&self) -> Self {
        let mut out = self.coeffs.clone();
        for (k, mut col) in out.columns_mut().into_iter().enumerate() {
            let f = -self.grid.xi()[k].powi(2);
            col.mapv_inplace(|c| c * f);
        }
        self.with_coeffs(out)
    }

    /// `x u` through the tridiagonal matrix `v_{m,n}`. The coupling out of the
    /// top retained mode is dropped.
    pub fn apply_x(&self) -> Self {
        let b = self.grid.b();
        let n_h = self.grid.n_modes();
        let mut out = Array2::zeros(self.coeffs.dim());
        for n in 0..n_h {
            let mut row = out.row_mut(n);
            if n > 0 {
                let v = coupling_v(n - 1, n, b);
                row.scaled_add(Complex64::new(v, 0.0), &self.coeffs.row(n - 1));
            }
            if n + 1 < n_h {
                let v = coupling_v(n + 1, n, b);
                row.scaled_add(Complex64::new(v, 0.0), &self.coeffs.row(n + 1));
            }
        }
        self.with_coeffs(out)
    }

    /// `H_ε u = H u − iεb x∂_y u − (ε²/2) ∂_y² u`.
    pub fn apply_h_eps(&self, eps: f64) -> Self {
        let b = self.grid.b();
        let mut out = self.apply_h();
        let coupling = self.apply_dy().apply_x();
        out.coeffs
            .scaled_add(Complex64::new(0.0, -eps * b), &coupling.coeffs);
        out.coeffs.scaled_add(
            Complex64::new(-0.5 * eps * eps, 0.0),
            &self.apply_dyy().coeffs,
        );
        out
    }

    /// `‖u‖_{Σᵐ}² = ‖u‖² + ‖H^{m/2}u‖² + ‖∂_yᵐ u‖²`, with `Σ⁰ := L²`.
    pub fn sigma_norm(&self, m: u32) -> f64 {
        if m == 0 {
            return self.l2_norm();
        }
        let basis = self.grid.basis();
        let xi = self.grid.xi();
        let mut acc = 0.0;
        for ((n, k), c) in self.coeffs.indexed_iter() {
            let w = 1.0 + basis.eigenvalue(n).powi(m as i32) + xi[k].abs().powi(2 * m as i32);
            acc += w * c.norm_sqr();
        }
        acc.sqrt()
    }

    /// `‖u‖_{Σ_εᵐ}`, with `H_ε^{m/2}` by repeated application for even `m` and
    /// through `⟨H_εᵐ u, u⟩` for odd `m`.
    pub fn sigma_eps_norm(&self, m: u32, eps: f64) -> Result<f64> {
        if m == 0 {
            return Ok(self.l2_norm());
        }
        let mass = self.mass();
        let xi = self.grid.xi();
        let dy_part: f64 = self
            .coeffs
            .indexed_iter()
            .map(|((_, k), c)| xi[k].abs().powi(2 * m as i32) * c.norm_sqr())
            .sum();
        let h_part = if m.is_multiple_of(2) {
            let mut v = self.clone();
            for _ in 0..m / 2 {
                v = v.apply_h_eps(eps);
            }
            v.mass()
        } else {
            let mut v = self.clone();
            for _ in 0..m {
                v = v.apply_h_eps(eps);
            }
            let q = v.inner(self)?.re;
            if q < 0.0 {
                if q < -1e-12 * mass.max(1.0) {
                    return Err(Error::NegativeQuadraticForm(q));
                }
                0.0
            } else {
                q
            }
        };
        Ok((mass + h_part + dy_part).sqrt())
    }

    /// `Pₙ u`: keeps Hermite row `n` only.
    pub fn project_mode(&self, n: usize) -> Result<Self> {
        check_mode(&self.grid, n)?;
        let mut out = Array2::zeros(self.coeffs.dim());
        out.row_mut(n).assign(&self.coeffs.row(n));
        Ok(self.with_coeffs(out))
    }

    /// `Pₙ^⊥ u = u − Pₙ u`.
    pub fn project_mode_perp(&self, n: usize) -> Result<Self> {
        check_mode(&self.grid, n)?;
        let mut out = self.coeffs.clone();
        out.row_mut(n).fill(ZERO);
        Ok(self.with_coeffs(out))
    }

    /// `Σₖ |c_{n,k}|²`, the mass in Hermite mode `n`.
    pub fn mode_mass(&self, n: usize) -> f64 {
        self.coeffs.row(n).iter().map(|c| c.norm_sqr()).sum()
    }
}

fn check_mode(grid: &Grid, n: usize) -> Result<()> {
    if n < grid.n_modes() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: n,
            len: grid.n_modes(),
        })
    }
}

/// Fourier coefficients of a `y` profile, `ĝₖ = ∫ g e^{-iξₖy} dy / √(2L_y)`,
/// by the trapezoid rule on `4N_y` points.
pub fn project_profile(grid: &Grid, profile: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let n_y = grid.n_y();
    let m = 4 * n_y;
    let h = 2.0 * grid.l_y() / m as f64;
    let scale = h / (2.0 * grid.l_y()).sqrt();
    let samples: Vec<(f64, Complex64)> = (0..m)
        .map(|l| {
            let y = -grid.l_y() + l as f64 * h;
            (y, profile(y))
        })
        .collect();
    grid.xi()
        .iter()
        .map(|&xi| {
            samples
                .iter()
                .map(|&(y, g)| g * Complex64::from_polar(1.0, -xi * y))
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

impl Add for &SpectralField {
    type Output = SpectralField;

    /// Panics when the grids differ.
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert!(
            self.grid.compatible(&rhs.grid),
            "fields live on different grids"
        );
        self.with_coeffs(&self.coeffs + &rhs.coeffs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;

    /// Panics when the grids differ.
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert!(
            self.grid.compatible(&rhs.grid),
            "fields live on different grids"
        );
        self.with_coeffs(&self.coeffs - &rhs.coeffs)
    }
}

impl Mul<Complex64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: Complex64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;

    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(Complex64::new(rhs, 0.0))
    }
}

/// Evaluates `λ(x_scale·x, y) |u|^{2σ} u` on a dealiased grid and projects
/// back, reusing the tabulated coupling across calls.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    physical: Arc<PhysicalGrid>,
    sigma: u32,
    lambda: Array2<f64>,
}

impl Nonlinearity {
    pub fn new(grid: &Grid, sigma: u32, lambda: &Coupling, x_scale: f64) -> Result<Self> {
        if sigma < 1 {
            return Err(invalid("nonlinearity exponent sigma must be at least 1"));
        }
        let physical = grid.physical(sigma as usize + 1);
        let lambda = lambda.sample(physical.xs(), physical.ys(), x_scale)?;
        Ok(Nonlinearity {
            physical,
            sigma,
            lambda,
        })
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let mut vals = self.physical.to_physical(u.coeffs());
        let sigma = self.sigma as i32;
        vals.zip_mut_with(&self.lambda, |v, &lam| {
            *v *= lam * v.norm_sqr().powi(sigma);
        });
        u.with_coeffs(self.physical.from_physical(&vals))
    }
}

/// `λ(x_scale·x, y) |u|^{2σ} u`, projected back onto the grid's modes. Pass
/// `x_scale = ε` for the full model and `0` for `λ(0, y)`.
pub fn pointwise_nonlin(
    u: &SpectralField,
    sigma: u32,
    lambda: &Coupling,
    x_scale: f64,
) -> Result<SpectralField> {
    Ok(Nonlinearity::new(u.grid(), sigma, lambda, x_scale)?.apply(u))
}

/// Random smooth field with `|c_{n,k}| ∝ e^{-n/4} e^{-|k|/8}`, random phases,
/// unit `L²` norm. Modes above `max_mode` (if given) are left empty.
pub fn random_field<R: Rng + ?Sized>(
    grid: &Arc<Grid>,
    rng: &mut R,
    max_mode: Option<usize>,
) -> SpectralField {
    let n_y = grid.n_y();
    let top = max_mode.unwrap_or(usize::MAX);
    let mut u = SpectralField::zeros(grid);
    for ((n, k), c) in u.coeffs.indexed_iter_mut() {
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        if n <= top {
            let amp = (-(n as f64) / 4.0 - mode_index(k, n_y).unsigned_abs() as f64 / 8.0).exp();
            *c = Complex64::from_polar(amp, phase);
        }
    }
    let norm = u.l2_norm();
    u.coeffs.mapv_inplace(|c| c / norm);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::chi_norm_pow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n_h: usize, n_y: usize) -> Arc<Grid> {
        Grid::standard(1.0, n_h, 16.0, n_y).unwrap()
    }

    fn close(a: &SpectralField, b: &SpectralField, tol: f64) -> bool {
        a.distance(b).unwrap() <= tol
    }

    #[test]
    fn norms_and_inner_products() {
        let g = grid(4, 8);
        let u = SpectralField::mode(&g, 0, 0).unwrap();
        let v = SpectralField::mode(&g, 1, 0).unwrap();
        assert_eq!(u.l2_norm(), 1.0);
        assert_eq!(u.inner(&v).unwrap(), ZERO);
        let w = random_field(&g, &mut ChaCha8Rng::seed_from_u64(1), None);
        assert!(((&w * 3.0).l2_norm() - 3.0 * w.l2_norm()).abs() < 1e-14);
        assert!((w.inner(&w).unwrap().re - w.mass()).abs() < 1e-15);
        let other = Grid::standard(1.0, 4, 8.0, 8).unwrap();
        assert!(matches!(
            u.inner(&SpectralField::zeros(&other)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn parseval_on_physical_grid() {
        let g = grid(6, 16);
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(7), None);
        let pg = g.physical(1);
        let vals = pg.to_physical(u.coeffs());
        let h = 2.0 * g.l_y() / g.n_y() as f64;
        let q: f64 = vals
            .indexed_iter()
            .map(|((i, _), v)| pg.x_rule().weights()[i] * h * v.norm_sqr())
            .sum();
        assert!((q - u.mass()).abs() < 1e-13);
    }

    #[test]
    fn operator_examples() {
        let g = grid(6, 8);
        let u = SpectralField::mode(&g, 2, 0).unwrap();
        assert!(close(&u.apply_h(), &(&u * 2.5), 1e-15));

        let u = SpectralField::mode(&g, 0, 1).unwrap();
        let xi1 = g.xi()[1];
        assert!(close(
            &u.apply_dy(),
            &u.scaled(Complex64::new(0.0, xi1)),
            1e-15
        ));

        let u = SpectralField::mode(&g, 0, 0).unwrap();
        let want = &SpectralField::mode(&g, 1, 0).unwrap() * std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&u.apply_x(), &want, 1e-15));

        let nyq = SpectralField::mode(&g, 0, g.nyquist()).unwrap();
        assert_eq!(nyq.apply_dy().l2_norm(), 0.0);
    }

    #[test]
    fn h_eps_limits() {
        let g = grid(8, 8);
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(3), None);
        assert!(close(&u.apply_h_eps(1e-300), &u.apply_h(), 1e-14));
        let flat = SpectralField::mode(&g, 3, 0).unwrap();
        assert!(close(&flat.apply_h_eps(0.3), &flat.apply_h(), 1e-15));
    }

    #[test]
    fn h_eps_is_self_adjoint() {
        let g = grid(16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = random_field(&g, &mut rng, None);
            for eps in [0.1, 0.01] {
                let q = u.apply_h_eps(eps).inner(&u).unwrap();
                assert!(q.im.abs() <= 1e-10 * u.mass(), "{q}");
            }
        }
    }

    #[test]
    fn sigma_norms() {
        let g = grid(8, 8);
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(5), None);
        assert_eq!(u.sigma_norm(0), u.l2_norm());
        assert_eq!(u.sigma_eps_norm(0, 0.1).unwrap(), u.l2_norm());
        for m in 1..4 {
            assert!(u.sigma_norm(m) >= u.l2_norm());
        }
        for n in 0..7 {
            let flat = SpectralField::mode(&g, n, 0).unwrap();
            for m in 1..4 {
                let a = flat.sigma_norm(m);
                let b = flat.sigma_eps_norm(m, 0.2).unwrap();
                assert!((a - b).abs() <= 1e-12 * a, "n={n} m={m}");
            }
        }
    }

    #[test]
    fn sigma_norm_of_gaussian() {
        // ⟨H⟩ = E₀ = ½ and ∫|g'|² = ½ for g = π^{-1/4} e^{-y²/2}.
        let g = Grid::standard(1.0, 4, 16.0, 64).unwrap();
        let gauss = |y: f64| Complex64::new(PI.powf(-0.25) * (-0.5 * y * y).exp(), 0.0);
        let u = SpectralField::separable(&g, &[Complex64::new(1.0, 0.0)], gauss).unwrap();
        // Independent check of ∫|g'|² by a fine trapezoid.
        let h = 1e-3;
        let dy2: f64 = (0..32_000)
            .map(|i| {
                let y = -16.0 + i as f64 * h;
                h * (PI.powf(-0.25) * y * (-0.5 * y * y).exp()).powi(2)
            })
            .sum();
        assert!((dy2 - 0.5).abs() < 1e-12);
        assert!((u.sigma_norm(1) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn projections() {
        let g = grid(6, 8);
        let gauss = |y: f64| Complex64::new((-0.5 * y * y).exp(), 0.0);
        let u = SpectralField::separable(&g, &[Complex64::new(1.0, 0.0)], gauss).unwrap();
        assert!(close(&u.project_mode(0).unwrap(), &u, 0.0));
        assert_eq!(u.project_mode_perp(0).unwrap().l2_norm(), 0.0);
        let w = random_field(&g, &mut ChaCha8Rng::seed_from_u64(9), None);
        for n in 0..6 {
            let a = w.project_mode(n).unwrap().mass();
            let b = w.project_mode_perp(n).unwrap().mass();
            assert!((a + b - w.mass()).abs() < 1e-14);
        }
        assert!(w.project_mode(6).is_err());
    }

    #[test]
    fn nonlinearity_on_ground_state() {
        let g = grid(6, 8);
        let u = SpectralField::mode(&g, 0, 0).unwrap();
        let out = pointwise_nonlin(&u, 1, &Coupling::Constant(1.0), 0.0).unwrap();
        let want = chi_norm_pow(0, 4, 1.0).unwrap() / (2.0 * g.l_y());
        assert!((out.coeffs()[[0, 0]].re - want).abs() < 1e-14);
        assert!(out.coeffs()[[0, 0]].im.abs() < 1e-15);

        let zero = SpectralField::zeros(&g);
        assert_eq!(
            pointwise_nonlin(&zero, 1, &Coupling::Constant(1.0), 0.0)
                .unwrap()
                .l2_norm(),
            0.0
        );
        let lam = Coupling::parse("0*x*y").unwrap();
        assert_eq!(pointwise_nonlin(&u, 2, &lam, 1.0).unwrap().l2_norm(), 0.0);
        assert!(pointwise_nonlin(&u, 0, &Coupling::Constant(1.0), 0.0).is_err());
    }

    #[test]
    fn nonlinearity_matches_brute_force() {
        // Direct sums on an oversized tensor rule with plain DFTs.
        let g = Grid::standard(1.0, 5, 4.0, 8).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(21), None);
        let fast = pointwise_nonlin(&u, 1, &Coupling::Constant(1.5), 0.0).unwrap();

        let rule = crate::hermite::NodeTable::new(1.0, 5, 30, 2.0, 0.0);
        let m = 64;
        let h = 2.0 * g.l_y() / m as f64;
        let norm = (2.0 * g.l_y()).sqrt();
        let mut slow = Array2::<Complex64>::zeros((5, 8));
        for (i, &w) in rule.weights().iter().enumerate() {
            for l in 0..m {
                let y = -g.l_y() + l as f64 * h;
                let mut val = ZERO;
                for ((n, k), c) in u.coeffs().indexed_iter() {
                    val += c * rule.values()[[i, n]] * Complex64::from_polar(1.0, g.xi()[k] * y)
                        / norm;
                }
                let f = 1.5 * val.norm_sqr() * val;
                for ((n, k), s) in slow.indexed_iter_mut() {
                    *s += w
                        * h
                        * f
                        * rule.values()[[i, n]]
                        * Complex64::from_polar(1.0, -g.xi()[k] * y)
                        / norm;
                }
            }
        }
        let diff = (&slow - fast.coeffs())
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-13, "{diff}");
    }
}
