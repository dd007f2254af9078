//! Eigenbasis of the harmonic oscillator `H = -½∂ₓ² + ½b²x²`.
//!
//! The normalized eigenfunctions are
//! `χₙ(x) = (2ⁿ n!)^{-1/2} (b/π)^{1/4} e^{-bx²/2} Pₙ(√b x)` with eigenvalues
//! `Eₙ = b(n + ½)`. They are never evaluated through the Hermite polynomials
//! directly; the normalized three-term recurrence
//!
//! ```text
//! χ₀(x)   = (b/π)^{1/4} e^{-bx²/2}
//! χₙ₊₁(x) = x √(2b/(n+1)) χₙ(x) − √(n/(n+1)) χₙ₋₁(x)
//! ```
//!
//! is stable for all the indices used here.
//!
//! Integrals are done with Gauss–Hermite rules whose weights absorb the
//! Gaussian envelope: a [`NodeTable`] built for envelope order `s` integrates
//! `poly(x)·e^{-s·b·x²}` exactly, which is exactly the shape of a product of
//! `2s` eigenfunctions.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Nodes and envelope-scaled weights of the `n`-point Gauss–Hermite rule for
/// the weight `e^{-z²}`.
///
/// Returns `(zⱼ, wⱼ·e^{zⱼ²})`. The nodes come from the symmetric tridiagonal
/// Jacobi matrix (Golub–Welsch), polished by Newton steps; the weights use the
/// Christoffel form `1/Σₖ ψₖ(zⱼ)²` with the orthonormal Hermite functions
/// `ψₖ`, which never has to form `e^{-zⱼ²}` itself.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Hermite rule needs at least one node");
    if n == 1 {
        return (vec![0.0], vec![PI.sqrt()]);
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);

    let mut funcs = vec![0.0; n + 1];
    for z in nodes.iter_mut() {
        for _ in 0..3 {
            hermite_functions(*z, &mut funcs);
            let step = funcs[n] / ((2.0 * n as f64).sqrt() * funcs[n - 1]);
            if !step.is_finite() {
                break;
            }
            *z -= step;
            if step.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
    }
    // Restore exact symmetry about the origin.
    for j in 0..n / 2 {
        let z = 0.5 * (nodes[n - 1 - j] - nodes[j]);
        nodes[j] = -z;
        nodes[n - 1 - j] = z;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&z| {
            hermite_functions(z, &mut funcs);
            1.0 / funcs[..n].iter().map(|f| f * f).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// Orthonormal Hermite functions `ψ₀(z) … ψ_{len-1}(z)` (the `b = 1` case of
/// `χₙ`), written into `out`.
fn hermite_functions(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * z * z).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * z * out[0];
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = z * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// Evaluates `χ₀(x) … χ_{len-1}(x)` for oscillator parameter `b` into `out`.
pub fn eval_chi(b: f64, x: f64, out: &mut [f64]) {
    hermite_functions(b.sqrt() * x, out);
    let scale = b.powf(0.25);
    out.iter_mut().for_each(|v| *v *= scale);
}

/// Oscillator eigenvalue `Eₙ = b(n + ½)`.
pub fn eigenvalue(n: usize, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(invalid(format!(
            "oscillator parameter b must be positive, got {b}"
        )));
    }
    Ok(b * (n as f64 + 0.5))
}

/// Position matrix element `v_{n,m} = ⟨x χₙ, χₘ⟩`, in closed form.
pub fn coupling_v(n: usize, m: usize, b: f64) -> f64 {
    debug_assert!(b > 0.0);
    let scale = (2.0 * b).sqrt().recip();
    if m == n + 1 {
        scale * ((n + 1) as f64).sqrt()
    } else if m + 1 == n {
        scale * (n as f64).sqrt()
    } else {
        0.0
    }
}

/// Quadrature nodes with the eigenfunction values tabulated on them.
#[derive(Debug, Clone)]
pub struct NodeTable {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `values[[j, n]] = χₙ(xⱼ)`.
    values: Array2<f64>,
}

impl NodeTable {
    /// A rule exact for `poly·e^{-s·b·(x-center)²}` of degree below `2·n_nodes`,
    /// tabulating the first `n_modes` eigenfunctions.
    pub fn new(b: f64, n_modes: usize, n_nodes: usize, envelope: f64, center: f64) -> Self {
        let (z, w) = gauss_hermite(n_nodes);
        let scale = (envelope * b).sqrt();
        let nodes: Vec<f64> = z.iter().map(|z| center + z / scale).collect();
        let weights = w.iter().map(|w| w / scale).collect();
        let mut values = Array2::zeros((n_nodes, n_modes));
        let mut buf = vec![0.0; n_modes];
        for (j, &x) in nodes.iter().enumerate() {
            eval_chi(b, x, &mut buf);
            values
                .row_mut(j)
                .iter_mut()
                .zip(&buf)
                .for_each(|(v, c)| *v = *c);
        }
        NodeTable {
            nodes,
            weights,
            values,
        }
    }

    /// Rule for products of `2s` eigenfunctions of index below `n_modes`.
    pub fn for_products(b: f64, n_modes: usize, s: usize) -> Self {
        let n_nodes = s * n_modes.saturating_sub(1) + 1;
        NodeTable::new(b, n_modes, n_nodes, s as f64, 0.0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.values.ncols()
    }
}

/// The truncated oscillator eigenbasis with its quadrature rule.
///
/// Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    b: f64,
    rule: NodeTable,
}

impl HermiteBasis {
    /// Basis with the default rule of `2·n_modes + 8` nodes.
    pub fn new(b: f64, n_modes: usize) -> Result<Self> {
        build_basis(b, n_modes, 2 * n_modes + 8)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_modes(&self) -> usize {
        self.rule.n_modes()
    }

    pub fn n_quad(&self) -> usize {
        self.rule.len()
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    /// `N_q × N_h` table of `χₙ(xⱼ)`.
    pub fn table(&self) -> &Array2<f64> {
        self.rule.values()
    }

    pub fn rule(&self) -> &NodeTable {
        &self.rule
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.b * (n as f64 + 0.5)
    }

    /// Coefficients `⟨f, χₙ⟩` of grid samples `f(xⱼ)`.
    pub fn project(&self, samples: &[Complex64]) -> Result<Vec<Complex64>> {
        if samples.len() != self.n_quad() {
            return Err(Error::SizeMismatch {
                expected: self.n_quad(),
                got: samples.len(),
            });
        }
        let table = self.table();
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_modes()];
        for (j, (&f, &w)) in samples.iter().zip(self.weights()).enumerate() {
            let wf = f * w;
            for (c, &chi) in out.iter_mut().zip(table.row(j)) {
                *c += wf * chi;
            }
        }
        Ok(out)
    }

    /// Grid samples of `Σₙ cₙ χₙ`.
    pub fn synth(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::SizeMismatch {
                expected: self.n_modes(),
                got: coeffs.len(),
            });
        }
        Ok(self
            .table()
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(coeffs).map(|(&chi, &c)| c * chi).sum())
            .collect())
    }

    /// `∫ |χₙ|ᵖ dx` for even `p ≥ 2`, on a rule matched to the `e^{-(p/2)bx²}`
    /// envelope of the integrand.
    pub fn chi_norm_pow(&self, n: usize, p: u32) -> Result<f64> {
        chi_norm_pow(n, p, self.b)
    }
}

/// Builds the basis, checking `b > 0` and `n_quad ≥ n_modes`.
pub fn build_basis(b: f64, n_modes: usize, n_quad: usize) -> Result<HermiteBasis> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(format!(
            "oscillator parameter b must be positive, got {b}"
        )));
    }
    if n_modes == 0 {
        return Err(invalid("need at least one Hermite mode"));
    }
    if n_quad < n_modes {
        return Err(invalid(format!(
            "n_quad = {n_quad} is smaller than n_modes = {n_modes}"
        )));
    }
    Ok(HermiteBasis {
        b,
        rule: NodeTable::new(b, n_modes, n_quad, 1.0, 0.0),
    })
}

/// `∫ |χₙ|ᵖ dx`, exact up to rounding for even `p`.
pub fn chi_norm_pow(n: usize, p: u32, b: f64) -> Result<f64> {
    if p < 2 || p % 2 == 1 {
        return Err(invalid(format!(
            "power must be even and at least 2, got {p}"
        )));
    }
    if !(b > 0.0) {
        return Err(invalid(format!(
            "oscillator parameter b must be positive, got {b}"
        )));
    }
    let n_nodes = (p as usize * n) / 2 + 1;
    let rule = NodeTable::new(b, n + 1, n_nodes, p as f64 / 2.0, 0.0);
    Ok(rule
        .values()
        .column(n)
        .iter()
        .zip(rule.weights())
        .map(|(chi, w)| w * chi.powi(p as i32))
        .sum())
}

/// Overlaps `D[m][n] = ⟨χₘ, χₙ(· + a)⟩` between the eigenbasis and its
/// translate by `a`, for the first `n_modes` functions.
///
/// The integrand is a polynomial times `e^{-b(x + a/2)²}`, so a rule centred at
/// `-a/2` integrates it exactly.
pub fn shifted_overlap(b: f64, n_modes: usize, a: f64) -> Array2<f64> {
    let rule = NodeTable::new(b, n_modes, n_modes + 8, 1.0, -0.5 * a);
    let mut shifted = Array2::zeros((rule.len(), n_modes));
    let mut buf = vec![0.0; n_modes];
    for (j, &x) in rule.nodes().iter().enumerate() {
        eval_chi(b, x + a, &mut buf);
        shifted
            .row_mut(j)
            .iter_mut()
            .zip(&buf)
            .for_each(|(v, c)| *v = *c);
    }
    let mut out = Array2::zeros((n_modes, n_modes));
    for (j, &w) in rule.weights().iter().enumerate() {
        let base = rule.values().row(j);
        let moved = shifted.row(j);
        for m in 0..n_modes {
            let wm = w * base[m];
            for n in 0..n_modes {
                out[[m, n]] += wm * moved[n];
            }
        }
    }
    out
}
