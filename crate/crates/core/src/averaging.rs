//! The oscillatory maps `F(θ, u)`, `G(θ, u)`, their period averages, the
//! antiderivative `𝒢` and the residual of the averaging identity.

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::coupling::Coupling;
use crate::error::{invalid, Error, Result};
use crate::field::{pointwise_nonlin, SpectralField};
use crate::grid::{Grid, PhysicalGrid};
use crate::hermite::coupling_v;
use crate::propagate::flow_h;
use crate::solvers::Trajectory;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Equispaced nodes `θⱼ = j·(2π/b)/N_θ` over one period with equal weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaRule {
    n_nodes: usize,
    b: f64,
}

impl ThetaRule {
    pub fn new(n_nodes: usize, b: f64) -> Result<Self> {
        if n_nodes < 2 {
            return Err(invalid(format!(
                "theta rule needs at least 2 nodes, got {n_nodes}"
            )));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(invalid(format!(
                "oscillator parameter b must be positive, got {b}"
            )));
        }
        Ok(ThetaRule { n_nodes, b })
    }

    /// Smallest node count for which the average of `F` is exact.
    pub fn min_nodes(n_modes: usize, sigma: u32) -> usize {
        (sigma as usize + 1) * n_modes.saturating_sub(1) + 1
    }

    /// The next power of two at or above [`min_nodes`](Self::min_nodes).
    pub fn default_for(n_modes: usize, sigma: u32, b: f64) -> Result<Self> {
        ThetaRule::new(
            ThetaRule::min_nodes(n_modes, sigma)
                .next_power_of_two()
                .max(2),
            b,
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn period(&self) -> f64 {
        TAU / self.b
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes)
            .map(|j| j as f64 * self.period() / self.n_nodes as f64)
            .collect()
    }

    pub fn weight(&self) -> f64 {
        self.period() / self.n_nodes as f64
    }
}

/// `F(θ, u) = e^{iθH}(λ |e^{-iθH}u|^{2σ} e^{-iθH}u)`.
pub fn f_theta(
    theta: f64,
    u: &SpectralField,
    sigma: u32,
    lambda: &Coupling,
    x_scale: f64,
) -> Result<SpectralField> {
    let w = pointwise_nonlin(&flow_h(u, theta), sigma, lambda, x_scale)?;
    Ok(flow_h(&w, -theta))
}

/// The period average of `F(·, u)`, precomputed for repeated use.
///
/// In the gauge `e^{-iθ(H - b/2)}` the field at a point is a polynomial in
/// `ζ = e^{-ibθ}`, so sampling `F` at the `θ` nodes is one FFT per physical
/// point and the average picks one Fourier coefficient. With
/// `N_θ > (σ+1)(N_h−1)` nothing aliases and the result is exact.
pub struct Averager {
    grid: Arc<Grid>,
    physical: Arc<PhysicalGrid>,
    sigma: u32,
    lambda: Array2<f64>,
    rule: ThetaRule,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `λ` is even in `x` on the nodes: a mirrored node contributes the same
    /// as its partner, so only half of them are visited.
    mirrored: bool,
}

impl std::fmt::Debug for Averager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Averager")
            .field("sigma", &self.sigma)
            .field("rule", &self.rule)
            .finish()
    }
}

impl Averager {
    pub fn new(
        grid: &Arc<Grid>,
        sigma: u32,
        lambda: &Coupling,
        x_scale: f64,
        rule: ThetaRule,
    ) -> Result<Self> {
        if sigma < 1 {
            return Err(invalid("nonlinearity exponent sigma must be at least 1"));
        }
        if rule.b() != grid.b() {
            return Err(invalid("theta rule period does not match the grid"));
        }
        let required = ThetaRule::min_nodes(grid.n_modes(), sigma);
        if rule.n_nodes() < required {
            return Err(Error::RuleTooCoarse {
                nodes: rule.n_nodes(),
                required,
            });
        }
        let physical = grid.physical(sigma as usize + 1);
        let lambda = lambda.sample(physical.xs(), physical.ys(), x_scale)?;
        // At -x the coefficients pick up (-1)^n, which for even N_θ is a shift
        // by half the θ grid; the contribution to the average is unchanged.
        let xs = physical.xs();
        let last = xs.len() - 1;
        let mirrored = rule.n_nodes().is_multiple_of(2)
            && (0..xs.len()).all(|i| {
                (xs[i] + xs[last - i]).abs() <= 1e-13 * (1.0 + xs[i].abs())
                    && lambda.row(i) == lambda.row(last - i)
            });
        let mut planner = FftPlanner::new();
        Ok(Averager {
            grid: grid.clone(),
            physical,
            sigma,
            lambda,
            rule,
            forward: planner.plan_fft_forward(rule.n_nodes()),
            inverse: planner.plan_fft_inverse(rule.n_nodes()),
            mirrored,
        })
    }

    pub fn rule(&self) -> ThetaRule {
        self.rule
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        if !self.grid.compatible(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let n_h = self.grid.n_modes();
        let n_theta = self.rule.n_nodes();
        let rows = self.physical.rows_to_y(u.coeffs());
        let m = rows.ncols();
        let table = self.physical.x_rule().values();
        let weights = self.physical.x_rule().weights();
        let sigma = self.sigma as i32;
        let mut out = Array2::<Complex64>::zeros((n_h, m));
        let mut seq = vec![ZERO; n_theta];
        let mut scratch = vec![
            ZERO;
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];
        let mut col = vec![ZERO; n_h];
        for l in 0..m {
            col.iter_mut()
                .zip(rows.column(l))
                .for_each(|(c, r)| *c = *r);
            let last = weights.len() - 1;
            for (i, &w) in weights.iter().enumerate() {
                let w = match self.mirrored {
                    true if i > last - i => break,
                    true if i < last - i => w + weights[last - i],
                    _ => w,
                };
                let lam = self.lambda[[i, l]];
                if lam == 0.0 {
                    continue;
                }
                let chi = table.row(i);
                seq.fill(ZERO);
                for n in 0..n_h {
                    seq[n % n_theta] += col[n] * chi[n];
                }
                self.forward.process_with_scratch(&mut seq, &mut scratch);
                for v in seq.iter_mut() {
                    *v *= lam * v.norm_sqr().powi(sigma);
                }
                self.inverse.process_with_scratch(&mut seq, &mut scratch);
                let scale = w / n_theta as f64;
                for n in 0..n_h {
                    out[[n, l]] += seq[n % n_theta] * (scale * chi[n]);
                }
            }
        }
        SpectralField::from_coeffs(&self.grid, self.physical.rows_from_y(out))
    }
}

/// `F_av(u) = (b/2π) ∫₀^{2π/b} F(θ, u) dθ`.
pub fn f_av(
    u: &SpectralField,
    sigma: u32,
    lambda: &Coupling,
    x_scale: f64,
    rule: ThetaRule,
) -> Result<SpectralField> {
    Averager::new(u.grid(), sigma, lambda, x_scale, rule)?.apply(u)
}

/// `F_av` as the plain average of [`f_theta`] over the rule's nodes.
pub fn f_av_by_nodes(
    u: &SpectralField,
    sigma: u32,
    lambda: &Coupling,
    x_scale: f64,
    rule: ThetaRule,
) -> Result<SpectralField> {
    let mut acc = SpectralField::zeros(u.grid());
    let w = Complex64::new(1.0 / rule.n_nodes() as f64, 0.0);
    for theta in rule.nodes() {
        acc.axpy(w, &f_theta(theta, u, sigma, lambda, x_scale)?)?;
    }
    Ok(acc)
}

/// `G(θ, u) = e^{iθH} x e^{-iθH} u`.
pub fn g_theta(theta: f64, u: &SpectralField) -> SpectralField {
    flow_h(&flow_h(u, theta).apply_x(), -theta)
}

/// Period average of [`g_theta`] over the rule's nodes; vanishes identically.
pub fn g_av(u: &SpectralField, rule: ThetaRule) -> Result<SpectralField> {
    if rule.b() != u.grid().b() {
        return Err(invalid("theta rule period does not match the grid"));
    }
    let mut acc = SpectralField::zeros(u.grid());
    let w = Complex64::new(1.0 / rule.n_nodes() as f64, 0.0);
    for theta in rule.nodes() {
        acc.axpy(w, &g_theta(theta, u))?;
    }
    Ok(acc)
}

/// `𝒢(θ, u) = ∫₀^θ G(τ, u) dτ` in closed form. Row `m` of `G(τ, u)` is
/// `e^{ibτ} v u_{m−1} + e^{-ibτ} v u_{m+1}`.
pub fn gcal(theta: f64, u: &SpectralField) -> SpectralField {
    let b = u.grid().b();
    let up = phase_integral(b, theta);
    let down = phase_integral(-b, theta);
    let n_h = u.grid().n_modes();
    let src = u.coeffs();
    let mut out = SpectralField::zeros(u.grid());
    let dst = out.coeffs_mut();
    for m in 0..n_h {
        let mut row = dst.row_mut(m);
        if m > 0 {
            row.scaled_add(up * coupling_v(m, m - 1, b), &src.row(m - 1));
        }
        if m + 1 < n_h {
            row.scaled_add(down * coupling_v(m, m + 1, b), &src.row(m + 1));
        }
    }
    out
}

/// `∫₀^θ e^{iωτ} dτ`.
fn phase_integral(omega: f64, theta: f64) -> Complex64 {
    let z = Complex64::new(0.0, omega * theta);
    if z.im.abs() < 1e-4 {
        // Series of (e^z − 1)/z.
        theta * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (z.exp() - 1.0) / Complex64::new(0.0, omega)
    }
}

/// `𝒢(θ, u)` by composite Simpson over `intervals` (rounded up to even)
/// samples of [`g_theta`]. Cross-check for [`gcal`].
pub fn gcal_quadrature(theta: f64, u: &SpectralField, intervals: usize) -> SpectralField {
    let n = (intervals.max(2) + 1) & !1;
    let h = theta / n as f64;
    let mut acc = SpectralField::zeros(u.grid());
    for j in 0..=n {
        let w = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc.axpy(Complex64::new(w * h / 3.0, 0.0), &g_theta(j as f64 * h, u))
            .expect("same grid");
    }
    acc
}

/// Minimum number of trajectory samples for [`identity_residual`].
pub const MIN_IDENTITY_SAMPLES: usize = 3;

/// Samples per fast period that [`identity_residual`] requires.
pub const IDENTITY_SAMPLES_PER_PERIOD: f64 = 16.0;

/// `‖−(ib/ε)∫₀ᵗ G(s/ε², ∂_yφ(s)) ds − ½∫₀ᵗ ∂_y²φ(s) ds‖` at the final sample
/// of a filtered trajectory.
///
/// The field is taken piecewise linear in `s` between samples; against the
/// two phases `e^{±ibs/ε²}` of `G` each segment integrates in closed form.
/// The right side uses the trapezoid rule on the same samples.
pub fn identity_residual(traj: &Trajectory, eps: f64, b: f64) -> Result<f64> {
    Ok(*identity_residuals(traj, eps, b)?
        .last()
        .expect("checked length"))
}

/// Largest [`identity_residual`] over all sample times. The `O(ε)` remainder
/// oscillates with the fast period, so its value at one fixed time depends on
/// where `t/ε²` falls within the period; the supremum does not.
pub fn identity_residual_sup(traj: &Trajectory, eps: f64, b: f64) -> Result<f64> {
    Ok(identity_residuals(traj, eps, b)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// [`identity_residual`] with the integrals ending at each sample in turn.
pub fn identity_residuals(traj: &Trajectory, eps: f64, b: f64) -> Result<Vec<f64>> {
    let times = traj.times();
    let fields = traj.fields();
    if times.len() < MIN_IDENTITY_SAMPLES {
        return Err(Error::TooFewSamples {
            got: times.len(),
            required: MIN_IDENTITY_SAMPLES,
        });
    }
    let mut acc = IdentityAccumulator::new(fields[0].grid(), eps, b)?;
    let mut out = Vec::with_capacity(times.len());
    for (&t, f) in times.iter().zip(fields) {
        out.push(acc.push(t, f)?);
    }
    Ok(out)
}

/// Running form of [`identity_residual`], fed one filtered sample at a time.
#[derive(Debug, Clone)]
pub struct IdentityAccumulator {
    eps: f64,
    b: f64,
    limit: f64,
    last: Option<(f64, SpectralField)>,
    samples: usize,
    /// Running integrals of `e^{+iωs}∂_yφ`, `e^{-iωs}∂_yφ` and `∂_yφ`.
    plus: SpectralField,
    minus: SpectralField,
    flat: SpectralField,
    residual: f64,
    sup: f64,
}

impl IdentityAccumulator {
    pub fn new(grid: &Arc<Grid>, eps: f64, b: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {eps}")));
        }
        if grid.b() != b {
            return Err(invalid("b does not match the trajectory's grid"));
        }
        Ok(IdentityAccumulator {
            eps,
            b,
            limit: eps * eps * TAU / b / IDENTITY_SAMPLES_PER_PERIOD,
            last: None,
            samples: 0,
            plus: SpectralField::zeros(grid),
            minus: SpectralField::zeros(grid),
            flat: SpectralField::zeros(grid),
            residual: 0.0,
            sup: 0.0,
        })
    }

    /// Adds the sample `φ(t)` and returns the residual at `t`.
    pub fn push(&mut self, t: f64, phi: &SpectralField) -> Result<f64> {
        if !self.plus.grid().compatible(phi.grid()) {
            return Err(Error::GridMismatch);
        }
        let dy = phi.apply_dy();
        if let Some((s0, prev)) = self.last.take() {
            let h = t - s0;
            if !(h > 0.0) {
                return Err(invalid(format!("sample time {t} does not follow {s0}")));
            }
            if h > self.limit * (1.0 + 1e-9) {
                return Err(Error::UnderSampled {
                    step: h,
                    limit: self.limit,
                });
            }
            let omega = self.b / (self.eps * self.eps);
            let slope = &dy - &prev;
            for (acc, w) in [(&mut self.plus, omega), (&mut self.minus, -omega)] {
                let (i0, i1) = filon_moments(w, h);
                let start = crate::propagate::phase(-w * s0);
                acc.axpy(start * i0, &prev)?;
                acc.axpy(start * i1 / h, &slope)?;
            }
            self.flat.axpy(Complex64::new(0.5 * h, 0.0), &prev)?;
            self.flat.axpy(Complex64::new(0.5 * h, 0.0), &dy)?;
            self.residual = self.current()?;
            self.sup = self.sup.max(self.residual);
        }
        self.last = Some((t, dy));
        self.samples += 1;
        Ok(self.residual)
    }

    fn current(&self) -> Result<f64> {
        // ∫G(s/ε², ∂_yφ) ds, row by row from the two phase integrals.
        let grid = self.plus.grid();
        let (b, n_h) = (self.b, grid.n_modes());
        let mut lhs = SpectralField::zeros(grid);
        let dst = lhs.coeffs_mut();
        for m in 0..n_h {
            let mut row = dst.row_mut(m);
            if m > 0 {
                let v = Complex64::new(coupling_v(m, m - 1, b), 0.0);
                row.scaled_add(v, &self.plus.coeffs().row(m - 1));
            }
            if m + 1 < n_h {
                let v = Complex64::new(coupling_v(m, m + 1, b), 0.0);
                row.scaled_add(v, &self.minus.coeffs().row(m + 1));
            }
        }
        let lhs = lhs.scaled(Complex64::new(0.0, -b / self.eps));
        let rhs = self.flat.apply_dy().scaled(Complex64::new(0.5, 0.0));
        lhs.distance(&rhs)
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Residual at the latest sample.
    pub fn residual(&self) -> Result<f64> {
        if self.samples < MIN_IDENTITY_SAMPLES {
            return Err(Error::TooFewSamples {
                got: self.samples,
                required: MIN_IDENTITY_SAMPLES,
            });
        }
        Ok(self.residual)
    }

    /// Largest residual so far.
    pub fn sup(&self) -> Result<f64> {
        self.residual()?;
        Ok(self.sup)
    }
}

/// `(∫₀ʰ e^{iωτ} dτ, ∫₀ʰ τ e^{iωτ} dτ)`.
fn filon_moments(omega: f64, h: f64) -> (Complex64, Complex64) {
    let z = Complex64::new(0.0, omega * h);
    if z.im.abs() < 1e-3 {
        let i0 = h * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0);
        let i1 = h * h * (0.5 + z / 3.0 + z * z / 8.0 + z * z * z / 30.0 + z * z * z * z / 144.0);
        (i0, i1)
    } else {
        let iw = Complex64::new(0.0, omega);
        let e = z.exp();
        let i0 = (e - 1.0) / iw;
        let i1 = h * e / iw - (e - 1.0) / (iw * iw);
        (i0, i1)
    }
}
