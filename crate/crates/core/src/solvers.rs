//! Time integration of the full model and of the averaged model.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::averaging::{Averager, ThetaRule};
use crate::coupling::Coupling;
use crate::error::{invalid, Error, Result};
use crate::field::{project_profile, SpectralField};
use crate::grid::{Grid, PhysicalGrid};
use crate::hermite::{chi_norm_pow, NodeTable};
use crate::propagate::{flow_h, phase, DisplacementTable};

/// Model data shared by both solvers. `eps` is ignored by the averaged model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub grid: Arc<Grid>,
    pub sigma: u32,
    pub lambda: Coupling,
    pub eps: f64,
}

impl ModelParams {
    pub fn new(grid: &Arc<Grid>, sigma: u32, lambda: Coupling, eps: f64) -> Result<Self> {
        if sigma < 1 {
            return Err(invalid("nonlinearity exponent sigma must be at least 1"));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid(format!("epsilon must be positive, got {eps}")));
        }
        Ok(ModelParams {
            grid: grid.clone(),
            sigma,
            lambda,
            eps,
        })
    }

    pub fn b(&self) -> f64 {
        self.grid.b()
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        ModelParams::new(&self.grid, self.sigma, self.lambda.clone(), eps)
    }

    pub fn with_lambda(&self, lambda: Coupling) -> Self {
        ModelParams {
            lambda,
            ..self.clone()
        }
    }
}

/// Time samples of a field with per-sample mass and `Σ²` norm.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    mass: Vec<f64>,
    sigma2: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory::default()
    }

    /// Appends a sample; times must increase and grids must agree.
    pub fn push(&mut self, t: f64, u: SpectralField) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(invalid(format!("sample time {t} does not follow {last}")));
            }
            if !self.fields[0].grid().compatible(u.grid()) {
                return Err(Error::GridMismatch);
            }
        }
        self.mass.push(u.mass());
        self.sigma2.push(u.sigma_norm(2));
        self.times.push(t);
        self.fields.push(u);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &SpectralField)> {
        self.times
            .last()
            .map(|&t| (t, self.fields.last().expect("same length")))
    }

    /// Largest relative deviation of the mass from its first value.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        if m0 == 0.0 {
            return 0.0;
        }
        self.mass
            .iter()
            .map(|m| ((m - m0) / m0).abs())
            .fold(0.0, f64::max)
    }
}

/// A uniform step `dt ≤ dt_max` for which `out_interval` is a whole number of
/// steps and `t_final` a whole number of output intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub steps: usize,
    pub out_every: usize,
}

impl StepPlan {
    pub fn new(t_final: f64, dt_max: f64, out_interval: f64) -> Result<Self> {
        if !(t_final > 0.0) || !(dt_max > 0.0) || !(out_interval > 0.0) {
            return Err(invalid(
                "final time, step and output interval must be positive",
            ));
        }
        let outputs = (t_final / out_interval).round().max(1.0);
        if ((outputs * out_interval - t_final) / t_final).abs() > 1e-9 {
            return Err(invalid(format!(
                "final time {t_final} is not a multiple of the output interval {out_interval}"
            )));
        }
        let out_every = (out_interval / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let steps = out_every * outputs as usize;
        Ok(StepPlan {
            dt: t_final / steps as f64,
            steps,
            out_every,
        })
    }
}

/// Default full-model step, `min(10⁻³, ε²·(2π/b)/64)`.
pub fn default_full_dt(eps: f64, b: f64) -> f64 {
    (eps * eps * TAU / b / 64.0).min(1e-3)
}

/// Default averaged-model step.
pub const DEFAULT_EFFECTIVE_DT: f64 = 1e-3;

/// The exact sub-flow `ψ ↦ e^{-iτλ|ψ|^{2σ}}ψ` on the square collocation grid.
struct NonlinearPhase {
    physical: Arc<PhysicalGrid>,
    lambda: ndarray::Array2<f64>,
    sigma: i32,
}

impl NonlinearPhase {
    fn new(params: &ModelParams, x_scale: f64) -> Result<Self> {
        let physical = params.grid.physical(1);
        let lambda = params
            .lambda
            .sample(physical.xs(), physical.ys(), x_scale)?;
        Ok(NonlinearPhase {
            physical,
            lambda,
            sigma: params.sigma as i32,
        })
    }

    fn apply(&self, u: &mut SpectralField, tau: f64) {
        if tau == 0.0 {
            return;
        }
        let mut vals = self.physical.to_physical(u.coeffs());
        let sigma = self.sigma;
        vals.zip_mut_with(&self.lambda, |v, &lam| {
            if lam != 0.0 {
                *v *= phase(tau * lam * v.norm_sqr().powi(sigma));
            }
        });
        *u.coeffs_mut() = self.physical.from_physical(&vals);
    }
}

/// Strang splitting for `i∂ₜψ = H_εψ/ε² + λ(εx, y)|ψ|^{2σ}ψ`: half nonlinear
/// step, exact linear step, half nonlinear step. Half steps between outputs
/// are merged. Samples every `out_every` steps and at `t_final`.
pub fn solve_full(
    params: &ModelParams,
    psi0: &SpectralField,
    t_final: f64,
    dt: f64,
    out_every: usize,
) -> Result<Trajectory> {
    let table = DisplacementTable::new(&params.grid, params.eps)?;
    solve_full_with(params, &table, psi0, t_final, dt, out_every)
}

/// [`solve_full`] with a prebuilt displacement table.
pub fn solve_full_with(
    params: &ModelParams,
    table: &DisplacementTable,
    psi0: &SpectralField,
    t_final: f64,
    dt: f64,
    out_every: usize,
) -> Result<Trajectory> {
    run_full(params, table, psi0, t_final, dt, out_every, None)
}

/// [`solve_full_with`], also handing the state after every step (and the
/// initial state) to `observe`.
pub fn solve_full_observed(
    params: &ModelParams,
    table: &DisplacementTable,
    psi0: &SpectralField,
    t_final: f64,
    dt: f64,
    out_every: usize,
    mut observe: impl FnMut(f64, &SpectralField) -> Result<()>,
) -> Result<Trajectory> {
    run_full(
        params,
        table,
        psi0,
        t_final,
        dt,
        out_every,
        Some(&mut observe),
    )
}

type Observer<'a> = &'a mut dyn FnMut(f64, &SpectralField) -> Result<()>;

fn run_full(
    params: &ModelParams,
    table: &DisplacementTable,
    psi0: &SpectralField,
    t_final: f64,
    dt: f64,
    out_every: usize,
    mut observe: Option<Observer<'_>>,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final > 0.0) || out_every == 0 {
        return Err(invalid("dt, final time and output stride must be positive"));
    }
    if table.eps() != params.eps || !table.grid().compatible(&params.grid) {
        return Err(invalid("displacement table does not match the model"));
    }
    if !params.grid.compatible(psi0.grid()) {
        return Err(Error::GridMismatch);
    }
    let steps = (t_final / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let nonlin = NonlinearPhase::new(params, params.eps)?;

    let mut traj = Trajectory::new();
    traj.push(0.0, psi0.clone())?;
    if let Some(f) = observe.as_mut() {
        f(0.0, psi0)?;
    }
    let mut u = psi0.clone();
    nonlin.apply(&mut u, 0.5 * dt);
    for step in 1..=steps {
        u = table.flow(&u, dt)?;
        let t = step as f64 * dt;
        if step % out_every == 0 || step == steps {
            nonlin.apply(&mut u, 0.5 * dt);
            check_finite(&u, step, t)?;
            if let Some(f) = observe.as_mut() {
                f(t, &u)?;
            }
            traj.push(t, u.clone())?;
            if step < steps {
                nonlin.apply(&mut u, 0.5 * dt);
            }
        } else if let Some(f) = observe.as_mut() {
            nonlin.apply(&mut u, 0.5 * dt);
            check_finite(&u, step, t)?;
            f(t, &u)?;
            nonlin.apply(&mut u, 0.5 * dt);
        } else {
            nonlin.apply(&mut u, dt);
            check_finite(&u, step, t)?;
        }
    }
    Ok(traj)
}

fn check_finite(u: &SpectralField, step: usize, time: f64) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalAbort { step, time })
    }
}

/// `e^{-itH_ε/ε²}u` by Strang splitting of the diagonal part
/// `diag(Eₙ) + ε²ξ²/2` against the coupling `εbξ·x`, with step `dt`.
///
/// The coupling is exponentiated on the `N_h` Gauss nodes, where the matrix
/// of `x` is diagonal. Independent of the eigendecomposition in
/// [`DisplacementTable`]; used as a cross-check.
pub fn split_linear_flow(u: &SpectralField, t: f64, eps: f64, dt: f64) -> Result<SpectralField> {
    if !(dt > 0.0) || !(eps > 0.0) {
        return Err(invalid("dt and epsilon must be positive"));
    }
    let grid = u.grid();
    let b = grid.b();
    let n_h = grid.n_modes();
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let rule = NodeTable::new(b, n_h, n_h, 1.0, 0.0);
    // U[j][n] = √Wⱼ χₙ(xⱼ) is orthogonal and diagonalizes x.
    let unit: Vec<f64> = (0..n_h * n_h)
        .map(|idx| rule.weights()[idx / n_h].sqrt() * rule.values()[[idx / n_h, idx % n_h]])
        .collect();
    let scale = h / (eps * eps);
    let mut out = u.clone();
    let mut col = vec![Complex64::new(0.0, 0.0); n_h];
    let mut nodal = vec![Complex64::new(0.0, 0.0); n_h];
    for k in 0..grid.n_y() {
        let xi = grid.xi()[k];
        let coupling = eps * b * grid.dy_symbol(k);
        let half: Vec<Complex64> = (0..n_h)
            .map(|n| phase(0.5 * scale * (grid.basis().eigenvalue(n) + 0.5 * eps * eps * xi * xi)))
            .collect();
        let kick: Vec<Complex64> = rule
            .nodes()
            .iter()
            .map(|x| phase(scale * coupling * x))
            .collect();
        col.iter_mut()
            .zip(out.coeffs().column(k))
            .for_each(|(c, v)| *c = *v);
        for _ in 0..steps {
            col.iter_mut().zip(&half).for_each(|(c, p)| *c *= p);
            for (j, v) in nodal.iter_mut().enumerate() {
                let row = &unit[j * n_h..(j + 1) * n_h];
                *v = row.iter().zip(&col).map(|(a, c)| c * *a).sum::<Complex64>() * kick[j];
            }
            for (n, c) in col.iter_mut().enumerate() {
                *c = (0..n_h).map(|j| nodal[j] * unit[j * n_h + n]).sum();
            }
            col.iter_mut().zip(&half).for_each(|(c, p)| *c *= p);
        }
        out.coeffs_mut()
            .column_mut(k)
            .iter_mut()
            .zip(&col)
            .for_each(|(v, c)| *v = *c);
    }
    Ok(out)
}

/// `φ(t) = e^{itH/ε²}ψ(t)` per sample.
pub fn filter_trajectory(traj: &Trajectory, eps: f64, b: f64) -> Result<Trajectory> {
    let mut out = Trajectory::new();
    for (&t, u) in traj.times().iter().zip(traj.fields()) {
        if u.grid().b() != b {
            return Err(invalid("b does not match the trajectory's grid"));
        }
        out.push(t, flow_h(u, -t / (eps * eps)))?;
    }
    Ok(out)
}

/// Classical RK4 for `i∂ₜφ = λ(0, y) F_av(φ)`, sampled every `out_every`
/// steps and at `t_final`.
pub fn solve_effective(
    params: &ModelParams,
    psi0: &SpectralField,
    t_final: f64,
    dt: f64,
    out_every: usize,
    rule: ThetaRule,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final > 0.0) || out_every == 0 {
        return Err(invalid("dt, final time and output stride must be positive"));
    }
    if !params.grid.compatible(psi0.grid()) {
        return Err(Error::GridMismatch);
    }
    let steps = (t_final / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let averager = Averager::new(&params.grid, params.sigma, &params.lambda, 0.0, rule)?;
    let minus_i = Complex64::new(0.0, -1.0);
    let rhs =
        |u: &SpectralField| -> Result<SpectralField> { Ok(averager.apply(u)?.scaled(minus_i)) };

    let mut traj = Trajectory::new();
    traj.push(0.0, psi0.clone())?;
    let mut u = psi0.clone();
    let trivial = params.lambda.is_zero();
    for step in 1..=steps {
        if !trivial {
            let k1 = rhs(&u)?;
            let mut tmp = u.clone();
            tmp.axpy(Complex64::new(0.5 * dt, 0.0), &k1)?;
            let k2 = rhs(&tmp)?;
            let mut tmp = u.clone();
            tmp.axpy(Complex64::new(0.5 * dt, 0.0), &k2)?;
            let k3 = rhs(&tmp)?;
            let mut tmp = u.clone();
            tmp.axpy(Complex64::new(dt, 0.0), &k3)?;
            let k4 = rhs(&tmp)?;
            u.axpy(Complex64::new(dt / 6.0, 0.0), &k1)?;
            u.axpy(Complex64::new(dt / 3.0, 0.0), &k2)?;
            u.axpy(Complex64::new(dt / 3.0, 0.0), &k3)?;
            u.axpy(Complex64::new(dt / 6.0, 0.0), &k4)?;
        }
        let t = step as f64 * dt;
        check_finite(&u, step, t)?;
        if step % out_every == 0 || step == steps {
            traj.push(t, u.clone())?;
        }
    }
    Ok(traj)
}

/// `α₀(y)χₙ(x)e^{-itωₙ(y)}` with `ωₙ = λ(0,y)|α₀|^{2σ}‖χₙ‖_{L^{2σ+2}}^{2σ+2}`,
/// projected onto the grid.
pub fn polarized_exact(
    alpha0: impl Fn(f64) -> Complex64,
    n: usize,
    t: f64,
    params: &ModelParams,
) -> Result<SpectralField> {
    let grid = &params.grid;
    if n >= grid.n_modes() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: grid.n_modes(),
        });
    }
    let norm = chi_norm_pow(n, 2 * params.sigma + 2, grid.b())?;
    let lambda = &params.lambda;
    // Evaluate λ up front so errors surface instead of being swallowed.
    lambda.eval(0.0, 0.0)?;
    let sigma = params.sigma as i32;
    let profile = |y: f64| {
        let a = alpha0(y);
        let omega = lambda.eval(0.0, y).unwrap_or(f64::NAN) * a.norm_sqr().powi(sigma) * norm;
        a * phase(t * omega)
    };
    let g = project_profile(grid, profile);
    let mut u = SpectralField::zeros(grid);
    u.coeffs_mut()
        .row_mut(n)
        .iter_mut()
        .zip(&g)
        .for_each(|(c, v)| *c = *v);
    if !u.is_finite() {
        return Err(invalid("coupling could not be evaluated on the y grid"));
    }
    Ok(u)
}

/// `max_t ‖e^{itH/ε²}ψ^ε(t) − φ(t)‖` over matching samples.
pub fn compare_to_effective(
    full: &Trajectory,
    effective: &Trajectory,
    eps: f64,
    b: f64,
) -> Result<f64> {
    if full.len() != effective.len() || full.is_empty() {
        return Err(Error::TimeGridMismatch);
    }
    let mut worst = 0.0f64;
    for ((&t, psi), (&s, phi)) in full
        .times()
        .iter()
        .zip(full.fields())
        .zip(effective.times().iter().zip(effective.fields()))
    {
        if (t - s).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::TimeGridMismatch);
        }
        if psi.grid().b() != b {
            return Err(invalid("b does not match the trajectory's grid"));
        }
        worst = worst.max(flow_h(psi, -t / (eps * eps)).distance(phi)?);
    }
    Ok(worst)
}

/// `2^{-1/2}(χ₀ + χ₁)(x) · π^{-1/4}e^{-y²/2}`.
pub fn standard_initial(grid: &Arc<Grid>) -> Result<SpectralField> {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    SpectralField::separable(grid, &[a, a], |y| {
        Complex64::new(PI.powf(-0.25) * (-0.5 * y * y).exp(), 0.0)
    })
}

/// The fixed test problem: `b = 1`, `σ = 1`, `λ = 1`, `N_h = 32`, `N_y = 64`,
/// `L_y = 16`, run to `T = 0.5`.
pub mod standard {
    use super::*;

    pub const B: f64 = 1.0;
    pub const SIGMA: u32 = 1;
    pub const LAMBDA: f64 = 1.0;
    pub const N_H: usize = 32;
    pub const N_Y: usize = 64;
    pub const L_Y: f64 = 16.0;
    pub const T_FINAL: f64 = 0.5;

    pub fn grid() -> Result<Arc<Grid>> {
        Grid::standard(B, N_H, L_Y, N_Y)
    }

    pub fn params(eps: f64) -> Result<ModelParams> {
        ModelParams::new(&grid()?, SIGMA, Coupling::Constant(LAMBDA), eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::random_field;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> Arc<Grid> {
        Grid::standard(1.0, 8, 8.0, 16).unwrap()
    }

    #[test]
    fn step_plan() {
        let p = StepPlan::new(0.5, 1e-3, 0.01).unwrap();
        assert_eq!((p.steps, p.out_every), (500, 10));
        let p = StepPlan::new(0.5, 6e-4, 0.01).unwrap();
        assert_eq!(p.out_every, 17);
        assert!((p.dt * p.out_every as f64 - 0.01).abs() < 1e-15);
        assert!(p.dt <= 6e-4);
        assert!(StepPlan::new(0.5, 1e-3, 0.3).is_err());
    }

    #[test]
    fn trajectory_rejects_bad_times() {
        let g = small_grid();
        let mut tr = Trajectory::new();
        tr.push(0.0, SpectralField::zeros(&g)).unwrap();
        assert!(tr.push(0.0, SpectralField::zeros(&g)).is_err());
    }

    #[test]
    fn linear_full_solver_is_the_linear_flow() {
        let g = small_grid();
        let params = ModelParams::new(&g, 1, Coupling::Constant(0.0), 0.2).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(1), None);
        let tr = solve_full(&params, &u, 0.3, 1e-3, 100).unwrap();
        let table = DisplacementTable::new(&g, 0.2).unwrap();
        let want = table.flow(&u, 0.3).unwrap();
        assert!(tr.last().unwrap().1.distance(&want).unwrap() < 1e-10);
        assert_eq!(tr.times().len(), 4);
    }

    #[test]
    fn split_oracle_converges_to_table() {
        let g = small_grid();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(2), None);
        let table = DisplacementTable::new(&g, 0.3).unwrap();
        let exact = table.flow(&u, 0.1).unwrap();
        let e1 = split_linear_flow(&u, 0.1, 0.3, 1e-4)
            .unwrap()
            .distance(&exact)
            .unwrap();
        let e2 = split_linear_flow(&u, 0.1, 0.3, 5e-5)
            .unwrap()
            .distance(&exact)
            .unwrap();
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{e1} {e2}");
    }

    #[test]
    fn full_solver_conserves_mass_and_is_second_order() {
        let g = small_grid();
        let params = ModelParams::new(&g, 1, Coupling::Constant(1.0), 0.3).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(3), Some(4));
        let u = &u * 2.0;
        let run = |dt: f64| solve_full(&params, &u, 0.2, dt, 1_000_000).unwrap();
        let a = run(4e-3);
        let b = run(2e-3);
        let c = run(1e-3);
        assert!(c.mass_drift() < 1e-12);
        let (_, ua) = a.last().unwrap();
        let (_, ub) = b.last().unwrap();
        let (_, uc) = c.last().unwrap();
        let ratio = ua.distance(ub).unwrap() / ub.distance(uc).unwrap();
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn observer_sees_every_step() {
        let g = small_grid();
        let params = ModelParams::new(&g, 1, Coupling::Constant(1.0), 0.3).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(6), None);
        let table = DisplacementTable::new(&g, 0.3).unwrap();
        let mut seen = Vec::new();
        let tr = solve_full_observed(&params, &table, &u, 0.02, 1e-3, 5, |t, f| {
            seen.push((t, f.clone()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 21);
        let plain = solve_full(&params, &u, 0.02, 1e-3, 5).unwrap();
        for ((a, b), (t, c)) in tr
            .fields()
            .iter()
            .zip(plain.fields())
            .zip(seen.iter().step_by(5))
        {
            assert!(a.distance(b).unwrap() < 1e-14);
            assert!(a.distance(c).unwrap() == 0.0, "t={t}");
        }
    }

    #[test]
    fn filtering_round_trip() {
        let g = small_grid();
        let params = ModelParams::new(&g, 1, Coupling::Constant(1.0), 0.3).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(4), None);
        let tr = solve_full(&params, &u, 0.05, 1e-3, 10).unwrap();
        let f = filter_trajectory(&tr, 0.3, 1.0).unwrap();
        assert!(f.fields()[0].distance(&u).unwrap() == 0.0);
        for ((&t, a), b) in f.times().iter().zip(f.fields()).zip(tr.fields()) {
            assert!((a.mass() - b.mass()).abs() < 1e-14);
            assert!(flow_h(a, t / 0.09).distance(b).unwrap() < 1e-13);
        }
    }

    #[test]
    fn effective_trivial_and_reversible() {
        let g = small_grid();
        let rule = ThetaRule::default_for(8, 1, 1.0).unwrap();
        let u = random_field(&g, &mut ChaCha8Rng::seed_from_u64(5), Some(4));
        let zero = ModelParams::new(&g, 1, Coupling::parse("x*y").unwrap(), 1.0).unwrap();
        let tr = solve_effective(&zero, &u, 0.1, 1e-2, 1, rule).unwrap();
        assert!(tr.fields().iter().all(|f| f.distance(&u).unwrap() == 0.0));

        let params = ModelParams::new(&g, 1, Coupling::Constant(1.0), 1.0).unwrap();
        let u = &u * 3.0;
        let fwd = solve_effective(&params, &u, 0.2, 1e-3, 1000, rule).unwrap();
        assert!(fwd.mass_drift() < 1e-8);
        let back = params.with_lambda(params.lambda.negated());
        let (_, mid) = fwd.last().unwrap();
        let rev = solve_effective(&back, mid, 0.2, 1e-3, 1000, rule).unwrap();
        assert!(rev.last().unwrap().1.distance(&u).unwrap() < 1e-7);
    }

    #[test]
    fn polarized_constant_profile() {
        let g = small_grid();
        let params = ModelParams::new(&g, 1, Coupling::Constant(1.0), 1.0).unwrap();
        let one = |_| Complex64::new(1.0, 0.0);
        let p0 = polarized_exact(one, 0, 0.0, &params).unwrap();
        let norm = (2.0 * g.l_y()).sqrt();
        assert!((p0.coeffs()[[0, 0]] - norm).norm() < 1e-13);
        let t = 2.0;
        let pt = polarized_exact(one, 0, t, &params).unwrap();
        let omega = (1.0 / TAU).sqrt();
        assert!((omega - 0.398942).abs() < 1e-6);
        assert!((pt.coeffs()[[0, 0]] - Complex64::from_polar(norm, -omega * t)).norm() < 1e-12);
        assert!(polarized_exact(one, 8, 0.0, &params).is_err());
    }

    #[test]
    fn compare_checks_times() {
        let g = small_grid();
        let mut a = Trajectory::new();
        let mut b = Trajectory::new();
        a.push(0.0, SpectralField::zeros(&g)).unwrap();
        b.push(0.0, SpectralField::zeros(&g)).unwrap();
        a.push(0.1, SpectralField::zeros(&g)).unwrap();
        assert!(matches!(
            compare_to_effective(&a, &b, 0.1, 1.0),
            Err(Error::TimeGridMismatch)
        ));
        b.push(0.2, SpectralField::zeros(&g)).unwrap();
        assert!(matches!(
            compare_to_effective(&a, &b, 0.1, 1.0),
            Err(Error::TimeGridMismatch)
        ));
    }

    #[test]
    fn standard_data_is_normalized() {
        let g = standard::grid().unwrap();
        let u = standard_initial(&g).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
        assert!((u.mode_mass(0) - 0.5).abs() < 1e-12);
    }
}
