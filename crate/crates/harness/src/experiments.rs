//! The experiments behind the subcommands. Each returns a serializable
//! summary (embedding the resolved config) and leaves file output to the
//! caller.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use iwatsuka::averaging::{gcal, IdentityAccumulator, ThetaRule};
use iwatsuka::solvers::{
    compare_to_effective, default_full_dt, polarized_exact, solve_effective, solve_full_observed,
    solve_full_with, standard_initial, ModelParams, StepPlan, Trajectory,
};
use iwatsuka::{flow_h, random_field, DisplacementTable, Grid, SpectralField};

use crate::config::{Initial, RunConfig};
use crate::error::HarnessError;

type Result<T> = std::result::Result<T, HarnessError>;

/// Error values below this many noise floors make a fit untrustworthy.
pub const NOISE_MARGIN: f64 = 10.0;

/// Residuals at or below this count as identically zero.
pub const DEGENERATE_RESIDUAL: f64 = 1e-10;

/// `π^{-1/4}e^{-y²/2}`, the `y` profile of the named initial data.
pub fn gaussian(y: f64) -> Complex64 {
    Complex64::new(PI.powf(-0.25) * (-0.5 * y * y).exp(), 0.0)
}

pub fn grid(cfg: &RunConfig) -> Result<Arc<Grid>> {
    Ok(Grid::standard(cfg.b, cfg.n_h, cfg.l_y, cfg.n_y)?)
}

pub fn params(cfg: &RunConfig, grid: &Arc<Grid>, eps: f64) -> Result<ModelParams> {
    Ok(ModelParams::new(
        grid,
        cfg.sigma,
        cfg.lambda.coupling()?,
        eps,
    )?)
}

pub fn theta_rule(cfg: &RunConfig) -> Result<ThetaRule> {
    Ok(match cfg.n_theta {
        Some(n) => ThetaRule::new(n, cfg.b)?,
        None => ThetaRule::default_for(cfg.n_h, cfg.sigma, cfg.b)?,
    })
}

pub fn initial_field(cfg: &RunConfig, grid: &Arc<Grid>) -> Result<SpectralField> {
    Ok(match cfg.initial_data()? {
        Initial::Standard => standard_initial(grid)?,
        Initial::Polarized(n) => {
            let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
            amps[n] = Complex64::new(1.0, 0.0);
            SpectralField::separable(grid, &amps, gaussian)?
        }
        Initial::Random(seed) => {
            // Keep the top modes empty so shifts stay resolved.
            let support = (cfg.n_h > 5).then(|| cfg.n_h - 5);
            random_field(grid, &mut ChaCha8Rng::seed_from_u64(seed), support)
        }
    })
}

fn full_dt(cfg: &RunConfig, eps: f64) -> f64 {
    cfg.dt.unwrap_or_else(|| default_full_dt(eps, cfg.b))
}

/// Runs `f` over the `ε` values, in parallel unless `IWSK_THREADS=0`.
/// Results keep the input order.
pub fn sweep<T: Send>(
    epsilons: &[f64],
    f: impl Fn(f64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    let threads = std::env::var("IWSK_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    match threads {
        Some(0) => epsilons.iter().map(|&e| f(e)).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("IWSK_THREADS: {e}")))?
            .install(|| epsilons.par_iter().map(|&e| f(e)).collect()),
        None => epsilons.par_iter().map(|&e| f(e)).collect(),
    }
}

/// Ordinary least squares of `log y` on `log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the fit residuals in `log y`.
    pub residual: f64,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Option<LogFit> {
    if xs.len() != ys.len() || xs.len() < 2 || !xs.iter().chain(ys).all(|&v| v > 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Some(LogFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

/// True when the values strictly decrease as `ε` decreases.
fn strictly_decreasing_in_eps(epsilons: &[f64], values: &[f64]) -> bool {
    let mut pairs: Vec<(f64, f64)> = epsilons
        .iter()
        .copied()
        .zip(values.iter().copied())
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.windows(2).all(|w| w[1].1 < w[0].1)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config: RunConfig,
    pub epsilon: f64,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift: f64,
    pub sigma2_final: f64,
    /// Top-mode leakage of the displacement table at the largest shift.
    pub table_leakage: f64,
    pub table_unresolved: bool,
}

pub fn simulate(cfg: &RunConfig) -> Result<(SimulateSummary, Trajectory)> {
    let grid = grid(cfg)?;
    let eps = cfg.epsilon;
    let params = params(cfg, &grid, eps)?;
    let psi0 = initial_field(cfg, &grid)?;
    let plan = StepPlan::new(cfg.t_final, full_dt(cfg, eps), cfg.out_interval)?;
    let table = DisplacementTable::new(&grid, eps)?;
    let traj = solve_full_with(&params, &table, &psi0, cfg.t_final, plan.dt, plan.out_every)?;
    let summary = SimulateSummary {
        config: cfg.clone(),
        epsilon: eps,
        dt: plan.dt,
        steps: plan.steps,
        samples: traj.len(),
        mass_initial: traj.mass()[0],
        mass_final: *traj.mass().last().expect("nonempty"),
        mass_drift: traj.mass_drift(),
        sigma2_final: *traj.sigma2().last().expect("nonempty"),
        table_leakage: table.leakage(),
        table_unresolved: table.unresolved(),
    };
    Ok((summary, traj))
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveSummary {
    pub config: RunConfig,
    pub dt: f64,
    pub steps: usize,
    pub n_theta: usize,
    pub samples: usize,
    pub mass_drift: f64,
    pub sigma2_final: f64,
}

fn effective_run(
    cfg: &RunConfig,
    grid: &Arc<Grid>,
    psi0: &SpectralField,
) -> Result<(StepPlan, Trajectory)> {
    let params = params(cfg, grid, 1.0)?;
    let plan = StepPlan::new(cfg.t_final, cfg.dt_effective, cfg.out_interval)?;
    let traj = solve_effective(
        &params,
        psi0,
        cfg.t_final,
        plan.dt,
        plan.out_every,
        theta_rule(cfg)?,
    )?;
    Ok((plan, traj))
}

pub fn effective(cfg: &RunConfig) -> Result<(EffectiveSummary, Trajectory)> {
    let grid = grid(cfg)?;
    let psi0 = initial_field(cfg, &grid)?;
    let (plan, traj) = effective_run(cfg, &grid, &psi0)?;
    let summary = EffectiveSummary {
        config: cfg.clone(),
        dt: plan.dt,
        steps: plan.steps,
        n_theta: theta_rule(cfg)?.n_nodes(),
        samples: traj.len(),
        mass_drift: traj.mass_drift(),
        sigma2_final: *traj.sigma2().last().expect("nonempty"),
    };
    Ok((summary, traj))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergeSummary {
    pub config: RunConfig,
    pub epsilons: Vec<f64>,
    /// `max_t ‖e^{itH/ε²}ψ^ε(t) − φ(t)‖` per `ε`.
    pub errors: Vec<f64>,
    pub dts: Vec<f64>,
    pub mass_drifts: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub fit_residual: Option<f64>,
    pub strictly_decreasing: bool,
    /// Error estimate of the full solver at the smallest `ε`, from a rerun at
    /// half the step.
    pub noise_floor: f64,
    pub below_noise_floor: bool,
    pub effective_mass_drift: f64,
}

pub fn converge(cfg: &RunConfig) -> Result<ConvergeSummary> {
    let grid = grid(cfg)?;
    let psi0 = initial_field(cfg, &grid)?;
    let (_, eff) = effective_run(cfg, &grid, &psi0)?;
    let runs = sweep(&cfg.epsilons, |eps| {
        let params = params(cfg, &grid, eps)?;
        let plan = StepPlan::new(cfg.t_final, full_dt(cfg, eps), cfg.out_interval)?;
        let table = DisplacementTable::new(&grid, eps)?;
        let full = solve_full_with(&params, &table, &psi0, cfg.t_final, plan.dt, plan.out_every)?;
        let err = compare_to_effective(&full, &eff, eps, cfg.b)?;
        Ok((err, plan.dt, full.mass_drift()))
    })?;
    let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let noise_floor = noise_floor(cfg, &grid, &psi0)?;
    let fit = fit_loglog(&cfg.epsilons, &errors);
    Ok(ConvergeSummary {
        config: cfg.clone(),
        epsilons: cfg.epsilons.clone(),
        strictly_decreasing: strictly_decreasing_in_eps(&cfg.epsilons, &errors),
        below_noise_floor: errors.iter().any(|&e| e < NOISE_MARGIN * noise_floor),
        errors,
        dts: runs.iter().map(|r| r.1).collect(),
        mass_drifts: runs.iter().map(|r| r.2).collect(),
        slope: fit.map(|f| f.slope),
        intercept: fit.map(|f| f.intercept),
        fit_residual: fit.map(|f| f.residual),
        noise_floor,
        effective_mass_drift: eff.mass_drift(),
    })
}

/// Richardson estimate `(4/3)·max_t ‖ψ_dt − ψ_{dt/2}‖` of the full solver's
/// error at the smallest `ε`, floored at `10⁻¹²`.
fn noise_floor(cfg: &RunConfig, grid: &Arc<Grid>, psi0: &SpectralField) -> Result<f64> {
    let eps = cfg.epsilons.iter().copied().fold(f64::INFINITY, f64::min);
    let params = params(cfg, grid, eps)?;
    let plan = StepPlan::new(cfg.t_final, full_dt(cfg, eps), cfg.out_interval)?;
    let table = DisplacementTable::new(grid, eps)?;
    let a = solve_full_with(&params, &table, psi0, cfg.t_final, plan.dt, plan.out_every)?;
    let b = solve_full_with(
        &params,
        &table,
        psi0,
        cfg.t_final,
        plan.dt / 2.0,
        2 * plan.out_every,
    )?;
    let mut diff = 0.0f64;
    for (u, v) in a.fields().iter().zip(b.fields()) {
        diff = diff.max(u.distance(v)?);
    }
    Ok((4.0 / 3.0 * diff).max(1e-12))
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentitySummary {
    pub config: RunConfig,
    pub epsilons: Vec<f64>,
    /// Residual at `t_final`.
    pub residuals_final: Vec<f64>,
    /// Largest residual over `[0, t_final]`.
    pub residuals_sup: Vec<f64>,
    pub dts: Vec<f64>,
    pub slope_sup: Option<f64>,
    pub slope_final: Option<f64>,
    /// All residuals vanish: the data has no `y` dependence.
    pub degenerate: bool,
}

/// Residual of the averaging identity along one full-model run, sampled
/// every step. `refine` divides the step.
pub fn identity_run(
    cfg: &RunConfig,
    grid: &Arc<Grid>,
    psi0: &SpectralField,
    eps: f64,
    refine: usize,
) -> Result<(f64, f64, f64)> {
    let params = params(cfg, grid, eps)?;
    let dt_max = full_dt(cfg, eps).min(default_full_dt(eps, cfg.b)) / refine.max(1) as f64;
    let plan = StepPlan::new(cfg.t_final, dt_max, cfg.t_final)?;
    let table = DisplacementTable::new(grid, eps)?;
    let mut acc = IdentityAccumulator::new(grid, eps, cfg.b)?;
    let scale = eps * eps;
    solve_full_observed(
        &params,
        &table,
        psi0,
        cfg.t_final,
        plan.dt,
        plan.steps,
        |t, psi| {
            acc.push(t, &flow_h(psi, -t / scale))?;
            Ok(())
        },
    )?;
    Ok((acc.residual()?, acc.sup()?, plan.dt))
}

pub fn identity(cfg: &RunConfig) -> Result<IdentitySummary> {
    let grid = grid(cfg)?;
    let psi0 = initial_field(cfg, &grid)?;
    let runs = sweep(&cfg.epsilons, |eps| identity_run(cfg, &grid, &psi0, eps, 1))?;
    let finals: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let sups: Vec<f64> = runs.iter().map(|r| r.1).collect();
    Ok(IdentitySummary {
        config: cfg.clone(),
        epsilons: cfg.epsilons.clone(),
        slope_sup: fit_loglog(&cfg.epsilons, &sups).map(|f| f.slope),
        slope_final: fit_loglog(&cfg.epsilons, &finals).map(|f| f.slope),
        degenerate: sups.iter().all(|&r| r <= DEGENERATE_RESIDUAL),
        residuals_final: finals,
        residuals_sup: sups,
        dts: runs.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PolarizedSummary {
    pub config: RunConfig,
    pub mode: usize,
    pub times: Vec<f64>,
    /// `‖φ(t) − α₀χₙe^{-itωₙ}‖` per sample.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// `max_t ‖Pₙ^⊥φ(t)‖ / ‖φ(t)‖`.
    pub max_leakage: f64,
    pub mass_drift: f64,
}

pub fn polarized(cfg: &RunConfig) -> Result<PolarizedSummary> {
    let Initial::Polarized(n) = cfg.initial_data()? else {
        return Err(HarnessError::Config(
            "polarized needs initial = \"polarized(n)\"".into(),
        ));
    };
    let grid = grid(cfg)?;
    let params = params(cfg, &grid, 1.0)?;
    let psi0 = polarized_exact(gaussian, n, 0.0, &params)?;
    let plan = StepPlan::new(cfg.t_final, cfg.dt_effective, cfg.out_interval)?;
    let traj = solve_effective(
        &params,
        &psi0,
        cfg.t_final,
        plan.dt,
        plan.out_every,
        theta_rule(cfg)?,
    )?;
    let mut deviations = Vec::with_capacity(traj.len());
    let mut max_leakage = 0.0f64;
    for (&t, phi) in traj.times().iter().zip(traj.fields()) {
        deviations.push(phi.distance(&polarized_exact(gaussian, n, t, &params)?)?);
        let norm = phi.l2_norm();
        if norm > 0.0 {
            max_leakage = max_leakage.max(phi.project_mode_perp(n)?.l2_norm() / norm);
        }
    }
    Ok(PolarizedSummary {
        config: cfg.clone(),
        mode: n,
        times: traj.times().to_vec(),
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        deviations,
        max_leakage,
        mass_drift: traj.mass_drift(),
    })
}

/// Extremes of `‖u‖²_{Σ_εᵐ} / ‖u‖²_{Σᵐ}` over an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRange {
    pub min: f64,
    pub max: f64,
}

impl RatioRange {
    /// The two-sided bound with factor 2.
    pub fn holds(&self) -> bool {
        self.min >= 0.5 && self.max <= 2.0
    }
}

pub fn norm_ratio(ensemble: &[SpectralField], m: u32, eps: f64) -> Result<RatioRange> {
    let mut range = RatioRange {
        min: f64::INFINITY,
        max: 0.0,
    };
    for u in ensemble {
        let r = (u.sigma_eps_norm(m, eps)? / u.sigma_norm(m)).powi(2);
        range.min = range.min.min(r);
        range.max = range.max.max(r);
    }
    Ok(range)
}

/// Scan points below `ε_max` before bisecting.
const SCAN_POINTS: usize = 64;
const BISECTIONS: usize = 40;

/// Largest `ε ≤ ε_max` such that the bound holds on all of `(0, ε]` at the
/// scan resolution, refined by bisection at the first failure. The second
/// value is true when nothing failed up to `ε_max`.
pub fn largest_eps(ensemble: &[SpectralField], m: u32, eps_max: f64) -> Result<(f64, bool)> {
    let mut lo = 0.0;
    for j in 1..=SCAN_POINTS {
        let eps = eps_max * j as f64 / SCAN_POINTS as f64;
        if norm_ratio(ensemble, m, eps)?.holds() {
            lo = eps;
            continue;
        }
        let mut hi = eps;
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if norm_ratio(ensemble, m, mid)?.holds() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok((lo, false));
    }
    Ok((eps_max, true))
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEntry {
    pub m: u32,
    pub eps_m: f64,
    pub holds_on_whole_range: bool,
    pub ratio_at_eps_m: RatioRange,
    /// Fresh ensemble at `ε_m/2`.
    pub check_eps: f64,
    pub check_ratio: RatioRange,
    pub check_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormEquivSummary {
    pub config: RunConfig,
    pub entries: Vec<NormEntry>,
    /// `max sup_θ ‖𝒢(θ, u)‖ / ‖u‖_{Σ¹}` over the ensemble.
    pub gcal_constant: f64,
}

pub fn ensemble(grid: &Arc<Grid>, size: usize, seed: u64) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| random_field(grid, &mut rng, None))
        .collect()
}

pub fn normequiv(cfg: &RunConfig) -> Result<NormEquivSummary> {
    let grid = grid(cfg)?;
    let members = ensemble(&grid, cfg.ensemble, cfg.seed);
    let fresh = ensemble(&grid, cfg.ensemble, cfg.seed.wrapping_add(1));
    let mut entries = Vec::new();
    for m in 1..=3 {
        let (eps_m, whole) = largest_eps(&members, m, cfg.epsilon_max)?;
        let check_eps = 0.5 * eps_m;
        let check_ratio = norm_ratio(&fresh, m, check_eps)?;
        entries.push(NormEntry {
            m,
            eps_m,
            holds_on_whole_range: whole,
            ratio_at_eps_m: norm_ratio(&members, m, eps_m)?,
            check_eps,
            check_holds: check_ratio.holds(),
            check_ratio,
        });
    }
    let thetas: Vec<f64> = (0..64).map(|j| j as f64 * TAU / cfg.b / 64.0).collect();
    let mut gcal_constant = 0.0f64;
    for u in &members {
        let s1 = u.sigma_norm(1);
        for &theta in &thetas {
            gcal_constant = gcal_constant.max(gcal(theta, u).l2_norm() / s1);
        }
    }
    Ok(NormEquivSummary {
        config: cfg.clone(),
        entries,
        gcal_constant,
    })
}
