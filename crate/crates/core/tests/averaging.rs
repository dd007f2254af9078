use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use iwatsuka::averaging::{identity_residual, identity_residual_sup};
use iwatsuka::solvers::{default_full_dt, filter_trajectory, standard, standard_initial};
use iwatsuka::{
    f_av, random_field, solve_full, Coupling, Grid, ModelParams, SpectralField, ThetaRule,
};

fn identity_for(params: &ModelParams, psi0: &SpectralField, t: f64, dt: f64) -> (f64, f64) {
    let traj = solve_full(params, psi0, t, dt, 1).unwrap();
    let filtered = filter_trajectory(&traj, params.eps, params.b()).unwrap();
    (
        identity_residual(&filtered, params.eps, params.b()).unwrap(),
        identity_residual_sup(&filtered, params.eps, params.b()).unwrap(),
    )
}

#[test]
fn identity_vanishes_without_coupling_and_y_dependence() {
    let grid = Grid::standard(1.0, 12, 16.0, 16).unwrap();
    let half = Complex64::new(0.5, 0.0);
    let psi0 = SpectralField::separable(&grid, &[half, half, half, half], |_| {
        Complex64::new(0.25, 0.0)
    })
    .unwrap();
    let params = ModelParams::new(&grid, 1, Coupling::Constant(0.0), 0.2).unwrap();
    let (last, sup) = identity_for(&params, &psi0, 0.2, default_full_dt(0.2, 1.0));
    assert!(last <= 1e-10 && sup <= 1e-10, "{last:e} {sup:e}");
}

#[test]
fn identity_residual_is_stable_under_step_refinement() {
    let grid = standard::grid().unwrap();
    let psi0 = standard_initial(&grid).unwrap();
    let params = standard::params(0.2).unwrap();
    let dt = default_full_dt(0.2, 1.0);
    let (_, coarse) = identity_for(&params, &psi0, 0.1, dt);
    let (_, fine) = identity_for(&params, &psi0, 0.1, dt / 2.0);
    assert!(coarse > 1e-3);
    assert!((coarse - fine).abs() <= 0.1 * fine, "{coarse} {fine}");
}

#[test]
fn identity_rejects_coarse_sampling() {
    let grid = Grid::standard(1.0, 4, 8.0, 8).unwrap();
    let psi0 = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(2), None);
    let params = ModelParams::new(&grid, 1, Coupling::Constant(1.0), 0.1).unwrap();
    let traj = solve_full(&params, &psi0, 0.1, 0.01, 1).unwrap();
    let filtered = filter_trajectory(&traj, 0.1, 1.0).unwrap();
    assert!(identity_residual(&filtered, 0.1, 1.0).is_err());
}

fn ensemble(grid: &Arc<Grid>, n: usize) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    (0..n)
        .map(|_| random_field(grid, &mut rng, Some(8)))
        .collect()
}

#[test]
fn averaged_nonlinearity_is_cubic_and_gauge_covariant() {
    let grid = Grid::standard(1.0, 12, 8.0, 16).unwrap();
    let lambda = Coupling::parse("tanh(y)+2").unwrap();
    let rule = ThetaRule::default_for(12, 1, 1.0).unwrap();
    let c = Complex64::from_polar(1.7, 0.4);
    for u in ensemble(&grid, 4) {
        let base = f_av(&u, 1, &lambda, 0.0, rule).unwrap();
        let scaled = f_av(&u.scaled(c), 1, &lambda, 0.0, rule).unwrap();
        let want = base.scaled(c * c.norm_sqr());
        assert!(scaled.distance(&want).unwrap() <= 1e-12 * want.l2_norm());
        // A real coupling conserves mass: ⟨F_av(u), u⟩ is real.
        assert!(base.inner(&u).unwrap().im.abs() <= 1e-13);
    }
}

#[test]
fn averaged_nonlinearity_rejects_coarse_theta_rule() {
    let grid = Grid::standard(1.0, 12, 8.0, 16).unwrap();
    let u = ensemble(&grid, 1).pop().unwrap();
    let rule = ThetaRule::new(8, 1.0).unwrap();
    assert!(f_av(&u, 1, &Coupling::Constant(1.0), 0.0, rule).is_err());
}
