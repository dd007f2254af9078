use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use iwatsuka::solvers::split_linear_flow;
use iwatsuka::{flow_full_linear, flow_h, flow_y, random_field, DisplacementTable, Grid};

#[test]
fn linear_flow_matches_splitting_on_a_small_grid() {
    let grid = Grid::standard(2.0, 16, 6.0, 16).unwrap();
    let u = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(5), Some(10));
    let eps = 0.3;
    let table = DisplacementTable::new(&grid, eps).unwrap();
    let exact = flow_full_linear(&u, 0.05, eps, &table).unwrap();
    let split = split_linear_flow(&u, 0.05, eps, 2e-5).unwrap();
    assert!(exact.distance(&split).unwrap() < 1e-6);
}

#[test]
fn linear_flow_group_law_and_reversal() {
    let grid = Grid::standard(1.0, 16, 8.0, 16).unwrap();
    let u = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(6), None);
    let table = DisplacementTable::new(&grid, 0.1).unwrap();
    let ab = table.flow(&table.flow(&u, 0.013).unwrap(), 0.029).unwrap();
    let direct = table.flow(&u, 0.042).unwrap();
    assert!(ab.distance(&direct).unwrap() < 1e-12);
    let back = table.flow(&direct, -0.042).unwrap();
    assert!(back.distance(&u).unwrap() < 1e-12);
}

#[test]
fn table_is_tied_to_its_epsilon() {
    let grid = Grid::standard(1.0, 8, 8.0, 8).unwrap();
    let u = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(7), None);
    let table = DisplacementTable::new(&grid, 0.1).unwrap();
    assert!(flow_full_linear(&u, 0.1, 0.2, &table).is_err());
}

#[test]
fn free_flows_commute_and_preserve_norms() {
    let grid = Grid::standard(1.5, 10, 8.0, 16).unwrap();
    let u = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(8), None);
    let hy = flow_y(&flow_h(&u, 0.7), 0.3);
    let yh = flow_h(&flow_y(&u, 0.3), 0.7);
    assert!(hy.distance(&yh).unwrap() < 1e-15);
    for m in 0..4 {
        assert!((hy.sigma_norm(m) - u.sigma_norm(m)).abs() <= 1e-13 * u.sigma_norm(m));
    }
}
