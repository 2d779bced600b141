use std::f64::consts::PI;

use lsmass::functionals::{eval_f, log_grid};
use lsmass::grid::*;
use lsmass::{MetricModel, RadialGrid, RadialSolution};

fn solve(model: &MetricModel, l: f64, n: usize, pole: [f64; 3]) -> GridSolution {
    let spec = GridSpec::new(l, n, pole).unwrap();
    solve_green_3d(ConformalField::from_model(model, spec).unwrap(), SolverOptions::default()).unwrap()
}

#[test]
fn flat_pole_centre_and_off_centre() {
    for pole in [[0.0; 3], [8.0, 0.0, 0.0]] {
        let sol = solve(&MetricModel::flat(), 64.0, 128, pole);
        let err = sol.sup_error_vs(3.0, |d| Ok(1.0 - 1.0 / d)).unwrap();
        assert!(err < 2e-3, "{err}");
    }
}

#[test]
fn flat_surface_examples() {
    let sol = solve(&MetricModel::flat(), 64.0, 128, [8.0, 0.0, 0.0]);
    let t = 10.0;
    let s = extract_level_surface(&sol, 1.0 - 1.0 / t).unwrap();
    assert!(s.closed);
    assert_eq!(s.euler_char, 2);
    let i = surface_integrals(&s);
    assert!((i.area / (4.0 * PI * t * t) - 1.0).abs() < 1e-2);
    assert!((i.flux / (4.0 * PI) - 1.0).abs() < 1e-2);
    assert!((i.int_grad2 / (4.0 * PI / (t * t)) - 1.0).abs() < 1e-2);
    assert!(s.vertex_grad.iter().all(|g| (g * t * t - 1.0).abs() < 1e-2));
    assert!(s.vertex_h.iter().all(|h| (h * t / 2.0 - 1.0).abs() < 1e-2));
}

#[test]
fn flat_sweep_is_flat_and_monotone() {
    let sol = solve(&MetricModel::flat(), 64.0, 128, [8.0, 0.0, 0.0]);
    let rep = grid_sweep(&sol, &log_grid(5.0, 20.0, 8).unwrap(), 0.05 * 8.0 * PI);
    assert!(rep.skipped.is_empty());
    assert!(rep.samples.iter().all(|s| s.f_value.abs() <= 0.05 * 8.0 * PI));
    assert!(rep.is_monotone());
}

#[test]
fn smoothed_coarse_grid_tracks_radial_oracle() {
    let model = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
    let radial = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, false).unwrap(), false).unwrap();
    let sol = solve(&model, 32.0, 64, [0.0; 3]);
    let err = sol.sup_error_vs(3.0, |d| radial.u(d)).unwrap();
    assert!(err < 5e-3, "{err}");
    let s = extract_level_surface(&sol, 0.9).unwrap();
    let i = surface_integrals(&s);
    let oracle = eval_f(&radial, 10.0).unwrap();
    let rho = model.area_radius(oracle.radius).unwrap();
    assert!((i.area / (4.0 * PI * rho * rho) - 1.0).abs() < 2e-2);
    assert!((i.f_value(10.0) / oracle.f_value - 1.0).abs() < 5e-2);
}

#[test]
fn imported_field_solves_like_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.bin");
    let model = MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap();
    let spec = GridSpec::new(48.0, 48, [2.0, 0.0, 0.0]).unwrap();
    write_field(&ConformalField::from_model(&model, spec).unwrap(), &path).unwrap();
    let imported = solve_green_3d(read_field(&path).unwrap(), SolverOptions::default()).unwrap();
    let direct = solve(&model, 48.0, 48, [2.0, 0.0, 0.0]);
    let s1 = surface_integrals(&extract_level_surface(&imported, 0.9).unwrap());
    let s2 = surface_integrals(&extract_level_surface(&direct, 0.9).unwrap());
    assert!((s1.flux / (4.0 * PI) - 1.0).abs() < 2e-2);
    assert!((s1.f_value(10.0) - s2.f_value(10.0)).abs() < 5e-2 * s2.f_value(10.0));
}

#[test]
fn iteration_cap_is_reported() {
    let model = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
    let spec = GridSpec::new(32.0, 32, [0.0; 3]).unwrap();
    let field = ConformalField::from_model(&model, spec).unwrap();
    let err = solve_green_3d(field, SolverOptions { tol: 1e-9, max_iterations: 3 }).unwrap_err();
    assert!(matches!(err, lsmass::Error::NonConvergence { iterations: 3, .. }));
}
