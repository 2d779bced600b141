use std::f64::consts::PI;

use lsmass::functionals::{eval_any, eval_f, eval_fp, t_floor};
use lsmass::mass::penrose_check;
use lsmass::{MetricModel, RadialGrid, RadialSolution};
use proptest::prelude::*;

fn green(model: &MetricModel) -> RadialSolution {
    let exterior = !model.is_complete_at_pole();
    RadialSolution::solve_green(model, RadialGrid::for_green(model, exterior).unwrap(), exterior).unwrap()
}

fn cap(model: &MetricModel, p: f64) -> RadialSolution {
    RadialSolution::solve_capacitary(model, p, RadialGrid::for_capacitary(model).unwrap()).unwrap()
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_curvature_nonnegative(m in 0.0f64..5.0, a in 0.05f64..3.0, x in 0.0f64..1.0) {
        let model = MetricModel::smoothed_schwarzschild(m, a).unwrap();
        let lo = (a / 10.0).max(1e-3);
        let r = (lo.ln() + x * (1e6f64.ln() - lo.ln())).exp();
        prop_assert!(model.scalar_curvature(r).unwrap() >= -1e-12);
    }

    #[test]
    fn schwarzschild_is_scalar_flat(m in 0.01f64..5.0, r in log_uniform(0.01, 1e6)) {
        let model = MetricModel::schwarzschild(m).unwrap();
        let r = r.max(1.01 * model.domain_start());
        prop_assert!(model.scalar_curvature(r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn green_flux_is_conserved(m in 0.0f64..4.0, a_frac in 0.1f64..2.0, r in log_uniform(1e-2, 1e5)) {
        let model = MetricModel::smoothed_schwarzschild(m, a_frac * m.max(0.1)).unwrap();
        let sol = green(&model);
        let r = r.clamp(sol.r_min(), sol.r_max());
        let rho = model.area_radius(r).unwrap();
        let flux = rho * rho * sol.grad_norm(r).unwrap();
        prop_assert!((flux - 1.0).abs() < 1e-10, "flux {}", flux);
    }

    #[test]
    fn capacitary_flux_is_conserved(p in 1.1f64..2.9, m in 0.2f64..3.0, x in 0.0f64..1.0) {
        let model = MetricModel::schwarzschild_horizon(m).unwrap();
        let sol = cap(&model, p);
        let r = sol.r_min() * (sol.r_max() / sol.r_min()).powf(x);
        let rho = model.area_radius(r).unwrap();
        let flux = rho * rho * sol.grad_norm(r).unwrap().powf(p - 1.0);
        let c = sol.flux_constant();
        prop_assert!((flux / c - 1.0).abs() < 1e-10, "flux {} vs {}", flux, c);
    }

    #[test]
    fn flat_f_vanishes(t in log_uniform(1e-2, 1e4)) {
        let sol = green(&MetricModel::flat());
        prop_assert!(eval_f(&sol, t).unwrap().f_value.abs() < 1e-10);
    }

    #[test]
    fn flat_fp_vanishes(p in 1.1f64..2.9, x in 0.0f64..1.0) {
        let model = MetricModel::flat().with_inner_radius(1.0).unwrap();
        let sol = cap(&model, p);
        let t = (1.0 + 1e4 * x).max(t_floor(&sol).unwrap());
        prop_assert!(eval_fp(&sol, t).unwrap().f_value.abs() < 1e-9 * t);
    }

    #[test]
    fn green_f_is_monotone(m in 0.1f64..3.0, a_frac in 0.3f64..1.5, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let model = MetricModel::smoothed_schwarzschild(m, a_frac * m).unwrap();
        let sol = green(&model);
        let lo = t_floor(&sol).unwrap() * (1.0 + 1e-9);
        let hi = 1e4 * m.max(1.0);
        let at = |z: f64| (lo.ln() + z * (hi.ln() - lo.ln())).exp();
        let (s, t) = (at(x.min(y)), at(x.max(y)));
        let fs = eval_any(&sol, s).unwrap().f_value;
        let ft = eval_any(&sol, t).unwrap().f_value;
        prop_assert!(fs <= ft + 1e-10 * ft.abs().max(1.0), "F({}) = {} > F({}) = {}", s, fs, t, ft);
    }

    #[test]
    fn fp_is_monotone(p in 1.2f64..2.5, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = cap(&model, p);
        let lo = t_floor(&sol).unwrap();
        let at = |z: f64| lo * (1e4 / lo).powf(z);
        let (s, t) = (at(x.min(y)), at(x.max(y)));
        let fs = eval_fp(&sol, s).unwrap().f_value;
        let ft = eval_fp(&sol, t).unwrap().f_value;
        prop_assert!(fs <= ft + 1e-10 * ft.abs().max(1.0));
    }

    #[test]
    fn fp_tends_to_green_as_p_tends_to_two(t in log_uniform(3.0, 1e3)) {
        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let f2 = eval_fp(&cap(&model, 2.0), t).unwrap().f_value;
        let lo = eval_fp(&cap(&model, 2.0 - 1e-5), t).unwrap().f_value;
        let hi = eval_fp(&cap(&model, 2.0 + 1e-5), t).unwrap().f_value;
        prop_assert!((lo - f2).abs() < 1e-3 * f2.abs(), "{} vs {}", lo, f2);
        prop_assert!((hi - f2).abs() < 1e-3 * f2.abs(), "{} vs {}", hi, f2);
        // p = 2 on the horizon model is the exterior Green's function of Schwarzschild
        let g = eval_f(&green(&MetricModel::schwarzschild(1.0).unwrap()), t).unwrap().f_value;
        prop_assert!((g - f2).abs() < 1e-9 * g.abs().max(4.0 * PI));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn beta_bounded_by_twice_mass_and_nonincreasing(m in 0.2f64..4.0, p1 in 1.05f64..2.9, p2 in 1.05f64..2.9) {
        let (lo, hi) = (p1.min(p2), p1.max(p2));
        let model = MetricModel::schwarzschild_horizon(m).unwrap();
        let rep = penrose_check(&model, &[lo, hi]).unwrap();
        for row in &rep.rows {
            prop_assert!(row.beta <= 2.0 * m + 1e-9, "beta {} at p {}", row.beta, row.p);
        }
        prop_assert!(rep.rows[0].beta >= rep.rows[1].beta - 1e-12 * m);
    }
}
