//! The monotone functionals `F(t)` (Green's function) and `F_p(t)`
//! (p-capacitary potential) along the level sets of a radial solution.
//!
//! On the level `Σ_t` (the sphere of coordinate radius `r`, area radius
//! `ρ`) the surface integrals are closed form:
//!
//! ```text
//! F_p(t) = 4πt − (t^γ / c) ∫|∇u| H dσ + (t^{2γ−1} / c²) ∫|∇u|² dσ,   γ = 2/(p−1)
//!        = 4πt [ (1 − μ)² − 4μ r φ'/φ ],                          μ = (t/ρ)^{γ−1}
//! ```
//!
//! The second form has no cancellation between the three O(t) terms, so
//! `F` keeps full relative precision out to t ~ 10⁴ and beyond. For the
//! Green's function `p = 2`, `c = 1` and the level is `u = 1 − 1/t`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::radial::{Problem, RadialSolution};

/// Terms of `F'(t) = (4π − ∫R^Σ/2) + ∫[ |∇^Σ|∇u||²/|∇u|² + R/2 + |h̊|²/2 + κ_p (2q|∇u|/(1−u) − H)² ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeTerms {
    pub gauss_bonnet_deficit: f64,
    pub grad_term: f64,
    pub scalar_term: f64,
    pub traceless_term: f64,
    pub sphere_deviation: f64,
}

impl DerivativeTerms {
    pub fn total(&self) -> f64 {
        self.gauss_bonnet_deficit
            + self.grad_term
            + self.scalar_term
            + self.traceless_term
            + self.sphere_deviation
    }
}

/// `κ_p = (5 − p)/(4(p − 1))`; equal to 3/4 at p = 2.
pub fn kappa(p: f64) -> f64 {
    (5.0 - p) / (4.0 * (p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetSample {
    pub t: f64,
    /// The level value `τ` of `u` (`1 − 1/t`, or `α_p(t)`).
    pub level: f64,
    /// Coordinate radius of the level sphere.
    pub radius: f64,
    pub flux: f64,
    pub int_grad2: f64,
    pub int_grad_h: f64,
    pub f_value: f64,
    pub terms: Option<DerivativeTerms>,
}

/// `F` from measured surface integrals, for levels that are not round
/// spheres. `flux_weight` multiplies `t` in place of the constant 4π.
pub fn f_from_integrals(t: f64, flux_weight: f64, int_grad_h: f64, int_grad2: f64) -> f64 {
    flux_weight * t - t * t * int_grad_h + t * t * t * int_grad2
}

/// `1 − u` on the level belonging to `t`.
pub fn level_one_minus_u(sol: &RadialSolution, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
    }
    match sol.problem() {
        Problem::GreenPole => Ok(1.0 / t),
        Problem::Capacitary => {
            let (c, beta) = sol.cp_beta()?;
            if t < beta * (1.0 - 1e-12) {
                return Err(Error::Domain(format!("t = {t} lies below β_p = {beta}")));
            }
            let q = sol.q();
            Ok(c * q * t.powf(-1.0 / q))
        }
    }
}

/// Lower end of the admissible `t` range: β_p, or the level of the
/// innermost grid node for the Green's function.
pub fn t_floor(sol: &RadialSolution) -> Result<f64> {
    match sol.problem() {
        Problem::GreenPole => Ok(1.0 / sol.one_minus_u(sol.r_min())?),
        Problem::Capacitary => Ok(sol.cp_beta()?.1),
    }
}

fn evaluate(sol: &RadialSolution, t: f64, with_terms: bool) -> Result<LevelSetSample> {
    let omu = level_one_minus_u(sol, t)?;
    let r = if sol.problem() == Problem::Capacitary && omu >= sol.c_p() * sol.kernel_table()[0] {
        // t = β_p is the inner boundary itself
        sol.r_min()
    } else {
        sol.radius_of_level(omu)?
    };
    let geo = sol.model().sphere_geometry(r)?;
    let d = sol.model().derivs(r)?;
    let p = sol.p();
    let gamma = 2.0 / (p - 1.0);
    let rho = geo.area_radius;
    let g = sol.grad_norm(r)?;
    let area = geo.area;

    // μ = (t/ρ)^{γ−1}; `w = −2rφ'/φ = 1 − dρ/ds`.
    let ln_lambda = (t / rho).ln();
    let one_minus_mu = -((gamma - 1.0) * ln_lambda).exp_m1();
    let mu = 1.0 - one_minus_mu;
    let w = -2.0 * r * d.d1 / d.phi;
    let f_value = 4.0 * PI * t * (one_minus_mu * one_minus_mu + 2.0 * mu * w);

    let terms = with_terms.then(|| {
        // 2q|∇u|/(1−u) − H = −(2/ρ)((1 − μ) − w)
        let dev = one_minus_mu - w;
        DerivativeTerms {
            gauss_bonnet_deficit: 4.0 * PI - 0.5 * geo.intrinsic_scalar_curv * area,
            grad_term: 0.0,
            scalar_term: 0.5 * geo.ambient_scalar_curv * area,
            traceless_term: 0.0,
            sphere_deviation: 16.0 * PI * kappa(p) * dev * dev,
        }
    });
    Ok(LevelSetSample {
        t,
        level: 1.0 - omu,
        radius: r,
        flux: g * area,
        int_grad2: g * g * area,
        int_grad_h: g * geo.mean_curv * area,
        f_value,
        terms,
    })
}

/// `F(t)` for a Green's function solution.
pub fn eval_f(sol: &RadialSolution, t: f64) -> Result<LevelSetSample> {
    if sol.problem() != Problem::GreenPole {
        return Err(Error::Domain("F(t) needs a Green's function solution".into()));
    }
    evaluate(sol, t, true)
}

/// `F_p(t)` for a capacitary solution; `t ≥ β_p`.
pub fn eval_fp(sol: &RadialSolution, t: f64) -> Result<LevelSetSample> {
    if sol.problem() != Problem::Capacitary {
        return Err(Error::Domain("F_p(t) needs a capacitary solution".into()));
    }
    evaluate(sol, t, true)
}

/// `F` or `F_p` according to the solution's problem.
pub fn eval_any(sol: &RadialSolution, t: f64) -> Result<LevelSetSample> {
    evaluate(sol, t, true)
}

pub fn derivative_decomposition(sol: &RadialSolution, t: f64) -> Result<DerivativeTerms> {
    Ok(evaluate(sol, t, true)?
        .terms
        .expect("radial evaluation always carries derivative terms"))
}

/// Scale below which a derivative counts as zero when forming relative
/// errors (4π · 10⁻¹²; every nonzero F' of the built-in models is far above).
pub const DERIVATIVE_FLOOR: f64 = 4.0 * PI * 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub t: f64,
    /// Richardson-extrapolated central difference of F.
    pub lhs: f64,
    /// Sum of the decomposition terms.
    pub rhs: f64,
    pub relerr: f64,
}

/// Compares a finite-difference `F'(t)` with the decomposition. The central
/// difference with step `dt` is combined with the one at `dt/2` by one
/// Richardson step, removing the O(dt²) truncation term.
pub fn check_derivative(sol: &RadialSolution, t: f64, dt: f64) -> Result<DerivativeCheck> {
    if !(dt > 0.0 && dt < t) {
        return Err(Error::param("dt", format!("need 0 < dt < t, got dt = {dt}, t = {t}")));
    }
    let f = |s: f64| evaluate(sol, s, false).map(|x| x.f_value);
    let d_full = (f(t + dt)? - f(t - dt)?) / (2.0 * dt);
    let d_half = (f(t + 0.5 * dt)? - f(t - 0.5 * dt)?) / dt;
    let lhs = (4.0 * d_half - d_full) / 3.0;
    let rhs = derivative_decomposition(sol, t)?.total();
    let relerr = (lhs - rhs).abs() / rhs.abs().max(DERIVATIVE_FLOOR);
    Ok(DerivativeCheck { t, lhs, rhs, relerr })
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::param(
            "t_grid",
            format!("need 0 < lo < hi and n >= 2, got [{lo}, {hi}] n = {n}"),
        ));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    v[0] = lo;
    v[n - 1] = hi;
    Ok(v)
}

/// Default sweep grid: 200 log-spaced points on `[t_floor, 10⁴ max(|m|, 1)]`.
pub fn default_t_grid(sol: &RadialSolution) -> Result<Vec<f64>> {
    let lo = t_floor(sol)? * (1.0 + 1e-9);
    let hi = 1e4 * sol.model().mass_param().abs().max(1.0);
    log_grid(lo, hi, 200)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the earlier sample of the offending pair.
    pub index: usize,
    pub s: f64,
    pub t: f64,
    /// `F(s) − F(t) > tol`.
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLevel {
    pub t: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitFit {
    /// Intercept of the fit `F = F_∞ − b/t`.
    pub limit: f64,
    pub slope: f64,
    pub points: usize,
    pub t_lo: f64,
    pub t_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub samples: Vec<LevelSetSample>,
    pub violations: Vec<Violation>,
    pub tol: f64,
    pub limit: Option<LimitFit>,
    pub initial_value: Option<f64>,
    pub skipped: Vec<SkippedLevel>,
}

impl MonotonicityReport {
    pub fn limit_estimate(&self) -> Option<f64> {
        self.limit.as_ref().map(|l| l.limit)
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "t,level,F,flux,int_grad2,int_gradH,gb_deficit,grad_term,scalar_term,traceless_term,sphere_dev\n",
        );
        for s in &self.samples {
            let d = s.terms.unwrap_or(DerivativeTerms {
                gauss_bonnet_deficit: f64::NAN,
                grad_term: f64::NAN,
                scalar_term: f64::NAN,
                traceless_term: f64::NAN,
                sphere_deviation: f64::NAN,
            });
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t,
                s.level,
                s.f_value,
                s.flux,
                s.int_grad2,
                s.int_grad_h,
                d.gauss_bonnet_deficit,
                d.grad_term,
                d.scalar_term,
                d.traceless_term,
                d.sphere_deviation
            );
        }
        out
    }

    /// `key=value` summary: limit, initial value, violations, skipped levels.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:e}"));
        let _ = writeln!(out, "samples={}", self.samples.len());
        let _ = writeln!(out, "tol={:e}", self.tol);
        let _ = writeln!(out, "initial_value={}", fmt(self.initial_value));
        let _ = writeln!(out, "limit_estimate={}", fmt(self.limit_estimate()));
        let _ = writeln!(out, "limit_over_8pi={}", fmt(self.limit_estimate().map(|l| l / (8.0 * PI))));
        let _ = writeln!(out, "violations={}", self.violations.len());
        for v in &self.violations {
            let _ = writeln!(out, "violation.{}=s:{:e} t:{:e} drop:{:e}", v.index, v.s, v.t, v.drop);
        }
        let _ = writeln!(out, "skipped={}", self.skipped.len());
        for (i, s) in self.skipped.iter().enumerate() {
            let _ = writeln!(out, "skipped.{i}=t:{:e} reason:{}", s.t, s.reason);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Adjacent pairs with `F(s) > F(t) + tol`.
pub fn find_violations(samples: &[LevelSetSample], tol: f64) -> Vec<Violation> {
    samples
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let drop = w[0].f_value - w[1].f_value;
            (drop > tol).then(|| Violation {
                index: i,
                s: w[0].t,
                t: w[1].t,
                drop,
            })
        })
        .collect()
}

/// Least-squares fit of `F = F_∞ − b/t` on the samples in the top decade.
pub fn fit_limit(samples: &[LevelSetSample]) -> Option<LimitFit> {
    let t_hi = samples.last()?.t;
    let top: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= 0.1 * t_hi)
        .map(|s| (1.0 / s.t, s.f_value))
        .collect();
    if top.len() < 3 {
        return None;
    }
    let n = top.len() as f64;
    let mx = top.iter().map(|p| p.0).sum::<f64>() / n;
    let my = top.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = top.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LimitFit {
        limit: my - slope * mx,
        slope: -slope,
        points: top.len(),
        t_lo: 1.0 / top[0].0,
        t_hi,
    })
}

/// Assembles a report from evaluated samples (used by the radial and grid sweeps).
pub fn build_report(
    samples: Vec<LevelSetSample>,
    skipped: Vec<SkippedLevel>,
    tol: f64,
) -> MonotonicityReport {
    MonotonicityReport {
        violations: find_violations(&samples, tol),
        limit: fit_limit(&samples),
        initial_value: samples.first().map(|s| s.f_value),
        samples,
        tol,
        skipped,
    }
}

/// Evaluates `F` (or `F_p`) on an ascending `t` grid in parallel and checks
/// monotonicity between consecutive samples. Levels outside the solved
/// range are skipped with their reason.
pub fn sweep(sol: &RadialSolution, t_grid: &[f64], tol: f64) -> Result<MonotonicityReport> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("t_grid", "must be strictly ascending"));
    }
    let results: Vec<(f64, Result<LevelSetSample>)> = t_grid
        .par_iter()
        .map(|&t| (t, evaluate(sol, t, true)))
        .collect();
    let mut samples = Vec::with_capacity(results.len());
    let mut skipped = Vec::new();
    for (t, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => skipped.push(SkippedLevel {
                t,
                reason: e.to_string(),
            }),
        }
    }
    Ok(build_report(samples, skipped, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricModel;
    use crate::radial::RadialGrid;

    fn green(model: &MetricModel, exterior: bool) -> RadialSolution {
        RadialSolution::solve_green(model, RadialGrid::for_green(model, exterior).unwrap(), exterior).unwrap()
    }

    fn cap(model: &MetricModel, p: f64) -> RadialSolution {
        RadialSolution::solve_capacitary(model, p, RadialGrid::for_capacitary(model).unwrap()).unwrap()
    }

    #[test]
    fn flat_green_vanishes() {
        let sol = green(&MetricModel::flat(), false);
        for t in [0.01, 1.0, 37.0, 1e4] {
            assert!(eval_f(&sol, t).unwrap().f_value.abs() < 1e-12);
        }
    }

    #[test]
    fn schwarzschild_exterior_spot_values() {
        let sol = green(&MetricModel::schwarzschild(2.0).unwrap(), true);
        let s = eval_f(&sol, 10.0).unwrap();
        assert!((s.radius - 9.0).abs() < 1e-12);
        assert!((s.f_value - 14.8 * PI).abs() < 1e-10, "{}", s.f_value);
        let s = eval_f(&sol, 100.0).unwrap();
        assert!((s.f_value - 15.88 * PI).abs() < 1e-10, "{}", s.f_value);
    }

    #[test]
    fn closed_form_agrees_with_integral_form() {
        let sol = green(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), false);
        let s = eval_f(&sol, 3.0).unwrap();
        let direct = f_from_integrals(3.0, 4.0 * PI, s.int_grad_h, s.int_grad2);
        assert!((s.f_value - direct).abs() < 1e-11 * s.f_value.abs().max(1.0));
    }

    #[test]
    fn smoothed_frozen_values() {
        let sol = green(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), false);
        let s = eval_f(&sol, 10.0).unwrap();
        assert!((s.radius - 9.0029374244030167137).abs() < 1e-10);
        assert!((s.f_value - 45.706265215639122209).abs() < 1e-9);
        assert!((eval_f(&sol, 1.0).unwrap().f_value - 3.3652497473030598751).abs() < 1e-10);
        assert!((eval_f(&sol, 1000.0).unwrap().f_value - 50.227707903451920942).abs() < 1e-9);
    }

    #[test]
    fn capacitary_frozen_values() {
        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = cap(&model, 1.5);
        for (t, r, f) in [
            (2.0, 1.1961490082971188005, 21.579696582016448273),
            (10.0, 9.2420523564595186106, 24.559573088301437237),
            (100.0, 99.249245804519029449, 25.077542135604035903),
        ] {
            let s = eval_fp(&sol, t).unwrap();
            assert!((s.radius - r).abs() < 1e-9 * r, "r({t}) = {}", s.radius);
            assert!((s.f_value - f).abs() < 1e-9 * f, "F_p({t}) = {}", s.f_value);
        }
        let (_, beta) = sol.cp_beta().unwrap();
        let at_beta = eval_fp(&sol, beta).unwrap();
        assert!((at_beta.f_value - 18.720734675800516717).abs() < 1e-8);
        assert!(at_beta.f_value >= 4.0 * PI * beta);
        assert!(eval_fp(&sol, 0.9 * beta).is_err());
    }

    #[test]
    fn p2_capacitary_matches_green() {
        let model = MetricModel::schwarzschild_horizon(2.0).unwrap();
        let s = eval_fp(&cap(&model, 2.0), 10.0).unwrap();
        assert!((s.f_value - 14.8 * PI).abs() < 1e-9);
    }

    #[test]
    fn horizon_sample_has_no_mean_curvature_term() {
        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = cap(&model, 2.0);
        let s = eval_fp(&sol, 1.0).unwrap();
        assert!(s.int_grad_h.abs() < 1e-12);
        assert!((s.f_value - (4.0 * PI + s.int_grad2)).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_decomposition() {
        let sol = green(&MetricModel::schwarzschild(2.0).unwrap(), true);
        let c = check_derivative(&sol, 10.0, 1e-2).unwrap();
        // only the sphere deviation survives on exact Schwarzschild
        let d = derivative_decomposition(&sol, 10.0).unwrap();
        assert!(d.scalar_term.abs() < 1e-15 && d.gauss_bonnet_deficit.abs() < 1e-13);
        let rho: f64 = 100.0 / 9.0;
        let expected = 0.75 * (0.162f64 - 0.144).powi(2) * 4.0 * PI * rho * rho;
        assert!((d.sphere_deviation - expected).abs() < 1e-12 * expected);
        assert!(c.relerr < 1e-8, "{c:?}");

        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        for p in [1.2, 1.5, 2.5] {
            let sol = cap(&model, p);
            let c = check_derivative(&sol, 7.0, 7e-3).unwrap();
            assert!(c.relerr < 1e-7, "p = {p}: {c:?}");
        }
    }

    #[test]
    fn sweep_reports_limit_and_no_violations() {
        let sol = green(&MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap(), false);
        let grid = default_t_grid(&sol).unwrap();
        let rep = sweep(&sol, &grid, 1e-10).unwrap();
        assert!(rep.is_monotone());
        assert!(rep.skipped.is_empty());
        let m = rep.limit_estimate().unwrap() / (8.0 * PI);
        assert!((m - 1.0).abs() < 1e-3, "{m}");
        assert!(rep.to_csv().lines().count() == 201);
    }

    #[test]
    fn negative_mass_is_not_monotone() {
        let sol = green(&MetricModel::smoothed_schwarzschild(-0.5, 0.5).unwrap(), false);
        let rep = sweep(&sol, &default_t_grid(&sol).unwrap(), 1e-10).unwrap();
        assert!(!rep.violations.is_empty());
        assert!(rep.summary().contains("violations="));
    }
}
