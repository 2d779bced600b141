//! Pointwise checks of the differential identities behind the monotonicity
//! of `F`, on radial solutions.
//!
//! Under rotational symmetry the level sets are umbilic round spheres, so
//! `|∇^Σ|∇u|| = 0`, `h̊ = 0`, `|h|² = H²/2` and the Hessian of `u` has
//! eigenvalues `∂_s|∇u|` (normal) and `|∇u| H / 2` (twice, tangential).
//! The vector field
//!
//! ```text
//! X = ∇u/(1−u) + ∇|∇u|/(1−u)² + |∇u| ∇u/(1−u)³
//! ```
//!
//! is radial, `X = v ν`, and `div X = (ρ² φ²)⁻¹ d(ρ² v)/dr`.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{eval_f, DERIVATIVE_FLOOR};
use crate::quadrature::{integrate, QuadTolerance};
use crate::radial::{Problem, RadialSolution};

/// Differences below `SCALE_FLOOR` times the largest individual term of an
/// identity are treated as rounding when forming relative errors.
pub const SCALE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentityTag {
    /// Finite-difference divergence (lhs) against the Bochner form (rhs).
    DivXBochner,
    /// Level-set (geometric) form (lhs) against the Bochner form (rhs).
    DivXGeometric,
    /// Geometric H (lhs) against `−(p−1) ∇∇u(ν,ν)/|∇u|` (rhs).
    MeanCurvHarmonic,
    /// `|h|² + Ric(ν,ν)` (lhs) against `R/2 − R^Σ/2 + |h̊|²/2 + 3H²/4` (rhs).
    GaussRewrite,
}

impl IdentityTag {
    pub const ALL: [IdentityTag; 4] = [
        IdentityTag::DivXBochner,
        IdentityTag::DivXGeometric,
        IdentityTag::MeanCurvHarmonic,
        IdentityTag::GaussRewrite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityTag::DivXBochner => "DivX_Bochner",
            IdentityTag::DivXGeometric => "DivX_Geometric",
            IdentityTag::MeanCurvHarmonic => "MeanCurvHarmonic",
            IdentityTag::GaussRewrite => "GaussRewrite",
        }
    }
}

impl fmt::Display for IdentityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdentityTag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param("identity", format!("unknown identity tag `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentitySample {
    pub r: f64,
    pub tag: IdentityTag,
    pub lhs: f64,
    pub rhs: f64,
    pub relerr: f64,
}

/// Target accuracy of the finite-difference divergence. Differences at the
/// estimated rounding noise of the difference quotient map to this value.
pub const FD_REL_TOL: f64 = 1e-4;

fn sample(r: f64, tag: IdentityTag, lhs: f64, rhs: f64, floor: f64) -> IdentitySample {
    let denom = lhs.abs().max(rhs.abs()).max(floor);
    let relerr = if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom };
    IdentitySample {
        r,
        tag,
        lhs,
        rhs,
        relerr,
    }
}

/// Central difference of `f` at `x` with step `h`, improved by one
/// Richardson step.
fn richardson<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<f64> {
    let d1 = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let d2 = (f(x + 0.5 * h)? - f(x - 0.5 * h)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

fn fd_step(r: f64) -> f64 {
    (1e-4 * r).max(1e-6)
}

/// Radial component `v` of `X`.
fn x_radial(sol: &RadialSolution, r: f64) -> Result<f64> {
    let omu = sol.one_minus_u(r)?;
    let g = sol.grad_norm(r)?;
    let gs = sol.grad_norm_rate(r)?;
    Ok(g / omu + gs / (omu * omu) + g * g / (omu * omu * omu))
}

/// The three evaluations of `div X` at `r`, plus the size of the largest
/// individual term (for rounding floors).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivX {
    pub finite_difference: f64,
    pub bochner: f64,
    pub geometric: f64,
    pub scale: f64,
    /// Rounding noise of the finite difference: `ρ²v` is a sum of pieces
    /// that may cancel, and their rounding is divided by the step.
    pub fd_noise: f64,
}

fn require_green(sol: &RadialSolution) -> Result<()> {
    if sol.problem() != Problem::GreenPole {
        return Err(Error::Domain("the vector field X is defined for the Green's function".into()));
    }
    Ok(())
}

pub fn div_x(sol: &RadialSolution, r: f64) -> Result<DivX> {
    require_green(sol)?;
    let model = sol.model();
    let geo = model.sphere_geometry(r)?;
    let omu = sol.one_minus_u(r)?;
    let g = sol.grad_norm(r)?;
    let gs = sol.grad_norm_rate(r)?;
    let h = geo.mean_curv;
    let pre = g / (omu * omu);

    // Geometric (level-set) form. With |∇u| = c ρ⁻² and R^Σ = 2ρ⁻², the
    // first two terms are grouped as ρ⁻²(c − 1), and
    // 2|∇u|/(1−u) − H = (2/ρ)[(λ − 1) + w] with λ = 1/((1−u)ρ), w = 1 − dρ/ds,
    // so that flat space evaluates to zero without rounding residue.
    let rho = geo.area_radius;
    let d = model.derivs(r)?;
    let w = -2.0 * r * d.d1 / d.phi;
    let lambda_m1 = (1.0 / omu - rho) / rho;
    let dev = 2.0 / rho * (lambda_m1 + w);
    let geo_terms = [
        (sol.c_p() - 1.0) / (rho * rho),
        0.5 * geo.ambient_scalar_curv,
        0.75 * dev * dev,
    ];
    let geometric = pre * geo_terms.iter().sum::<f64>();

    // Bochner form, Hessian from its radial eigenvalues
    let hess2 = gs * gs + 0.5 * g * g * h * h;
    let ric = model.radial_ricci(r)?;
    let boch_terms = [
        g,
        3.0 * g * g / (omu * omu),
        3.0 * gs / omu,
        (hess2 - gs * gs) / (g * g),
        ric,
    ];
    let bochner = pre * boch_terms.iter().sum::<f64>();

    let phi = d.phi;
    let flux = |s: f64| -> Result<f64> {
        let rho_s = model.area_radius(s)?;
        Ok(rho_s * rho_s * x_radial(sol, s)?)
    };
    let finite_difference = richardson(flux, r, fd_step(r))? / (rho * rho * phi * phi);
    let pieces = g / omu + gs.abs() / (omu * omu) + g * g / (omu * omu * omu);
    let fd_noise = 8.0 * f64::EPSILON * pieces / (fd_step(r) * phi * phi);

    let scale = pre
        * geo_terms
            .iter()
            .chain(&boch_terms)
            .chain(&[g, 0.5 * geo.intrinsic_scalar_curv, 0.75 * h * h])
            .fold(0.0f64, |a, t| a.max(t.abs()));
    Ok(DivX {
        finite_difference,
        bochner,
        geometric,
        scale,
        fd_noise,
    })
}

pub fn check_divx(sol: &RadialSolution, r: f64, tag: IdentityTag) -> Result<IdentitySample> {
    match tag {
        IdentityTag::DivXBochner => {
            let d = div_x(sol, r)?;
            let floor = (SCALE_FLOOR * d.scale).max(d.fd_noise / FD_REL_TOL);
            Ok(sample(r, tag, d.finite_difference, d.bochner, floor))
        }
        IdentityTag::DivXGeometric => {
            let d = div_x(sol, r)?;
            Ok(sample(r, tag, d.geometric, d.bochner, SCALE_FLOOR * d.scale))
        }
        IdentityTag::MeanCurvHarmonic => check_meancurv(sol, r),
        IdentityTag::GaussRewrite => check_gauss(sol, r),
    }
}

/// Geometric mean curvature of the level sphere against the p-harmonic
/// expression `−(p−1) ∇∇u(ν,ν)/|∇u|`, the normal Hessian obtained by
/// differentiating the solver's `|∇u|` profile.
pub fn check_meancurv(sol: &RadialSolution, r: f64) -> Result<IdentitySample> {
    let model = sol.model();
    let geo = model.sphere_geometry(r)?;
    let phi = model.conformal_factor(r)?;
    let g = sol.grad_norm(r)?;
    let dg_dr = richardson(|s| sol.grad_norm(s), r, fd_step(r))?;
    let hess_nn = dg_dr / (phi * phi);
    let rhs = -(sol.p() - 1.0) * hess_nn / g;
    let lhs = geo.mean_curv;
    let scale = lhs.abs().max(2.0 / geo.area_radius);
    Ok(sample(r, IdentityTag::MeanCurvHarmonic, lhs, rhs, SCALE_FLOOR * scale))
}

/// Traced Gauss equation on a level sphere:
/// `|h|² + Ric(ν,ν) = R/2 − R^Σ/2 + |h̊|²/2 + 3H²/4` (the tangential
/// Laplacian and gradient terms vanish by symmetry).
pub fn check_gauss(sol: &RadialSolution, r: f64) -> Result<IdentitySample> {
    let model = sol.model();
    let geo = model.sphere_geometry(r)?;
    let h = geo.mean_curv;
    let h2 = 0.5 * h * h;
    let ric = model.radial_ricci(r)?;
    let rhs_terms = [
        0.5 * geo.ambient_scalar_curv,
        -0.5 * geo.intrinsic_scalar_curv,
        0.75 * h * h,
    ];
    let scale = rhs_terms.iter().chain(&[h2, ric]).fold(0.0f64, |a, t| a.max(t.abs()));
    Ok(sample(
        r,
        IdentityTag::GaussRewrite,
        h2 + ric,
        rhs_terms.iter().sum(),
        SCALE_FLOOR * scale,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralCheck {
    pub s: f64,
    pub t: f64,
    /// `∫ div X dμ` over `{1 − 1/s < u < 1 − 1/t}`.
    pub integral: f64,
    /// `F(t) − F(s)`.
    pub difference: f64,
    pub relerr: f64,
}

/// Divergence theorem plus coarea: the volume integral of `div X` between
/// two levels equals `F(t) − F(s)`. The volume integral uses the geometric
/// form of `div X` and adaptive quadrature in `r`.
pub fn integral_consistency(sol: &RadialSolution, s: f64, t: f64) -> Result<IntegralCheck> {
    require_green(sol)?;
    if !(s < t) {
        return Err(Error::param("levels", format!("need s < t, got s = {s}, t = {t}")));
    }
    let fs = eval_f(sol, s)?;
    let ft = eval_f(sol, t)?;
    let model = sol.model();
    let integrand = |r: f64| -> f64 {
        let eval = || -> Result<f64> {
            let d = div_x(sol, r)?;
            let phi = model.conformal_factor(r)?;
            let rho = model.area_radius(r)?;
            Ok(d.geometric * 4.0 * PI * rho * rho * phi * phi)
        };
        eval().unwrap_or(f64::NAN)
    };
    let difference = ft.f_value - fs.f_value;
    let denom = difference.abs().max(DERIVATIVE_FLOOR * (t - s));
    let tol = QuadTolerance {
        rel: 1e-11,
        abs: 1e-10 * denom,
        max_intervals: 4000,
    };
    // split at geometric midpoints so each piece spans at most a factor 10 in r
    let mut edges = vec![fs.radius];
    while *edges.last().expect("non-empty") * 10.0 < ft.radius {
        let next = edges.last().expect("non-empty") * 10.0;
        edges.push(next);
    }
    edges.push(ft.radius);
    let mut integral = 0.0;
    for w in edges.windows(2) {
        integral += integrate(integrand, w[0], w[1], tol)?.value;
    }
    Ok(IntegralCheck {
        s,
        t,
        integral,
        difference,
        relerr: (integral - difference).abs() / denom,
    })
}

/// Default sample radii: 100 log-spaced points from just above the inner
/// end of the solved grid to `10³ max(|m|, 1)`.
pub fn default_radii(sol: &RadialSolution) -> Vec<f64> {
    let lo = sol.r_min() * 1.01;
    let hi = 1e3 * sol.model().mass_param().abs().max(1.0);
    let n = 100;
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Every applicable identity at every radius, in parallel, ordered by
/// radius then tag. `X` identities are included for Green's functions only.
pub fn identity_suite(sol: &RadialSolution, radii: &[f64]) -> Result<Vec<IdentitySample>> {
    let tags: Vec<IdentityTag> = match sol.problem() {
        Problem::GreenPole => IdentityTag::ALL.to_vec(),
        Problem::Capacitary => vec![IdentityTag::MeanCurvHarmonic, IdentityTag::GaussRewrite],
    };
    let rows: Vec<Vec<IdentitySample>> = radii
        .par_iter()
        .map(|&r| tags.iter().map(|&tag| check_divx(sol, r, tag)).collect())
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn samples_to_csv(samples: &[IdentitySample]) -> String {
    let mut out = String::from("r,tag,lhs,rhs,relerr\n");
    for s in samples {
        let _ = writeln!(out, "{:e},{},{:e},{:e},{:e}", s.r, s.tag, s.lhs, s.rhs, s.relerr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricModel;
    use crate::radial::RadialGrid;

    fn green(model: &MetricModel, exterior: bool) -> RadialSolution {
        RadialSolution::solve_green(model, RadialGrid::for_green(model, exterior).unwrap(), exterior).unwrap()
    }

    #[test]
    fn flat_divergence_vanishes() {
        let sol = green(&MetricModel::flat(), false);
        let d = div_x(&sol, 3.0).unwrap();
        assert!(d.geometric.abs() < 1e-14 && d.bochner.abs() < 1e-13);
        assert!(d.finite_difference.abs() < 1e-9);
    }

    #[test]
    fn schwarzschild_exterior_closed_form() {
        let sol = green(&MetricModel::schwarzschild(2.0).unwrap(), true);
        let d = div_x(&sol, 9.0).unwrap();
        let expected = 0.81 * 0.75 * 0.018f64.powi(2);
        assert!((d.geometric - expected).abs() < 1e-12 * expected, "{}", d.geometric);
        assert!((d.bochner - expected).abs() < 1e-9 * expected);
        assert!((d.finite_difference - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn smoothed_frozen_divergence() {
        let sol = green(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), false);
        let s = check_divx(&sol, 5.0, IdentityTag::DivXGeometric).unwrap();
        assert!((s.lhs - 0.0019572133135959751255).abs() < 1e-14, "{}", s.lhs);
        assert!(s.relerr < 1e-10);
    }

    #[test]
    fn mean_curvature_forms_agree() {
        let sol = green(&MetricModel::flat(), false);
        let s = check_meancurv(&sol, 4.0).unwrap();
        assert!((s.lhs - 0.5).abs() < 1e-15 && s.relerr < 1e-10);
        let sol = green(&MetricModel::schwarzschild(2.0).unwrap(), true);
        let s = check_meancurv(&sol, 9.0).unwrap();
        assert!((s.lhs - 0.144).abs() < 1e-15 && s.relerr < 1e-10);
        let model = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = RadialSolution::solve_capacitary(&model, 1.5, RadialGrid::for_capacitary(&model).unwrap()).unwrap();
        assert!(check_meancurv(&sol, 2.0).unwrap().relerr < 1e-8);
    }

    #[test]
    fn gauss_rewrite_holds() {
        let sol = green(&MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap(), false);
        for r in [0.01, 0.3, 1.0, 40.0] {
            assert!(check_gauss(&sol, r).unwrap().relerr < 1e-12);
        }
    }

    #[test]
    fn integral_matches_difference_of_f() {
        let sol = green(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), false);
        let c = integral_consistency(&sol, 0.5, 200.0).unwrap();
        assert!(c.relerr < 1e-8, "{c:?}");
    }

    #[test]
    fn suite_export() {
        let sol = green(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), false);
        let rows = identity_suite(&sol, &[1.0, 2.0]).unwrap();
        assert_eq!(rows.len(), 8);
        let csv = samples_to_csv(&rows);
        assert!(csv.starts_with("r,tag,lhs,rhs,relerr\n"));
        assert!(csv.contains(",DivX_Bochner,"));
        assert_eq!("gaussrewrite".parse::<IdentityTag>().unwrap(), IdentityTag::GaussRewrite);
    }
}
