//! ADM mass three ways, the I_p profile, and the Penrose ladder `2m ≥ β_p`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{default_t_grid, sweep};
use crate::metric::{MetricKind, MetricModel};
use crate::radial::{Problem, RadialGrid, RadialSolution};

/// ADM surface integral on the coordinate sphere of radius `r`.
///
/// For `g = φ⁴δ` the flux `(1/16π)∮(∂_j g_ij − ∂_i g_jj) νⁱ dσ` reduces to
/// `−2 r² φ³ φ'`.
pub fn adm_integrand(model: &MetricModel, r: f64) -> Result<f64> {
    let d = model.derivs(r)?;
    Ok(-2.0 * r * r * d.phi.powi(3) * d.d1)
}

/// Least-squares polynomial in `x` of the given degree; returns coefficients
/// from the constant term up.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let k = degree + 1;
    if x.len() < k {
        return Err(Error::FitInstability(format!(
            "{} points cannot determine a degree-{degree} fit",
            x.len()
        )));
    }
    // normal equations on a scaled abscissa
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut a = vec![vec![0.0; k + 1]; k];
    for (&xi, &yi) in x.iter().zip(y) {
        let s = xi / scale;
        let pows: Vec<f64> = (0..k).map(|j| s.powi(j as i32)).collect();
        for i in 0..k {
            for j in 0..k {
                a[i][j] += pows[i] * pows[j];
            }
            a[i][k] += pows[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        a.swap(col, piv);
        if a[col][col].abs() < 1e-300 {
            return Err(Error::FitInstability("singular normal equations".into()));
        }
        for row in 0..k {
            if row != col {
                let f = a[row][col] / a[col][col];
                for j in col..=k {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
    }
    Ok((0..k).map(|i| a[i][k] / a[i][i] / scale.powi(i as i32)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmSurface {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Extrapolation of `values` to `1/r → 0`.
    pub mass: f64,
}

/// ADM mass from the surface integral, extrapolated in `1/r` by a
/// polynomial of degree ≤ 2. A single radius `r` is augmented to
/// `{r, 2r, 4r}`.
pub fn adm_mass_surface(model: &MetricModel, radii: &[f64]) -> Result<AdmSurface> {
    let mut radii = radii.to_vec();
    if radii.is_empty() {
        return Err(Error::param("radii", "need at least one radius"));
    }
    if radii.len() == 1 {
        let r = radii[0];
        radii = vec![r, 2.0 * r, 4.0 * r];
    }
    let values = radii
        .iter()
        .map(|&r| adm_integrand(model, r))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let degree = (radii.len() - 1).min(2);
    let coef = polyfit(&x, &values, degree)?;
    Ok(AdmSurface {
        radii,
        values,
        mass: coef[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionFit {
    pub mass: f64,
    /// Coefficient `b` of the `b/r` correction.
    pub slope: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

/// Reads `m` off the far-field expansion
/// `1 − u = q c r^{−1/q} − ((3−p)/2) c m r^{−2/(p−1)} + …`
/// (for the Green's function `1 − u = 1/r − m/(2r²) + …`) by fitting
/// `y(r) = m + b/r` over the decade `[R/10, R]`, `R = 10⁴ max(|m|, r₀, 1)`.
pub fn fit_expansion(sol: &RadialSolution) -> Result<ExpansionFit> {
    let model = sol.model();
    let scale = model
        .mass_param()
        .abs()
        .max(model.inner_radius().unwrap_or(0.0))
        .max(1.0);
    let hi = 1e4 * scale;
    let lo = hi / 10.0;
    let p = sol.p();
    let q = sol.q();
    let c = sol.c_p();
    let gamma = 2.0 / (p - 1.0);
    let n = 41;
    let radii: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let y = radii
        .iter()
        .map(|&r| {
            let omu = sol.one_minus_u(r)?;
            // scale out c r^{−γ} before subtracting to keep the numbers O(1)
            let lead = q * r.powf(gamma - 1.0 / q);
            let actual = omu / c * r.powf(gamma);
            Ok((lead - actual) * 2.0 / (3.0 - p))
        })
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let coef = polyfit(&x, &y, 1)?;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - coef[0] - coef[1] * xi).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if !(coef[0].is_finite() && residual.is_finite()) || residual > 1e-3 * coef[0].abs().max(1.0) {
        return Err(Error::FitInstability(format!(
            "expansion fit residual {residual:.3e} does not decay (mass {})",
            coef[0]
        )));
    }
    Ok(ExpansionFit {
        mass: coef[0],
        slope: coef[1],
        residual,
    })
}

/// `I_p` at coordinate radius `r`; `F_p = ∫ I_p |∇u|^{p−1} dσ` on each level.
/// Evaluated in logarithms so that p close to 1 does not overflow.
pub fn ip_value(sol: &RadialSolution, r: f64) -> Result<f64> {
    let p = sol.p();
    let q = sol.q();
    let c = sol.c_p();
    let omu = sol.one_minus_u(r)?;
    let g = sol.grad_norm(r)?;
    let h = sol.model().sphere_geometry(r)?.mean_curv;
    let (lc, lomu, lg, lq) = (c.ln(), omu.ln(), g.ln(), q.ln());
    let pre = (3.0 * p - 7.0) / (3.0 - p) * lc + q * (lq - lomu);
    let a = (pre + (3.0 - p) * lc).exp();
    let b = (pre + 2.0 * (lq + lc - lomu) + (3.0 - p) * lg).exp();
    let cterm = if h == 0.0 {
        0.0
    } else {
        h.signum() * (pre + lq + 2.0 * lc - lomu + (2.0 - p) * lg + h.abs().ln()).exp()
    };
    Ok(a + b - cterm)
}

pub fn ip_profile(sol: &RadialSolution, radii: &[f64]) -> Result<Vec<f64>> {
    if sol.problem() != Problem::Capacitary {
        return Err(Error::Domain("I_p needs a capacitary solution".into()));
    }
    radii.iter().map(|&r| ip_value(sol, r)).collect()
}

/// Limit of `I_p` at infinity, `2m c_p^{1−p}`.
pub fn ip_limit(sol: &RadialSolution) -> f64 {
    2.0 * sol.model().mass_param() * sol.c_p().powf(1.0 - sol.p())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenroseRow {
    pub p: f64,
    pub cap: f64,
    pub c_p: f64,
    pub beta: f64,
    pub two_m: f64,
    pub horizon_area: f64,
    pub sqrt_area_over_16pi: f64,
    /// `2m ≥ β_p − 10⁻⁹`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenroseReport {
    pub rows: Vec<PenroseRow>,
    /// `β_p` is nonincreasing along the ascending p list.
    pub nonincreasing: bool,
    /// `|m − √(|∂M|/16π)| / m`, for exact Schwarzschild with its horizon.
    pub endpoint_relerr: Option<f64>,
}

impl PenroseReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,Cap_p,c_p,beta_p,two_m,horizon_area,sqrt_area_over_16pi,holds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.p, r.cap, r.c_p, r.beta, r.two_m, r.horizon_area, r.sqrt_area_over_16pi, r.holds
            );
        }
        out
    }
}

/// Capacitary solves for every p, in parallel, assembled in input order.
pub fn penrose_check(model: &MetricModel, p_list: &[f64]) -> Result<PenroseReport> {
    let area = model.horizon_area()?;
    let sqrt_area = (area / (16.0 * PI)).sqrt();
    let two_m = 2.0 * model.mass_param();
    let grid = RadialGrid::for_capacitary(model)?;
    let rows = p_list
        .par_iter()
        .map(|&p| {
            let sol = RadialSolution::solve_capacitary(model, p, grid)?;
            let (c_p, beta) = sol.cp_beta()?;
            Ok(PenroseRow {
                p,
                cap: sol.capacity()?,
                c_p,
                beta,
                two_m,
                horizon_area: area,
                sqrt_area_over_16pi: sqrt_area,
                holds: two_m >= beta - 1e-9,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.p.total_cmp(&b.p));
    let nonincreasing = sorted.windows(2).all(|w| w[1].beta <= w[0].beta);
    let m = model.mass_param();
    let endpoint_relerr = (model.kind() == MetricKind::SchwarzschildIsotropic
        && m > 0.0
        && model.inner_radius() == Some(0.5 * m))
        .then(|| (m - sqrt_area).abs() / m);
    Ok(PenroseReport {
        rows,
        nonincreasing,
        endpoint_relerr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    pub adm_surface: f64,
    pub adm_from_f: f64,
    pub adm_from_fit: f64,
    /// Maximum pairwise absolute deviation of the three estimates.
    pub max_deviation: f64,
    pub penrose: Option<PenroseReport>,
}

impl MassReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "adm_surface={:e}", self.adm_surface);
        let _ = writeln!(out, "adm_from_F={:e}", self.adm_from_f);
        let _ = writeln!(out, "adm_from_fit={:e}", self.adm_from_fit);
        let _ = writeln!(out, "max_deviation={:e}", self.max_deviation);
        out
    }
}

/// The three ADM estimates for a model. Exact Schwarzschild uses the
/// exterior Green's function.
pub fn mass_report(model: &MetricModel) -> Result<MassReport> {
    let exterior = !model.is_complete_at_pole();
    let scale = model.mass_param().abs().max(1.0);
    let surface = adm_mass_surface(model, &[1e3 * scale])?;
    let sol = RadialSolution::solve_green(model, RadialGrid::for_green(model, exterior)?, exterior)?;
    let rep = sweep(&sol, &default_t_grid(&sol)?, 1e-10)?;
    let limit = rep
        .limit_estimate()
        .ok_or_else(|| Error::FitInstability("sweep too short for a limit fit".into()))?;
    let from_f = limit / (8.0 * PI);
    let fit = fit_expansion(&sol)?;
    let v = [surface.mass, from_f, fit.mass];
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in i + 1..3 {
            dev = dev.max((v[i] - v[j]).abs());
        }
    }
    Ok(MassReport {
        adm_surface: surface.mass,
        adm_from_f: from_f,
        adm_from_fit: fit.mass,
        max_deviation: dev,
        penrose: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_integral_extrapolates_to_mass() {
        let s = adm_mass_surface(&MetricModel::schwarzschild(2.0).unwrap(), &[1e3]).unwrap();
        assert_eq!(s.radii.len(), 3);
        assert!((s.mass - 2.0).abs() < 1e-8, "{}", s.mass);
        let s = adm_mass_surface(&MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap(), &[1e3]).unwrap();
        assert!((s.mass - 2.0).abs() < 1e-3);
        let s = adm_mass_surface(&MetricModel::flat(), &[10.0, 100.0]).unwrap();
        assert_eq!(s.mass, 0.0);
    }

    #[test]
    fn expansion_fit_on_exterior_and_capacitary() {
        let m = MetricModel::schwarzschild(2.0).unwrap();
        let sol = RadialSolution::solve_green(&m, RadialGrid::for_green(&m, true).unwrap(), true).unwrap();
        let f = fit_expansion(&sol).unwrap();
        assert!((f.mass - 2.0).abs() < 1e-6, "{f:?}");

        let m = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = RadialSolution::solve_capacitary(&m, 1.5, RadialGrid::for_capacitary(&m).unwrap()).unwrap();
        let f = fit_expansion(&sol).unwrap();
        assert!((f.mass - 1.0).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn ip_matches_oracle() {
        let m = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = RadialSolution::solve_capacitary(&m, 1.5, RadialGrid::for_capacitary(&m).unwrap()).unwrap();
        let v = ip_profile(&sol, &[1e3]).unwrap()[0];
        assert!((v - 0.73013704682113211645).abs() < 1e-10, "{v}");
        assert!((ip_limit(&sol) - 0.73029674334022148461).abs() < 1e-12);

        let sol = RadialSolution::solve_capacitary(&m, 2.0, RadialGrid::for_capacitary(&m).unwrap()).unwrap();
        assert!((ip_value(&sol, 1e3).unwrap() - 2.0).abs() < 1e-2);
    }

    #[test]
    fn ip_does_not_overflow_near_p_one() {
        let m = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let sol = RadialSolution::solve_capacitary(&m, 1.05, RadialGrid::for_capacitary(&m).unwrap()).unwrap();
        let v = ip_value(&sol, 1e3).unwrap();
        assert!(v.is_finite());
        assert!((v / ip_limit(&sol) - 1.0).abs() < 0.1);
    }

    #[test]
    fn penrose_ladder_on_schwarzschild() {
        let m = MetricModel::schwarzschild_horizon(1.0).unwrap();
        let rep = penrose_check(&m, &[1.05, 1.1, 1.2, 1.5, 2.0, 2.5, 2.9]).unwrap();
        assert!(rep.all_hold() && rep.nonincreasing);
        let oracle = [
            1.880279125451263345,
            1.7953343161152469983,
            1.6585448553261475114,
            1.3572088082974532858,
            1.0,
            0.72546545081360196619,
            0.54187341306426426425,
        ];
        for (row, b) in rep.rows.iter().zip(oracle) {
            assert!((row.beta - b).abs() < 1e-9 * b, "p = {}: {}", row.p, row.beta);
        }
        assert!(rep.endpoint_relerr.unwrap() < 1e-12);
    }

    #[test]
    fn three_way_consistency() {
        for model in [
            MetricModel::flat(),
            MetricModel::schwarzschild(2.0).unwrap(),
            MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap(),
        ] {
            let r = mass_report(&model).unwrap();
            let scale = model.mass_param().abs().max(1.0);
            assert!(r.max_deviation < 1e-3 * scale, "{}: {r:?}", model.describe());
        }
    }
}
