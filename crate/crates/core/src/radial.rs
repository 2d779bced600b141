//! Radial Green's functions and p-capacitary potentials by conserved-flux
//! quadrature.
//!
//! For a radial function on `g = φ⁴ δ` the p-Laplace equation integrates
//! once to `ρ² |∇u|^{p-1} = C` with `ρ = rφ²` the area radius, so
//! `|∇u| = c ρ^{-γ}` with `γ = 2/(p-1)` and `c = C^{1/(p-1)}`. Since
//! `du/dr = φ² |∇u|`, the potential is fixed by the single kernel integral
//!
//! ```text
//! K(r) = ∫_r^∞ φ(s)² ρ(s)^{-γ} ds,      1 - u(r) = c K(r).
//! ```
//!
//! The Green's function (p = 2, pole at the origin, flux 4π) has `c = 1`.
//! The capacitary potential (`u = 0` at `r₀`) has `c = 1 / K(r₀)`.
//! `K` is tabulated on a log-spaced grid by Gauss–Kronrod segment
//! integrals plus an analytic series for the far tail; off-node values
//! integrate the partial segment, so no interpolation error enters.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metric::MetricModel;
use crate::quadrature::{integrate, QuadTolerance};

/// Relative accuracy demanded of the far-field tail series.
const TAIL_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// `Δu = 4π δ_o`, `u → 1` at infinity.
    GreenPole,
    /// `Δ_p u = 0`, `u = 0` on the inner sphere, `u → 1` at infinity.
    Capacitary,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::GreenPole => "green",
            Problem::Capacitary => "capacitary",
        }
    }
}

/// Log-spaced radial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl RadialGrid {
    pub const DEFAULT_NODES: usize = 4096;

    pub fn new(r_min: f64, r_max: f64, nodes: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(Error::param("grid", format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if nodes < 8 {
            return Err(Error::param("grid", format!("need at least 8 nodes, got {nodes}")));
        }
        Ok(Self { r_min, r_max, nodes })
    }

    /// Default outer radius `10⁶ · max(|m|, r₀, 1)`.
    pub fn default_r_max(model: &MetricModel) -> f64 {
        1e6 * model
            .mass_param()
            .abs()
            .max(model.inner_radius().unwrap_or(0.0))
            .max(1.0)
    }

    /// Default grid for the Green's function problem.
    pub fn for_green(model: &MetricModel, exterior: bool) -> Result<Self> {
        let m = model.mass_param().abs();
        let r_min = if exterior && m > 0.0 {
            0.5 * m
        } else {
            (model.smoothing() / 100.0).max(1e-3 * m.max(1.0))
        }
        .max(model.domain_start());
        Self::new(r_min, Self::default_r_max(model), Self::DEFAULT_NODES)
    }

    /// Default grid for the capacitary problem, starting at the inner radius.
    pub fn for_capacitary(model: &MetricModel) -> Result<Self> {
        let r0 = model
            .inner_radius()
            .ok_or_else(|| Error::param("inner_radius", "capacitary problem needs an inner radius"))?;
        Self::new(r0, Self::default_r_max(model), Self::DEFAULT_NODES)
    }

    pub fn radii(&self) -> Vec<f64> {
        let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
        let n = self.nodes;
        let mut r: Vec<f64> = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        r[0] = self.r_min;
        r[n - 1] = self.r_max;
        r
    }
}

/// A radial harmonic or p-harmonic potential.
#[derive(Debug, Clone)]
pub struct RadialSolution {
    model: MetricModel,
    problem: Problem,
    p: f64,
    exterior: bool,
    flux_constant: f64,
    c_p: f64,
    radii: Vec<f64>,
    kernel: Vec<f64>,
}

fn kernel_integrand(model: &MetricModel, gamma: f64) -> impl Fn(f64) -> f64 + '_ {
    move |s| {
        let phi = model.conformal_factor(s).unwrap_or(f64::NAN);
        phi.powf(2.0 - 2.0 * gamma) * s.powf(-gamma)
    }
}

/// `∫_R^∞ (1 + μ/s)^β s^{-γ} ds` by its convergent series in `μ/R`.
fn far_tail(mass: f64, gamma: f64, big_r: f64) -> Result<f64> {
    let mu = 0.5 * mass / big_r;
    if mu.abs() >= 0.5 {
        return Err(Error::Quadrature(format!(
            "far-field series needs |m|/(2R) < 1/2, got {mu} at R = {big_r}"
        )));
    }
    let beta = 2.0 - 2.0 * gamma;
    let lead = big_r.powf(1.0 - gamma);
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut mu_k = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        let term = binom * mu_k / (gamma + kf - 1.0);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            return Ok(lead * sum);
        }
        binom *= (beta - kf) / (kf + 1.0);
        mu_k *= mu;
    }
    Err(Error::Quadrature("far-field series did not converge".into()))
}

impl RadialSolution {
    /// Green's function with pole at the origin, normalised so that
    /// `∫ |∇u| dσ = 4π` on every level and `u → 1` at infinity.
    ///
    /// `exterior` admits charts that are incomplete at the origin (exact
    /// Schwarzschild); such solutions serve as closed-form oracles.
    pub fn solve_green(model: &MetricModel, grid: RadialGrid, exterior: bool) -> Result<Self> {
        if !exterior && !model.is_complete_at_pole() {
            return Err(Error::Domain(format!(
                "{} is not complete at the pole; request the exterior solution explicitly",
                model.kind()
            )));
        }
        let mut sol = Self::tabulate(model, Problem::GreenPole, 2.0, grid)?;
        sol.exterior = exterior;
        sol.flux_constant = 1.0;
        sol.c_p = 1.0;
        Ok(sol)
    }

    /// p-capacitary potential of the inner sphere `r = r₀`.
    pub fn solve_capacitary(model: &MetricModel, p: f64, grid: RadialGrid) -> Result<Self> {
        if !(p > 1.0 && p < 3.0) {
            return Err(Error::param("p", format!("must lie in (1, 3), got {p}")));
        }
        let r0 = model
            .inner_radius()
            .ok_or_else(|| Error::param("inner_radius", "capacitary problem needs an inner radius"))?;
        if (grid.r_min - r0).abs() > 1e-14 * r0 {
            return Err(Error::param("grid", format!("grid must start at r0 = {r0}, starts at {}", grid.r_min)));
        }
        let mut sol = Self::tabulate(model, Problem::Capacitary, p, grid)?;
        // u(∞) - u(r₀) = c K(r₀) = 1 fixes the normalisation in closed form.
        let k0 = sol.kernel[0];
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::Normalization(format!("normalisation integral is {k0}")));
        }
        sol.c_p = 1.0 / k0;
        sol.flux_constant = sol.c_p.powf(p - 1.0);
        if !(sol.flux_constant.is_finite() && sol.flux_constant > 0.0) {
            return Err(Error::Normalization(format!(
                "flux constant {} is not a positive finite number",
                sol.flux_constant
            )));
        }
        Ok(sol)
    }

    fn tabulate(model: &MetricModel, problem: Problem, p: f64, grid: RadialGrid) -> Result<Self> {
        if grid.r_min < model.domain_start() {
            return Err(Error::Domain(format!(
                "grid starts at {} below the metric domain {}",
                grid.r_min,
                model.domain_start()
            )));
        }
        let gamma = 2.0 / (p - 1.0);
        let radii = grid.radii();
        let f = kernel_integrand(model, gamma);
        // Positivity of φ on the whole grid.
        for &r in &radii {
            model.conformal_factor(r)?;
        }
        let tol = QuadTolerance {
            rel: 1e-13,
            abs: 0.0,
            max_intervals: 200,
        };
        let segments: Vec<f64> = radii
            .windows(2)
            .map(|w| integrate(&f, w[0], w[1], tol).map(|q| q.value))
            .collect::<Result<_>>()?;

        let r_max = grid.r_max;
        let mass = model.mass_param();
        let tail = far_tail(mass, gamma, r_max)?;
        // The series assumes φ = 1 + m/(2r) exactly beyond r_max.
        let phi_far = 1.0 + 0.5 * mass / r_max;
        let phi_true = model.conformal_factor(r_max)?;
        let mut kernel = vec![0.0; radii.len()];
        kernel[radii.len() - 1] = tail;
        for i in (0..segments.len()).rev() {
            kernel[i] = kernel[i + 1] + segments[i];
        }
        let tail_err = (2.0 - 2.0 * gamma).abs() * (phi_true - phi_far).abs() / phi_true * tail;
        if tail_err > TAIL_REL_TOL * kernel[0] {
            return Err(Error::Quadrature(format!(
                "far-field tail error {tail_err:.3e} exceeds {TAIL_REL_TOL:e} of the total {:.3e}; increase r_max",
                kernel[0]
            )));
        }
        if kernel.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(Error::Quadrature("kernel integral is not positive and finite".into()));
        }
        Ok(Self {
            model: model.clone(),
            problem,
            p,
            exterior: false,
            flux_constant: f64::NAN,
            c_p: f64::NAN,
            radii,
            kernel,
        })
    }

    pub fn model(&self) -> &MetricModel {
        &self.model
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_exterior(&self) -> bool {
        self.exterior
    }

    /// `C` in `ρ² |∇u|^{p-1} ≡ C`.
    pub fn flux_constant(&self) -> f64 {
        self.flux_constant
    }

    /// `c_p = C^{1/(p-1)}`; equal to 1 for the Green's function.
    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    fn gamma(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// `(p - 1)/(3 - p)`.
    pub fn q(&self) -> f64 {
        (self.p - 1.0) / (3.0 - self.p)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("non-empty grid")
    }

    /// Kernel values `K(rᵢ)` on the grid nodes.
    pub fn kernel_table(&self) -> &[f64] {
        &self.kernel
    }

    fn kernel_at(&self, r: f64) -> Result<f64> {
        if !(r >= self.r_min()) {
            return Err(Error::Domain(format!(
                "r = {r} below the solved range starting at {}",
                self.r_min()
            )));
        }
        if r >= self.r_max() {
            return far_tail(self.model.mass_param(), self.gamma(), r);
        }
        let j = self.radii.partition_point(|&x| x <= r);
        let i = j - 1;
        if self.radii[i] == r {
            return Ok(self.kernel[i]);
        }
        let f = kernel_integrand(&self.model, self.gamma());
        let part = integrate(f, r, self.radii[j], QuadTolerance::default())?.value;
        Ok(self.kernel[j] + part)
    }

    /// `1 - u(r)`, accurate to relative rounding even where `u ≈ 1`.
    pub fn one_minus_u(&self, r: f64) -> Result<f64> {
        Ok(self.c_p * self.kernel_at(r)?)
    }

    pub fn u(&self, r: f64) -> Result<f64> {
        Ok(1.0 - self.one_minus_u(r)?)
    }

    /// Metric norm of the gradient, `c ρ^{-γ}`.
    pub fn grad_norm(&self, r: f64) -> Result<f64> {
        let rho = self.model.area_radius(r)?;
        Ok(self.c_p * rho.powf(-self.gamma()))
    }

    /// `d|∇u|/ds` along the unit radial direction: `-γ |∇u| (dρ/ds) / ρ`.
    pub fn grad_norm_rate(&self, r: f64) -> Result<f64> {
        let geo = self.model.sphere_geometry(r)?;
        Ok(-self.gamma() * self.grad_norm(r)? * geo.area_radius_rate / geo.area_radius)
    }

    /// `du/dr` in the coordinate radius.
    pub fn du_dr(&self, r: f64) -> Result<f64> {
        let phi = self.model.conformal_factor(r)?;
        Ok(phi * phi * self.grad_norm(r)?)
    }

    /// Capacity `Cap_p = 4πC` of the inner sphere.
    pub fn capacity(&self) -> Result<f64> {
        match self.problem {
            Problem::Capacitary => Ok(4.0 * PI * self.flux_constant),
            Problem::GreenPole => Err(Error::Domain("capacity is defined for the capacitary problem".into())),
        }
    }

    /// `(c_p, β_p)` with `β_p = (c_p (p-1)/(3-p))^{(p-1)/(3-p)}`.
    pub fn cp_beta(&self) -> Result<(f64, f64)> {
        self.capacity()?;
        let q = self.q();
        Ok((self.c_p, (self.c_p * q).powf(q)))
    }

    /// Coordinate radius of the level `{1 - u = target}`.
    pub fn radius_of_level(&self, one_minus_u: f64) -> Result<f64> {
        if !(one_minus_u > 0.0) {
            return Err(Error::Domain(format!("level 1 - u = {one_minus_u} is not below 1")));
        }
        let target = one_minus_u / self.c_p;
        let k0 = self.kernel[0];
        if target > k0 * (1.0 + 1e-14) {
            return Err(Error::Domain(format!(
                "level 1 - u = {one_minus_u} lies inside the solved range (max {})",
                self.c_p * k0
            )));
        }
        if target >= k0 {
            return Ok(self.r_min());
        }
        let n = self.radii.len();
        let (mut lo, mut hi) = if target >= self.kernel[n - 1] {
            // kernel is decreasing: first index with kernel < target
            let j = self.kernel.partition_point(|&k| k >= target);
            (self.radii[j - 1], self.radii[j])
        } else {
            let mut hi = self.r_max() * 2.0;
            while far_tail(self.model.mass_param(), self.gamma(), hi)? > target {
                hi *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Domain(format!("level 1 - u = {one_minus_u} is beyond reach")));
                }
            }
            (self.r_max(), hi)
        };
        let gamma = self.gamma();
        let mut r = (lo * hi).sqrt();
        for _ in 0..200 {
            let k = self.kernel_at(r)?;
            let g = k - target;
            if g == 0.0 {
                return Ok(r);
            }
            if g > 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let phi = self.model.conformal_factor(r)?;
            let dk = -phi.powf(2.0 - 2.0 * gamma) * r.powf(-gamma);
            let mut next = r - g / dk;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * r {
                return Ok(next);
            }
            r = next;
        }
        Err(Error::Domain(format!("level inversion for 1 - u = {one_minus_u} did not converge")))
    }

    pub fn describe(&self) -> String {
        let cap = self.capacity().map_or("n/a".to_string(), |c| format!("{c:.17e}"));
        format!(
            "{} problem={} p={} C={:.17e} c_p={:.17e} Cap_p={}",
            self.model.describe(),
            self.problem.name(),
            self.p,
            self.flux_constant,
            self.c_p,
            cap
        )
    }

    /// Tabular export with header `r,u,gradnorm` preceded by `#` metadata.
    pub fn to_table(&self) -> Result<String> {
        let mut out = String::new();
        let cap = self.capacity().map_or("n/a".to_string(), |c| format!("{c:.17e}"));
        let _ = writeln!(out, "# kind={}", self.model.kind());
        let _ = writeln!(out, "# m={}", self.model.mass_param());
        let _ = writeln!(out, "# a={}", self.model.smoothing());
        let _ = writeln!(out, "# p={}", self.p);
        let _ = writeln!(out, "# problem={}", self.problem.name());
        let _ = writeln!(out, "# C={:.17e}", self.flux_constant);
        let _ = writeln!(out, "# Cap_p={cap}");
        out.push_str("r,u,gradnorm\n");
        for (r, k) in self.radii.iter().zip(&self.kernel) {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e}",
                r,
                1.0 - self.c_p * k,
                self.grad_norm(*r)?
            );
        }
        Ok(out)
    }

    pub fn write_table(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table()?).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn flat_green_is_one_minus_inverse_radius() {
        let model = MetricModel::flat();
        let sol = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, false).unwrap(), false).unwrap();
        for &r in &[1e-3, 0.37, 1.0, 250.0, 3e6] {
            assert!(rel(sol.one_minus_u(r).unwrap(), 1.0 / r) < 1e-13, "r = {r}");
            assert!(rel(sol.grad_norm(r).unwrap(), 1.0 / (r * r)) < 1e-14);
        }
    }

    #[test]
    fn exterior_schwarzschild_green_closed_form() {
        let m = 2.0;
        let model = MetricModel::schwarzschild(m).unwrap();
        assert!(RadialSolution::solve_green(&model, RadialGrid::for_green(&model, true).unwrap(), false).is_err());
        let sol = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, true).unwrap(), true).unwrap();
        for &r in &[1.0, 1.7, 9.0, 1234.5, 5e7] {
            assert!(rel(sol.one_minus_u(r).unwrap(), 1.0 / (r + 0.5 * m)) < 1e-13, "r = {r}");
        }
    }

    #[test]
    fn smoothed_green_far_value_matches_expansion() {
        let model = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
        let sol = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, false).unwrap(), false).unwrap();
        let u = sol.u(1e4).unwrap();
        // 1 - u(10⁴) from a 40-digit quadrature of the same integral.
        let expected_one_minus_u = 0.000_099_990_000_999_925_003_999_875;
        assert!((1.0 - u - expected_one_minus_u).abs() < 1e-11 * 1e-4);
        assert!((u - (1.0 - 1e-4 + 1e-8)).abs() < 1e-11);
    }

    #[test]
    fn capacitary_flat_closed_forms() {
        let model = MetricModel::flat().with_inner_radius(1.0).unwrap();
        let grid = RadialGrid::for_capacitary(&model).unwrap();
        let sol = RadialSolution::solve_capacitary(&model, 2.0, grid).unwrap();
        assert!(rel(sol.capacity().unwrap(), 4.0 * PI) < 1e-12);
        assert!(rel(sol.u(3.0).unwrap(), 2.0 / 3.0) < 1e-13);
        assert_eq!(sol.u(1.0).unwrap(), 0.0);

        let sol = RadialSolution::solve_capacitary(&model, 1.5, grid).unwrap();
        let (c, beta) = sol.cp_beta().unwrap();
        assert!(rel(c, 3.0) < 1e-11);
        assert!(rel(sol.capacity().unwrap(), 4.0 * PI * 3f64.sqrt()) < 1e-11);
        assert!(rel(beta, 1.0) < 1e-11);
    }

    #[test]
    fn capacitary_schwarzschild_p2_closed_form() {
        let m = 1.3;
        let model = MetricModel::schwarzschild_horizon(m).unwrap();
        let sol = RadialSolution::solve_capacitary(&model, 2.0, RadialGrid::for_capacitary(&model).unwrap()).unwrap();
        assert!(rel(sol.c_p(), m) < 1e-12);
        assert!(rel(sol.capacity().unwrap(), 4.0 * PI * m) < 1e-12);
        for &r in &[0.65, 1.0, 40.0] {
            assert!(rel(sol.one_minus_u(r).unwrap(), m / (r + 0.5 * m)) < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let flat = MetricModel::flat();
        let grid = RadialGrid::new(1.0, 1e6, 100).unwrap();
        assert!(RadialSolution::solve_capacitary(&flat, 2.0, grid).is_err());
        let with_r0 = flat.clone().with_inner_radius(1.0).unwrap();
        assert!(RadialSolution::solve_capacitary(&with_r0, 3.0, grid).is_err());
        assert!(RadialSolution::solve_capacitary(&with_r0, 1.0, grid).is_err());
        assert!(RadialGrid::new(0.0, 1.0, 100).is_err());
        let green = RadialSolution::solve_green(&flat, grid, false).unwrap();
        assert!(green.capacity().is_err());
        assert!(green.one_minus_u(0.5).is_err());
    }

    #[test]
    fn level_inversion_round_trips() {
        let model = MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap();
        let sol = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, false).unwrap(), false).unwrap();
        for &r in &[0.01, 0.2, 3.3, 1e3, 2e6, 5e7] {
            let w = sol.one_minus_u(r).unwrap();
            let back = sol.radius_of_level(w).unwrap();
            assert!(rel(back, r) < 1e-12, "r = {r}, back = {back}");
        }
        assert!(sol.radius_of_level(1e9).is_err());
    }

    #[test]
    fn table_export_has_header_and_rows() {
        let model = MetricModel::flat();
        let grid = RadialGrid::new(1.0, 1e6, 16).unwrap();
        let sol = RadialSolution::solve_green(&model, grid, false).unwrap();
        let text = sol.to_table().unwrap();
        assert!(text.contains("# kind=flat"));
        assert!(text.contains("# C=1.00000000000000000e0"));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "r,u,gradnorm");
        assert_eq!(rows.len(), 17);
    }
}
