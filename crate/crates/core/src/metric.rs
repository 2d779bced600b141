//! Rotationally symmetric, conformally flat metrics `g = φ(r)⁴ δ` and the
//! closed-form geometry of their coordinate spheres.
//!
//! All lengths and masses are in geometric units (G = c = 1).

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Flat,
    SchwarzschildIsotropic,
    SmoothedSchwarzschild,
    CustomRadialConformal,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Flat => "flat",
            MetricKind::SchwarzschildIsotropic => "schwarzschild",
            MetricKind::SmoothedSchwarzschild => "smoothed-schwarzschild",
            MetricKind::CustomRadialConformal => "custom",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flat" => Ok(MetricKind::Flat),
            "schwarzschild" | "schwarzschild-isotropic" => Ok(MetricKind::SchwarzschildIsotropic),
            "smoothed-schwarzschild" | "smoothed" => Ok(MetricKind::SmoothedSchwarzschild),
            "custom" | "custom-radial" => Ok(MetricKind::CustomRadialConformal),
            other => Err(Error::param("kind", format!("unknown metric kind `{other}`"))),
        }
    }
}

/// Conformal factor sampled on a table, interpolated by a natural cubic
/// spline. Beyond the last knot the profile continues as `1 + M/(2r)` with
/// `M` matched to the last sample.
#[derive(Debug, Clone)]
pub struct CustomProfile {
    spline: CubicSpline,
    far_mass: f64,
}

impl CustomProfile {
    pub fn from_samples(r: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if r.len() < 4 {
            return Err(Error::param("profile", "need at least 4 samples"));
        }
        if r[0] < 0.0 {
            return Err(Error::param("profile", "radii must be nonnegative"));
        }
        if let Some(bad) = phi.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::param("profile", format!("conformal factor must be positive, got {bad}")));
        }
        let r_last = *r.last().unwrap();
        let phi_last = *phi.last().unwrap();
        let spline = CubicSpline::natural(r, phi)?;
        Ok(Self {
            spline,
            far_mass: 2.0 * r_last * (phi_last - 1.0),
        })
    }

    /// Parse two-column comma-separated text with header `r,phi`.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            reason,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.replace(' ', "") == "r,phi" => {}
            Some((n, h)) => return Err(parse_err(n, format!("expected header `r,phi`, found `{h}`"))),
            None => return Err(parse_err(0, "empty profile".into())),
        }
        let mut r = Vec::new();
        let mut phi = Vec::new();
        for (n, line) in lines {
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(parse_err(n, format!("expected two columns, found `{line}`")));
            };
            let a: f64 = a.parse().map_err(|_| parse_err(n, format!("bad radius `{a}`")))?;
            let b: f64 = b.parse().map_err(|_| parse_err(n, format!("bad phi `{b}`")))?;
            if let Some(&prev) = r.last() {
                if !(a > prev) {
                    return Err(parse_err(n, format!("radius {a} not strictly increasing")));
                }
            }
            r.push(a);
            phi.push(b);
        }
        Self::from_samples(r, phi)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn derivs(&self, r: f64) -> Result<(f64, f64, f64)> {
        if r < self.spline.x_min() {
            return Err(Error::Domain(format!(
                "r = {r} below the first profile sample {}",
                self.spline.x_min()
            )));
        }
        if r <= self.spline.x_max() {
            return Ok(self.spline.eval(r));
        }
        let k = 0.5 * self.far_mass;
        Ok((1.0 + k / r, -k / (r * r), 2.0 * k / (r * r * r)))
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Flat,
    Schwarzschild { mass: f64 },
    Smoothed { mass: f64, a: f64 },
    Custom(Arc<CustomProfile>),
}

/// Conformal factor and its first two radial derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ConformalDerivs {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    /// `φ'(r)/r`, continued to its limit at `r = 0` where that is finite.
    pub d1_over_r: f64,
}

impl ConformalDerivs {
    /// Radial flat Laplacian `φ'' + 2φ'/r`.
    pub fn flat_laplacian(&self) -> f64 {
        self.d2 + 2.0 * self.d1_over_r
    }
}

/// Geometry of the coordinate sphere `{|x| = r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    pub coord_radius: f64,
    /// Area radius `ρ = r φ²`.
    pub area_radius: f64,
    pub area: f64,
    /// Mean curvature with respect to the outward (∞-pointing) normal.
    pub mean_curv: f64,
    pub intrinsic_scalar_curv: f64,
    pub ambient_scalar_curv: f64,
    /// `dρ/ds` with `s` the metric distance along the radial direction.
    pub area_radius_rate: f64,
}

/// A member of the test family of asymptotically flat metrics.
#[derive(Debug, Clone)]
pub struct MetricModel {
    profile: Profile,
    inner_radius: Option<f64>,
}

impl MetricModel {
    pub fn flat() -> Self {
        Self {
            profile: Profile::Flat,
            inner_radius: None,
        }
    }

    /// Exact Schwarzschild in isotropic coordinates, `φ = 1 + m/(2r)`.
    pub fn schwarzschild(mass: f64) -> Result<Self> {
        if !mass.is_finite() {
            return Err(Error::param("mass", "must be finite"));
        }
        Ok(Self {
            profile: Profile::Schwarzschild { mass },
            inner_radius: None,
        })
    }

    /// `φ = 1 + m / (2 √(r² + a²))`, complete for `a > 0`.
    pub fn smoothed_schwarzschild(mass: f64, a: f64) -> Result<Self> {
        if !mass.is_finite() || !a.is_finite() {
            return Err(Error::param("mass", "mass and smoothing must be finite"));
        }
        if a < 0.0 {
            return Err(Error::param("smoothing_a", format!("must be >= 0, got {a}")));
        }
        if a == 0.0 {
            return Self::schwarzschild(mass);
        }
        if 1.0 + mass / (2.0 * a) <= 0.0 {
            return Err(Error::param(
                "smoothing_a",
                format!("conformal factor vanishes at the origin for m = {mass}, a = {a}"),
            ));
        }
        Ok(Self {
            profile: Profile::Smoothed { mass, a },
            inner_radius: None,
        })
    }

    pub fn custom(profile: CustomProfile) -> Self {
        Self {
            profile: Profile::Custom(Arc::new(profile)),
            inner_radius: None,
        }
    }

    /// Schwarzschild with its horizon `r₀ = m/2` as inner boundary.
    pub fn schwarzschild_horizon(mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::param("mass", "horizon requires m > 0"));
        }
        Self::schwarzschild(mass)?.with_inner_radius(0.5 * mass)
    }

    pub fn with_inner_radius(mut self, r0: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::param("inner_radius", format!("must be positive, got {r0}")));
        }
        self.conformal_factor(r0)?;
        self.inner_radius = Some(r0);
        Ok(self)
    }

    pub fn kind(&self) -> MetricKind {
        match self.profile {
            Profile::Flat => MetricKind::Flat,
            Profile::Schwarzschild { .. } => MetricKind::SchwarzschildIsotropic,
            Profile::Smoothed { .. } => MetricKind::SmoothedSchwarzschild,
            Profile::Custom(_) => MetricKind::CustomRadialConformal,
        }
    }

    /// The `m` of the far-field form `φ ≈ 1 + m/(2r)`.
    pub fn mass_param(&self) -> f64 {
        match &self.profile {
            Profile::Flat => 0.0,
            Profile::Schwarzschild { mass } | Profile::Smoothed { mass, .. } => *mass,
            Profile::Custom(c) => c.far_mass,
        }
    }

    pub fn smoothing(&self) -> f64 {
        match self.profile {
            Profile::Smoothed { a, .. } => a,
            _ => 0.0,
        }
    }

    pub fn inner_radius(&self) -> Option<f64> {
        self.inner_radius
    }

    /// Smallest admissible coordinate radius.
    pub fn domain_start(&self) -> f64 {
        match &self.profile {
            Profile::Flat | Profile::Smoothed { .. } => 0.0,
            Profile::Schwarzschild { mass } if *mass < 0.0 => -0.5 * mass,
            Profile::Schwarzschild { .. } => 0.0,
            Profile::Custom(c) => c.spline.x_min(),
        }
    }

    /// Whether the metric extends smoothly through `r = 0`, so that a Green's
    /// function with pole at the origin lives on a complete manifold.
    pub fn is_complete_at_pole(&self) -> bool {
        match &self.profile {
            Profile::Flat | Profile::Smoothed { .. } => true,
            Profile::Schwarzschild { mass } => *mass == 0.0,
            Profile::Custom(c) => c.spline.x_min() == 0.0,
        }
    }

    pub fn derivs(&self, r: f64) -> Result<ConformalDerivs> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radius must be finite and >= 0, got {r}")));
        }
        let d = match &self.profile {
            Profile::Flat => ConformalDerivs {
                phi: 1.0,
                d1: 0.0,
                d2: 0.0,
                d1_over_r: 0.0,
            },
            Profile::Schwarzschild { mass } => {
                if r == 0.0 && *mass != 0.0 {
                    return Err(Error::Domain("Schwarzschild chart is singular at r = 0".into()));
                }
                if *mass == 0.0 {
                    ConformalDerivs {
                        phi: 1.0,
                        d1: 0.0,
                        d2: 0.0,
                        d1_over_r: 0.0,
                    }
                } else {
                    let d1 = -mass / (2.0 * r * r);
                    ConformalDerivs {
                        phi: 1.0 + mass / (2.0 * r),
                        d1,
                        d2: mass / (r * r * r),
                        d1_over_r: d1 / r,
                    }
                }
            }
            Profile::Smoothed { mass, a } => {
                let w2 = r * r + a * a;
                let w = w2.sqrt();
                let w3 = w2 * w;
                let w5 = w3 * w2;
                ConformalDerivs {
                    phi: 1.0 + mass / (2.0 * w),
                    d1: -mass * r / (2.0 * w3),
                    d2: 0.5 * mass * (2.0 * r * r - a * a) / w5,
                    d1_over_r: -mass / (2.0 * w3),
                }
            }
            Profile::Custom(c) => {
                let (phi, d1, d2) = c.derivs(r)?;
                let d1_over_r = if r > 0.0 {
                    d1 / r
                } else if d1 == 0.0 {
                    d2
                } else {
                    return Err(Error::Domain(
                        "custom profile has a conical point at r = 0 (φ'(0) ≠ 0)".into(),
                    ));
                };
                ConformalDerivs { phi, d1, d2, d1_over_r }
            }
        };
        if !(d.phi > 0.0) {
            return Err(Error::Domain(format!(
                "conformal factor is not positive at r = {r} (φ = {})",
                d.phi
            )));
        }
        Ok(d)
    }

    pub fn conformal_factor(&self, r: f64) -> Result<f64> {
        Ok(self.derivs(r)?.phi)
    }

    /// `R = −8 φ⁻⁵ Δ_flat φ`.
    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        let d = self.derivs(r)?;
        let lap = match self.profile {
            Profile::Schwarzschild { .. } | Profile::Flat => 0.0,
            Profile::Smoothed { mass, a } => {
                let w2 = r * r + a * a;
                -1.5 * mass * a * a / (w2 * w2 * w2.sqrt())
            }
            Profile::Custom(_) => d.flat_laplacian(),
        };
        Ok(-8.0 * lap / d.phi.powi(5))
    }

    /// Ricci curvature in the unit radial direction, `Ric(ν, ν)`.
    pub fn radial_ricci(&self, r: f64) -> Result<f64> {
        let d = self.derivs(r)?;
        let p = d.phi;
        Ok((-4.0 * d.d2 / p + 4.0 * d.d1 * d.d1 / (p * p) - 4.0 * d.d1_over_r / p) / p.powi(4))
    }

    pub fn area_radius(&self, r: f64) -> Result<f64> {
        let phi = self.conformal_factor(r)?;
        Ok(r * phi * phi)
    }

    pub fn sphere_geometry(&self, r: f64) -> Result<SphereGeometry> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("coordinate sphere needs r > 0, got {r}")));
        }
        let d = self.derivs(r)?;
        let phi2 = d.phi * d.phi;
        let rho = r * phi2;
        let drho_dr = phi2 + 2.0 * r * d.phi * d.d1;
        let rate = drho_dr / phi2;
        Ok(SphereGeometry {
            coord_radius: r,
            area_radius: rho,
            area: 4.0 * PI * rho * rho,
            mean_curv: 2.0 * rate / rho,
            intrinsic_scalar_curv: 2.0 / (rho * rho),
            ambient_scalar_curv: self.scalar_curvature(r)?,
            area_radius_rate: rate,
        })
    }

    /// Area of the inner boundary sphere.
    pub fn horizon_area(&self) -> Result<f64> {
        let r0 = self
            .inner_radius
            .ok_or_else(|| Error::param("inner_radius", "horizon area needs an inner radius"))?;
        let rho = self.area_radius(r0)?;
        Ok(4.0 * PI * rho * rho)
    }

    /// Human-readable metadata used in exported headers.
    pub fn describe(&self) -> String {
        format!(
            "kind={} m={} a={} r0={}",
            self.kind(),
            self.mass_param(),
            self.smoothing(),
            self.inner_radius.map_or("none".to_string(), |v| v.to_string())
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn conformal_factor_examples() {
        assert_eq!(MetricModel::flat().conformal_factor(5.0).unwrap(), 1.0);
        let s = MetricModel::schwarzschild(2.0).unwrap();
        assert!(close(s.conformal_factor(9.0).unwrap(), 10.0 / 9.0, 1e-15));
        let sm = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
        assert!(close(sm.conformal_factor(0.0).unwrap(), 2.0, 1e-15));
    }

    #[test]
    fn singular_chart_rejects_origin() {
        let s = MetricModel::schwarzschild(1.0).unwrap();
        assert!(matches!(s.conformal_factor(0.0), Err(Error::Domain(_))));
        assert!(s.conformal_factor(-1.0).is_err());
        // a negative-mass Schwarzschild chart degenerates where φ = 0
        let neg = MetricModel::schwarzschild(-1.0).unwrap();
        assert!(neg.conformal_factor(0.4).is_err());
    }

    #[test]
    fn scalar_curvature_examples() {
        let s = MetricModel::schwarzschild(1.0).unwrap();
        assert_eq!(s.scalar_curvature(3.0).unwrap(), 0.0);
        let sm = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
        assert!(close(sm.scalar_curvature(0.0).unwrap(), 0.75, 1e-14));
        assert_eq!(MetricModel::flat().scalar_curvature(7.0).unwrap(), 0.0);
    }

    #[test]
    fn smoothed_curvature_matches_generic_laplacian() {
        let sm = MetricModel::smoothed_schwarzschild(1.5, 0.7).unwrap();
        for &r in &[0.0, 0.1, 0.9, 4.0, 30.0] {
            let d = sm.derivs(r).unwrap();
            let generic = -8.0 * d.flat_laplacian() / d.phi.powi(5);
            assert!(close(sm.scalar_curvature(r).unwrap(), generic, 1e-10), "r = {r}");
        }
    }

    #[test]
    fn sphere_geometry_examples() {
        let g = MetricModel::flat().sphere_geometry(4.0).unwrap();
        assert_eq!(g.area_radius, 4.0);
        assert!(close(g.area, 64.0 * PI, 1e-15));
        assert!(close(g.mean_curv, 0.5, 1e-15));
        assert!(close(g.intrinsic_scalar_curv, 2.0 / 16.0, 1e-15));

        let s = MetricModel::schwarzschild(2.0).unwrap();
        let g = s.sphere_geometry(9.0).unwrap();
        assert!(close(g.area_radius, 100.0 / 9.0, 1e-14));
        assert!(close(g.mean_curv, 0.144, 1e-14));
        let closed_form = (2.0 / g.area_radius) * (1.0 - 1.0 / 9.0) / (1.0 + 1.0 / 9.0);
        assert!(close(g.mean_curv, closed_form, 1e-14));

        let horizon = s.sphere_geometry(1.0).unwrap();
        assert!(horizon.mean_curv.abs() < 1e-15);
    }

    #[test]
    fn horizon_area_examples() {
        let s = MetricModel::schwarzschild(2.0).unwrap().with_inner_radius(1.0).unwrap();
        assert!(close(s.horizon_area().unwrap(), 64.0 * PI, 1e-14));
        let f = MetricModel::flat().with_inner_radius(1.0).unwrap();
        assert!(close(f.horizon_area().unwrap(), 4.0 * PI, 1e-15));
        let s1 = MetricModel::schwarzschild_horizon(1.0).unwrap();
        assert!(close(s1.horizon_area().unwrap(), 16.0 * PI, 1e-14));
        assert!(MetricModel::flat().horizon_area().is_err());
    }

    #[test]
    fn schwarzschild_radial_ricci_is_minus_two_m_over_rho_cubed() {
        let s = MetricModel::schwarzschild(1.3).unwrap();
        for &r in &[0.7, 2.0, 11.0] {
            let rho = s.area_radius(r).unwrap();
            assert!(close(s.radial_ricci(r).unwrap(), -2.0 * 1.3 / rho.powi(3), 1e-12));
        }
    }

    #[test]
    fn custom_profile_reproduces_smoothed_schwarzschild() {
        let sm = MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap();
        let r: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let phi: Vec<f64> = r.iter().map(|&x| sm.conformal_factor(x).unwrap()).collect();
        let custom = MetricModel::custom(CustomProfile::from_samples(r, phi).unwrap());
        assert_eq!(custom.kind(), MetricKind::CustomRadialConformal);
        assert!(close(custom.mass_param(), 1.0, 1e-3));
        for &x in &[0.3, 2.0, 17.5] {
            assert!(close(custom.conformal_factor(x).unwrap(), sm.conformal_factor(x).unwrap(), 1e-9));
            assert!(close(
                custom.scalar_curvature(x).unwrap(),
                sm.scalar_curvature(x).unwrap(),
                1e-3
            ));
        }
        // continues as 1 + M/(2r) beyond the table
        let far = custom.conformal_factor(1000.0).unwrap();
        assert!(close(far, 1.0 + custom.mass_param() / 2000.0, 1e-14));
    }

    #[test]
    fn custom_profile_text_format() {
        let text = "r,phi\n0,2\n1,1.5\n2,1.25\n4,1.125\n";
        let p = CustomProfile::parse(text, "inline").unwrap();
        assert!(close(p.far_mass, 1.0, 1e-15));
        let bad = "r,phi\n0,2\n1,1.5\n1,1.25\n4,1.125\n";
        match CustomProfile::parse(bad, "inline") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(CustomProfile::parse("x,y\n0,1\n", "inline").is_err());
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in [
            MetricKind::Flat,
            MetricKind::SchwarzschildIsotropic,
            MetricKind::SmoothedSchwarzschild,
            MetricKind::CustomRadialConformal,
        ] {
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
    }
}
