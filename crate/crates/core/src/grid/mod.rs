//! Green's function of `g = φ⁴δ` on a uniform Cartesian grid with an
//! arbitrary pole, for conformal factors that need not be radial about it.
//!
//! Harmonicity reads `div(φ² Du) = 0` in flat coordinates. The pole is
//! removed by writing `u = u_s + w` with `u_s = 1 − 1/(φ(o)² |x − o|)`, so that
//!
//! ```text
//! div(φ² Dw) = −div((φ² − φ(o)²) Du_s)
//! ```
//!
//! with a bounded right-hand side. The 7-point flux-form stencil uses
//! face-averaged `φ²`; the system is symmetric positive definite and is
//! solved by Jacobi-preconditioned conjugate gradients. Reductions are
//! accumulated over fixed chunks in a fixed order, so results do not depend
//! on the number of threads.

mod io;
mod surface;

pub use io::{read_field, write_field, FieldHeader};
pub use surface::{
    extract_level_surface, grid_sweep, surface_integrals, ExtractedSurface, SurfaceIntegrals,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{MetricKind, MetricModel};
use crate::radial::{RadialGrid, RadialSolution};

/// Cube `[−L/2, L/2]³` with `n` nodes per axis and the pole position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub l: f64,
    pub n: usize,
    pub pole: [f64; 3],
}

impl GridSpec {
    pub fn new(l: f64, n: usize, pole: [f64; 3]) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::param("L", format!("must be positive, got {l}")));
        }
        if n < 24 {
            return Err(Error::param("N", format!("need at least 24 nodes per axis, got {n}")));
        }
        let spec = Self { l, n, pole };
        let h = spec.h();
        let margin = pole
            .iter()
            .map(|&c| (0.5 * l - c.abs()) / h)
            .fold(f64::INFINITY, f64::min);
        if !(margin >= 10.0) {
            return Err(Error::param(
                "pole",
                format!("pole must lie at least 10 cells inside the box, margin is {margin:.2} cells"),
            ));
        }
        Ok(spec)
    }

    pub fn h(&self) -> f64 {
        self.l / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.l + i as f64 * self.h()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n + j) * self.n + i
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone)]
enum PhiSource {
    /// Radial profile about the box centre, evaluated analytically.
    Model(MetricModel),
    /// Node samples only; off-node values by trilinear interpolation.
    Sampled,
}

/// Conformal factor sampled on the grid nodes.
#[derive(Debug, Clone)]
pub struct ConformalField {
    spec: GridSpec,
    phi: Vec<f64>,
    source: PhiSource,
    far_mass: f64,
    kind: String,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl ConformalField {
    /// Samples a radial model centred at the box centre.
    pub fn from_model(model: &MetricModel, spec: GridSpec) -> Result<Self> {
        let n = spec.n;
        let phi = (0..spec.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                model.conformal_factor(norm(spec.node(i, j, k)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let field = Self {
            spec,
            phi,
            source: PhiSource::Model(model.clone()),
            far_mass: model.mass_param(),
            kind: model.kind().name().to_string(),
        };
        field.validate()?;
        Ok(field)
    }

    /// Field from raw node samples; `far_mass` sets the Schwarzschildian
    /// far field used for the outer boundary condition.
    pub fn from_samples(spec: GridSpec, phi: Vec<f64>, far_mass: f64, kind: &str) -> Result<Self> {
        if phi.len() != spec.len() {
            return Err(Error::param(
                "phi",
                format!("expected {} node values, got {}", spec.len(), phi.len()),
            ));
        }
        let field = Self {
            spec,
            phi,
            source: PhiSource::Sampled,
            far_mass,
            kind: kind.to_string(),
        };
        field.validate()?;
        Ok(field)
    }

    fn validate(&self) -> Result<()> {
        if let Some(bad) = self.phi.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Domain(format!(
                "conformal factor is not positive at node {bad} (φ = {})",
                self.phi[bad]
            )));
        }
        let dev = self.far_field_deviation();
        if dev > 1e-3 {
            return Err(Error::Domain(format!(
                "φ deviates from 1 + m/(2|x|) by {dev:.3e} on the boundary shell; enlarge the box"
            )));
        }
        Ok(())
    }

    /// Largest `|φ − (1 + m/(2|x|))|` over the boundary nodes.
    pub fn far_field_deviation(&self) -> f64 {
        let n = self.spec.n;
        let mut dev: f64 = 0.0;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let on_boundary = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
                    if on_boundary {
                        let r = norm(self.spec.node(i, j, k));
                        let far = 1.0 + 0.5 * self.far_mass / r;
                        dev = dev.max((self.phi[self.spec.index(i, j, k)] - far).abs());
                    }
                }
            }
        }
        dev
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn phi_nodes(&self) -> &[f64] {
        &self.phi
    }

    pub fn far_mass(&self) -> f64 {
        self.far_mass
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn model(&self) -> Option<&MetricModel> {
        match &self.source {
            PhiSource::Model(m) => Some(m),
            PhiSource::Sampled => None,
        }
    }

    /// `φ` and its flat gradient at an arbitrary point.
    pub fn phi_and_grad(&self, x: [f64; 3]) -> Result<(f64, [f64; 3])> {
        match &self.source {
            PhiSource::Model(model) => {
                let r = norm(x);
                let d = model.derivs(r)?;
                let g = if r > 0.0 {
                    [d.d1 * x[0] / r, d.d1 * x[1] / r, d.d1 * x[2] / r]
                } else {
                    [0.0; 3]
                };
                Ok((d.phi, g))
            }
            PhiSource::Sampled => {
                let c = Cell::locate(&self.spec, x)?;
                let v = c.interp(|i, j, k| self.phi[self.spec.index(i, j, k)]);
                let g = [0, 1, 2].map(|a| c.interp(|i, j, k| nodal_gradient(&self.spec, &self.phi, i, j, k, a)));
                Ok((v, g))
            }
        }
    }
}

/// Trilinear cell location of a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub base: [usize; 3],
    pub frac: [f64; 3],
}

impl Cell {
    pub fn locate(spec: &GridSpec, x: [f64; 3]) -> Result<Self> {
        let h = spec.h();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] + 0.5 * spec.l) / h;
            if !(s >= 0.0 && s <= (spec.n - 1) as f64) {
                return Err(Error::Domain(format!("point {x:?} lies outside the grid")));
            }
            let b = (s.floor() as usize).min(spec.n - 2);
            base[a] = b;
            frac[a] = s - b as f64;
        }
        Ok(Self { base, frac })
    }

    pub fn interp<F: Fn(usize, usize, usize) -> f64>(&self, f: F) -> f64 {
        let [i, j, k] = self.base;
        let [fx, fy, fz] = self.frac;
        let mut acc = 0.0;
        for dk in 0..2 {
            let wz = if dk == 0 { 1.0 - fz } else { fz };
            for dj in 0..2 {
                let wy = if dj == 0 { 1.0 - fy } else { fy };
                for di in 0..2 {
                    let wx = if di == 0 { 1.0 - fx } else { fx };
                    acc += wx * wy * wz * f(i + di, j + dj, k + dk);
                }
            }
        }
        acc
    }
}

fn shift(i: usize, d: isize) -> usize {
    (i as isize + d) as usize
}

/// Central difference along axis `a` (one-sided on the boundary).
fn nodal_gradient(spec: &GridSpec, v: &[f64], i: usize, j: usize, k: usize, a: usize) -> f64 {
    let n = spec.n;
    let h = spec.h();
    let mut p = [i, j, k];
    let c = p[a];
    let (lo, hi) = (if c == 0 { 0 } else { c - 1 }, if c == n - 1 { n - 1 } else { c + 1 });
    p[a] = hi;
    let vh = v[spec.index(p[0], p[1], p[2])];
    p[a] = lo;
    let vl = v[spec.index(p[0], p[1], p[2])];
    (vh - vl) / ((hi - lo) as f64 * h)
}

/// Options for the conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `‖r‖/‖b‖` at which CG stops.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iterations: 20_000,
        }
    }
}

/// Outer boundary data.
#[derive(Debug, Clone)]
enum Boundary {
    Radial(Box<RadialSolution>),
    /// `1 − 1/(|x − o| + m/2)`, exact for Schwarzschild with a shifted pole.
    Exterior(f64),
}

impl Boundary {
    fn value(&self, d: f64) -> Result<f64> {
        match self {
            Boundary::Radial(sol) => sol.u(d),
            Boundary::Exterior(m) => Ok(1.0 - 1.0 / (d + 0.5 * m)),
        }
    }
}

/// A solved 3D Green's function.
#[derive(Debug, Clone)]
pub struct GridSolution {
    field: ConformalField,
    phi_pole: f64,
    /// Regular part `w = u − u_s` on every node.
    w: Vec<f64>,
    iterations: usize,
    residual: f64,
}

const CHUNK: usize = 4096;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// Matrix-free application of `L v = Σ_faces κ_f (v_c − v_nb)` on interior
/// nodes (boundary rows are identity-free zeros: `v` vanishes there).
struct Operator<'a> {
    spec: &'a GridSpec,
    /// Face coefficients toward `+x`, `+y`, `+z` from each node.
    faces: [Vec<f64>; 3],
    diag: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(spec: &'a GridSpec, kappa: &[f64]) -> Self {
        let n = spec.n;
        let len = spec.len();
        let faces = [1, n, n * n].map(|off| {
            (0..len)
                .into_par_iter()
                .map(|c| if c + off < len { 0.5 * (kappa[c] + kappa[c + off]) } else { 0.0 })
                .collect::<Vec<f64>>()
        });
        let mut diag = vec![0.0; len];
        diag.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
            if k == 0 || k == n - 1 {
                return;
            }
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let c = spec.index(i, j, k);
                    let mut s = 0.0;
                    for (f, off) in faces.iter().zip([1, n, n * n]) {
                        s += f[c] + f[c - off];
                    }
                    slab[j * n + i] = s;
                }
            }
        });
        Self { spec, faces, diag }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.spec.n;
        let nn = n * n;
        let [fx, fy, fz] = &self.faces;
        out.par_chunks_mut(nn).enumerate().for_each(|(k, slab)| {
            slab.iter_mut().for_each(|x| *x = 0.0);
            if k == 0 || k == n - 1 {
                return;
            }
            for j in 1..n - 1 {
                let row = (k * n + j) * n;
                for i in 1..n - 1 {
                    let c = row + i;
                    let vc = v[c];
                    slab[j * n + i] = fx[c] * (vc - v[c + 1])
                        + fx[c - 1] * (vc - v[c - 1])
                        + fy[c] * (vc - v[c + n])
                        + fy[c - n] * (vc - v[c - n])
                        + fz[c] * (vc - v[c + nn])
                        + fz[c - nn] * (vc - v[c - nn]);
                }
            }
        });
    }
}

fn neighbours(spec: &GridSpec, i: usize, j: usize, k: usize) -> [usize; 6] {
    [
        spec.index(i - 1, j, k),
        spec.index(i + 1, j, k),
        spec.index(i, j - 1, k),
        spec.index(i, j + 1, k),
        spec.index(i, j, k - 1),
        spec.index(i, j, k + 1),
    ]
}

fn is_boundary(n: usize, i: usize, j: usize, k: usize) -> bool {
    i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1
}

/// Solves for the Green's function with pole `spec.pole`.
pub fn solve_green_3d(field: ConformalField, opts: SolverOptions) -> Result<GridSolution> {
    let spec = field.spec;
    let n = spec.n;
    let pole = spec.pole;
    let (phi_pole, _) = field.phi_and_grad(pole)?;
    let phi_o2 = phi_pole * phi_pole;

    let boundary = match field.model() {
        // exact, and keeps the right-hand side identically zero
        Some(model) if model.kind() == MetricKind::Flat => Boundary::Exterior(0.0),
        Some(model) if model.is_complete_at_pole() => Boundary::Radial(Box::new(RadialSolution::solve_green(
            model,
            RadialGrid::for_green(model, false)?,
            false,
        )?)),
        Some(model) => Boundary::Radial(Box::new(RadialSolution::solve_green(
            model,
            RadialGrid::for_green(model, true)?,
            true,
        )?)),
        None => Boundary::Exterior(field.far_mass),
    };

    let u_sing: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
            let d = norm(sub(spec.node(i, j, k), pole));
            1.0 - 1.0 / (phi_o2 * d)
        })
        .collect();
    let kappa: Vec<f64> = field.phi.iter().map(|p| p * p).collect();

    // boundary values of w
    let mut w0 = vec![0.0; spec.len()];
    w0.par_chunks_mut(n * n)
        .enumerate()
        .try_for_each(|(k, slab)| -> Result<()> {
            for j in 0..n {
                for i in 0..n {
                    if is_boundary(n, i, j, k) {
                        let d = norm(sub(spec.node(i, j, k), pole));
                        slab[j * n + i] = boundary.value(d)? - u_sing[spec.index(i, j, k)];
                    }
                }
            }
            Ok(())
        })?;

    // b = Σ (κ_f − φ_o²)(u_s,nb − u_s,c) + Σ κ_f w0_nb on interior rows
    let op = Operator::new(&spec, &kappa);
    let mut b = vec![0.0; spec.len()];
    b.par_chunks_mut(n * n).enumerate().for_each(|(k, slab)| {
        if k == 0 || k == n - 1 {
            return;
        }
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let c = spec.index(i, j, k);
                let mut s = 0.0;
                for nb in neighbours(&spec, i, j, k) {
                    let kf = 0.5 * (kappa[c] + kappa[nb]) - phi_o2;
                    s += kf * (u_sing[nb] - u_sing[c]);
                }
                for nb in neighbours(&spec, i, j, k) {
                    s += 0.5 * (kappa[c] + kappa[nb]) * w0[nb];
                }
                slab[j * n + i] = s;
            }
        }
    });

    let (v, iterations, residual) = conjugate_gradient(&op, &b, opts)?;
    let w: Vec<f64> = w0.iter().zip(&v).map(|(a, b)| a + b).collect();
    Ok(GridSolution {
        field,
        phi_pole,
        w,
        iterations,
        residual,
    })
}

fn conjugate_gradient(op: &Operator, b: &[f64], opts: SolverOptions) -> Result<(Vec<f64>, usize, f64)> {
    let len = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let inv_diag: Vec<f64> = op.diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iterations {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: f64::NAN,
            });
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= opts.tol {
            return Ok((x, it, rel));
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(&inv_diag)
            .for_each(|((zi, ri), di)| *zi = ri * di);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// Value, flat gradient and flat Hessian of `u` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub u: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
}

impl GridSolution {
    pub fn field(&self) -> &ConformalField {
        &self.field
    }

    pub fn spec(&self) -> &GridSpec {
        &self.field.spec
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn phi_at_pole(&self) -> f64 {
        self.phi_pole
    }

    /// Regular part on the nodes.
    pub fn regular_part(&self) -> &[f64] {
        &self.w
    }

    fn u_sing(&self, x: [f64; 3]) -> f64 {
        let d = norm(sub(x, self.spec().pole));
        1.0 - 1.0 / (self.phi_pole * self.phi_pole * d)
    }

    /// `u` on every node.
    pub fn u_nodes(&self) -> Vec<f64> {
        let spec = *self.spec();
        let n = spec.n;
        (0..spec.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                self.u_sing(spec.node(i, j, k)) + self.w[idx]
            })
            .collect()
    }

    /// `u` at a node.
    pub fn u_node(&self, i: usize, j: usize, k: usize) -> f64 {
        let spec = self.spec();
        self.u_sing(spec.node(i, j, k)) + self.w[spec.index(i, j, k)]
    }

    /// `u` at a point: analytic singular part plus trilinear regular part.
    pub fn u_at(&self, x: [f64; 3]) -> Result<f64> {
        let spec = self.spec();
        let c = Cell::locate(spec, x)?;
        Ok(self.u_sing(x) + c.interp(|i, j, k| self.w[spec.index(i, j, k)]))
    }

    fn w_grad_node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [0, 1, 2].map(|a| nodal_gradient(self.spec(), &self.w, i, j, k, a))
    }

    fn w_hess_node(&self, i: usize, j: usize, k: usize) -> [[f64; 3]; 3] {
        let spec = self.spec();
        let n = spec.n as isize;
        let h = spec.h();
        let p = [i as isize, j as isize, k as isize];
        let at = |d: [isize; 3]| -> f64 {
            let q = [0, 1, 2].map(|a| (p[a] + d[a]).clamp(0, n - 1) as usize);
            self.w[spec.index(q[0], q[1], q[2])]
        };
        let c = at([0, 0, 0]);
        let mut hs = [[0.0; 3]; 3];
        for a in 0..3 {
            let mut e = [0isize; 3];
            e[a] = 1;
            let m = [-e[0], -e[1], -e[2]];
            hs[a][a] = (at(e) - 2.0 * c + at(m)) / (h * h);
            for b in a + 1..3 {
                let mut f = [0isize; 3];
                f[b] = 1;
                let pp = at([e[0] + f[0], e[1] + f[1], e[2] + f[2]]);
                let pm = at([e[0] - f[0], e[1] - f[1], e[2] - f[2]]);
                let mp = at([-e[0] + f[0], -e[1] + f[1], -e[2] + f[2]]);
                let mm = at([-e[0] - f[0], -e[1] - f[1], -e[2] - f[2]]);
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                hs[a][b] = v;
                hs[b][a] = v;
            }
        }
        hs
    }

    /// Value, gradient and Hessian of `u` at `x`. The singular part is
    /// exact; the regular part interpolates nodal central differences.
    pub fn eval(&self, x: [f64; 3]) -> Result<PointEval> {
        let spec = self.spec();
        let c = Cell::locate(spec, x)?;
        let d = sub(x, spec.pole);
        let r = norm(d);
        let s = 1.0 / (self.phi_pole * self.phi_pole);
        let r3 = r * r * r;
        let r5 = r3 * r * r;
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for a in 0..3 {
            grad[a] = s * d[a] / r3;
            for b in 0..3 {
                let delta = if a == b { 1.0 } else { 0.0 };
                hess[a][b] = s * (delta / r3 - 3.0 * d[a] * d[b] / r5);
            }
        }
        let u = 1.0 - s / r + c.interp(|i, j, k| self.w[spec.index(i, j, k)]);
        // interpolate nodal derivatives of w over the 8 corners
        let [i0, j0, k0] = c.base;
        let mut g_corner = [[0.0; 3]; 8];
        let mut h_corner = [[[0.0; 3]; 3]; 8];
        for (m, (g, hh)) in g_corner.iter_mut().zip(h_corner.iter_mut()).enumerate() {
            let (i, j, k) = (i0 + (m & 1), j0 + ((m >> 1) & 1), k0 + ((m >> 2) & 1));
            *g = self.w_grad_node(i, j, k);
            *hh = self.w_hess_node(i, j, k);
        }
        let corner = |i: usize, j: usize, k: usize| (i - i0) | ((j - j0) << 1) | ((k - k0) << 2);
        for a in 0..3 {
            grad[a] += c.interp(|i, j, k| g_corner[corner(i, j, k)][a]);
            for b in 0..3 {
                hess[a][b] += c.interp(|i, j, k| h_corner[corner(i, j, k)][a][b]);
            }
        }
        Ok(PointEval { u, grad, hess })
    }

    /// Discretisation-noise estimate of the regular part's gradient at a
    /// node: the difference between the spacing-h and spacing-2h central
    /// differences (zero where the wider stencil does not fit).
    pub(crate) fn gradient_noise(&self, i: usize, j: usize, k: usize) -> f64 {
        let spec = self.spec();
        let n = spec.n;
        let h = spec.h();
        let p = [i, j, k];
        if p.iter().any(|&c| c < 2 || c + 2 > n - 1) {
            return 0.0;
        }
        let mut acc: f64 = 0.0;
        for a in 0..3 {
            let at = |d: isize| {
                let mut q = p;
                q[a] = shift(q[a], d);
                self.w[spec.index(q[0], q[1], q[2])]
            };
            let d1 = (at(1) - at(-1)) / (2.0 * h);
            let d2 = (at(2) - at(-2)) / (4.0 * h);
            acc = acc.max((d1 - d2).abs());
        }
        acc
    }

    /// `max |u − oracle(|x − o|)|` over nodes farther than `exclude` cells
    /// from the pole, with `oracle` a radial function of the distance.
    pub fn sup_error_vs<F: Fn(f64) -> Result<f64> + Sync>(&self, exclude_cells: f64, oracle: F) -> Result<f64> {
        let spec = *self.spec();
        let n = spec.n;
        let cut = exclude_cells * spec.h();
        let errs = (0..spec.len())
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                let x = spec.node(i, j, k);
                let d = norm(sub(x, spec.pole));
                if d < cut {
                    return Ok(0.0);
                }
                Ok((self.u_node(i, j, k) - oracle(d)?).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_rejects_pole_near_boundary() {
        assert!(GridSpec::new(10.0, 32, [4.0, 0.0, 0.0]).is_err());
        assert!(GridSpec::new(10.0, 32, [0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn flat_off_centre_is_exact() {
        let spec = GridSpec::new(16.0, 32, [2.0, 0.0, 0.0]).unwrap();
        let field = ConformalField::from_model(&MetricModel::flat(), spec).unwrap();
        let sol = solve_green_3d(field, SolverOptions::default()).unwrap();
        let err = sol.sup_error_vs(3.0, |d| Ok(1.0 - 1.0 / d)).unwrap();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn smoothed_centred_matches_radial() {
        let model = MetricModel::smoothed_schwarzschild(2.0, 1.0).unwrap();
        let spec = GridSpec::new(32.0, 48, [0.0; 3]).unwrap();
        let field = ConformalField::from_model(&model, spec).unwrap();
        let sol = solve_green_3d(field, SolverOptions::default()).unwrap();
        assert!(sol.residual() <= 1e-9);
        let radial = RadialSolution::solve_green(&model, RadialGrid::for_green(&model, false).unwrap(), false).unwrap();
        let err = sol.sup_error_vs(3.0, |d| radial.u(d)).unwrap();
        assert!(err < 2e-2, "{err}");
        let e = sol.eval([5.1, 0.3, -0.2]).unwrap();
        assert!((e.u - radial.u(norm([5.1, 0.3, -0.2])).unwrap()).abs() < 2e-2);
    }

    #[test]
    fn rejects_non_schwarzschildian_box() {
        let model = MetricModel::smoothed_schwarzschild(2.0, 3.0).unwrap();
        let spec = GridSpec::new(4.0, 32, [0.0; 3]).unwrap();
        assert!(ConformalField::from_model(&model, spec).is_err());
    }
}
