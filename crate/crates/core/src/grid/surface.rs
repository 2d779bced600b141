//! Level surfaces of a grid solution and the surface integrals behind `F`.
//!
//! Cubes are split into the six Kuhn tetrahedra sharing the main diagonal,
//! which gives a conforming, closed triangulation of every regular level.
//! Vertices live on cube edges and are placed by a root find of
//! `u_s + (linear w)` along the edge, so the analytic pole term is resolved
//! exactly.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::{norm, sub, GridSolution, GridSpec};
use crate::error::{Error, Result};
use crate::functionals::{build_report, f_from_integrals, LevelSetSample, MonotonicityReport, SkippedLevel};

/// Triangulated level set `{u = level}`.
#[derive(Debug, Clone)]
pub struct ExtractedSurface {
    pub level: f64,
    pub vertices: Vec<[f64; 3]>,
    /// Oriented so that the flat normal points toward increasing `u`.
    pub triangles: Vec<[usize; 3]>,
    /// Metric area `φ⁴ dA` of each triangle (centroid rule).
    pub metric_area: Vec<f64>,
    /// `|∇u|_g` at each vertex.
    pub vertex_grad: Vec<f64>,
    /// Mean curvature in `g` at each vertex, from the harmonic expression.
    pub vertex_h: Vec<f64>,
    pub euler_char: i64,
    /// Every edge is shared by exactly two triangles.
    pub closed: bool,
    /// Smallest flat `|Du|` over the triangle centroids.
    pub min_grad: f64,
    /// Finite-difference noise estimate for `|Du|` near the surface.
    pub noise_floor: f64,
    pub(crate) centroid: Vec<CentroidData>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CentroidData {
    flat_area: f64,
    phi: f64,
    grad: f64,
    /// `2 ∂_n log φ − D²u(n, n)/|Du|`, i.e. `φ² H_g`.
    phi2_h: f64,
}

impl ExtractedSurface {
    pub fn flat_area(&self) -> f64 {
        self.centroid.iter().map(|c| c.flat_area).sum()
    }

    pub fn area(&self) -> f64 {
        self.metric_area.iter().sum()
    }

    /// ASCII OFF mesh (vertex list + index list).
    pub fn to_off(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "OFF");
        let _ = writeln!(s, "{} {} 0", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

/// Kuhn split of the unit cube: corner bit `a` is the x/y/z offset.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Triangle as three edge keys plus a reference direction of increasing `u`.
type RawTri = ([EdgeKey; 3], [f64; 3]);

fn corner_node(spec: &GridSpec, i: usize, j: usize, k: usize, c: usize) -> usize {
    spec.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))
}

fn node_pos(spec: &GridSpec, idx: usize) -> [f64; 3] {
    let n = spec.n;
    spec.node(idx % n, (idx / n) % n, idx / (n * n))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dotv(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn tet_triangles(spec: &GridSpec, nodes: [usize; 4], vals: [f64; 4], out: &mut Vec<RawTri>) {
    let above: Vec<usize> = (0..4).filter(|&a| vals[a] >= 0.0).collect();
    let below: Vec<usize> = (0..4).filter(|&a| vals[a] < 0.0).collect();
    if above.is_empty() || below.is_empty() {
        return;
    }
    let centroid = |set: &[usize]| {
        let mut c = [0.0; 3];
        for &a in set {
            let p = node_pos(spec, nodes[a]);
            for d in 0..3 {
                c[d] += p[d] / set.len() as f64;
            }
        }
        c
    };
    let dir = sub(centroid(&above), centroid(&below));
    let e = |a: usize, b: usize| edge_key(nodes[a], nodes[b]);
    match (above.len(), below.len()) {
        (1, 3) | (3, 1) => {
            let (lone, rest) = if above.len() == 1 { (above[0], &below) } else { (below[0], &above) };
            out.push(([e(lone, rest[0]), e(lone, rest[1]), e(lone, rest[2])], dir));
        }
        _ => {
            let (a0, a1, b0, b1) = (above[0], above[1], below[0], below[1]);
            // quad a0b0 – a0b1 – a1b1 – a1b0
            out.push(([e(a0, b0), e(a0, b1), e(a1, b1)], dir));
            out.push(([e(a0, b0), e(a1, b1), e(a1, b0)], dir));
        }
    }
}

/// Extracts `{u = level}`. Fails with a degenerate-level error when the
/// surface reaches the outer node layer, is empty, or is not regular.
pub fn extract_level_surface(sol: &GridSolution, level: f64) -> Result<ExtractedSurface> {
    let spec = *sol.spec();
    let n = spec.n;
    let u = sol.u_nodes();
    let degenerate = |reason: String| Error::DegenerateLevel { level, reason };

    // per-slab triangles, merged in slab order
    let slabs: Vec<(Vec<RawTri>, bool, Vec<usize>)> = (0..n - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            let mut touches = false;
            let mut cells = Vec::new();
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    let corners: [usize; 8] = std::array::from_fn(|c| corner_node(&spec, i, j, k, c));
                    let vals: [f64; 8] = corners.map(|c| u[c] - level);
                    let any_above = vals.iter().any(|&v| v >= 0.0);
                    let any_below = vals.iter().any(|&v| v < 0.0);
                    if !(any_above && any_below) {
                        continue;
                    }
                    if i == 0 || j == 0 || k == 0 || i + 2 == n || j + 2 == n || k + 2 == n {
                        touches = true;
                    }
                    cells.push(spec.index(i, j, k));
                    for tet in TETS {
                        tet_triangles(&spec, tet.map(|c| corners[c]), tet.map(|c| vals[c]), &mut tris);
                    }
                }
            }
            (tris, touches, cells)
        })
        .collect();

    if slabs.iter().any(|s| s.1) {
        return Err(degenerate("level set touches the box boundary".into()));
    }
    let raw: Vec<RawTri> = slabs.iter().flat_map(|s| s.0.iter().copied()).collect();
    if raw.is_empty() {
        return Err(degenerate("level set does not intersect the grid".into()));
    }
    let cells: Vec<usize> = slabs.iter().flat_map(|s| s.2.iter().copied()).collect();

    let mut vertex_of: HashMap<EdgeKey, usize> = HashMap::new();
    let mut keys: Vec<EdgeKey> = Vec::new();
    let mut tri_idx: Vec<[usize; 3]> = Vec::with_capacity(raw.len());
    for (tk, _) in &raw {
        let t = tk.map(|key| {
            *vertex_of.entry(key).or_insert_with(|| {
                keys.push(key);
                keys.len() - 1
            })
        });
        tri_idx.push(t);
    }

    let vertices: Vec<[f64; 3]> = keys
        .par_iter()
        .map(|&(a, b)| edge_root(sol, &spec, a, b, level))
        .collect();

    // orientation, dropping slivers whose vertices coincide
    let mut triangles = Vec::with_capacity(tri_idx.len());
    for (t, (_, dir)) in tri_idx.iter().zip(&raw) {
        let nrm = cross(sub(vertices[t[1]], vertices[t[0]]), sub(vertices[t[2]], vertices[t[0]]));
        if dotv(nrm, *dir) < 0.0 {
            triangles.push([t[0], t[2], t[1]]);
        } else {
            triangles.push(*t);
        }
    }

    let (euler_char, closed) = topology(vertices.len(), &triangles);

    let centroid: Vec<CentroidData> = triangles
        .par_iter()
        .map(|t| {
            let [a, b, c] = t.map(|v| vertices[v]);
            let x = [0, 1, 2].map(|d| (a[d] + b[d] + c[d]) / 3.0);
            let flat_area = 0.5 * norm(cross(sub(b, a), sub(c, a)));
            let (phi, grad, phi2_h) = pointwise(sol, x)?;
            Ok(CentroidData {
                flat_area,
                phi,
                grad,
                phi2_h,
            })
        })
        .collect::<Result<_>>()?;

    let vertex_data: Vec<(f64, f64)> = vertices
        .par_iter()
        .map(|&x| {
            let (phi, grad, phi2_h) = pointwise(sol, x)?;
            Ok((grad / (phi * phi), phi2_h / (phi * phi)))
        })
        .collect::<Result<_>>()?;

    let min_grad = centroid.iter().map(|c| c.grad).fold(f64::INFINITY, f64::min);
    let noise_floor = cells
        .par_iter()
        .map(|&c| {
            let (i, j, k) = (c % n, (c / n) % n, c / (n * n));
            (0..8)
                .map(|m| sol.gradient_noise(i + (m & 1), j + ((m >> 1) & 1), k + ((m >> 2) & 1)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    if !(min_grad > 10.0 * noise_floor) {
        return Err(degenerate(format!(
            "min |Du| = {min_grad:.3e} is not above 10x the noise floor {noise_floor:.3e}"
        )));
    }

    Ok(ExtractedSurface {
        level,
        metric_area: centroid.iter().map(|c| c.flat_area * c.phi.powi(4)).collect(),
        vertex_grad: vertex_data.iter().map(|v| v.0).collect(),
        vertex_h: vertex_data.iter().map(|v| v.1).collect(),
        vertices,
        triangles,
        euler_char,
        closed,
        min_grad,
        noise_floor,
        centroid,
    })
}

/// `φ`, flat `|Du|`, and `φ² H_g` at a point.
fn pointwise(sol: &GridSolution, x: [f64; 3]) -> Result<(f64, f64, f64)> {
    let e = sol.eval(x)?;
    let (phi, dphi) = sol.field().phi_and_grad(x)?;
    let g = norm(e.grad);
    let nv = e.grad.map(|c| c / g);
    let mut hnn = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            hnn += e.hess[a][b] * nv[a] * nv[b];
        }
    }
    let dn_log_phi = dotv(dphi, nv) / phi;
    Ok((phi, g, 2.0 * dn_log_phi - hnn / g))
}

/// Point on edge `a–b` where `u_s + (linear w) = level` (Illinois
/// regula falsi, bracketed by the node values).
fn edge_root(sol: &GridSolution, spec: &GridSpec, a: usize, b: usize, level: f64) -> [f64; 3] {
    let (xa, xb) = (node_pos(spec, a), node_pos(spec, b));
    let w = sol.regular_part();
    let (wa, wb) = (w[a], w[b]);
    let s2 = 1.0 / (sol.phi_at_pole() * sol.phi_at_pole());
    let pole = spec.pole;
    let at = |s: f64| [0, 1, 2].map(|d| xa[d] + s * (xb[d] - xa[d]));
    let f = |s: f64| 1.0 - s2 / norm(sub(at(s), pole)) + (1.0 - s) * wa + s * wb - level;
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut flo, mut fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return xa;
    }
    if fhi == 0.0 || flo.signum() == fhi.signum() {
        return xb;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let s = (lo * fhi - hi * flo) / (fhi - flo);
        let fs = f(s);
        if fs == 0.0 || hi - lo < 1e-15 {
            return at(s);
        }
        if fs.signum() == flo.signum() {
            lo = s;
            flo = fs;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            fhi = fs;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    at(0.5 * (lo + hi))
}

fn topology(nv: usize, triangles: &[[usize; 3]]) -> (i64, bool) {
    let mut edges: HashMap<EdgeKey, u32> = HashMap::with_capacity(triangles.len() * 3 / 2);
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *edges.entry(edge_key(a, b)).or_insert(0) += 1;
        }
    }
    let closed = edges.values().all(|&c| c == 2);
    (nv as i64 - edges.len() as i64 + triangles.len() as i64, closed)
}

/// Metric surface integrals over a level set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceIntegrals {
    /// `∫|∇u| dσ`.
    pub flux: f64,
    /// `∫|∇u|² dσ`.
    pub int_grad2: f64,
    /// `∫|∇u| H dσ`.
    pub int_grad_h: f64,
    pub area: f64,
}

impl SurfaceIntegrals {
    /// `F` with the measured flux as the weight of the linear term.
    pub fn f_value(&self, t: f64) -> f64 {
        f_from_integrals(t, self.flux, self.int_grad_h, self.int_grad2)
    }

    /// `F` with the exact flux 4π in the linear term.
    pub fn f_value_4pi(&self, t: f64) -> f64 {
        f_from_integrals(t, 4.0 * PI, self.int_grad_h, self.int_grad2)
    }
}

/// Triangle-wise midpoint quadrature in the metric `φ⁴δ`.
pub fn surface_integrals(surface: &ExtractedSurface) -> SurfaceIntegrals {
    // dσ = φ⁴dA, |∇u| = φ⁻²|Du|, H = φ⁻²·(φ²H)
    let mut s = SurfaceIntegrals {
        flux: 0.0,
        int_grad2: 0.0,
        int_grad_h: 0.0,
        area: 0.0,
    };
    for c in &surface.centroid {
        let phi2 = c.phi * c.phi;
        s.flux += phi2 * c.grad * c.flat_area;
        s.int_grad2 += c.grad * c.grad * c.flat_area;
        s.int_grad_h += c.grad * c.phi2_h * c.flat_area;
        s.area += phi2 * phi2 * c.flat_area;
    }
    s
}

/// Evaluates `F` on each level `1 − 1/t`; degenerate levels are skipped
/// and reported.
pub fn grid_sweep(sol: &GridSolution, t_grid: &[f64], tol: f64) -> MonotonicityReport {
    let results: Vec<std::result::Result<LevelSetSample, SkippedLevel>> = t_grid
        .iter()
        .map(|&t| {
            let level = 1.0 - 1.0 / t;
            extract_level_surface(sol, level)
                .map(|surf| {
                    let ints = surface_integrals(&surf);
                    LevelSetSample {
                        t,
                        level,
                        radius: (surf.flat_area() / (4.0 * PI)).sqrt(),
                        flux: ints.flux,
                        int_grad2: ints.int_grad2,
                        int_grad_h: ints.int_grad_h,
                        f_value: ints.f_value(t),
                        terms: None,
                    }
                })
                .map_err(|e| SkippedLevel {
                    t,
                    reason: e.to_string(),
                })
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(s) => skipped.push(s),
        }
    }
    build_report(samples, skipped, tol)
}
