//! P1 element kernels, global assembly over reduced degrees of freedom and
//! the linear solve.
//!
//! Every global routine takes a [`DofMap`]: entries of the full node space
//! are folded into the reduced space as `P^T x`, and reduced solutions are
//! expanded back with `P y`. Passing [`DofMap::all_free`] gives full-space
//! quantities.

mod sparse;

pub(crate) use sparse::norm2;
pub use sparse::{reverse_cuthill_mckee, solve_spd, CsrMatrix, SkylineCholesky};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::materials::{magnetization_perp, source_density, DriveSpec, MaterialTable};
use crate::mesh::{ConstraintMap, Mesh, Point};

/// Default relative residual for [`reduce_and_solve`].
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;

/// Full node index to reduced index with sign; `None` for Dirichlet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    map: Vec<Option<(usize, f64)>>,
    n_free: usize,
}

impl DofMap {
    pub fn new(n_nodes: usize, constraints: &ConstraintMap) -> Self {
        let mut slave = vec![None; n_nodes];
        for p in &constraints.pairs {
            slave[p.slave] = Some((p.master, f64::from(p.sign)));
        }
        let mut map = vec![None; n_nodes];
        let mut n_free = 0;
        for (i, m) in map.iter_mut().enumerate() {
            if slave[i].is_none() && !constraints.dirichlet.contains(&i) {
                *m = Some((n_free, 1.0));
                n_free += 1;
            }
        }
        for (i, s) in slave.iter().enumerate() {
            if let Some((master, sign)) = *s {
                if let Some((r, ms)) = map[master] {
                    map[i] = Some((r, sign * ms));
                }
            }
        }
        DofMap { map, n_free }
    }

    pub fn all_free(n_nodes: usize) -> Self {
        DofMap { map: (0..n_nodes).map(|i| Some((i, 1.0))).collect(), n_free: n_nodes }
    }

    pub fn with_dirichlet(n_nodes: usize, dirichlet: &BTreeSet<usize>) -> Self {
        let cm = ConstraintMap { dirichlet: dirichlet.clone(), pairs: Vec::new(), locked_shift: 0, flipped: false };
        DofMap::new(n_nodes, &cm)
    }

    pub fn free_count(&self) -> usize {
        self.n_free
    }

    pub fn node_count(&self) -> usize {
        self.map.len()
    }

    pub fn dof(&self, node: usize) -> Option<(usize, f64)> {
        self.map[node]
    }

    /// `P y`: slaves get `sign * master`, Dirichlet nodes 0.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.map.iter().map(|d| d.map_or(0.0, |(r, s)| s * reduced[r])).collect()
    }

    /// `P^T x`, used for loads and residuals.
    pub fn fold(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (d, x) in self.map.iter().zip(full) {
            if let Some((r, s)) = *d {
                out[r] += s * x;
            }
        }
        out
    }

    /// Reduced coordinates of a constraint-consistent nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (d, x) in self.map.iter().zip(full) {
            if let Some((r, 1.0)) = *d {
                out[r] = *x;
            }
        }
        // Masters always carry sign +1, so every reduced slot was written.
        out
    }

    /// Zero matrix with the coupling pattern of `mesh` under this map.
    pub fn pattern(&self, mesh: &Mesh) -> CsrMatrix {
        let mut rows = vec![BTreeSet::new(); self.n_free];
        for (i, row) in rows.iter_mut().enumerate() {
            row.insert(i);
        }
        for tri in mesh.triangles() {
            for &a in &tri.nodes {
                for &b in &tri.nodes {
                    if let (Some((i, _)), Some((j, _))) = (self.map[a], self.map[b]) {
                        rows[i].insert(j);
                    }
                }
            }
        }
        CsrMatrix::from_pattern(&rows)
    }

    fn scatter_vec(&self, out: &mut [f64], nodes: [usize; 3], local: &[f64; 3]) {
        for (k, &a) in nodes.iter().enumerate() {
            if let Some((i, s)) = self.map[a] {
                out[i] += s * local[k];
            }
        }
    }

    fn scatter_mat(&self, out: &mut CsrMatrix, nodes: [usize; 3], local: &[[f64; 3]; 3]) {
        for (p, &a) in nodes.iter().enumerate() {
            let Some((i, si)) = self.map[a] else { continue };
            for (q, &b) in nodes.iter().enumerate() {
                if let Some((j, sj)) = self.map[b] {
                    out.add(i, j, si * sj * local[p][q]);
                }
            }
        }
    }
}

/// Reduced linear system `A x = b` with its map back to nodes.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// Area and gradients of the barycentric coordinates of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Element {
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl P1Element {
    /// `None` for zero-area or clockwise triangles.
    pub fn new([a, b, c]: [Point; 3]) -> Option<Self> {
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if !(det > 0.0) {
            return None;
        }
        let grads = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Some(P1Element { area: 0.5 * det, grads })
    }

    pub fn gradient(&self, values: [f64; 3]) -> [f64; 2] {
        let g = &self.grads;
        [
            values[0] * g[0][0] + values[1] * g[1][0] + values[2] * g[2][0],
            values[0] * g[0][1] + values[1] * g[1][1] + values[2] * g[2][1],
        ]
    }
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn element(mesh: &Mesh, t: usize) -> Result<P1Element> {
    P1Element::new(mesh.vertices(t)).ok_or(Error::DegenerateElement(t))
}

pub fn local_values(x: &[f64], nodes: [usize; 3]) -> [f64; 3] {
    [x[nodes[0]], x[nodes[1]], x[nodes[2]]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// One point at the centroid.
    Centroid,
    /// Edge midpoints, exact for quadratics.
    #[default]
    EdgeMidpoints,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub bary: [f64; 3],
    pub weight: f64,
}

impl Quadrature {
    pub fn points(self, verts: [Point; 3], area: f64) -> Vec<QuadPoint> {
        let at = |bary: [f64; 3], weight: f64| QuadPoint {
            x: [
                bary[0] * verts[0][0] + bary[1] * verts[1][0] + bary[2] * verts[2][0],
                bary[0] * verts[0][1] + bary[1] * verts[1][1] + bary[2] * verts[2][1],
            ],
            bary,
            weight,
        };
        match self {
            Quadrature::Centroid => vec![at([1.0 / 3.0; 3], area)],
            Quadrature::EdgeMidpoints => {
                vec![at([0.5, 0.5, 0.0], area / 3.0), at([0.0, 0.5, 0.5], area / 3.0), at([0.5, 0.0, 0.5], area / 3.0)]
            }
        }
    }
}

/// Element residual `nu(|grad u|) grad u . grad w_a` and tangent.
pub fn element_operator(
    materials: &MaterialTable,
    region: u32,
    el: &P1Element,
    u: [f64; 3],
) -> ([f64; 3], [[f64; 3]; 3]) {
    let g = el.gradient(u);
    let rel = materials.reluctivity(region, dot(g, g));
    let mut r = [0.0; 3];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        let ga = el.grads[a];
        r[a] = el.area * rel.nu * dot(g, ga);
        for b in 0..3 {
            let gb = el.grads[b];
            k[a][b] = el.area * (rel.nu * dot(ga, gb) + 2.0 * rel.dnu_db2 * dot(g, ga) * dot(g, gb));
        }
    }
    (r, k)
}

pub const MASS_PATTERN: [[f64; 3]; 3] = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];

/// Residual and tangent of `<A(u), w>` in reduced coordinates.
pub fn assemble_operator(
    mesh: &Mesh,
    materials: &MaterialTable,
    dofs: &DofMap,
    u: &[f64],
) -> Result<(Vec<f64>, CsrMatrix)> {
    let mut res = vec![0.0; dofs.free_count()];
    let mut tan = dofs.pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let el = element(mesh, t)?;
        let (r, k) = element_operator(materials, tri.region, &el, local_values(u, tri.nodes));
        dofs.scatter_vec(&mut res, tri.nodes, &r);
        dofs.scatter_mat(&mut tan, tri.nodes, &k);
    }
    Ok((res, tan))
}

/// Consistent mass `M_sigma / tau` over conducting triangles.
pub fn assemble_mass_sigma(mesh: &Mesh, materials: &MaterialTable, dofs: &DofMap, tau: f64) -> Result<CsrMatrix> {
    let mut m = dofs.pattern(mesh);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let sigma = materials.sigma(tri.region);
        if sigma == 0.0 {
            continue;
        }
        let el = element(mesh, t)?;
        let c = sigma * el.area / (12.0 * tau);
        let local = MASS_PATTERN.map(|row| row.map(|x| c * x));
        dofs.scatter_mat(&mut m, tri.nodes, &local);
    }
    Ok(m)
}

/// `(M_sigma / tau) u` as a full nodal vector.
pub fn apply_mass_sigma(mesh: &Mesh, materials: &MaterialTable, tau: f64, u: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let sigma = materials.sigma(tri.region);
        if sigma == 0.0 {
            continue;
        }
        let el = element(mesh, t)?;
        let c = sigma * el.area / (12.0 * tau);
        let ul = local_values(u, tri.nodes);
        for a in 0..3 {
            out[tri.nodes[a]] += c * (0..3).map(|b| MASS_PATTERN[a][b] * ul[b]).sum::<f64>();
        }
    }
    Ok(out)
}

/// Element load: `f A / 3` per node plus `A M_perp . grad w_a`.
pub fn element_load(f: f64, m_perp: [f64; 2], el: &P1Element) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (a, o) in out.iter_mut().enumerate() {
        *o = el.area * (f / 3.0 + dot(m_perp, el.grads[a]));
    }
    out
}

/// Source and magnetization load of step `step`.
pub fn assemble_load(
    mesh: &Mesh,
    materials: &MaterialTable,
    drive: &DriveSpec,
    dofs: &DofMap,
    step: usize,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dofs.free_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let f = source_density(materials, drive, tri.region, step);
        let m = magnetization_perp(materials, tri.region);
        if f == 0.0 && m == [0.0, 0.0] {
            continue;
        }
        let el = element(mesh, t)?;
        dofs.scatter_vec(&mut out, tri.nodes, &element_load(f, m, &el));
    }
    Ok(out)
}

/// `int f w_a` for a spatially varying source.
pub fn assemble_load_fn(mesh: &Mesh, dofs: &DofMap, quad: Quadrature, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dofs.free_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let el = element(mesh, t)?;
        let mut local = [0.0; 3];
        for qp in quad.points(mesh.vertices(t), el.area) {
            let fx = f(qp.x) * qp.weight;
            for a in 0..3 {
                local[a] += fx * qp.bary[a];
            }
        }
        dofs.scatter_vec(&mut out, tri.nodes, &local);
    }
    Ok(out)
}

/// Solves the reduced system and expands to all nodes.
pub fn reduce_and_solve(system: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    let x = solve_spd(&system.matrix, &system.rhs, tol)?;
    Ok(system.dofs.expand(&x))
}
