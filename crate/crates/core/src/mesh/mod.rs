//! Triangulation, region and boundary tagging, locked-step constraints,
//! quality measurement and node advection.
//!
//! A [`Mesh`] is immutable once built. Optimization never edits a mesh in
//! place; [`advect`] returns a new one with moved nodes and identical
//! connectivity.

mod constraints;
mod format;
mod template;

pub use constraints::{build_constraints, ConstraintMap, Pair};
pub use format::{load_mesh, parse_emsh, write_emsh};
pub use template::{disk_problem, generate_template, unit_square, DiskParams, MagnetSpec, Sector, TemplateParams};

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    /// Electrical phase offset of the impressed current.
    pub fn offset(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => -4.0 * PI / 3.0,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionRole {
    IronRotor,
    IronStator,
    AirRotor,
    AirStator,
    AirgapRotor,
    AirgapStator,
    Magnet(u32),
    Coil { index: u32, phase: Phase, polarity: i8 },
}

impl RegionRole {
    pub fn is_magnet(self) -> bool {
        matches!(self, RegionRole::Magnet(_))
    }

    pub fn is_airgap(self) -> bool {
        matches!(self, RegionRole::AirgapRotor | RegionRole::AirgapStator)
    }

    /// Regions whose shape the optimizer may change.
    pub fn is_design(self) -> bool {
        matches!(self, RegionRole::IronRotor | RegionRole::AirRotor)
    }

    pub fn part(self) -> Part {
        match self {
            RegionRole::IronRotor | RegionRole::AirRotor | RegionRole::AirgapRotor | RegionRole::Magnet(_) => {
                Part::Rotor
            }
            RegionRole::IronStator | RegionRole::AirStator | RegionRole::AirgapStator | RegionRole::Coil { .. } => {
                Part::Stator
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Rotor,
    Stator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryRole {
    Outer,
    Shaft,
    PeriodicA,
    PeriodicB,
    InterfaceRotor,
    InterfaceStator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: u32,
}

/// Rotational symmetry of the modelled domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Symmetry {
    Full,
    Sector {
        /// Angle of the periodic_a side.
        start: f64,
        /// Opening angle of the sector.
        angle: f64,
        /// `u(side b) = -u(side a)` when true.
        antiperiodic: bool,
    },
}

impl Symmetry {
    pub fn angle(&self) -> f64 {
        match self {
            Symmetry::Full => 2.0 * PI,
            Symmetry::Sector { angle, .. } => *angle,
        }
    }

    pub fn is_antiperiodic(&self) -> bool {
        matches!(self, Symmetry::Sector { antiperiodic: true, .. })
    }
}

/// Matching equispaced vertex rings on the rotor and stator side of the
/// sliding interface. Vertex `i` of both rings sits at the same angle.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceRings {
    pub rotor: Vec<usize>,
    pub stator: Vec<usize>,
    pub radius: f64,
}

impl InterfaceRings {
    pub fn len(&self) -> usize {
        self.rotor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotor.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<Triangle>,
    edges: Vec<BoundaryEdge>,
    regions: BTreeMap<u32, RegionRole>,
    boundaries: BTreeMap<u32, BoundaryRole>,
    symmetry: Symmetry,
    interface: Option<InterfaceRings>,
    periodic_pairs: Vec<(usize, usize)>,
}

const ANGLE_TOL: f64 = 1e-9;

impl Mesh {
    /// Builds and validates a mesh. Clockwise triangles are reoriented.
    ///
    /// `antiperiodic` only matters when periodic sides are present; `None`
    /// selects the antiperiodic (single pole) convention.
    pub fn new(
        nodes: Vec<Point>,
        mut triangles: Vec<Triangle>,
        edges: Vec<BoundaryEdge>,
        regions: BTreeMap<u32, RegionRole>,
        boundaries: BTreeMap<u32, BoundaryRole>,
        antiperiodic: Option<bool>,
    ) -> Result<Mesh> {
        let n = nodes.len();
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.nodes.iter().any(|&i| i >= n) {
                return Err(Error::Validation(format!("triangle {t} references a missing node")));
            }
            if !regions.contains_key(&tri.region) {
                return Err(Error::Validation(format!(
                    "triangle {t} has region {} missing from the region table",
                    tri.region
                )));
            }
            let [a, b, c] = tri.nodes;
            let area = signed_area(nodes[a], nodes[b], nodes[c]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::Validation(format!("triangle {t} has zero area")));
            }
            if area < 0.0 {
                tri.nodes.swap(1, 2);
            }
        }
        for (e, edge) in edges.iter().enumerate() {
            if edge.nodes.iter().any(|&i| i >= n) {
                return Err(Error::Validation(format!("edge {e} references a missing node")));
            }
            if !boundaries.contains_key(&edge.tag) {
                return Err(Error::Validation(format!(
                    "edge {e} has tag {} missing from the boundary table",
                    edge.tag
                )));
            }
        }

        let mut mesh = Mesh {
            nodes,
            triangles,
            edges,
            regions,
            boundaries,
            symmetry: Symmetry::Full,
            interface: None,
            periodic_pairs: Vec::new(),
        };
        mesh.symmetry = mesh.detect_symmetry(antiperiodic.unwrap_or(true))?;
        mesh.periodic_pairs = mesh.match_periodic_sides()?;
        mesh.interface = mesh.detect_interface()?;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn regions(&self) -> &BTreeMap<u32, RegionRole> {
        &self.regions
    }

    pub fn boundaries(&self) -> &BTreeMap<u32, BoundaryRole> {
        &self.boundaries
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn interface(&self) -> Option<&InterfaceRings> {
        self.interface.as_ref()
    }

    /// `(side a node, side b node)` pairs at equal radius on the same part.
    pub fn periodic_pairs(&self) -> &[(usize, usize)] {
        &self.periodic_pairs
    }

    /// Number of interface vertices V (0 without a sliding interface).
    pub fn interface_vertex_count(&self) -> usize {
        self.interface.as_ref().map_or(0, InterfaceRings::len)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn role(&self, region: u32) -> RegionRole {
        self.regions[&region]
    }

    pub fn triangle_role(&self, t: usize) -> RegionRole {
        self.role(self.triangles[t].region)
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t].nodes;
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn region_area(&self, region: u32) -> f64 {
        (0..self.triangles.len()).filter(|&t| self.triangles[t].region == region).map(|t| self.signed_area(t)).sum()
    }

    /// Node indices lying on edges with the given boundary role.
    pub fn boundary_nodes(&self, role: BoundaryRole) -> BTreeSet<usize> {
        self.edges.iter().filter(|e| self.boundaries[&e.tag] == role).flat_map(|e| e.nodes).collect()
    }

    /// Nodes touching any tagged boundary edge.
    pub fn tagged_nodes(&self) -> BTreeSet<usize> {
        self.edges.iter().flat_map(|e| e.nodes).collect()
    }

    /// Rotor or stator side of each node, decided by its incident triangles.
    /// Nodes not referenced by any triangle default to the rotor side.
    pub fn node_parts(&self) -> Vec<Part> {
        let mut parts = vec![None; self.nodes.len()];
        for tri in &self.triangles {
            let part = self.regions[&tri.region].part();
            for &i in &tri.nodes {
                parts[i].get_or_insert(part);
            }
        }
        parts.into_iter().map(|p| p.unwrap_or(Part::Rotor)).collect()
    }

    /// Same mesh with replaced node coordinates.
    pub fn with_nodes(&self, nodes: Vec<Point>) -> Mesh {
        assert_eq!(nodes.len(), self.nodes.len(), "node count must not change");
        Mesh { nodes, ..self.clone() }
    }

    /// Lengths of the shortest edge incident to each node (`inf` for isolated nodes).
    pub fn local_edge_lengths(&self) -> Vec<f64> {
        let mut h = vec![f64::INFINITY; self.nodes.len()];
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri.nodes[k], tri.nodes[(k + 1) % 3]);
                let l = dist(self.nodes[a], self.nodes[b]);
                h[a] = h[a].min(l);
                h[b] = h[b].min(l);
            }
        }
        h
    }

    fn detect_symmetry(&self, antiperiodic: bool) -> Result<Symmetry> {
        let side_a = self.boundary_nodes(BoundaryRole::PeriodicA);
        let side_b = self.boundary_nodes(BoundaryRole::PeriodicB);
        if side_a.is_empty() && side_b.is_empty() {
            return Ok(Symmetry::Full);
        }
        if side_a.len() != side_b.len() {
            return Err(Error::Validation(format!("periodic sides have {} and {} nodes", side_a.len(), side_b.len())));
        }
        let start = common_angle(&self.nodes, &side_a, "periodic_a")?;
        let end = common_angle(&self.nodes, &side_b, "periodic_b")?;
        let angle = (end - start).rem_euclid(2.0 * PI);
        if angle <= ANGLE_TOL {
            return Err(Error::Validation("periodic sides coincide".into()));
        }
        Ok(Symmetry::Sector { start, angle, antiperiodic })
    }

    fn match_periodic_sides(&self) -> Result<Vec<(usize, usize)>> {
        if self.symmetry == Symmetry::Full {
            return Ok(Vec::new());
        }
        let parts = self.node_parts();
        let side_a = self.boundary_nodes(BoundaryRole::PeriodicA);
        let side_b = self.boundary_nodes(BoundaryRole::PeriodicB);
        let mut pairs = Vec::new();
        for part in [Part::Rotor, Part::Stator] {
            let sorted = |set: &BTreeSet<usize>| {
                let mut v: Vec<usize> = set.iter().copied().filter(|&i| parts[i] == part).collect();
                v.sort_by(|&i, &j| norm(self.nodes[i]).total_cmp(&norm(self.nodes[j])).then(i.cmp(&j)));
                v
            };
            let (a, b) = (sorted(&side_a), sorted(&side_b));
            if a.len() != b.len() {
                return Err(Error::Validation(format!("periodic sides of the {part:?} do not match")));
            }
            for (&i, &j) in a.iter().zip(&b) {
                let (ri, rj) = (norm(self.nodes[i]), norm(self.nodes[j]));
                if (ri - rj).abs() > 1e-9 * ri.max(rj).max(1.0) {
                    return Err(Error::Validation(format!(
                        "periodic nodes {i} and {j} are at different radii ({ri}, {rj})"
                    )));
                }
                if i != j {
                    pairs.push((i, j));
                }
            }
        }
        Ok(pairs)
    }

    fn detect_interface(&self) -> Result<Option<InterfaceRings>> {
        let rotor = self.boundary_nodes(BoundaryRole::InterfaceRotor);
        let stator = self.boundary_nodes(BoundaryRole::InterfaceStator);
        if rotor.is_empty() && stator.is_empty() {
            return Ok(None);
        }
        let side_b = self.boundary_nodes(BoundaryRole::PeriodicB);
        let (start, angle) = match self.symmetry {
            Symmetry::Full => (0.0, 2.0 * PI),
            Symmetry::Sector { start, angle, .. } => (start, angle),
        };
        let ring = |set: &BTreeSet<usize>| -> Vec<(f64, usize)> {
            let mut v: Vec<(f64, usize)> = set
                .iter()
                .filter(|i| !side_b.contains(i))
                .map(|&i| {
                    let [x, y] = self.nodes[i];
                    let mut a = (y.atan2(x) - start).rem_euclid(2.0 * PI);
                    if (2.0 * PI - a) < ANGLE_TOL {
                        a = 0.0;
                    }
                    (a, i)
                })
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        };
        let rotor = ring(&rotor);
        let stator = ring(&stator);
        if rotor.len() != stator.len() {
            return Err(Error::Validation(format!(
                "interface vertex counts differ ({} rotor, {} stator)",
                rotor.len(),
                stator.len()
            )));
        }
        let v = rotor.len();
        let radius = norm(self.nodes[rotor[0].1]);
        let spacing = angle / v as f64;
        for (i, (r, s)) in rotor.iter().zip(&stator).enumerate() {
            for &(a, node) in [r, s] {
                let rad = norm(self.nodes[node]);
                if (rad - radius).abs() > 1e-9 * radius.max(1.0) {
                    return Err(Error::Validation(format!(
                        "interface node {node} is off the common circle (r = {rad}, expected {radius})"
                    )));
                }
                if (a - i as f64 * spacing).abs() > 1e-7 {
                    return Err(Error::Validation(format!(
                        "interface vertices are not equispaced (node {node} at angle {a})"
                    )));
                }
            }
        }
        Ok(Some(InterfaceRings {
            rotor: rotor.into_iter().map(|(_, i)| i).collect(),
            stator: stator.into_iter().map(|(_, i)| i).collect(),
            radius,
        }))
    }
}

fn common_angle(nodes: &[Point], set: &BTreeSet<usize>, name: &str) -> Result<f64> {
    // The node closest to the origin may sit at the origin itself.
    let mut angles = set.iter().filter(|&&i| norm(nodes[i]) > 1e-12).map(|&i| nodes[i][1].atan2(nodes[i][0]));
    let first =
        angles.next().ok_or_else(|| Error::Validation(format!("{name} side has no node away from the origin")))?;
    for a in angles {
        let d = (a - first + PI).rem_euclid(2.0 * PI) - PI;
        if d.abs() > 1e-7 {
            return Err(Error::Validation(format!("{name} side is not a straight radial line")));
        }
    }
    Ok(first)
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Worst triangle of a mesh under the sign-aware shape measure
/// `q = 4*sqrt(3)*area / (l1^2 + l2^2 + l3^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub min_quality: f64,
    pub min_element: usize,
    /// Triangles with non-positive signed area.
    pub inverted_count: usize,
}

pub fn triangle_quality(a: Point, b: Point, c: Point) -> f64 {
    let l2 = |p: Point, q: Point| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    let sum = l2(a, b) + l2(b, c) + l2(c, a);
    if sum == 0.0 {
        return 0.0;
    }
    4.0 * 3f64.sqrt() * signed_area(a, b, c) / sum
}

pub fn quality(mesh: &Mesh) -> QualityReport {
    let mut report = QualityReport { min_quality: f64::INFINITY, min_element: 0, inverted_count: 0 };
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.vertices(t);
        let q = triangle_quality(a, b, c);
        if q <= 0.0 {
            report.inverted_count += 1;
        }
        if q < report.min_quality {
            report.min_quality = q;
            report.min_element = t;
        }
    }
    report
}

/// Moves every node to `x + t * theta(x)`.
pub fn advect(mesh: &Mesh, theta: &[Point], t: f64) -> Mesh {
    assert_eq!(theta.len(), mesh.node_count());
    let nodes = mesh.nodes.iter().zip(theta).map(|(x, d)| [x[0] + t * d[0], x[1] + t * d[1]]).collect();
    mesh.with_nodes(nodes)
}

/// Edge-connected components of the union of magnet regions, as sorted
/// triangle index lists ordered by their smallest triangle.
pub fn magnet_components(mesh: &Mesh) -> Vec<Vec<usize>> {
    let magnets: Vec<usize> = (0..mesh.triangles.len()).filter(|&t| mesh.triangle_role(t).is_magnet()).collect();
    let mut parent: BTreeMap<usize, usize> = magnets.iter().map(|&t| (t, t)).collect();
    fn find(parent: &mut BTreeMap<usize, usize>, mut x: usize) -> usize {
        while parent[&x] != x {
            let up = parent[&parent[&x]];
            parent.insert(x, up);
            x = up;
        }
        x
    }
    let mut by_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &t in &magnets {
        let n = mesh.triangles[t].nodes;
        for k in 0..3 {
            let (a, b) = (n[k], n[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if let Some(&other) = by_edge.get(&key) {
                let (ra, rb) = (find(&mut parent, t), find(&mut parent, other));
                if ra != rb {
                    parent.insert(ra.max(rb), ra.min(rb));
                }
            } else {
                by_edge.insert(key, t);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &t in &magnets {
        let r = find(&mut parent, t);
        groups.entry(r).or_default().push(t);
    }
    groups.into_values().collect()
}
