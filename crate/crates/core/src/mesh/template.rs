//! Built-in geometries: a parametric interior-magnet machine template on a
//! structured polar grid, plus the disk and unit-square test problems.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{BoundaryEdge, BoundaryRole, Mesh, Phase, Point, RegionRole, Triangle};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Full,
    Quarter,
    Eighth,
}

impl Sector {
    pub fn angle(self) -> f64 {
        match self {
            Sector::Full => 2.0 * PI,
            Sector::Quarter => PI / 2.0,
            Sector::Eighth => PI / 4.0,
        }
    }
}

/// Rectangular (in `r`, `theta`) magnet per pole with an air pocket on each
/// side. Widths are fractions of the pole pitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetSpec {
    pub r_inner: f64,
    pub r_outer: f64,
    pub width: f64,
    pub pocket_width: f64,
    /// Radial iron thickness left between the pockets and the rotor surface.
    pub bridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateParams {
    pub pole_pairs: usize,
    pub sector: Sector,
    pub r_shaft: f64,
    pub r_rotor: f64,
    pub r_stator_inner: f64,
    pub r_stator_outer: f64,
    pub magnet: Option<MagnetSpec>,
    /// Slots per pole and phase; 0 leaves the stator slotless.
    pub slots_per_pole_phase: usize,
    /// Radial iron depth between the airgap and the slot bottom.
    pub tooth_tip: f64,
    pub slot_depth: f64,
    /// Slot opening as a fraction of the slot pitch.
    pub slot_opening: f64,
    /// Target element size.
    pub h: f64,
    pub interface_vertices: Option<usize>,
    pub steps_per_period: usize,
}

impl Default for TemplateParams {
    /// One pole of an eight-pole machine.
    fn default() -> Self {
        TemplateParams {
            pole_pairs: 4,
            sector: Sector::Eighth,
            r_shaft: 0.02,
            r_rotor: 0.06,
            r_stator_inner: 0.0615,
            r_stator_outer: 0.1,
            magnet: Some(MagnetSpec { r_inner: 0.045, r_outer: 0.051, width: 0.5, pocket_width: 0.125, bridge: 0.001 }),
            slots_per_pole_phase: 1,
            tooth_tip: 0.002,
            slot_depth: 0.02,
            slot_opening: 0.5,
            h: 0.0025,
            interface_vertices: None,
            steps_per_period: 8,
        }
    }
}

impl TemplateParams {
    /// Slotless full annulus without cutouts: a two-pole machine with `v`
    /// interface vertices and `n` steps per period.
    pub fn annulus(v: usize, n: usize) -> Self {
        TemplateParams {
            pole_pairs: 1,
            sector: Sector::Full,
            magnet: None,
            slots_per_pole_phase: 0,
            r_rotor: 0.05,
            r_stator_inner: 0.06,
            h: 0.01,
            interface_vertices: Some(v),
            steps_per_period: n,
            ..TemplateParams::default()
        }
    }

    pub fn poles_in_sector(&self) -> Result<usize> {
        let poles = self.sector.angle() * self.pole_pairs as f64 / PI;
        let rounded = poles.round();
        if (poles - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::Geometry(format!(
                "a {:?} sector does not hold a whole number of poles for {} pole pairs",
                self.sector, self.pole_pairs
            )));
        }
        Ok(rounded as usize)
    }

    pub fn interface_radius(&self) -> f64 {
        0.5 * (self.r_rotor + self.r_stator_inner)
    }
}

pub const TAG_OUTER: u32 = 1;
pub const TAG_SHAFT: u32 = 2;
pub const TAG_PERIODIC_A: u32 = 3;
pub const TAG_PERIODIC_B: u32 = 4;
pub const TAG_INTERFACE_ROTOR: u32 = 5;
pub const TAG_INTERFACE_STATOR: u32 = 6;

pub const REGION_IRON_ROTOR: u32 = 1;
pub const REGION_AIRGAP_ROTOR: u32 = 2;
pub const REGION_IRON_STATOR: u32 = 3;
pub const REGION_AIRGAP_STATOR: u32 = 4;
const REGION_POCKET_BASE: u32 = 20;
const REGION_MAGNET_BASE: u32 = 50;
const REGION_COIL_BASE: u32 = 100;

const WINDING: [(Phase, i8); 6] =
    [(Phase::A, 1), (Phase::B, -1), (Phase::C, 1), (Phase::A, -1), (Phase::B, 1), (Phase::C, -1)];

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Radii from `r1` to `r2` (inclusive) with geometric spacing fine enough
/// that no cell is longer radially than twice its arc, and no coarser than `h`.
fn radial_levels(r1: f64, r2: f64, h: f64, dtheta: f64) -> Vec<f64> {
    let by_size = ((r2 - r1) / h).ceil();
    let by_aspect = ((r2 / r1).ln() / (2.0 * dtheta)).ceil();
    let n = by_size.max(by_aspect).max(1.0) as usize;
    (0..=n).map(|k| r1 * (r2 / r1).powf(k as f64 / n as f64)).collect()
}

fn merged_levels(breaks: &[f64], h: f64, dtheta: f64) -> Vec<f64> {
    let mut levels = vec![breaks[0]];
    for w in breaks.windows(2) {
        let seg = radial_levels(w[0], w[1], h, dtheta);
        levels.extend_from_slice(&seg[1..]);
    }
    levels
}

struct PolarBlock {
    levels: Vec<f64>,
    base: usize,
}

/// Generates the machine template mesh. Rotor nodes are numbered before
/// stator nodes, so rotor ring vertices become constraint masters.
pub fn generate_template(p: &TemplateParams) -> Result<Mesh> {
    if !(0.0 < p.r_shaft
        && p.r_shaft < p.r_rotor
        && p.r_rotor < p.r_stator_inner
        && p.r_stator_inner < p.r_stator_outer)
    {
        return Err(Error::Geometry("radii must satisfy 0 < shaft < rotor < stator inner < stator outer".into()));
    }
    if !(p.h > 0.0) {
        return Err(Error::Geometry("element size must be positive".into()));
    }
    if p.steps_per_period == 0 {
        return Err(Error::Geometry("steps per period must be at least 1".into()));
    }
    let poles = p.poles_in_sector()?;
    let full = p.sector == Sector::Full;
    let alpha = p.sector.angle();
    let r_i = p.interface_radius();
    let slots = poles * 3 * p.slots_per_pole_phase;

    if let Some(m) = &p.magnet {
        if !(p.r_shaft < m.r_inner && m.r_inner < m.r_outer && m.r_outer < p.r_rotor) {
            return Err(Error::Geometry("magnet radii must lie strictly inside the rotor iron".into()));
        }
        if !(m.bridge >= 0.0 && p.r_rotor - m.bridge > m.r_outer) {
            return Err(Error::Geometry("pockets must end above the magnet and below the rotor surface".into()));
        }
        if m.width <= 0.0 || m.pocket_width < 0.0 || m.width + 2.0 * m.pocket_width > 1.0 {
            return Err(Error::Geometry("overlapping cutouts: magnet and pockets exceed the pole pitch".into()));
        }
    }
    let (r_slot_in, r_slot_out) = (p.r_stator_inner + p.tooth_tip, p.r_stator_inner + p.tooth_tip + p.slot_depth);
    if slots > 0 {
        if !(p.tooth_tip > 0.0 && p.slot_depth > 0.0 && r_slot_out < p.r_stator_outer) {
            return Err(Error::Geometry("slots must fit inside the stator yoke".into()));
        }
        if !(p.slot_opening > 0.0 && p.slot_opening < 1.0) {
            return Err(Error::Geometry("slot opening must be a fraction in (0, 1)".into()));
        }
    }

    let v = match p.interface_vertices {
        Some(v) => {
            if v == 0 || v % p.steps_per_period != 0 {
                return Err(Error::Geometry(format!(
                    "interface count not divisible: V = {v} by N = {}",
                    p.steps_per_period
                )));
            }
            v
        }
        None => {
            let mut m = lcm(p.steps_per_period, poles);
            if slots > 0 {
                m = lcm(m, slots);
            }
            let target = alpha * r_i / p.h;
            m * ((target / m as f64).round() as usize).max(1)
        }
    };
    if v % poles != 0 || (slots > 0 && v % slots != 0) {
        return Err(Error::Geometry(format!(
            "V = {v} is not a multiple of the {poles} poles and {slots} slots in the sector"
        )));
    }
    let cells_per_pole = v / poles;
    let dtheta = alpha / v as f64;

    // Angular cell ranges of cutouts, per pole.
    let mut magnet_cells: Vec<(usize, usize, usize)> = Vec::new(); // (pole, start, end)
    let mut pocket_cells: Vec<(usize, usize)> = Vec::new();
    if let Some(m) = &p.magnet {
        let mut w = ((m.width * cells_per_pole as f64).round() as usize).max(1);
        if (cells_per_pole - w.min(cells_per_pole)) % 2 == 1 {
            w += 1;
        }
        let wp =
            if m.pocket_width > 0.0 { ((m.pocket_width * cells_per_pole as f64).round() as usize).max(1) } else { 0 };
        if w + 2 * wp > cells_per_pole {
            return Err(Error::Geometry("overlapping cutouts after snapping to the angular grid".into()));
        }
        for pole in 0..poles {
            let s = pole * cells_per_pole + (cells_per_pole - w) / 2;
            magnet_cells.push((pole, s, s + w));
            if wp > 0 {
                pocket_cells.push((s - wp, s));
                pocket_cells.push((s + w, s + w + wp));
            }
        }
    }
    let mut slot_cells: Vec<(usize, usize)> = Vec::new();
    if let Some(pitch) = v.checked_div(slots) {
        let w = ((p.slot_opening * pitch as f64).round() as usize).clamp(1, pitch.saturating_sub(1).max(1));
        for s in 0..slots {
            let start = s * pitch + (pitch - w) / 2;
            slot_cells.push((start, start + w));
        }
    }

    let mut rotor_breaks = vec![p.r_shaft];
    if let Some(m) = &p.magnet {
        rotor_breaks.extend([m.r_inner, m.r_outer]);
        if m.pocket_width > 0.0 && m.bridge > 0.0 {
            rotor_breaks.push(p.r_rotor - m.bridge);
        }
    }
    rotor_breaks.extend([p.r_rotor, r_i]);
    let mut stator_breaks = vec![r_i, p.r_stator_inner];
    if slots > 0 {
        stator_breaks.extend([r_slot_in, r_slot_out]);
    }
    stator_breaks.push(p.r_stator_outer);

    let n_ang = if full { v } else { v + 1 };
    let rotor = PolarBlock { levels: merged_levels(&rotor_breaks, p.h, dtheta), base: 0 };
    let stator = PolarBlock { levels: merged_levels(&stator_breaks, p.h, dtheta), base: rotor.levels.len() * n_ang };

    let mut nodes: Vec<Point> = Vec::new();
    for block in [&rotor, &stator] {
        for &r in &block.levels {
            for i in 0..n_ang {
                let a = i as f64 * dtheta;
                nodes.push([r * a.cos(), r * a.sin()]);
            }
        }
    }
    let id = |block: &PolarBlock, l: usize, i: usize| block.base + l * n_ang + if full { i % v } else { i };

    let mut regions: BTreeMap<u32, RegionRole> = BTreeMap::from([
        (REGION_IRON_ROTOR, RegionRole::IronRotor),
        (REGION_AIRGAP_ROTOR, RegionRole::AirgapRotor),
        (REGION_IRON_STATOR, RegionRole::IronStator),
        (REGION_AIRGAP_STATOR, RegionRole::AirgapStator),
    ]);
    for (k, _) in pocket_cells.iter().enumerate() {
        regions.insert(REGION_POCKET_BASE + k as u32, RegionRole::AirRotor);
    }
    for &(pole, _, _) in &magnet_cells {
        regions.insert(REGION_MAGNET_BASE + pole as u32, RegionRole::Magnet(pole as u32 + 1));
    }
    for s in 0..slot_cells.len() {
        let (phase, polarity) = WINDING[(s / p.slots_per_pole_phase) % 6];
        regions.insert(REGION_COIL_BASE + s as u32, RegionRole::Coil { index: s as u32 + 1, phase, polarity });
    }

    let in_range = |i: usize, (a, b): (usize, usize)| i >= a && i < b;
    let rotor_region = |r: f64, i: usize| -> u32 {
        if r > p.r_rotor {
            return REGION_AIRGAP_ROTOR;
        }
        if let Some(m) = &p.magnet {
            if r > m.r_inner && r < m.r_outer {
                for &(pole, s, e) in &magnet_cells {
                    if in_range(i, (s, e)) {
                        return REGION_MAGNET_BASE + pole as u32;
                    }
                }
            }
            if r > m.r_inner && r < p.r_rotor - m.bridge {
                for (k, &range) in pocket_cells.iter().enumerate() {
                    if in_range(i, range) {
                        return REGION_POCKET_BASE + k as u32;
                    }
                }
            }
        }
        REGION_IRON_ROTOR
    };
    let stator_region = |r: f64, i: usize| -> u32 {
        if r < p.r_stator_inner {
            return REGION_AIRGAP_STATOR;
        }
        if r > r_slot_in && r < r_slot_out {
            for (s, &range) in slot_cells.iter().enumerate() {
                if in_range(i, range) {
                    return REGION_COIL_BASE + s as u32;
                }
            }
        }
        REGION_IRON_STATOR
    };

    let mut triangles = Vec::new();
    for (block, region_of) in [(&rotor, &rotor_region as &dyn Fn(f64, usize) -> u32), (&stator, &stator_region)] {
        for l in 0..block.levels.len() - 1 {
            let rm = 0.5 * (block.levels[l] + block.levels[l + 1]);
            for i in 0..v {
                let region = region_of(rm, i);
                let (a, b) = (id(block, l, i), id(block, l, i + 1));
                let (c, d) = (id(block, l + 1, i + 1), id(block, l + 1, i));
                triangles.push(Triangle { nodes: [a, b, c], region });
                triangles.push(Triangle { nodes: [a, c, d], region });
            }
        }
    }

    let mut edges = Vec::new();
    let (top_r, top_s) = (rotor.levels.len() - 1, stator.levels.len() - 1);
    for i in 0..v {
        edges.push(BoundaryEdge { nodes: [id(&rotor, 0, i), id(&rotor, 0, i + 1)], tag: TAG_SHAFT });
        edges.push(BoundaryEdge { nodes: [id(&rotor, top_r, i), id(&rotor, top_r, i + 1)], tag: TAG_INTERFACE_ROTOR });
        edges.push(BoundaryEdge { nodes: [id(&stator, 0, i), id(&stator, 0, i + 1)], tag: TAG_INTERFACE_STATOR });
        edges.push(BoundaryEdge { nodes: [id(&stator, top_s, i), id(&stator, top_s, i + 1)], tag: TAG_OUTER });
    }
    let mut boundaries = BTreeMap::from([
        (TAG_OUTER, BoundaryRole::Outer),
        (TAG_SHAFT, BoundaryRole::Shaft),
        (TAG_INTERFACE_ROTOR, BoundaryRole::InterfaceRotor),
        (TAG_INTERFACE_STATOR, BoundaryRole::InterfaceStator),
    ]);
    if !full {
        boundaries.insert(TAG_PERIODIC_A, BoundaryRole::PeriodicA);
        boundaries.insert(TAG_PERIODIC_B, BoundaryRole::PeriodicB);
        for block in [&rotor, &stator] {
            for l in 0..block.levels.len() - 1 {
                edges.push(BoundaryEdge { nodes: [id(block, l, 0), id(block, l + 1, 0)], tag: TAG_PERIODIC_A });
                edges.push(BoundaryEdge { nodes: [id(block, l, v), id(block, l + 1, v)], tag: TAG_PERIODIC_B });
            }
        }
    }

    let antiperiodic = if full { None } else { Some(poles % 2 == 1) };
    Mesh::new(nodes, triangles, edges, regions, boundaries, antiperiodic)
}

/// Disk test problem: concentric rings of `6k` nodes, regions assigned by
/// triangle centroid. Rectangles are `[x0, x1, y0, y1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskParams {
    pub radius: f64,
    pub rings: usize,
    pub magnet: [f64; 4],
    pub pocket: Option<[f64; 4]>,
    /// Coil rectangles with their phase and polarity.
    pub coils: Vec<([f64; 4], Phase, i8)>,
}

impl Default for DiskParams {
    fn default() -> Self {
        DiskParams {
            radius: 0.05,
            rings: 12,
            magnet: [-0.012, 0.012, -0.006, 0.006],
            pocket: Some([0.014, 0.024, -0.01, 0.01]),
            coils: vec![
                ([-0.012, 0.012, 0.026, 0.04], Phase::A, 1),
                ([-0.012, 0.012, -0.04, -0.026], Phase::A, -1),
                ([-0.04, -0.026, -0.012, 0.012], Phase::B, 1),
                ([0.03, 0.042, -0.012, 0.012], Phase::B, -1),
            ],
        }
    }
}

pub const DISK_REGION_IRON: u32 = 1;
pub const DISK_REGION_MAGNET: u32 = 2;
pub const DISK_REGION_POCKET: u32 = 3;
const DISK_REGION_COIL_BASE: u32 = 10;

pub fn disk_problem(p: &DiskParams) -> Result<Mesh> {
    if p.rings < 2 || !(p.radius > 0.0) {
        return Err(Error::Geometry("disk needs a positive radius and at least two rings".into()));
    }
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=p.rings {
        ring_start.push(nodes.len());
        let r = p.radius * k as f64 / p.rings as f64;
        let n = 6 * k;
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            nodes.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut conn: Vec<[usize; 3]> = Vec::new();
    for j in 0..6 {
        conn.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=p.rings {
        let (n1, n2) = (6 * (k - 1), 6 * k);
        let (s1, s2) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < n1 || j < n2 {
            let next_inner = (i + 1) as f64 / n1 as f64;
            let next_outer = (j + 1) as f64 / n2 as f64;
            if j < n2 && (i == n1 || next_outer <= next_inner) {
                conn.push([s1 + i % n1, s2 + j, s2 + (j + 1) % n2]);
                j += 1;
            } else {
                conn.push([s1 + i % n1, s2 + j % n2, s1 + (i + 1) % n1]);
                i += 1;
            }
        }
    }

    let inside = |c: Point, r: &[f64; 4]| c[0] > r[0] && c[0] < r[1] && c[1] > r[2] && c[1] < r[3];
    let mut regions =
        BTreeMap::from([(DISK_REGION_IRON, RegionRole::IronRotor), (DISK_REGION_MAGNET, RegionRole::Magnet(1))]);
    if p.pocket.is_some() {
        regions.insert(DISK_REGION_POCKET, RegionRole::AirRotor);
    }
    for (k, &(_, phase, polarity)) in p.coils.iter().enumerate() {
        regions.insert(DISK_REGION_COIL_BASE + k as u32, RegionRole::Coil { index: k as u32 + 1, phase, polarity });
    }
    let triangles: Vec<Triangle> = conn
        .into_iter()
        .map(|n| {
            let c = [
                (nodes[n[0]][0] + nodes[n[1]][0] + nodes[n[2]][0]) / 3.0,
                (nodes[n[0]][1] + nodes[n[1]][1] + nodes[n[2]][1]) / 3.0,
            ];
            let mut region = DISK_REGION_IRON;
            if inside(c, &p.magnet) {
                region = DISK_REGION_MAGNET;
            } else if p.pocket.as_ref().is_some_and(|r| inside(c, r)) {
                region = DISK_REGION_POCKET;
            } else if let Some(k) = p.coils.iter().position(|(r, _, _)| inside(c, r)) {
                region = DISK_REGION_COIL_BASE + k as u32;
            }
            Triangle { nodes: n, region }
        })
        .collect();
    if !triangles.iter().any(|t| t.region == DISK_REGION_MAGNET) {
        return Err(Error::Geometry("magnet rectangle contains no triangle centroid".into()));
    }

    let outer = ring_start[p.rings];
    let n_outer = 6 * p.rings;
    let edges =
        (0..n_outer).map(|j| BoundaryEdge { nodes: [outer + j, outer + (j + 1) % n_outer], tag: TAG_OUTER }).collect();
    let boundaries = BTreeMap::from([(TAG_OUTER, BoundaryRole::Outer)]);
    Mesh::new(nodes, triangles, edges, regions, boundaries, None)
}

/// Unit square `[0,1]^2` split into `n x n` cells of two triangles, one
/// iron region, Dirichlet on the whole boundary.
pub fn unit_square(n: usize) -> Mesh {
    assert!(n >= 1);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push(Triangle { nodes: [id(i, j), id(i + 1, j), id(i + 1, j + 1)], region: 1 });
            triangles.push(Triangle { nodes: [id(i, j), id(i + 1, j + 1), id(i, j + 1)], region: 1 });
        }
    }
    let mut edges = Vec::new();
    for k in 0..n {
        for (a, b) in
            [(id(k, 0), id(k + 1, 0)), (id(n, k), id(n, k + 1)), (id(k, n), id(k + 1, n)), (id(0, k), id(0, k + 1))]
        {
            edges.push(BoundaryEdge { nodes: [a, b], tag: TAG_OUTER });
        }
    }
    let regions = BTreeMap::from([(1, RegionRole::IronRotor)]);
    let boundaries = BTreeMap::from([(TAG_OUTER, BoundaryRole::Outer)]);
    Mesh::new(nodes, triangles, edges, regions, boundaries, None).expect("unit square is valid")
}
