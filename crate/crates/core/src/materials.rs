//! Constitutive data per region: reluctivity, conductivity, magnetization
//! and the impressed coil currents of each time step.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Phase, RegionRole};

/// Reluctivity of vacuum, 1/(4*pi*1e-7) m/H.
pub const NU0: f64 = 1.0 / (4.0e-7 * PI);

/// Default cap on the Brauer exponent `k2 * b^2`.
pub const DEFAULT_EXP_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReluctivityModel {
    Linear(f64),
    /// `nu(b) = k1 * exp(k2 * b^2) + k3`.
    Brauer {
        k1: f64,
        k2: f64,
        k3: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reluctivity {
    pub nu: f64,
    /// Derivative with respect to `b^2 = |grad u|^2`.
    pub dnu_db2: f64,
    /// The Brauer exponent hit the cap.
    pub saturated: bool,
}

impl ReluctivityModel {
    pub fn eval(&self, b2: f64) -> Reluctivity {
        reluctivity_eval(self, b2, DEFAULT_EXP_CAP)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ReluctivityModel::Linear(_))
    }
}

/// Evaluates `nu` and `d nu / d(b^2)` at `b2 >= 0`. Beyond the exponent cap
/// the curve is frozen, so its derivative there is zero.
pub fn reluctivity_eval(model: &ReluctivityModel, b2: f64, exp_cap: f64) -> Reluctivity {
    debug_assert!(b2 >= 0.0);
    match *model {
        ReluctivityModel::Linear(nu) => Reluctivity { nu, dnu_db2: 0.0, saturated: false },
        ReluctivityModel::Brauer { k1, k2, k3 } => {
            let arg = k2 * b2;
            if arg > exp_cap {
                Reluctivity { nu: k1 * exp_cap.exp() + k3, dnu_db2: 0.0, saturated: true }
            } else {
                let e = arg.exp();
                Reluctivity { nu: k1 * e + k3, dnu_db2: k1 * k2 * e, saturated: false }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilSource {
    pub phase: Phase,
    pub polarity: i8,
    pub turns: f64,
    /// Cross-section area in m^2.
    pub slot_area: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMaterial {
    pub reluctivity: ReluctivityModel,
    /// S/m, nonzero only in magnets.
    pub sigma: f64,
    /// Magnetization `nu * B_r` in A/m, fixed in the rotor frame.
    pub magnetization: [f64; 2],
    pub coil: Option<CoilSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    regions: BTreeMap<u32, RegionMaterial>,
    pub exp_cap: f64,
}

impl MaterialTable {
    /// Validates the table against the mesh's region roles.
    pub fn new(mesh: &Mesh, regions: BTreeMap<u32, RegionMaterial>) -> Result<Self> {
        for (&id, role) in mesh.regions() {
            let m = regions.get(&id).ok_or_else(|| Error::Input(format!("region {id} has no material assigned")))?;
            match m.reluctivity {
                ReluctivityModel::Linear(nu) if !(nu > 0.0) => {
                    return Err(Error::Input(format!("region {id}: reluctivity must be positive")))
                }
                ReluctivityModel::Brauer { k1, k2, k3 } if !(k1 >= 0.0 && k2 >= 0.0 && k1 + k3 > 0.0) => {
                    return Err(Error::Input(format!("region {id}: Brauer coefficients must give nu > 0, dnu >= 0")))
                }
                _ => {}
            }
            if role.is_magnet() {
                if !(m.sigma >= 0.0) {
                    return Err(Error::Input(format!("magnet region {id}: conductivity must be non-negative")));
                }
            } else {
                if m.sigma != 0.0 {
                    return Err(Error::Input(format!("region {id} is not a magnet but has conductivity")));
                }
                if m.magnetization != [0.0, 0.0] {
                    return Err(Error::Input(format!("region {id} is not a magnet but is magnetized")));
                }
            }
            if matches!(role, RegionRole::Coil { .. }) != m.coil.is_some() {
                return Err(Error::Input(format!("region {id}: coil source must be given exactly for coil regions")));
            }
            if let Some(c) = &m.coil {
                if !(c.slot_area > 0.0) {
                    return Err(Error::Input(format!("coil region {id}: slot area must be positive")));
                }
            }
        }
        Ok(MaterialTable { regions, exp_cap: DEFAULT_EXP_CAP })
    }

    /// Table built from a compact description of the machine's materials.
    pub fn from_spec(mesh: &Mesh, spec: &MaterialSpec) -> Result<Self> {
        let mut regions = BTreeMap::new();
        for (&id, &role) in mesh.regions() {
            let air = ReluctivityModel::Linear(NU0);
            let entry = match role {
                RegionRole::IronRotor | RegionRole::IronStator => {
                    RegionMaterial { reluctivity: spec.iron, sigma: 0.0, magnetization: [0.0; 2], coil: None }
                }
                RegionRole::Magnet(k) => {
                    let nu = NU0 / spec.magnet_mu_r;
                    let dir = match spec.magnetization {
                        MagnetizationRule::Fixed(d) => d,
                        MagnetizationRule::Radial => {
                            let c = region_centroid(mesh, id);
                            let r = c[0].hypot(c[1]);
                            if r == 0.0 {
                                return Err(Error::Input(format!("magnet region {id} is centred on the axis")));
                            }
                            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                            [sign * c[0] / r, sign * c[1] / r]
                        }
                    };
                    RegionMaterial {
                        reluctivity: ReluctivityModel::Linear(nu),
                        sigma: spec.magnet_sigma,
                        magnetization: [nu * spec.remanence * dir[0], nu * spec.remanence * dir[1]],
                        coil: None,
                    }
                }
                RegionRole::Coil { phase, polarity, .. } => RegionMaterial {
                    reluctivity: air,
                    sigma: 0.0,
                    magnetization: [0.0; 2],
                    coil: Some(CoilSource { phase, polarity, turns: spec.coil_turns, slot_area: mesh.region_area(id) }),
                },
                _ => RegionMaterial { reluctivity: air, sigma: 0.0, magnetization: [0.0; 2], coil: None },
            };
            regions.insert(id, entry);
        }
        let mut table = MaterialTable::new(mesh, regions)?;
        table.exp_cap = spec.exp_cap;
        Ok(table)
    }

    pub fn get(&self, region: u32) -> &RegionMaterial {
        &self.regions[&region]
    }

    pub fn regions(&self) -> &BTreeMap<u32, RegionMaterial> {
        &self.regions
    }

    pub fn reluctivity(&self, region: u32, b2: f64) -> Reluctivity {
        reluctivity_eval(&self.get(region).reluctivity, b2, self.exp_cap)
    }

    pub fn sigma(&self, region: u32) -> f64 {
        self.get(region).sigma
    }

    /// True when every region uses a linear reluctivity.
    pub fn is_linear(&self) -> bool {
        self.regions.values().all(|m| m.reluctivity.is_linear())
    }

    pub fn has_conductors(&self) -> bool {
        self.regions.values().any(|m| m.sigma > 0.0)
    }
}

fn region_centroid(mesh: &Mesh, region: u32) -> [f64; 2] {
    let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for t in 0..mesh.triangles().len() {
        if mesh.triangles()[t].region != region {
            continue;
        }
        let a = mesh.signed_area(t);
        let [p, q, r] = mesh.vertices(t);
        area += a;
        cx += a * (p[0] + q[0] + r[0]) / 3.0;
        cy += a * (p[1] + q[1] + r[1]) / 3.0;
    }
    [cx / area, cy / area]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnetizationRule {
    /// Along the magnet centroid direction, alternating with the magnet
    /// index (odd outward, even inward).
    Radial,
    /// The same unit direction for every magnet.
    Fixed([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialSpec {
    pub iron: ReluctivityModel,
    pub magnet_sigma: f64,
    /// Remanent flux density in T.
    pub remanence: f64,
    pub magnet_mu_r: f64,
    pub magnetization: MagnetizationRule,
    pub coil_turns: f64,
    pub exp_cap: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec {
            iron: ReluctivityModel::Linear(NU0 / 1000.0),
            magnet_sigma: 6.67e5,
            remanence: 1.2,
            magnet_mu_r: 1.05,
            magnetization: MagnetizationRule::Radial,
            coil_turns: 20.0,
            exp_cap: DEFAULT_EXP_CAP,
        }
    }
}

/// Brauer fit commonly used for non-oriented electrical steel.
pub const BRAUER_STEEL: ReluctivityModel = ReluctivityModel::Brauer { k1: 3.8, k2: 2.17, k3: 396.2 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub rpm: f64,
    pub pole_pairs: usize,
    pub steps: usize,
    /// Peak phase current in A.
    pub peak_current: f64,
    /// Electrical angle at step 0, rad.
    pub phi0: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        DriveSpec { rpm: 1500.0, pole_pairs: 4, steps: 8, peak_current: 10.0, phi0: 0.0 }
    }
}

impl DriveSpec {
    /// Electrical period in s.
    pub fn period(&self) -> f64 {
        60.0 / (self.rpm * self.pole_pairs as f64)
    }

    pub fn tau(&self) -> f64 {
        self.period() / self.steps as f64
    }

    pub fn electrical_angle(&self, step: usize) -> f64 {
        2.0 * PI * step as f64 / self.steps as f64 + self.phi0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rpm > 0.0) || self.pole_pairs == 0 || self.steps == 0 {
            return Err(Error::Input("drive needs rpm > 0, pole pairs >= 1 and at least one step".into()));
        }
        Ok(())
    }

    /// Interface vertices the rotor advances per time step. Zero when the
    /// mesh has no sliding interface.
    pub fn shift_per_step(&self, mesh: &Mesh) -> Result<usize> {
        let v = mesh.interface_vertex_count();
        if v == 0 {
            return Ok(0);
        }
        let per_step = 2.0 * PI / (self.pole_pairs as f64 * self.steps as f64);
        let k = v as f64 * per_step / mesh.symmetry().angle();
        let rounded = k.round();
        if (k - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::Input(format!(
                "rotor advance per step is {k} interface vertices; it must be a positive integer"
            )));
        }
        Ok(rounded as usize)
    }
}

/// Current density of a coil region at step `j`, zero for other regions.
pub fn source_density(table: &MaterialTable, drive: &DriveSpec, region: u32, step: usize) -> f64 {
    match table.get(region).coil {
        Some(c) => {
            f64::from(c.polarity)
                * c.turns
                * drive.peak_current
                * (drive.electrical_angle(step) + c.phase.offset()).sin()
                / c.slot_area
        }
        None => 0.0,
    }
}

/// Counterclockwise perpendicular `(-M_y, M_x)` of the region's magnetization.
pub fn magnetization_perp(table: &MaterialTable, region: u32) -> [f64; 2] {
    let [mx, my] = table.get(region).magnetization;
    [-my, mx]
}
