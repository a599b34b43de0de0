//! Run configuration: a TOML file whose sections mirror the pipeline
//! stages. Every key has a default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use emshape::materials::{MagnetizationRule, NU0};
use emshape::mesh::{disk_problem, generate_template, load_mesh, DiskParams, MagnetSpec, Sector, TemplateParams};
use emshape::shapeopt::DEFAULT_FD_EPS;
use emshape::{
    CostSettings, DriveSpec, Error, MaterialSpec, MaterialTable, Mesh, Model, ReluctivityModel, ShapeOptSettings,
    SolverSettings,
};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshSection,
    pub template: TemplateSection,
    pub disk: DiskSection,
    pub materials: MaterialsSection,
    pub drive: DriveSection,
    pub cost: CostSection,
    pub solver: SolverSection,
    pub shapeopt: ShapeOptSection,
    pub gradcheck: GradCheckSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshSource {
    Template,
    Disk,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub source: MeshSource,
    /// `emsh` file, relative to the config file, for `source = "file"`.
    pub path: Option<PathBuf>,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { source: MeshSource::Template, path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorKind {
    Full,
    Quarter,
    Eighth,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateSection {
    pub sector: SectorKind,
    pub r_shaft: f64,
    pub r_rotor: f64,
    pub r_stator_inner: f64,
    pub r_stator_outer: f64,
    pub magnet: bool,
    pub magnet_r_inner: f64,
    pub magnet_r_outer: f64,
    pub magnet_width: f64,
    pub pocket_width: f64,
    pub bridge: f64,
    pub slots_per_pole_phase: usize,
    pub tooth_tip: f64,
    pub slot_depth: f64,
    pub slot_opening: f64,
    pub h: f64,
    pub interface_vertices: Option<usize>,
}

impl Default for TemplateSection {
    fn default() -> Self {
        let t = TemplateParams::default();
        let m = t.magnet.expect("default template has a magnet");
        TemplateSection {
            sector: SectorKind::Eighth,
            r_shaft: t.r_shaft,
            r_rotor: t.r_rotor,
            r_stator_inner: t.r_stator_inner,
            r_stator_outer: t.r_stator_outer,
            magnet: true,
            magnet_r_inner: m.r_inner,
            magnet_r_outer: m.r_outer,
            magnet_width: m.width,
            pocket_width: m.pocket_width,
            bridge: m.bridge,
            slots_per_pole_phase: t.slots_per_pole_phase,
            tooth_tip: t.tooth_tip,
            slot_depth: t.slot_depth,
            slot_opening: t.slot_opening,
            h: t.h,
            interface_vertices: t.interface_vertices,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiskSection {
    pub radius: f64,
    pub rings: usize,
    /// `[x0, x1, y0, y1]`.
    pub magnet: [f64; 4],
    pub pocket: Option<[f64; 4]>,
    pub coils: bool,
}

impl Default for DiskSection {
    fn default() -> Self {
        let d = DiskParams::default();
        DiskSection { radius: d.radius, rings: d.rings, magnet: d.magnet, pocket: d.pocket, coils: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IronKind {
    Linear,
    Brauer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnetizationKind {
    Radial,
    Fixed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialsSection {
    pub iron: IronKind,
    pub iron_mu_r: f64,
    pub brauer_k1: f64,
    pub brauer_k2: f64,
    pub brauer_k3: f64,
    pub exp_cap: f64,
    pub magnet_sigma: f64,
    pub remanence: f64,
    pub magnet_mu_r: f64,
    pub magnetization: MagnetizationKind,
    /// Unit direction for `magnetization = "fixed"`.
    pub magnetization_direction: [f64; 2],
    pub coil_turns: f64,
}

impl Default for MaterialsSection {
    fn default() -> Self {
        let m = MaterialSpec::default();
        let ReluctivityModel::Brauer { k1, k2, k3 } = emshape::materials::BRAUER_STEEL else { unreachable!() };
        MaterialsSection {
            iron: IronKind::Linear,
            iron_mu_r: 1000.0,
            brauer_k1: k1,
            brauer_k2: k2,
            brauer_k3: k3,
            exp_cap: m.exp_cap,
            magnet_sigma: m.magnet_sigma,
            remanence: m.remanence,
            magnet_mu_r: m.magnet_mu_r,
            magnetization: MagnetizationKind::Radial,
            magnetization_direction: [1.0, 0.0],
            coil_turns: m.coil_turns,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub rpm: f64,
    pub pole_pairs: usize,
    pub steps: usize,
    pub peak_current: f64,
    pub phi0: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection { rpm: 1500.0, pole_pairs: 4, steps: 8, peak_current: 10.0, phi0: -std::f64::consts::FRAC_PI_2 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub axial_length: f64,
    pub torque_r_inner: Option<f64>,
    pub torque_r_outer: Option<f64>,
    pub per_component_mean: bool,
    pub sum_torque_steps: bool,
    pub include_initial_adjoint: bool,
}

impl Default for CostSection {
    fn default() -> Self {
        let c = CostSettings::default();
        CostSection {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            axial_length: c.axial_length,
            torque_r_inner: None,
            torque_r_outer: None,
            per_component_mean: c.per_component_mean,
            sum_torque_steps: c.sum_torque_steps,
            include_initial_adjoint: c.include_initial_adjoint,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub newton_abs_floor: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
    pub linear_tol: f64,
    pub zero_initial: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSection {
            newton_tol: s.newton_tol,
            newton_abs_floor: s.newton_abs_floor,
            max_newton_iters: s.max_newton_iters,
            max_halvings: s.max_halvings,
            linear_tol: s.linear_tol,
            zero_initial: s.zero_initial,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeOptSection {
    pub max_iters: usize,
    pub alpha_cr: f64,
    pub eps0: f64,
    pub t0_factor: f64,
    pub quality_floor: f64,
    pub max_halvings: usize,
}

impl Default for ShapeOptSection {
    fn default() -> Self {
        let s = ShapeOptSettings::default();
        ShapeOptSection {
            max_iters: s.max_iters,
            alpha_cr: s.alpha_cr,
            eps0: s.eps0,
            t0_factor: s.t0_factor,
            quality_floor: s.quality_floor,
            max_halvings: s.max_halvings,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckSection {
    pub samples: usize,
    /// Step relative to the local edge length.
    pub eps: f64,
    /// Largest accepted relative error.
    pub gate: f64,
    pub seed: u64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        GradCheckSection { samples: 10, eps: DEFAULT_FD_EPS, gate: 1e-5, seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write VTK field dumps (per step for `solve`, per iteration for
    /// `optimize`).
    pub vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("emshape-out"), vtk: false }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Input(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("solver.newton_tol", self.solver.newton_tol),
            ("solver.linear_tol", self.solver.linear_tol),
            ("solver.newton_abs_floor", self.solver.newton_abs_floor),
            ("gradcheck.eps", self.gradcheck.eps),
            ("shapeopt.t0_factor", self.shapeopt.t0_factor),
            ("shapeopt.eps0", self.shapeopt.eps0),
            ("cost.axial_length", self.cost.axial_length),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Input(format!("{key} must be positive")));
            }
        }
        if self.drive.steps == 0 {
            return Err(Error::Input("drive.steps must be at least 1".into()));
        }
        if !(self.cost.lambda1 >= 0.0 && self.cost.lambda2 >= 0.0) {
            return Err(Error::Input("cost weights must be non-negative".into()));
        }
        if self.mesh.source == MeshSource::File && self.mesh.path.is_none() {
            return Err(Error::Input("mesh.path is required for source = \"file\"".into()));
        }
        Ok(())
    }

    pub fn template_params(&self) -> TemplateParams {
        let t = &self.template;
        TemplateParams {
            pole_pairs: self.drive.pole_pairs,
            sector: match t.sector {
                SectorKind::Full => Sector::Full,
                SectorKind::Quarter => Sector::Quarter,
                SectorKind::Eighth => Sector::Eighth,
            },
            r_shaft: t.r_shaft,
            r_rotor: t.r_rotor,
            r_stator_inner: t.r_stator_inner,
            r_stator_outer: t.r_stator_outer,
            magnet: t.magnet.then_some(MagnetSpec {
                r_inner: t.magnet_r_inner,
                r_outer: t.magnet_r_outer,
                width: t.magnet_width,
                pocket_width: t.pocket_width,
                bridge: t.bridge,
            }),
            slots_per_pole_phase: t.slots_per_pole_phase,
            tooth_tip: t.tooth_tip,
            slot_depth: t.slot_depth,
            slot_opening: t.slot_opening,
            h: t.h,
            interface_vertices: t.interface_vertices,
            steps_per_period: self.drive.steps,
        }
    }

    /// Builds or loads the mesh; relative paths resolve against `base`.
    pub fn mesh(&self, base: &Path) -> Result<Mesh, Error> {
        match self.mesh.source {
            MeshSource::Template => generate_template(&self.template_params()),
            MeshSource::Disk => {
                let d = &self.disk;
                let mut params = DiskParams {
                    radius: d.radius,
                    rings: d.rings,
                    magnet: d.magnet,
                    pocket: d.pocket,
                    ..Default::default()
                };
                if !d.coils {
                    params.coils.clear();
                }
                disk_problem(&params)
            }
            MeshSource::File => {
                let path = self.mesh.path.as_ref().expect("validated");
                let path = if path.is_absolute() { path.clone() } else { base.join(path) };
                if !path.is_file() {
                    return Err(Error::Input(format!("mesh file {} not found", path.display())));
                }
                load_mesh(path)
            }
        }
    }

    pub fn material_spec(&self) -> MaterialSpec {
        let m = &self.materials;
        MaterialSpec {
            iron: match m.iron {
                IronKind::Linear => ReluctivityModel::Linear(NU0 / m.iron_mu_r),
                IronKind::Brauer => ReluctivityModel::Brauer { k1: m.brauer_k1, k2: m.brauer_k2, k3: m.brauer_k3 },
            },
            magnet_sigma: m.magnet_sigma,
            remanence: m.remanence,
            magnet_mu_r: m.magnet_mu_r,
            magnetization: match m.magnetization {
                MagnetizationKind::Radial => MagnetizationRule::Radial,
                MagnetizationKind::Fixed => MagnetizationRule::Fixed(m.magnetization_direction),
            },
            coil_turns: m.coil_turns,
            exp_cap: m.exp_cap,
        }
    }

    pub fn drive(&self) -> DriveSpec {
        let d = &self.drive;
        DriveSpec { rpm: d.rpm, pole_pairs: d.pole_pairs, steps: d.steps, peak_current: d.peak_current, phi0: d.phi0 }
    }

    pub fn solver(&self) -> SolverSettings {
        let s = &self.solver;
        SolverSettings {
            newton_tol: s.newton_tol,
            newton_abs_floor: s.newton_abs_floor,
            max_newton_iters: s.max_newton_iters,
            max_halvings: s.max_halvings,
            linear_tol: s.linear_tol,
            zero_initial: s.zero_initial,
        }
    }

    pub fn cost(&self) -> Result<CostSettings, Error> {
        let c = &self.cost;
        let torque_radii = match (c.torque_r_inner, c.torque_r_outer) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Input("set both cost.torque_r_inner and cost.torque_r_outer or neither".into())),
        };
        Ok(CostSettings {
            lambda1: c.lambda1,
            lambda2: c.lambda2,
            axial_length: c.axial_length,
            torque_radii,
            per_component_mean: c.per_component_mean,
            sum_torque_steps: c.sum_torque_steps,
            include_initial_adjoint: c.include_initial_adjoint,
        })
    }

    pub fn shapeopt(&self) -> ShapeOptSettings {
        let s = &self.shapeopt;
        ShapeOptSettings {
            max_iters: s.max_iters,
            alpha_cr: s.alpha_cr,
            eps0: s.eps0,
            t0_factor: s.t0_factor,
            quality_floor: s.quality_floor,
            max_halvings: s.max_halvings,
        }
    }

    pub fn model(&self, base: &Path) -> Result<Model, Error> {
        let mesh = self.mesh(base)?;
        let materials = MaterialTable::from_spec(&mesh, &self.material_spec())?;
        Model::new(mesh, materials, self.drive(), self.solver(), self.cost()?)
    }
}
