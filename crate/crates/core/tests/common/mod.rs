#![allow(dead_code)]

use emshape::materials::{MagnetizationRule, BRAUER_STEEL};
use emshape::mesh::{disk_problem, DiskParams};
use emshape::{CostSettings, DriveSpec, MaterialSpec, MaterialTable, Model, ReluctivityModel, SolverSettings};

pub fn disk_model(iron: ReluctivityModel, lambda1: f64, lambda2: f64, steps: usize) -> Model {
    let mesh = disk_problem(&DiskParams::default()).unwrap();
    let spec = MaterialSpec { iron, magnetization: MagnetizationRule::Fixed([1.0, 0.0]), ..Default::default() };
    let materials = MaterialTable::from_spec(&mesh, &spec).unwrap();
    let drive = DriveSpec { steps, pole_pairs: 1, peak_current: 200.0, ..Default::default() };
    let solver = SolverSettings { newton_tol: 1e-13, ..Default::default() };
    let cost = CostSettings { lambda1, lambda2, ..Default::default() };
    Model::new(mesh, materials, drive, solver, cost).unwrap()
}

pub fn linear_iron() -> ReluctivityModel {
    ReluctivityModel::Linear(emshape::materials::NU0 / 1000.0)
}

pub fn brauer_iron() -> ReluctivityModel {
    BRAUER_STEEL
}

pub fn template_model(
    params: &emshape::mesh::TemplateParams,
    iron: ReluctivityModel,
    lambda1: f64,
    lambda2: f64,
) -> Model {
    let mesh = emshape::mesh::generate_template(params).unwrap();
    let spec = MaterialSpec { iron, ..Default::default() };
    let materials = MaterialTable::from_spec(&mesh, &spec).unwrap();
    let drive = DriveSpec {
        steps: params.steps_per_period,
        pole_pairs: params.pole_pairs,
        peak_current: 10.0,
        phi0: std::f64::consts::FRAC_PI_2,
        ..Default::default()
    };
    let solver = SolverSettings { newton_tol: 1e-13, ..Default::default() };
    let cost = CostSettings { lambda1, lambda2, ..Default::default() };
    Model::new(mesh, materials, drive, solver, cost).unwrap()
}
