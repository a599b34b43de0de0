//! Shared setup for the benchmarks in `benches/`.

use emshape::materials::BRAUER_STEEL;
use emshape::mesh::{generate_template, TemplateParams};
use emshape::{CostSettings, DriveSpec, MaterialSpec, MaterialTable, Model, SolverSettings};

/// One pole of the built-in rotor with saturating iron at element size `h`.
pub fn template_model(h: f64) -> Model {
    let params = TemplateParams { h, ..Default::default() };
    let mesh = generate_template(&params).expect("template parameters are valid");
    let spec = MaterialSpec { iron: BRAUER_STEEL, ..Default::default() };
    let materials = MaterialTable::from_spec(&mesh, &spec).expect("template regions have materials");
    let drive = DriveSpec {
        steps: params.steps_per_period,
        peak_current: 50.0,
        phi0: -std::f64::consts::FRAC_PI_2,
        ..Default::default()
    };
    let cost = CostSettings { lambda1: 1.0, lambda2: 1e-4, ..Default::default() };
    Model::new(mesh, materials, drive, SolverSettings::default(), cost).expect("consistent model")
}
