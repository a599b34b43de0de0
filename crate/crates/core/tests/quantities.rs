mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::{brauer_iron, disk_model, linear_iron, template_model};
use emshape::assembly::{element, local_values};
use emshape::materials::{RegionMaterial, NU0};
use emshape::mesh::{generate_template, RegionRole, TemplateParams, Triangle};
use emshape::quantities::{cost, eddy_density, power_step, torque_step};
use emshape::{
    solve_trajectory, CostSettings, DriveSpec, MaterialSpec, MaterialTable, Mesh, Model, ReluctivityModel,
    SolverSettings,
};

fn assert_zero_mean(model: &Model) {
    let traj = solve_trajectory(model).unwrap();
    let mesh = model.mesh();
    assert!(!model.mean_groups().is_empty());
    for j in 1..=model.steps() {
        let field = eddy_density(model, &traj.u[j], &traj.u[j - 1]).unwrap();
        for group in model.mean_groups() {
            let (mut net, mut total) = (0.0, 0.0);
            for &t in group {
                let a = element(mesh, t).unwrap().area;
                net += a * field.j_tilde[t];
                total += a * field.j[t].abs();
            }
            assert!(total > 0.0);
            assert!(net.abs() <= 1e-10 * total, "step {j}: {net:e} vs {total:e}");
        }
    }
}

#[test]
fn corrected_eddy_current_is_zero_mean_on_every_step() {
    assert_zero_mean(&disk_model(linear_iron(), 1.0, 0.0, 4));
    assert_zero_mean(&disk_model(brauer_iron(), 1.0, 0.0, 4));
    let params = TemplateParams { h: 0.004, ..Default::default() };
    let mut model = template_model(&params, brauer_iron(), 1.0, 0.0);
    model.drive.peak_current = 50.0;
    assert_zero_mean(&model);
    model.cost.per_component_mean = false;
    let model =
        Model::new(model.mesh().clone(), model.materials.clone(), model.drive, model.solver, model.cost).unwrap();
    assert_zero_mean(&model);
}

/// Unit square of two magnet triangles with equal area.
fn two_triangle_magnet(sigma: f64) -> Model {
    let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let tris = vec![Triangle { nodes: [0, 1, 2], region: 1 }, Triangle { nodes: [0, 2, 3], region: 1 }];
    let mesh =
        Mesh::new(nodes, tris, vec![], BTreeMap::from([(1, RegionRole::Magnet(1))]), BTreeMap::new(), None).unwrap();
    let mat = RegionMaterial { reluctivity: ReluctivityModel::Linear(NU0), sigma, magnetization: [0.0; 2], coil: None };
    let table = MaterialTable::new(&mesh, BTreeMap::from([(1, mat)])).unwrap();
    let drive = DriveSpec { steps: 1, ..Default::default() };
    Model::new(mesh, table, drive, SolverSettings::default(), CostSettings::default()).unwrap()
}

#[test]
fn hand_mean_subtraction_on_two_elements() {
    let sigma = 2.0;
    let model = two_triangle_magnet(sigma);
    let tau = model.tau();
    let prev = vec![0.0; 4];
    let du = vec![0.3, 1.2, -0.6, 0.9];
    let a = (du[0] + du[1] + du[2]) / 3.0;
    let b = (du[0] + du[2] + du[3]) / 3.0;
    let field = eddy_density(&model, &du, &prev).unwrap();
    let expect = [-sigma / tau * (a - b) / 2.0, sigma / tau * (a - b) / 2.0];
    for t in 0..2 {
        assert!((field.j_tilde[t] - expect[t]).abs() <= 1e-12 * expect[0].abs());
        assert!((field.j[t] + sigma * [a, b][t] / tau).abs() <= 1e-12 * field.j[t].abs());
    }
    // P = l_z / sigma * sum A J~^2 with A = 1/2.
    let p = power_step(&model, &field).unwrap();
    let hand = model.cost.axial_length / sigma * 0.5 * (expect[0].powi(2) + expect[1].powi(2));
    assert!((p - hand).abs() <= 1e-12 * hand);
}

#[test]
fn constant_change_carries_no_eddy_current() {
    let model = two_triangle_magnet(5.0);
    let prev = vec![0.1, 0.2, 0.3, 0.4];
    let next: Vec<f64> = prev.iter().map(|x| x + 0.7).collect();
    let field = eddy_density(&model, &next, &prev).unwrap();
    assert!(field.j_tilde.iter().all(|x| x.abs() <= 1e-12 * field.j[0].abs()));
    assert!(power_step(&model, &field).unwrap() <= 1e-20);
    let same = eddy_density(&model, &prev, &prev).unwrap();
    assert!(same.j.iter().chain(&same.j_tilde).all(|&x| x == 0.0));
}

#[test]
fn power_is_quadratic_and_shift_invariant() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let traj = solve_trajectory(&model).unwrap();
    let (u1, u0) = (&traj.u[1], &traj.u[0]);
    let p = power_step(&model, &eddy_density(&model, u1, u0).unwrap()).unwrap();
    assert!(p > 0.0);
    for s in [-2.0, 0.5, 3.0] {
        let scaled: Vec<f64> = u0.iter().zip(u1).map(|(a, b)| a + s * (b - a)).collect();
        let ps = power_step(&model, &eddy_density(&model, &scaled, u0).unwrap()).unwrap();
        assert!((ps - s * s * p).abs() <= 1e-12 * s * s * p);
    }
    let shifted: Vec<f64> = u1.iter().map(|x| x + 1e-3).collect();
    let pc = power_step(&model, &eddy_density(&model, &shifted, u0).unwrap()).unwrap();
    assert!((pc - p).abs() <= 1e-9 * p);
}

#[test]
fn cost_combines_weighted_averages() {
    let params = TemplateParams { h: 0.005, ..Default::default() };
    let model = template_model(&params, linear_iron(), 1e5, 1e-4);
    let traj = solve_trajectory(&model).unwrap();
    let c = cost(&model, &traj).unwrap();
    assert_eq!((c.lambda1, c.lambda2), (1e5, 1e-4));
    assert_eq!(c.j, 1e5 * c.power - 1e-4 * c.torque);
    assert!(c.power_steps.iter().all(|&p| p >= 0.0));
    let n = c.torque_steps.len() as f64;
    assert!((c.torque - c.torque_steps.iter().sum::<f64>() / n).abs() <= 1e-14 * c.torque.abs().max(1e-300));
}

fn annulus(v: usize, h: f64) -> Model {
    let params = TemplateParams { h, ..TemplateParams::annulus(v, 8) };
    let mesh = generate_template(&params).unwrap();
    let materials = MaterialTable::from_spec(&mesh, &MaterialSpec::default()).unwrap();
    let drive = DriveSpec { steps: 8, pole_pairs: 1, ..Default::default() };
    Model::new(mesh, materials, drive, SolverSettings::default(), CostSettings::default()).unwrap()
}

fn nodal(model: &Model, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    model.mesh().nodes().iter().map(|&[x, y]| f(x, y)).collect()
}

/// `c sum A r |grad u|^2` over the torque annulus.
fn energy_scale(model: &Model, u: &[f64]) -> f64 {
    let region = model.torque_region().unwrap();
    let mesh = model.mesh();
    let mut s = 0.0;
    for &t in &region.triangles {
        let el = element(mesh, t).unwrap();
        let g = el.gradient(local_values(u, mesh.triangles()[t].nodes));
        let [a, b, c] = mesh.vertices(t);
        let r = ((a[0] + b[0] + c[0]) / 3.0).hypot((a[1] + b[1] + c[1]) / 3.0);
        s += el.area * r * (g[0] * g[0] + g[1] * g[1]);
    }
    region.coefficient * s
}

#[test]
fn radial_field_has_no_torque() {
    let model = annulus(32, 0.005);
    let u = nodal(&model, |x, y| {
        let r = x.hypot(y);
        (40.0 * r).sin() + r * r
    });
    let t = torque_step(&model, &u).unwrap();
    assert!(t.abs() <= 1e-3 * energy_scale(&model, &u), "{t:e}");
}

#[test]
fn uniform_gradient_torque_vanishes_under_refinement() {
    let f = |x: f64, y: f64| 0.7 * x - 1.3 * y;
    let coarse = annulus(32, 0.01);
    let fine = annulus(64, 0.005);
    let (uc, uf) = (nodal(&coarse, f), nodal(&fine, f));
    let (tc, tf) = (torque_step(&coarse, &uc).unwrap(), torque_step(&fine, &uf).unwrap());
    let (ec, ef) = (energy_scale(&coarse, &uc), energy_scale(&fine, &uf));
    // On a rotationally symmetric annulus the sum cancels to round-off.
    let at_roundoff = tc.abs() <= 1e-12 * ec && tf.abs() <= 1e-12 * ef;
    assert!(at_roundoff || tf.abs() <= 0.3 * tc.abs(), "{tc:e} -> {tf:e}");
}

/// `u = (a r + b/r) cos(theta) + (c r + d/r) sin(theta)` is harmonic with
/// torque `-2 pi nu0 L (a d - b c)` on every airgap annulus.
#[test]
fn two_pole_airgap_field_matches_closed_form_torque() {
    let (a, b, c, d) = (0.3, 2e-4, -0.1, 5e-4);
    let field = |x: f64, y: f64| {
        let r = x.hypot(y);
        ((a * r + b / r) * x + (c * r + d / r) * y) / r
    };
    let model = annulus(256, 0.0025);
    let exact = -2.0 * PI * NU0 * model.cost.axial_length * (a * d - b * c);
    let u = nodal(&model, field);
    let t = torque_step(&model, &u).unwrap();
    assert!((t - exact).abs() <= 1e-2 * exact.abs(), "{t} vs {exact}");

    let region = model.torque_region().unwrap();
    let (rr, rs) = (region.r_rotor, region.r_stator);
    let mut narrow = model.cost;
    narrow.torque_radii = Some((rr + 0.25 * (rs - rr), rs));
    let other = Model::new(model.mesh().clone(), model.materials.clone(), model.drive, model.solver, narrow).unwrap();
    let t2 = torque_step(&other, &u).unwrap();
    assert!(other.torque_region().unwrap().triangles.len() < region.triangles.len());
    assert!((t2 - t).abs() <= 2e-2 * t.abs(), "{t} vs {t2}");
}
