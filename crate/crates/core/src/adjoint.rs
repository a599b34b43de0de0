//! Backward adjoint sweep. The power term couples two consecutive steps,
//! so `v_i` depends on `v_{i+1}` and on the eddy fields of steps `i` and
//! `i + 1`.

use crate::assembly::{apply_mass_sigma, element, local_values, solve_spd};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quantities::{arkkio_q_times, eddy_density, edge_midpoints, torque_weight, EddyField};
use crate::state::{step_matrix, StateTrajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    /// `v_0 ... v_N`; `v_0` is zero unless `has_initial`.
    pub v: Vec<Vec<f64>>,
    pub has_initial: bool,
}

/// `sign * (2 l_z / tau) int J~ w` as a full nodal vector.
fn eddy_load(model: &Model, field: &EddyField, sign: f64) -> Result<Vec<f64>> {
    let mesh = model.mesh();
    let c = sign * 2.0 * model.cost.axial_length / model.tau();
    let mut out = vec![0.0; mesh.node_count()];
    for group in model.mean_groups() {
        for &t in group {
            let share = c * field.j_tilde[t] * element(mesh, t)?.area / 3.0;
            for &a in &mesh.triangles()[t].nodes {
                out[a] += share;
            }
        }
    }
    Ok(out)
}

/// Derivative of `P_i` with respect to `u_i` (`wrt_current`) or `u_{i-1}`.
pub fn power_step_derivative(model: &Model, traj: &StateTrajectory, i: usize, wrt_current: bool) -> Result<Vec<f64>> {
    let field = eddy_density(model, &traj.u[i], &traj.u[i - 1])?;
    eddy_load(model, &field, if wrt_current { -1.0 } else { 1.0 })
}

/// `-lambda1 / N * (dP_i/du_i + dP_{i+1}/du_i)`, full nodal vector.
pub fn power_rhs(model: &Model, traj: &StateTrajectory, i: usize) -> Result<Vec<f64>> {
    let n = model.steps();
    assert!((1..=n).contains(&i));
    let mut d = power_step_derivative(model, traj, i, true)?;
    if i < n {
        let next = power_step_derivative(model, traj, i + 1, false)?;
        for (a, b) in d.iter_mut().zip(next) {
            *a += b;
        }
    }
    let w = -model.cost.lambda1 / n as f64;
    Ok(d.into_iter().map(|x| w * x).collect())
}

/// `dT/du (w) = c sum_q (A/3) 2 (Q g) . grad w`, unweighted.
pub fn torque_derivative(model: &Model, u: &[f64]) -> Result<Vec<f64>> {
    let mesh = model.mesh();
    let mut out = vec![0.0; mesh.node_count()];
    let Some(region) = model.torque_region() else { return Ok(out) };
    for &t in &region.triangles {
        let el = element(mesh, t)?;
        let nodes = mesh.triangles()[t].nodes;
        let g = el.gradient(local_values(u, nodes));
        for x in edge_midpoints(mesh.vertices(t)) {
            let qg = arkkio_q_times(x, g);
            for a in 0..3 {
                let ga = el.grads[a];
                out[nodes[a]] += region.coefficient * el.area / 3.0 * 2.0 * (qg[0] * ga[0] + qg[1] * ga[1]);
            }
        }
    }
    Ok(out)
}

/// `+lambda2 * w_T * dT_i/du_i`.
pub fn torque_rhs(model: &Model, u_i: &[f64]) -> Result<Vec<f64>> {
    let w = model.cost.lambda2 * torque_weight(model);
    Ok(torque_derivative(model, u_i)?.into_iter().map(|x| w * x).collect())
}

fn solve_with(model: &Model, j: usize, u: &[f64], with_mass: bool, rhs_full: &[f64]) -> Result<Vec<f64>> {
    let (dofs, k) = step_matrix(model, j, u, with_mass)?;
    let b = dofs.fold(rhs_full);
    let y = solve_spd(&k, &b, model.solver.linear_tol)?;
    Ok(dofs.expand(&y))
}

/// `[A_i'(u_i) + M/tau] v_i = power_rhs + torque_rhs + (M/tau) v_{i+1}`.
pub fn adjoint_step(model: &Model, traj: &StateTrajectory, i: usize, v_next: &[f64]) -> Result<Vec<f64>> {
    let mut rhs = power_rhs(model, traj, i)?;
    for (a, b) in rhs.iter_mut().zip(torque_rhs(model, &traj.u[i])?) {
        *a += b;
    }
    if model.materials.has_conductors() {
        for (a, b) in rhs.iter_mut().zip(apply_mass_sigma(model.mesh(), &model.materials, model.tau(), v_next)?) {
            *a += b;
        }
    }
    solve_with(model, i, &traj.u[i], true, &rhs)
}

/// Adjoint of the magnetostatic initial solve:
/// `A_0'(u_0) v_0 = -lambda1 / N * dP_1/du_0 + (M/tau) v_1`.
pub fn initial_adjoint(model: &Model, traj: &StateTrajectory, v1: &[f64]) -> Result<Vec<f64>> {
    let w = -model.cost.lambda1 / model.steps() as f64;
    let mut rhs: Vec<f64> = power_step_derivative(model, traj, 1, false)?.into_iter().map(|x| w * x).collect();
    if model.materials.has_conductors() {
        for (a, b) in rhs.iter_mut().zip(apply_mass_sigma(model.mesh(), &model.materials, model.tau(), v1)?) {
            *a += b;
        }
    }
    solve_with(model, 0, &traj.u[0], false, &rhs)
}

pub fn solve_adjoint(model: &Model, traj: &StateTrajectory) -> Result<AdjointTrajectory> {
    let n = model.steps();
    if traj.u.len() != n + 1 {
        return Err(Error::Input(format!("trajectory has {} fields, expected {}", traj.u.len(), n + 1)));
    }
    let nodes = model.mesh().node_count();
    let mut v = vec![vec![0.0; nodes]; n + 1];
    let mut next = vec![0.0; nodes];
    for i in (1..=n).rev() {
        v[i] = adjoint_step(model, traj, i, &next).map_err(|e| e.at_step(i))?;
        next.clone_from(&v[i]);
    }
    let has_initial = model.cost.include_initial_adjoint && !model.solver.zero_initial;
    if has_initial {
        v[0] = initial_adjoint(model, traj, &v[1]).map_err(|e| e.at_step(0))?;
    }
    Ok(AdjointTrajectory { v, has_initial })
}
