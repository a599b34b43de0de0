use crate::adjoint::AdjointTrajectory;
use crate::assembly::{dot, element, local_values, MASS_PATTERN};
use crate::error::{Error, Result};
use crate::materials::{magnetization_perp, source_density};
use crate::model::Model;
use crate::quantities::{
    arkkio_integrand, arkkio_integrand_dx, arkkio_q_times, eddy_density, edge_midpoints, torque_weight,
};
use crate::state::StateTrajectory;

/// Derivative of the discrete Lagrangian with respect to node coordinates,
/// zero on nodes outside the design space.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeGradient {
    pub g: Vec<[f64; 2]>,
    pub free_mask: Vec<bool>,
}

impl ShapeGradient {
    pub fn norm(&self) -> f64 {
        self.g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt()
    }

    /// `sum g_a . theta_a`.
    pub fn apply(&self, theta: &[[f64; 2]]) -> f64 {
        self.g.iter().zip(theta).map(|(a, b)| dot(*a, *b)).sum()
    }
}

/// Unmasked coordinate derivative of the Lagrangian at fixed nodal states
/// and adjoints.
pub fn lagrangian_coordinate_derivative(
    model: &Model,
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
) -> Result<Vec<[f64; 2]>> {
    let mesh = model.mesh();
    let n = model.steps();
    if traj.u.len() != n + 1 || adj.v.len() != n + 1 {
        return Err(Error::Input("state and adjoint trajectories do not match the step count".into()));
    }
    if traj.u.iter().chain(&adj.v).any(|x| x.len() != mesh.node_count()) {
        return Err(Error::Input("trajectory size does not match the mesh".into()));
    }
    let mut g = vec![[0.0; 2]; mesh.node_count()];
    let tau = model.tau();
    let first = if adj.has_initial { 0 } else { 1 };

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let el = element(mesh, t)?;
        let area = el.area;
        let sigma = model.materials.sigma(tri.region);
        let m_perp = magnetization_perp(&model.materials, tri.region);
        let mut local = [[0.0; 2]; 3];

        for j in first..=n {
            let u = local_values(&traj.u[j], tri.nodes);
            let v = local_values(&adj.v[j], tri.nodes);
            let gu = el.gradient(u);
            let gv = el.gradient(v);
            let rel = model.materials.reluctivity(tri.region, dot(gu, gu));
            let f = source_density(&model.materials, &model.drive, tri.region, j);
            let vsum = v[0] + v[1] + v[2];
            let stiff = rel.nu * dot(gu, gv);
            let load = f * vsum / 3.0 + dot(m_perp, gv);
            let mass = if j >= 1 && sigma != 0.0 {
                let up = local_values(&traj.u[j - 1], tri.nodes);
                let du = [u[0] - up[0], u[1] - up[1], u[2] - up[2]];
                let c = sigma / (12.0 * tau);
                let mut s = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        s += du[p] * MASS_PATTERN[p][q] * v[q];
                    }
                }
                c * s
            } else {
                0.0
            };
            for (a, out) in local.iter_mut().enumerate() {
                let ga = el.grads[a];
                for k in 0..2 {
                    let da = area * ga[k];
                    let dgu = [-gu[k] * ga[0], -gu[k] * ga[1]];
                    let dgv = [-gv[k] * ga[0], -gv[k] * ga[1]];
                    let mut d = da * (stiff - load + mass);
                    d += area * rel.dnu_db2 * 2.0 * dot(gu, dgu) * dot(gu, gv);
                    d += area * rel.nu * (dot(dgu, gv) + dot(gu, dgv));
                    d -= area * dot(m_perp, dgv);
                    out[k] += d;
                }
            }
        }
        for (a, &node) in tri.nodes.iter().enumerate() {
            g[node][0] += local[a][0];
            g[node][1] += local[a][1];
        }
    }

    // Power: only the area factors move; the group means drop out because
    // the corrected field is zero-mean.
    let lambda1 = model.cost.lambda1;
    if lambda1 != 0.0 {
        let scale = lambda1 / n as f64 * model.cost.axial_length;
        for j in 1..=n {
            let field = eddy_density(model, &traj.u[j], &traj.u[j - 1])?;
            for group in model.mean_groups() {
                for &t in group {
                    let tri = &mesh.triangles()[t];
                    let el = element(mesh, t)?;
                    let e = scale * el.area * field.j_tilde[t].powi(2) / model.materials.sigma(tri.region);
                    for (a, &node) in tri.nodes.iter().enumerate() {
                        g[node][0] += e * el.grads[a][0];
                        g[node][1] += e * el.grads[a][1];
                    }
                }
            }
        }
    }

    let lambda2 = model.cost.lambda2;
    if let (Some(region), true) = (model.torque_region(), lambda2 != 0.0) {
        let w = -lambda2 * torque_weight(model) * region.coefficient;
        // Quadrature point q sits between local nodes q and q + 1.
        const BARY: [[f64; 3]; 3] = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for &t in &region.triangles {
            let tri = &mesh.triangles()[t];
            let el = element(mesh, t)?;
            let xs = edge_midpoints(mesh.vertices(t));
            for j in 1..=n {
                let gu = el.gradient(local_values(&traj.u[j], tri.nodes));
                for (q, &x) in xs.iter().enumerate() {
                    let val = arkkio_integrand(x, gu);
                    let qg = arkkio_q_times(x, gu);
                    let dx = arkkio_integrand_dx(x, gu);
                    for a in 0..3 {
                        let ga = el.grads[a];
                        for k in 0..2 {
                            let dgu = [-gu[k] * ga[0], -gu[k] * ga[1]];
                            let d =
                                el.area * ga[k] / 3.0 * val + el.area / 3.0 * (2.0 * dot(qg, dgu) + BARY[q][a] * dx[k]);
                            g[tri.nodes[a]][k] += w * d;
                        }
                    }
                }
            }
        }
    }
    Ok(g)
}

pub fn shape_gradient(model: &Model, traj: &StateTrajectory, adj: &AdjointTrajectory) -> Result<ShapeGradient> {
    let mut g = lagrangian_coordinate_derivative(model, traj, adj)?;
    let free = model.free_mask().to_vec();
    for (gi, &f) in g.iter_mut().zip(&free) {
        if !f {
            *gi = [0.0, 0.0];
        }
    }
    Ok(ShapeGradient { g, free_mask: free })
}
