//! Eddy-current density with zero-mean correction, dissipated power, Arkkio
//! torque and the weighted cost `J = lambda1 P - lambda2 T`.

use crate::assembly::{element, local_values};
use crate::error::{Error, Result};
use crate::materials::NU0;
use crate::mesh::{Mesh, Point};
use crate::model::Model;
use crate::state::StateTrajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSettings {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Machine length in m, used for both power and torque.
    pub axial_length: f64,
    /// Inner and outer radius of the torque annulus. Defaults to the radial
    /// extent of the airgap regions.
    pub torque_radii: Option<(f64, f64)>,
    /// Zero-mean correction per connected magnet piece rather than over all
    /// magnets together.
    pub per_component_mean: bool,
    /// Sum the step torques instead of averaging them.
    pub sum_torque_steps: bool,
    pub include_initial_adjoint: bool,
}

impl Default for CostSettings {
    fn default() -> Self {
        CostSettings {
            lambda1: 1.0,
            lambda2: 0.0,
            axial_length: 0.1,
            torque_radii: None,
            per_component_mean: true,
            sum_torque_steps: false,
            include_initial_adjoint: true,
        }
    }
}

impl CostSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::Input("cost weights must be non-negative".into()));
        }
        if !(self.axial_length > 0.0) {
            return Err(Error::Input("axial length must be positive".into()));
        }
        Ok(())
    }
}

/// Airgap triangles over which the torque is integrated.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueRegion {
    pub triangles: Vec<usize>,
    pub r_rotor: f64,
    pub r_stator: f64,
    /// `nu0 L / (r_s - r_r)`.
    pub coefficient: f64,
}

impl TorqueRegion {
    /// Airgap triangles whose centroid radius lies in `[r_r, r_s]`. `None`
    /// when the mesh has no airgap and no radii were requested.
    pub fn select(mesh: &Mesh, radii: Option<(f64, f64)>, axial_length: f64) -> Result<Option<Self>> {
        let airgap: Vec<usize> = (0..mesh.triangles().len()).filter(|&t| mesh.triangle_role(t).is_airgap()).collect();
        if airgap.is_empty() && radii.is_none() {
            return Ok(None);
        }
        let (r_rotor, r_stator) = radii.unwrap_or_else(|| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for &t in &airgap {
                for p in mesh.vertices(t) {
                    let r = p[0].hypot(p[1]);
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
            (lo, hi)
        });
        if !(r_rotor > 0.0 && r_rotor < r_stator) {
            return Err(Error::Input(format!("torque annulus needs 0 < r_r < r_s, got {r_rotor}, {r_stator}")));
        }
        let triangles: Vec<usize> = airgap
            .into_iter()
            .filter(|&t| {
                let [a, b, c] = mesh.vertices(t);
                let r = ((a[0] + b[0] + c[0]) / 3.0).hypot((a[1] + b[1] + c[1]) / 3.0);
                (r_rotor..=r_stator).contains(&r)
            })
            .collect();
        if triangles.is_empty() {
            return Err(Error::Input("torque annulus contains no airgap triangles".into()));
        }
        Ok(Some(TorqueRegion { triangles, r_rotor, r_stator, coefficient: NU0 * axial_length / (r_stator - r_rotor) }))
    }
}

/// `g^T Q(x) g` with `Q = (1/r) [[xy, (y^2-x^2)/2], [(y^2-x^2)/2, -xy]]`.
pub fn arkkio_integrand(x: Point, g: [f64; 2]) -> f64 {
    let [px, py] = x;
    let r = px.hypot(py);
    (px * py * (g[0] * g[0] - g[1] * g[1]) + (py * py - px * px) * g[0] * g[1]) / r
}

/// `Q(x) g`.
pub fn arkkio_q_times(x: Point, g: [f64; 2]) -> [f64; 2] {
    let [px, py] = x;
    let r = px.hypot(py);
    let off = 0.5 * (py * py - px * px);
    [(px * py * g[0] + off * g[1]) / r, (off * g[0] - px * py * g[1]) / r]
}

/// Derivative of [`arkkio_integrand`] with respect to the point.
pub fn arkkio_integrand_dx(x: Point, g: [f64; 2]) -> [f64; 2] {
    let [px, py] = x;
    let r = px.hypot(py);
    let d = g[0] * g[0] - g[1] * g[1];
    let c = g[0] * g[1];
    let h = px * py * d + (py * py - px * px) * c;
    let hx = py * d - 2.0 * px * c;
    let hy = px * d + 2.0 * py * c;
    let r3 = r * r * r;
    [hx / r - h * px / r3, hy / r - h * py / r3]
}

/// Per-triangle eddy-current density and its zero-mean part. Entries are
/// zero outside conducting triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct EddyField {
    pub j: Vec<f64>,
    pub j_tilde: Vec<f64>,
    /// Area-weighted mean per averaging group.
    pub means: Vec<f64>,
}

/// `J = -sigma (u_j - u_prev)/tau` averaged per element, then made zero-mean
/// over each group.
pub fn eddy_density(model: &Model, u_j: &[f64], u_prev: &[f64]) -> Result<EddyField> {
    let mesh = model.mesh();
    let tau = model.tau();
    let nt = mesh.triangles().len();
    let mut j = vec![0.0; nt];
    let mut j_tilde = vec![0.0; nt];
    let mut means = Vec::with_capacity(model.mean_groups().len());
    for group in model.mean_groups() {
        let (mut area, mut integral) = (0.0, 0.0);
        for &t in group {
            let tri = &mesh.triangles()[t];
            let el = element(mesh, t)?;
            let du: f64 = (0..3).map(|k| u_j[tri.nodes[k]] - u_prev[tri.nodes[k]]).sum::<f64>() / 3.0;
            j[t] = -model.materials.sigma(tri.region) * du / tau;
            area += el.area;
            integral += el.area * j[t];
        }
        let mean = integral / area;
        for &t in group {
            j_tilde[t] = j[t] - mean;
        }
        means.push(mean);
    }
    Ok(EddyField { j, j_tilde, means })
}

/// `P_j = sum l_z / sigma * A * J~^2` over conducting triangles.
pub fn power_step(model: &Model, field: &EddyField) -> Result<f64> {
    let mesh = model.mesh();
    let mut p = 0.0;
    for group in model.mean_groups() {
        for &t in group {
            let sigma = model.materials.sigma(mesh.triangles()[t].region);
            p += element(mesh, t)?.area * field.j_tilde[t].powi(2) / sigma;
        }
    }
    Ok(model.cost.axial_length * p)
}

pub fn average_power(power_steps: &[f64]) -> f64 {
    power_steps.iter().sum::<f64>() / power_steps.len() as f64
}

/// Arkkio torque of one nodal field; zero without an airgap.
pub fn torque_step(model: &Model, u: &[f64]) -> Result<f64> {
    let Some(region) = model.torque_region() else { return Ok(0.0) };
    let mesh = model.mesh();
    let mut sum = 0.0;
    for &t in &region.triangles {
        let el = element(mesh, t)?;
        let g = el.gradient(local_values(u, mesh.triangles()[t].nodes));
        for x in edge_midpoints(mesh.vertices(t)) {
            sum += el.area / 3.0 * arkkio_integrand(x, g);
        }
    }
    Ok(region.coefficient * sum)
}

pub(crate) fn edge_midpoints([a, b, c]: [Point; 3]) -> [Point; 3] {
    let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
    [mid(a, b), mid(b, c), mid(c, a)]
}

/// Mean (or the plain sum) of the step torques.
pub fn average_torque(torque_steps: &[f64], sum_steps: bool) -> f64 {
    let s: f64 = torque_steps.iter().sum();
    if sum_steps {
        s
    } else {
        s / torque_steps.len() as f64
    }
}

/// Weight of each `T_j` in the averaged torque.
pub fn torque_weight(model: &Model) -> f64 {
    if model.cost.sum_torque_steps {
        1.0
    } else {
        1.0 / model.steps() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    /// `P_1 ... P_N` in W.
    pub power_steps: Vec<f64>,
    /// `T_1 ... T_N` in N m.
    pub torque_steps: Vec<f64>,
    pub power: f64,
    pub torque: f64,
    pub j: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub fn cost(model: &Model, traj: &StateTrajectory) -> Result<CostBreakdown> {
    let n = model.steps();
    if traj.u.len() != n + 1 {
        return Err(Error::Input(format!("trajectory has {} fields, expected {}", traj.u.len(), n + 1)));
    }
    let mut power_steps = Vec::with_capacity(n);
    let mut torque_steps = Vec::with_capacity(n);
    for j in 1..=n {
        let field = eddy_density(model, &traj.u[j], &traj.u[j - 1])?;
        power_steps.push(power_step(model, &field)?);
        torque_steps.push(torque_step(model, &traj.u[j])?);
    }
    let power = average_power(&power_steps);
    let torque = average_torque(&torque_steps, model.cost.sum_torque_steps);
    let (lambda1, lambda2) = (model.cost.lambda1, model.cost.lambda2);
    Ok(CostBreakdown {
        power_steps,
        torque_steps,
        power,
        torque,
        j: lambda1 * power - lambda2 * torque,
        lambda1,
        lambda2,
    })
}
