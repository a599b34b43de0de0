//! The problem definition shared by the state, cost, adjoint and gradient
//! computations: mesh, materials, drive and the settings of each stage.

use crate::assembly::DofMap;
use crate::error::{Error, Result};
use crate::materials::{DriveSpec, MaterialTable};
use crate::mesh::{build_constraints, magnet_components, ConstraintMap, Mesh, RegionRole};
use crate::quantities::{CostSettings, TorqueRegion};
use crate::state::SolverSettings;

#[derive(Debug, Clone)]
pub struct Model {
    mesh: Mesh,
    pub materials: MaterialTable,
    pub drive: DriveSpec,
    pub solver: SolverSettings,
    pub cost: CostSettings,
    k_step: usize,
    mean_groups: Vec<Vec<usize>>,
    torque: Option<TorqueRegion>,
    free: Vec<bool>,
}

impl Model {
    pub fn new(
        mesh: Mesh,
        materials: MaterialTable,
        drive: DriveSpec,
        solver: SolverSettings,
        cost: CostSettings,
    ) -> Result<Self> {
        drive.validate()?;
        solver.validate()?;
        cost.validate()?;
        let k_step = drive.shift_per_step(&mesh)?;

        // Non-conducting magnets carry no eddy current and join no group.
        let conducting = |t: usize| materials.sigma(mesh.triangles()[t].region) > 0.0;
        let mean_groups: Vec<Vec<usize>> = if cost.per_component_mean {
            magnet_components(&mesh)
                .into_iter()
                .map(|g| g.into_iter().filter(|&t| conducting(t)).collect::<Vec<_>>())
                .filter(|g| !g.is_empty())
                .collect()
        } else {
            let all: Vec<usize> =
                (0..mesh.triangles().len()).filter(|&t| mesh.triangle_role(t).is_magnet() && conducting(t)).collect();
            if all.is_empty() {
                Vec::new()
            } else {
                vec![all]
            }
        };
        for g in &mean_groups {
            let s0 = materials.sigma(mesh.triangles()[g[0]].region);
            if g.iter().any(|&t| materials.sigma(mesh.triangles()[t].region) != s0) {
                return Err(Error::Input("conductivity must be uniform over each eddy-current averaging group".into()));
            }
        }

        let torque = TorqueRegion::select(&mesh, cost.torque_radii, cost.axial_length)?;
        if torque.is_none() && cost.lambda2 > 0.0 {
            return Err(Error::Input("torque weight is positive but the mesh has no airgap annulus".into()));
        }

        let free = free_mask(&mesh);
        Ok(Model { mesh, materials, drive, solver, cost, k_step, mean_groups, torque, free })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Same problem on moved nodes. Averaging groups, the torque annulus
    /// selection and the free mask are kept from the original mesh.
    pub fn with_mesh(&self, mesh: Mesh) -> Model {
        assert_eq!(mesh.node_count(), self.mesh.node_count());
        Model { mesh, ..self.clone() }
    }

    pub fn steps(&self) -> usize {
        self.drive.steps
    }

    pub fn tau(&self) -> f64 {
        self.drive.tau()
    }

    /// Interface shift reached at step `j`.
    pub fn shift(&self, j: usize) -> usize {
        j * self.k_step
    }

    pub fn shift_per_step(&self) -> usize {
        self.k_step
    }

    pub fn constraints(&self, j: usize) -> ConstraintMap {
        build_constraints(&self.mesh, self.shift(j))
    }

    pub fn dofs(&self, j: usize) -> DofMap {
        DofMap::new(self.mesh.node_count(), &self.constraints(j))
    }

    /// Triangle lists over which the eddy current is made zero-mean.
    pub fn mean_groups(&self) -> &[Vec<usize>] {
        &self.mean_groups
    }

    pub fn torque_region(&self) -> Option<&TorqueRegion> {
        self.torque.as_ref()
    }

    /// Nodes that the optimizer may move.
    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.free.len()).filter(|&i| self.free[i]).collect()
    }
}

/// A node is free when every incident triangle is rotor iron or a rotor
/// air pocket and it lies on no tagged boundary edge.
pub fn free_mask(mesh: &Mesh) -> Vec<bool> {
    let n = mesh.node_count();
    let mut touched = vec![false; n];
    let mut free = vec![true; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let design = matches!(mesh.triangle_role(t), RegionRole::IronRotor | RegionRole::AirRotor);
        for &a in &tri.nodes {
            touched[a] = true;
            free[a] &= design;
        }
    }
    for i in mesh.tagged_nodes() {
        free[i] = false;
    }
    free.iter().zip(&touched).map(|(f, t)| *f && *t).collect()
}
