use std::collections::BTreeSet;

use crate::assembly::{element, solve_spd, CsrMatrix, MASS_PATTERN};
use crate::error::{Error, Result};
use crate::mesh::{Point, RegionRole};
use crate::model::Model;

use super::ShapeGradient;

#[derive(Debug, Clone, PartialEq)]
pub struct DescentField {
    pub theta: Vec<Point>,
    /// `g . theta`.
    pub directional_derivative: f64,
    /// `b(theta, theta)`.
    pub energy: f64,
}

/// `b` on two constant displacement gradients `d[m][l] = d_l theta_m`.
fn form(d1: &[[f64; 2]; 2], d2: &[[f64; 2]; 2], alpha_cr: f64) -> f64 {
    let mut sym = 0.0;
    for m in 0..2 {
        for l in 0..2 {
            let e1 = 0.5 * (d1[m][l] + d1[l][m]);
            let e2 = 0.5 * (d2[m][l] + d2[l][m]);
            sym += e1 * e2;
        }
    }
    let cr1 = [d1[0][0] - d1[1][1], d1[1][0] + d1[0][1]];
    let cr2 = [d2[0][0] - d2[1][1], d2[1][0] + d2[0][1]];
    2.0 * sym + alpha_cr * (cr1[0] * cr2[0] + cr1[1] * cr2[1])
}

/// Solves `b(theta, W) = -g . W` over the free nodes of the rotor design
/// region. `eps0_rel` scales the zeroth-order term relative to the ratio of
/// mean stiffness and mass diagonals.
pub fn descent_field(model: &Model, grad: &ShapeGradient, alpha_cr: f64, eps0_rel: f64) -> Result<DescentField> {
    let mesh = model.mesh();
    let n = mesh.node_count();
    let mut index = vec![None; n];
    let mut count = 0;
    for i in 0..n {
        if grad.free_mask[i] {
            index[i] = Some(count);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Input("descent field needs at least one free node".into()));
    }
    let design: Vec<usize> = (0..mesh.triangles().len())
        .filter(|&t| matches!(mesh.triangle_role(t), RegionRole::IronRotor | RegionRole::AirRotor))
        .collect();

    let dof = |node: usize, k: usize| index[node].map(|i| 2 * i + k);
    let mut rows = vec![BTreeSet::new(); 2 * count];
    for &t in &design {
        let nodes = mesh.triangles()[t].nodes;
        for &a in &nodes {
            for &b in &nodes {
                for k in 0..2 {
                    for l in 0..2 {
                        if let (Some(i), Some(j)) = (dof(a, k), dof(b, l)) {
                            rows[i].insert(j);
                        }
                    }
                }
            }
        }
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.insert(i);
    }
    let mut stiff = CsrMatrix::from_pattern(&rows);
    let mut mass = CsrMatrix::from_pattern(&rows);
    for &t in &design {
        let nodes = mesh.triangles()[t].nodes;
        let el = element(mesh, t)?;
        let basis = |a: usize, k: usize| {
            let mut d = [[0.0; 2]; 2];
            d[k] = el.grads[a];
            d
        };
        for p in 0..3 {
            for k in 0..2 {
                let Some(i) = dof(nodes[p], k) else { continue };
                for q in 0..3 {
                    let Some(j) = dof(nodes[q], k) else { continue };
                    mass.add(i, j, el.area / 12.0 * MASS_PATTERN[p][q]);
                }
                for q in 0..3 {
                    for l in 0..2 {
                        if let Some(j) = dof(nodes[q], l) {
                            stiff.add(i, j, el.area * form(&basis(p, k), &basis(q, l), alpha_cr));
                        }
                    }
                }
            }
        }
    }
    let mean_diag = |m: &CsrMatrix| (0..m.dim()).map(|i| m.get(i, i)).sum::<f64>() / m.dim() as f64;
    let (ks, ms) = (mean_diag(&stiff), mean_diag(&mass));
    if ms > 0.0 {
        stiff.add_scaled(eps0_rel * ks / ms, &mass);
    }

    let mut rhs = vec![0.0; 2 * count];
    for i in 0..n {
        if let Some(r) = index[i] {
            rhs[2 * r] = -grad.g[i][0];
            rhs[2 * r + 1] = -grad.g[i][1];
        }
    }
    let x = solve_spd(&stiff, &rhs, model.solver.linear_tol)?;
    let mut theta = vec![[0.0; 2]; n];
    for i in 0..n {
        if let Some(r) = index[i] {
            theta[i] = [x[2 * r], x[2 * r + 1]];
        }
    }
    let kx = stiff.mul_vec(&x);
    let energy: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
    Ok(DescentField { directional_derivative: grad.apply(&theta), theta, energy })
}

#[cfg(test)]
mod tests {
    use super::form;

    #[test]
    fn rigid_rotation_has_zero_strain_and_cr_energy() {
        // theta = (-y, x): d = [[0, -1], [1, 0]].
        let d = [[0.0, -1.0], [1.0, 0.0]];
        assert_eq!(form(&d, &d, 1.0), 0.0);
    }

    #[test]
    fn conformal_dilation_costs_only_strain() {
        let d = [[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(form(&d, &d, 0.0), 4.0);
        assert_eq!(form(&d, &d, 1.0), 4.0);
    }
}
