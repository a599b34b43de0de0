//! Magnetostatic initial solve and backward-Euler time stepping across
//! rotor positions.

use log::debug;

use crate::assembly::{
    apply_mass_sigma, assemble_load, assemble_mass_sigma, assemble_operator, norm2, solve_spd, CsrMatrix, DofMap,
};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Newton tolerance relative to the initial residual scale of a step.
    pub newton_tol: f64,
    pub newton_abs_floor: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
    /// Relative residual of each linear solve.
    pub linear_tol: f64,
    /// Start from `u_0 = 0` instead of the magnetostatic field.
    pub zero_initial: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            newton_tol: 1e-8,
            newton_abs_floor: 1e-14,
            max_newton_iters: 50,
            max_halvings: 10,
            linear_tol: 1e-10,
            zero_initial: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.linear_tol > 0.0 && self.newton_abs_floor > 0.0)
            || self.max_newton_iters == 0
        {
            return Err(Error::Input("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub newton_iterations: usize,
    pub residual: f64,
    pub shift: usize,
}

/// `u_0 ... u_N` with per-step solver metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub u: Vec<Vec<f64>>,
    pub steps: Vec<StepInfo>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Nonlinear system of one step in reduced coordinates:
/// `P^T [A(u) + m (u - u_prev) - F - extra] = 0`.
struct StepProblem<'a> {
    model: &'a Model,
    dofs: DofMap,
    /// Full-space data: `F + extra + (M/tau) u_prev`.
    rhs_full: Vec<f64>,
    mass: Option<CsrMatrix>,
}

impl StepProblem<'_> {
    fn residual_and_tangent(&self, y: &[f64]) -> Result<(Vec<f64>, CsrMatrix)> {
        let u = self.dofs.expand(y);
        let (mut r, mut k) = assemble_operator(self.model.mesh(), &self.model.materials, &self.dofs, &u)?;
        if let Some(m) = &self.mass {
            let mu = m.mul_vec(y);
            for (ri, x) in r.iter_mut().zip(mu) {
                *ri += x;
            }
            k.add_scaled(1.0, m);
        }
        let b = self.dofs.fold(&self.rhs_full);
        for (ri, bi) in r.iter_mut().zip(&b) {
            *ri -= bi;
        }
        Ok((r, k))
    }

    fn residual(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.residual_and_tangent(y).map(|(r, _)| r)
    }
}

fn newton(p: &StepProblem, guess: &[f64], shift: usize) -> Result<(Vec<f64>, StepInfo)> {
    let s = &p.model.solver;
    let mut y = p.dofs.restrict(guess);
    let (mut r, mut k) = p.residual_and_tangent(&y)?;
    let scale = norm2(&r).max(norm2(&p.dofs.fold(&p.rhs_full)));
    let target = (s.newton_tol * scale).max(s.newton_abs_floor);
    let mut rnorm = norm2(&r);
    let mut history = vec![rnorm];
    let mut iters = 0;
    while rnorm > target {
        if iters == s.max_newton_iters {
            return Err(Error::Newton { iterations: iters, history });
        }
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let dy = solve_spd(&k, &neg, s.linear_tol)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=s.max_halvings {
            let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + t * b).collect();
            let rt = p.residual(&trial)?;
            if norm2(&rt) < rnorm {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::Newton { iterations: iters, history });
        };
        y = next;
        iters += 1;
        (r, k) = p.residual_and_tangent(&y)?;
        rnorm = norm2(&r);
        history.push(rnorm);
        debug!("newton {iters}: |r| = {rnorm:e} (damping {t})");
    }
    // Extra full steps down to round-off so that costs are smooth in the
    // geometry; they are not counted as iterations.
    if !p.model.materials.is_linear() {
        for _ in 0..3 {
            let neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let Ok(dy) = solve_spd(&k, &neg, s.linear_tol) else { break };
            let trial: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + b).collect();
            let (rt, kt) = p.residual_and_tangent(&trial)?;
            let rt_norm = norm2(&rt);
            if !(rt_norm < 0.5 * rnorm) {
                break;
            }
            (y, r, k, rnorm) = (trial, rt, kt, rt_norm);
        }
    }
    Ok((
        p.dofs.expand(&y),
        StepInfo { newton_iterations: iters, residual: rnorm / scale.max(f64::MIN_POSITIVE), shift },
    ))
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn step_problem<'a>(
    model: &'a Model,
    j: usize,
    prev: Option<&[f64]>,
    extra: Option<&[f64]>,
) -> Result<StepProblem<'a>> {
    let mesh = model.mesh();
    let full = DofMap::all_free(mesh.node_count());
    let mut rhs_full = assemble_load(mesh, &model.materials, &model.drive, &full, j)?;
    if let Some(e) = extra {
        add_into(&mut rhs_full, e);
    }
    let dofs = model.dofs(j);
    let mass = match prev {
        Some(u_prev) if model.materials.has_conductors() => {
            add_into(&mut rhs_full, &apply_mass_sigma(mesh, &model.materials, model.tau(), u_prev)?);
            Some(assemble_mass_sigma(mesh, &model.materials, &dofs, model.tau())?)
        }
        _ => None,
    };
    Ok(StepProblem { model, dofs, rhs_full, mass })
}

/// Magnetostatic field at rotor position and source phase of step `j`.
pub fn solve_magnetostatic(model: &Model, j: usize, guess: &[f64]) -> Result<(Vec<f64>, StepInfo)> {
    solve_magnetostatic_with_source(model, j, guess, None)
}

pub fn solve_magnetostatic_with_source(
    model: &Model,
    j: usize,
    guess: &[f64],
    extra: Option<&[f64]>,
) -> Result<(Vec<f64>, StepInfo)> {
    let p = step_problem(model, j, None, extra)?;
    newton(&p, guess, model.shift(j))
}

/// One backward-Euler step from the accepted field `u_prev`.
pub fn time_step(model: &Model, u_prev: &[f64], j: usize) -> Result<(Vec<f64>, StepInfo)> {
    time_step_with_source(model, u_prev, j, None)
}

pub fn time_step_with_source(
    model: &Model,
    u_prev: &[f64],
    j: usize,
    extra: Option<&[f64]>,
) -> Result<(Vec<f64>, StepInfo)> {
    let p = step_problem(model, j, Some(u_prev), extra)?;
    newton(&p, u_prev, model.shift(j))
}

pub fn solve_trajectory(model: &Model) -> Result<StateTrajectory> {
    solve_trajectory_with_source(model, |_| None)
}

/// Trajectory with an additional full-space load per step, used by
/// manufactured-solution tests.
pub fn solve_trajectory_with_source(
    model: &Model,
    extra: impl Fn(usize) -> Option<Vec<f64>>,
) -> Result<StateTrajectory> {
    let n = model.mesh().node_count();
    let zero = vec![0.0; n];
    let (u0, info0) = if model.solver.zero_initial {
        (zero, StepInfo { newton_iterations: 0, residual: 0.0, shift: 0 })
    } else {
        let e = extra(0);
        solve_magnetostatic_with_source(model, 0, &zero, e.as_deref()).map_err(|e| e.at_step(0))?
    };
    let mut u = vec![u0];
    let mut steps = vec![info0];
    for j in 1..=model.steps() {
        let e = extra(j);
        let (uj, info) = time_step_with_source(model, &u[j - 1], j, e.as_deref()).map_err(|e| e.at_step(j))?;
        debug!("step {j}: {} newton iterations, shift {}", info.newton_iterations, info.shift);
        u.push(uj);
        steps.push(info);
    }
    Ok(StateTrajectory { u, steps })
}

/// Tangent plus mass at `u` under the constraints of step `j`, the matrix
/// shared by the last Newton iteration and the adjoint solve.
pub fn step_matrix(model: &Model, j: usize, u: &[f64], with_mass: bool) -> Result<(DofMap, CsrMatrix)> {
    let dofs = model.dofs(j);
    let (_, mut k) = assemble_operator(model.mesh(), &model.materials, &dofs, u)?;
    if with_mass && model.materials.has_conductors() {
        let m = assemble_mass_sigma(model.mesh(), &model.materials, &dofs, model.tau())?;
        k.add_scaled(1.0, &m);
    }
    Ok((dofs, k))
}
