//! Discrete shape gradient, finite-difference verification, descent
//! direction, line search and the optimization loop.

mod descent;
mod gradient;

pub use descent::{descent_field, DescentField};
pub use gradient::{lagrangian_coordinate_derivative, shape_gradient, ShapeGradient};

use log::{debug, info};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjoint::{solve_adjoint, AdjointTrajectory};
use crate::error::{Error, Result};
use crate::mesh::{advect, quality, Mesh, Point};
use crate::model::Model;
use crate::quantities::{cost, CostBreakdown};
use crate::state::{solve_trajectory, StateTrajectory};

/// State trajectory and cost of one geometry.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub traj: StateTrajectory,
    pub cost: CostBreakdown,
}

pub fn evaluate(model: &Model) -> Result<Evaluation> {
    let traj = solve_trajectory(model)?;
    let cost = cost(model, &traj)?;
    Ok(Evaluation { traj, cost })
}

/// Adjoint sweep and masked gradient for an evaluated geometry.
pub fn gradient_of(model: &Model, eval: &Evaluation) -> Result<(AdjointTrajectory, ShapeGradient)> {
    let adj = solve_adjoint(model, &eval.traj)?;
    let g = shape_gradient(model, &eval.traj, &adj)?;
    Ok((adj, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub node: usize,
    pub coord: usize,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
    /// Finite-difference step actually used.
    pub step: f64,
    /// Bound on the relative error that round-off in `J` alone puts on `fd`.
    pub roundoff: f64,
    /// `roundoff` exceeds [`FD_RESOLUTION`]; the row does not count.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    /// Largest `rel_err` among conclusive rows.
    pub worst: f64,
    pub requested: usize,
    pub sampled: usize,
    pub cost: f64,
    /// Measured round-off level of `J`.
    pub noise: f64,
}

impl GradCheckReport {
    pub fn conclusive(&self) -> usize {
        self.rows.iter().filter(|r| !r.inconclusive).count()
    }
}

/// Finite-difference quotients whose round-off bound exceeds this relative
/// level are reported as inconclusive.
pub const FD_RESOLUTION: f64 = 1e-6;

/// Longest retry step, relative to the local edge length.
const FD_MAX_STEP: f64 = 0.05;

/// Fourth-order central differences of the reduced cost in both coordinates
/// of `samples` randomly chosen free nodes, each with step `eps` times the
/// node's shortest incident edge, lengthened up to 50 times while round-off
/// dominates.
///
/// The round-off level of `J` is measured by moving a few sampled nodes by
/// one ulp, which changes `J` by far less than its evaluation error.
pub fn fd_gradient_check(model: &Model, samples: usize, eps: f64, seed: u64) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::Input("finite-difference step must be positive".into()));
    }
    let base = evaluate(model)?;
    let (_, grad) = gradient_of(model, &base)?;
    let free = model.free_nodes();
    let m = samples.min(free.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, free.len(), m).into_iter().map(|i| free[i]).collect();
    picked.sort_unstable();

    let h = model.mesh().local_edge_lengths();
    let j0 = base.cost.j;
    let cost_at = |node: usize, coord: usize, x: f64| -> Result<f64> {
        let mut nodes = model.mesh().nodes().to_vec();
        nodes[node][coord] = x;
        Ok(evaluate(&model.with_mesh(model.mesh().with_nodes(nodes)))?.cost.j)
    };
    let mut noise = f64::EPSILON * j0.abs();
    for &node in picked.iter().take(4) {
        for coord in 0..2 {
            let x = model.mesh().nodes()[node][coord];
            let up = f64::from_bits(if x >= 0.0 { x.to_bits() + 1 } else { x.to_bits() - 1 });
            noise = noise.max((cost_at(node, coord, up)? - j0).abs());
        }
    }

    let mut rows = Vec::with_capacity(2 * m);
    let mut worst = 0.0f64;
    for &node in &picked {
        for coord in 0..2 {
            let x = model.mesh().nodes()[node][coord];
            // Directions lost in round-off are retried with longer steps.
            let (mut fd, mut step) = (0.0, 0.0);
            let mut roundoff = f64::INFINITY;
            for factor in [1.0, 10.0, 50.0] {
                step = (factor * eps).min(FD_MAX_STEP.max(eps)) * h[node];
                let jp = cost_at(node, coord, x + step)?;
                let jm = cost_at(node, coord, x - step)?;
                let jp2 = cost_at(node, coord, x + 2.0 * step)?;
                let jm2 = cost_at(node, coord, x - 2.0 * step)?;
                fd = (8.0 * (jp - jm) - (jp2 - jm2)) / (12.0 * step);
                // Each of the four values may be off by `noise`.
                roundoff = if fd == 0.0 { f64::INFINITY } else { 1.5 * noise / step / fd.abs() };
                if roundoff <= FD_RESOLUTION || factor * eps >= FD_MAX_STEP {
                    break;
                }
            }
            let analytic = grad.g[node][coord];
            let denom = analytic.abs().max(fd.abs());
            let rel_err = if denom == 0.0 { 0.0 } else { (analytic - fd).abs() / denom };
            let inconclusive = !(roundoff <= FD_RESOLUTION);
            if !inconclusive {
                worst = worst.max(rel_err);
            }
            debug!("node {node} coord {coord}: analytic {analytic:e} fd {fd:e} rel {rel_err:e} roundoff {roundoff:e}");
            rows.push(GradCheckRow { node, coord, analytic, fd, rel_err, step, roundoff, inconclusive });
        }
    }
    Ok(GradCheckReport { rows, worst, requested: samples, sampled: m, cost: j0, noise })
}

/// Relative finite-difference step of [`fd_gradient_check`].
pub const DEFAULT_FD_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeOptSettings {
    pub max_iters: usize,
    pub alpha_cr: f64,
    /// Zeroth-order term of the descent form, relative.
    pub eps0: f64,
    /// First trial moves the fastest node by this fraction of the smallest
    /// free-node edge length.
    pub t0_factor: f64,
    pub quality_floor: f64,
    pub max_halvings: usize,
}

impl Default for ShapeOptSettings {
    fn default() -> Self {
        ShapeOptSettings {
            max_iters: 20,
            alpha_cr: 1.0,
            eps0: 1e-6,
            t0_factor: 0.02,
            quality_floor: 0.05,
            max_halvings: 12,
        }
    }
}

impl ShapeOptSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0_factor > 0.0 && self.alpha_cr >= 0.0 && self.eps0 > 0.0 && self.quality_floor >= 0.0) {
            return Err(Error::Input("shape optimization parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    ZeroDirection,
    /// Every trial inverted or degraded the mesh below the floor.
    Quality,
    /// Some trials kept the mesh valid but none decreased the cost.
    Cost,
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rejection::ZeroDirection => "zero direction",
            Rejection::Quality => "quality",
            Rejection::Cost => "cost",
        })
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum LineSearchOutcome {
    Accepted { t: f64, t0: f64, mesh: Mesh, eval: Evaluation, min_quality: f64, trials: usize },
    Rejected(Rejection),
}

/// Initial step so that `t0 * max|theta|` is `t0_factor` times the smallest
/// edge length around a free node.
pub fn initial_step(model: &Model, theta: &[Point], t0_factor: f64) -> Option<f64> {
    let max_theta = theta.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    if max_theta == 0.0 {
        return None;
    }
    let h = model.mesh().local_edge_lengths();
    let h_min = model.free_nodes().into_iter().map(|i| h[i]).fold(f64::INFINITY, f64::min);
    Some(t0_factor * h_min / max_theta)
}

/// Backtracking with halving on `X + t theta`. A trial is accepted when the
/// moved mesh keeps every element above the quality floor and the cost
/// decreases.
pub fn line_search(
    model: &Model,
    theta: &[Point],
    j_current: f64,
    settings: &ShapeOptSettings,
    mut evaluate_at: impl FnMut(&Model) -> Result<Evaluation>,
) -> Result<LineSearchOutcome> {
    let Some(t0) = initial_step(model, theta, settings.t0_factor) else {
        return Ok(LineSearchOutcome::Rejected(Rejection::ZeroDirection));
    };
    let mut t = t0;
    let mut any_valid = false;
    for trial in 0..=settings.max_halvings {
        let moved = advect(model.mesh(), theta, t);
        let q = quality(&moved);
        if q.inverted_count == 0 && q.min_quality >= settings.quality_floor {
            any_valid = true;
            let candidate = model.with_mesh(moved.clone());
            match evaluate_at(&candidate) {
                Ok(eval) if eval.cost.j < j_current => {
                    return Ok(LineSearchOutcome::Accepted {
                        t,
                        t0,
                        mesh: moved,
                        eval,
                        min_quality: q.min_quality,
                        trials: trial + 1,
                    });
                }
                Ok(eval) => debug!("trial t = {t:e}: J = {:e} not below {j_current:e}", eval.cost.j),
                Err(e) if e.is_solver_failure() => debug!("trial t = {t:e}: {e}"),
                Err(e) => return Err(e),
            }
        } else {
            debug!("trial t = {t:e}: min quality {:.3}, {} inverted", q.min_quality, q.inverted_count);
        }
        t *= 0.5;
    }
    Ok(LineSearchOutcome::Rejected(if any_valid { Rejection::Cost } else { Rejection::Quality }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIters,
    StepFloor,
    QualityFloor,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::MaxIters => "max_iters",
            Termination::StepFloor => "step_floor",
            Termination::QualityFloor => "quality_floor",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub p: f64,
    pub t: f64,
    /// Step that produced this geometry, 0 for the initial one.
    pub step: f64,
    pub min_quality: f64,
    pub grad_norm: f64,
    /// `g . theta` and `b(theta, theta)` of the direction computed on this
    /// geometry, when one was computed.
    pub descent: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationHistory {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

/// Everything known about one accepted geometry, passed to observers.
pub struct IterationState<'a> {
    pub record: &'a IterationRecord,
    pub model: &'a Model,
    pub eval: &'a Evaluation,
    pub adjoint: &'a AdjointTrajectory,
    pub gradient: &'a ShapeGradient,
}

pub fn optimize(model: &Model, settings: &ShapeOptSettings) -> Result<(OptimizationHistory, Model)> {
    optimize_with(model, settings, |_| Ok(()))
}

/// The optimization loop. Returns the history and the model on the final
/// geometry; `observe` sees every accepted geometry once its gradient is
/// known.
pub fn optimize_with(
    model: &Model,
    settings: &ShapeOptSettings,
    mut observe: impl FnMut(&IterationState) -> Result<()>,
) -> Result<(OptimizationHistory, Model)> {
    settings.validate()?;
    let mut current = model.clone();
    let mut eval = evaluate(&current).map_err(|e| e.at_iteration(0))?;
    let (mut adj, mut grad) = gradient_of(&current, &eval).map_err(|e| e.at_iteration(0))?;
    let mut records = vec![IterationRecord {
        iter: 0,
        j: eval.cost.j,
        p: eval.cost.power,
        t: eval.cost.torque,
        step: 0.0,
        min_quality: quality(current.mesh()).min_quality,
        grad_norm: grad.norm(),
        descent: None,
    }];
    info!("iteration 0: J = {:e}, P = {:e}, T = {:e}", eval.cost.j, eval.cost.power, eval.cost.torque);

    let mut termination = Termination::MaxIters;
    for iter in 1..=settings.max_iters {
        let last = records.len() - 1;
        if records[last].min_quality < settings.quality_floor {
            termination = Termination::QualityFloor;
            break;
        }
        let dir = descent_field(&current, &grad, settings.alpha_cr, settings.eps0).map_err(|e| e.at_iteration(iter))?;
        records[last].descent = Some((dir.directional_derivative, dir.energy));
        observe(&IterationState {
            record: &records[last],
            model: &current,
            eval: &eval,
            adjoint: &adj,
            gradient: &grad,
        })?;

        let outcome =
            line_search(&current, &dir.theta, eval.cost.j, settings, evaluate).map_err(|e| e.at_iteration(iter))?;
        let (t, t0, mesh, new_eval, min_quality) = match outcome {
            LineSearchOutcome::Accepted { t, t0, mesh, eval, min_quality, .. } => (t, t0, mesh, eval, min_quality),
            LineSearchOutcome::Rejected(reason) => {
                info!("line search rejected at iteration {iter}: {reason}");
                termination =
                    if reason == Rejection::Quality { Termination::QualityFloor } else { Termination::StepFloor };
                break;
            }
        };
        current = current.with_mesh(mesh);
        eval = new_eval;
        (adj, grad) = gradient_of(&current, &eval).map_err(|e| e.at_iteration(iter))?;
        records.push(IterationRecord {
            iter,
            j: eval.cost.j,
            p: eval.cost.power,
            t: eval.cost.torque,
            step: t,
            min_quality,
            grad_norm: grad.norm(),
            descent: None,
        });
        info!(
            "iteration {iter}: J = {:e}, P = {:e}, step {t:e}, min quality {min_quality:.3}",
            eval.cost.j, eval.cost.power
        );
        if t < 1e-10 * t0 {
            termination = Termination::StepFloor;
            break;
        }
    }
    let last = records.len() - 1;
    if records[last].descent.is_none() {
        observe(&IterationState {
            record: &records[last],
            model: &current,
            eval: &eval,
            adjoint: &adj,
            gradient: &grad,
        })?;
    }
    Ok((OptimizationHistory { records, termination }, current))
}
