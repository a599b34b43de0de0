//! Command-line front end: configuration, commands and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use emshape::mesh::{load_mesh, quality, write_emsh};
use emshape::quantities::eddy_density;
use emshape::shapeopt::{evaluate, fd_gradient_check, optimize_with};
use emshape::{Error, Model, StateTrajectory};
use log::warn;

use config::RunConfig;
use output::RunDir;

#[derive(Debug, Parser)]
#[command(name = "emshape", version, about = "Eddy-current loss shape optimization for PM machine rotors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the time-stepped field problem and report losses and torque.
    Solve { config: PathBuf },
    /// Compare the adjoint shape gradient with finite differences.
    AdjointCheck {
        config: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// Largest accepted relative error.
        #[arg(long)]
        gate: Option<f64>,
    },
    /// Run the shape optimization loop.
    Optimize { config: PathBuf },
    /// Print statistics of an `emsh` mesh file.
    MeshInfo { mesh: PathBuf },
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Solver(String),
    /// The gradient check ran but exceeded its gate.
    Gate(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Gate(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Gate(m) => write!(f, "gate failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.to_string())
        } else if let Error::Io(io) = e {
            Failure::Io(io.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

#[derive(Debug)]
pub struct Outcome {
    /// Run directory, when the command writes one.
    pub dir: Option<PathBuf>,
    pub summary: String,
}

/// Runs a command. `out_override` replaces the configured output directory
/// (the binary passes `EMSHAPE_OUT`).
pub fn run(cli: &Cli, out_override: Option<&Path>) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Solve { config } => {
            let run = Loaded::new(config, out_override)?;
            cmd_solve(&run)
        }
        Command::AdjointCheck { config, samples, eps, gate } => {
            let mut run = Loaded::new(config, out_override)?;
            let g = &mut run.config.gradcheck;
            g.samples = samples.unwrap_or(g.samples);
            g.eps = eps.unwrap_or(g.eps);
            g.gate = gate.unwrap_or(g.gate);
            if !(g.eps > 0.0) {
                return Err(Failure::Input("finite-difference step must be positive".into()));
            }
            cmd_adjoint_check(&run)
        }
        Command::Optimize { config } => {
            let run = Loaded::new(config, out_override)?;
            cmd_optimize(&run)
        }
        Command::MeshInfo { mesh } => {
            if !mesh.is_file() {
                return Err(Failure::Input(format!("mesh file {} not found", mesh.display())));
            }
            Ok(Outcome { dir: None, summary: mesh_info(&load_mesh(mesh)?) })
        }
    }
}

/// A parsed config with its source text and resolved directories.
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Loaded {
    pub fn new(path: &Path, out_override: Option<&Path>) -> Result<Loaded, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config = RunConfig::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = out_override.map(Path::to_path_buf).unwrap_or_else(|| config.output.dir.clone());
        Ok(Loaded { config, text, base, out })
    }

    fn model(&self) -> Result<Model, Failure> {
        Ok(self.config.model(&self.base)?)
    }
}

fn field_vtk(model: &Model, traj: &StateTrajectory, j: usize, v: Option<&[f64]>) -> Result<String, Failure> {
    let j_tilde = if j == 0 {
        vec![0.0; model.mesh().triangles().len()]
    } else {
        eddy_density(model, &traj.u[j], &traj.u[j - 1])?.j_tilde
    };
    let mut points: Vec<(&str, &[f64])> = vec![("u", &traj.u[j])];
    if let Some(v) = v {
        points.push(("v", v));
    }
    Ok(output::vtk(&format!("emshape step {j}"), model.mesh(), &points, &[("j_tilde", &j_tilde)]))
}

pub fn cmd_solve(run: &Loaded) -> Result<Outcome, Failure> {
    let model = run.model()?;
    let eval = evaluate(&model)?;
    let mut dir = RunDir::create(&run.out)?;
    dir.write("steps.csv", &output::steps_csv(&eval.cost))?;
    if run.config.output.vtk {
        for j in 0..=model.steps() {
            dir.write(&format!("field_{j:04}.vtk"), &field_vtk(&model, &eval.traj, j, None)?)?;
        }
    }
    let c = &eval.cost;
    let summary = format!("P = {:e} W, T = {:e} N m, J = {:e}", c.power, c.torque, c.j);
    let path = dir.path().to_path_buf();
    dir.finish("solve", &run.text)?;
    Ok(Outcome { dir: Some(path), summary })
}

pub fn cmd_adjoint_check(run: &Loaded) -> Result<Outcome, Failure> {
    let g = &run.config.gradcheck;
    let model = run.model()?;
    let free = model.free_nodes().len();
    if g.samples > free {
        warn!("{} samples requested but only {free} free nodes; using {free}", g.samples);
    }
    let report = fd_gradient_check(&model, g.samples, g.eps, g.seed)?;
    let mut dir = RunDir::create(&run.out)?;
    dir.write("gradcheck.csv", &output::gradcheck_csv(&report))?;
    let path = dir.path().to_path_buf();
    dir.finish("adjoint-check", &run.text)?;
    let summary = format!(
        "worst relative error {:e} over {} of {} directions ({} nodes sampled, {} requested), gate {:e}",
        report.worst,
        report.conclusive(),
        report.rows.len(),
        report.sampled,
        report.requested,
        g.gate
    );
    if report.conclusive() == 0 || !(report.worst < g.gate) {
        return Err(Failure::Gate(summary));
    }
    Ok(Outcome { dir: Some(path), summary })
}

pub fn cmd_optimize(run: &Loaded) -> Result<Outcome, Failure> {
    let model = run.model()?;
    let settings = run.config.shapeopt();
    settings.validate()?;
    let mut dir = RunDir::create(&run.out)?;
    dir.write("initial_mesh.emsh", &write_emsh(model.mesh()))?;
    let vtk = run.config.output.vtk;
    let (history, last) = optimize_with(&model, &settings, |state| {
        if vtk {
            let n = state.model.steps();
            let text = field_vtk(state.model, &state.eval.traj, n, Some(&state.adjoint.v[n]))
                .map_err(|e| Error::Input(e.to_string()))?;
            dir.write(&format!("iter_{:04}.vtk", state.record.iter), &text)?;
        }
        Ok(())
    })?;
    dir.write("history.csv", &output::history_csv(&history))?;
    dir.write("final_mesh.emsh", &write_emsh(last.mesh()))?;
    let (first, end) = (&history.records[0], history.records.last().expect("initial record"));
    let summary = format!(
        "terminated: {} after {} iterations; J {:e} -> {:e}, P {:e} -> {:e} W, T {:e} -> {:e} N m",
        history.termination,
        history.records.len() - 1,
        first.j,
        end.j,
        first.p,
        end.p,
        first.t,
        end.t
    );
    let path = dir.path().to_path_buf();
    dir.finish("optimize", &run.text)?;
    Ok(Outcome { dir: Some(path), summary })
}

pub fn mesh_info(mesh: &emshape::Mesh) -> String {
    let q = quality(mesh);
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", mesh.node_count());
    let _ = writeln!(out, "triangles {}", mesh.triangles().len());
    let _ = writeln!(out, "boundary edges {}", mesh.edges().len());
    let _ = writeln!(out, "symmetry {:?}", mesh.symmetry());
    let _ = writeln!(out, "interface vertices {}", mesh.interface_vertex_count());
    let _ = writeln!(out, "periodic pairs {}", mesh.periodic_pairs().len());
    let _ =
        writeln!(out, "min quality {:.4} (element {}), inverted {}", q.min_quality, q.min_element, q.inverted_count);
    for (id, role) in mesh.regions() {
        let count = mesh.triangles().iter().filter(|t| t.region == *id).count();
        let _ = writeln!(out, "region {id} {role:?}: {count} triangles, area {:e}", mesh.region_area(*id));
    }
    for (tag, role) in mesh.boundaries() {
        let _ = writeln!(out, "boundary {tag} {role:?}");
    }
    out.pop();
    out
}
