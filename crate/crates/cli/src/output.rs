//! File emission. Numbers are written with 17 significant digits so that
//! reruns can be diffed byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use emshape::shapeopt::{GradCheckReport, OptimizationHistory};
use emshape::{CostBreakdown, Mesh};
use sha2::{Digest, Sha256};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn steps_csv(cost: &CostBreakdown) -> String {
    let mut out = String::from("j,P_j,T_j\n");
    for (j, (p, t)) in cost.power_steps.iter().zip(&cost.torque_steps).enumerate() {
        let _ = writeln!(out, "{},{},{}", j + 1, num(*p), num(*t));
    }
    out
}

pub fn gradcheck_csv(report: &GradCheckReport) -> String {
    let mut out = String::from("node,coord,analytic,fd,rel_err,step,roundoff,inconclusive\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.node,
            r.coord,
            num(r.analytic),
            num(r.fd),
            num(r.rel_err),
            num(r.step),
            num(r.roundoff),
            u8::from(r.inconclusive)
        );
    }
    out
}

pub fn history_csv(history: &OptimizationHistory) -> String {
    let mut out = String::from("iter,J,P,T,step,min_quality,grad_norm\n");
    for r in &history.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            num(r.j),
            num(r.p),
            num(r.t),
            num(r.step),
            num(r.min_quality),
            num(r.grad_norm)
        );
    }
    out
}

/// Legacy ASCII unstructured grid with nodal and per-triangle scalars.
pub fn vtk(title: &str, mesh: &Mesh, point_data: &[(&str, &[f64])], cell_data: &[(&str, &[f64])]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.node_count());
    for [x, y] in mesh.nodes() {
        let _ = writeln!(out, "{} {} 0", num(*x), num(*y));
    }
    let nt = mesh.triangles().len();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let [a, b, c] = t.nodes;
        let _ = writeln!(out, "3 {a} {b} {c}");
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default");
    for t in mesh.triangles() {
        let _ = writeln!(out, "{}", t.region);
    }
    for (name, values) in cell_data {
        scalars(&mut out, name, values);
    }
    if !point_data.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.node_count());
        for (name, values) in point_data {
            scalars(&mut out, name, values);
        }
    }
    out
}

fn scalars(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(out, "{}", num(*v));
    }
}

/// Collects files for a run directory and writes them with a manifest.
pub struct RunDir {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl RunDir {
    pub fn create(dir: &Path) -> io::Result<RunDir> {
        fs::create_dir_all(dir)?;
        Ok(RunDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push((name.to_string(), hex::encode(Sha256::digest(contents.as_bytes()))));
        Ok(())
    }

    /// `manifest.txt`: command, config hash, versions and one sha256 line
    /// per written file.
    pub fn finish(self, command: &str, config_text: &str) -> io::Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "command {command}");
        let _ = writeln!(out, "config_sha256 {}", hex::encode(Sha256::digest(config_text.as_bytes())));
        let _ = writeln!(out, "emshape-cli {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "emshape-core {}", emshape::VERSION);
        for (name, hash) in &self.written {
            let _ = writeln!(out, "file {name} {hash}");
        }
        fs::write(self.dir.join("manifest.txt"), out)
    }
}
