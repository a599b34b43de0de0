use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use emshape_cli::config::RunConfig;

fn emshape(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emshape")).args(args).env("EMSHAPE_OUT", out).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const DISK: &str = r#"
[mesh]
source = "disk"

[disk]
rings = 6

[materials]
magnetization = "fixed"

[drive]
pole_pairs = 1
steps = 3
peak_current = 100.0
"#;

#[test]
fn unknown_keys_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[drive]\nstepz = 4\n");
    let out = dir.path().join("out");
    let o = emshape(&["solve", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stepz"));
    assert!(!out.exists());
    assert!(RunConfig::parse("[nonsense]\n").is_err());
    assert!(RunConfig::parse("[solver]\nnewton_tol = 0.0\n").is_err());
    assert!(RunConfig::parse("[cost]\nlambda1 = -1.0\n").is_err());
}

#[test]
fn missing_mesh_file_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[mesh]\nsource = \"file\"\npath = \"absent.emsh\"\n");
    let out = dir.path().join("out");
    let o = emshape(&["solve", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = emshape(&["mesh-info", dir.path().join("absent.emsh").to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISK.replace("steps = 3", "steps = 15") + "\n[output]\nvtk = true\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = emshape(&["solve", &cfg], &out);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("P = "));
    let csv = fs::read_to_string(out.join("steps.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "j,P_j,T_j");
    assert_eq!(lines.len(), 16);
    assert!(lines[1..].iter().any(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() > 0.0));

    // Well-formed legacy VTK with one point per node and one cell per triangle.
    let mesh = RunConfig::parse(&text).unwrap().mesh(Path::new("")).unwrap();
    let vtk = fs::read_to_string(out.join("field_0003.vtk")).unwrap();
    let header: Vec<&str> = vtk.lines().take(5).collect();
    assert_eq!(header[0], "# vtk DataFile Version 3.0");
    assert_eq!(header[2], "ASCII");
    assert_eq!(header[3], "DATASET UNSTRUCTURED_GRID");
    assert_eq!(header[4], format!("POINTS {} double", mesh.node_count()));
    let nt = mesh.triangles().len();
    assert!(vtk.contains(&format!("CELLS {nt} {}", 4 * nt)));
    assert!(vtk.contains(&format!("CELL_DATA {nt}")));
    assert!(vtk.contains(&format!("POINT_DATA {}", mesh.node_count())));
    assert!(vtk.contains("SCALARS u double 1"));
    assert!(vtk.contains("SCALARS j_tilde double 1"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("command solve\nconfig_sha256 "));
    assert!(manifest.contains("file steps.csv "));
}

#[test]
fn sourceless_solve_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISK
        .replace("peak_current = 100.0", "peak_current = 0.0")
        .replace("magnetization = \"fixed\"", "magnetization = \"fixed\"\nremanence = 0.0");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = emshape(&["solve", &cfg], &out);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("steps.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(f, [0.0, 0.0]);
    }
}

#[test]
fn gradient_gate_controls_the_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &(DISK.to_string() + "\n[solver]\nnewton_tol = 1e-13\n"));
    let out = dir.path().join("out");
    let o = emshape(&["adjoint-check", &cfg, "--samples", "3", "--gate", "1e-5"], &out);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    assert!(csv.starts_with("node,coord,analytic,fd,rel_err"));
    assert_eq!(csv.lines().count(), 7);

    let o = emshape(&["adjoint-check", &cfg, "--samples", "3", "--gate", "0"], &out);
    assert_eq!(o.status.code(), Some(4));

    let o = emshape(&["adjoint-check", &cfg, "--eps", "0"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_sample_request_is_clamped() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISK.replace("rings = 6", "rings = 3") + "\n[solver]\nnewton_tol = 1e-13\n";
    let cfg = write_config(dir.path(), &text);
    let free = RunConfig::parse(&text).unwrap().model(Path::new("")).unwrap().free_nodes().len();
    let out = dir.path().join("out");
    let o = emshape(&["adjoint-check", &cfg, "--samples", "100000"], &out);
    assert!(o.status.success(), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples requested"));
    let rows = fs::read_to_string(out.join("gradcheck.csv")).unwrap().lines().count() - 1;
    assert_eq!(rows, 2 * free);
}

#[test]
fn optimize_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &(DISK.to_string() + "\n[shapeopt]\nmax_iters = 0\n"));
    let out = dir.path().join("zero");
    let o = emshape(&["optimize", &cfg], &out);
    assert!(o.status.success(), "{o:?}");
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("iter,J,P,T,step,min_quality,grad_norm"));
    assert_eq!(history.lines().count(), 2);
    assert!(stdout(&o).contains("terminated: max_iters"));

    let cfg = write_config(dir.path(), &(DISK.to_string() + "\n[shapeopt]\nquality_floor = 1.0\n"));
    let o = emshape(&["optimize", &cfg], &dir.path().join("floor"));
    assert!(o.status.success());
    assert!(stdout(&o).contains("terminated: quality_floor"));
}

#[test]
fn optimized_mesh_reloads_and_decreases_cost() {
    let dir = tempfile::tempdir().unwrap();
    let text = DISK.to_string() + "\n[shapeopt]\nmax_iters = 3\n\n[output]\nvtk = true\n";
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = emshape(&["optimize", &cfg], &out);
    assert!(o.status.success(), "{o:?}");
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let j: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(j.windows(2).all(|w| w[1] < w[0]));
    assert!(out.join("iter_0000.vtk").is_file());
    assert!(fs::read_to_string(out.join("iter_0000.vtk")).unwrap().contains("SCALARS v double 1"));

    // The final mesh can seed a new run.
    let final_mesh = out.join("final_mesh.emsh");
    let o = emshape(&["mesh-info", final_mesh.to_str().unwrap()], &out);
    assert!(o.status.success());
    assert!(stdout(&o).contains("inverted 0"));
    let rerun = text.replace("source = \"disk\"", "source = \"file\"\npath = \"out/final_mesh.emsh\"");
    let cfg = write_config(dir.path(), &rerun);
    let o = emshape(&["solve", &cfg], &dir.path().join("rerun"));
    assert!(o.status.success(), "{o:?}");
}
