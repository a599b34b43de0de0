use std::f64::consts::PI;
use std::sync::OnceLock;

use emshape::assembly::{assemble_mass_sigma, assemble_operator, element, DofMap, Quadrature};
use emshape::materials::{BRAUER_STEEL, NU0};
use emshape::mesh::{
    build_constraints, generate_template, parse_emsh, quality, triangle_quality, write_emsh, Phase, TemplateParams,
};
use emshape::quantities::{eddy_density, power_step};
use emshape::{CostSettings, DriveSpec, MaterialSpec, MaterialTable, Model, ReluctivityModel, SolverSettings};
use proptest::prelude::*;

fn template() -> &'static Model {
    static MODEL: OnceLock<Model> = OnceLock::new();
    MODEL.get_or_init(|| {
        let params = TemplateParams { h: 0.005, ..Default::default() };
        let mesh = generate_template(&params).unwrap();
        let spec = MaterialSpec { iron: BRAUER_STEEL, ..Default::default() };
        let materials = MaterialTable::from_spec(&mesh, &spec).unwrap();
        let drive = DriveSpec { steps: params.steps_per_period, ..Default::default() };
        Model::new(mesh, materials, drive, SolverSettings::default(), CostSettings::default()).unwrap()
    })
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    [-1.0..1.0f64, -1.0..1.0f64]
}

fn nodal(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-scale..scale, n)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quality_is_bounded_and_detects_inversion(a in point(), b in point(), c in point()) {
        let q = triangle_quality(a, b, c);
        prop_assert!(q <= 1.0 + 1e-12);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        prop_assert_eq!(q > 0.0, area > 0.0);
        prop_assert!((triangle_quality(a, c, b) + q).abs() <= 1e-12);
    }

    #[test]
    fn quality_ignores_rotation_and_scale(
        a in point(), b in point(), c in point(),
        angle in 0.0..2.0 * PI, scale in 0.01..100.0f64, shift in point(),
    ) {
        let (s, co) = angle.sin_cos();
        let map = |p: [f64; 2]| [scale * (co * p[0] - s * p[1]) + shift[0], scale * (s * p[0] + co * p[1]) + shift[1]];
        let q = triangle_quality(a, b, c);
        prop_assume!(q.abs() > 1e-6);
        prop_assert!((triangle_quality(map(a), map(b), map(c)) - q).abs() <= 1e-12);
    }

    #[test]
    fn brauer_curve_is_positive_and_monotone(b2 in 0.0..30.0f64) {
        let r = BRAUER_STEEL.eval(b2);
        prop_assert!(r.nu > 0.0 && r.dnu_db2 >= 0.0);
        let h = 1e-6 * (1.0 + b2);
        let fd = (BRAUER_STEEL.eval(b2 + h).nu - BRAUER_STEEL.eval((b2 - h).max(0.0)).nu) / (b2 + h - (b2 - h).max(0.0));
        if !r.saturated && !BRAUER_STEEL.eval(b2 + h).saturated {
            prop_assert!((fd - r.dnu_db2).abs() <= 1e-6 * r.dnu_db2.max(1.0));
        }
        prop_assert!(BRAUER_STEEL.eval(b2 + 0.1).nu >= r.nu);
        let lin = ReluctivityModel::Linear(NU0).eval(b2);
        prop_assert_eq!((lin.nu, lin.dnu_db2), (NU0, 0.0));
    }

    #[test]
    fn three_phase_currents_cancel(angle in -10.0..10.0f64) {
        let s: f64 = [Phase::A, Phase::B, Phase::C].iter().map(|p| (angle + p.offset()).sin()).sum();
        prop_assert!(s.abs() <= 1e-12);
    }

    #[test]
    fn quadrature_weights_sum_to_area(a in point(), b in point(), c in point()) {
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        for rule in [Quadrature::Centroid, Quadrature::EdgeMidpoints] {
            let total: f64 = rule.points([a, b, c], area).iter().map(|q| q.weight).sum();
            prop_assert!((total - area).abs() <= 1e-14 * area.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constraint_reduction_is_consistent(shift in 0usize..64, y_seed in nodal(2000, 1.0), x in nodal(2000, 1.0)) {
        let model = template();
        let mesh = model.mesh();
        let n = mesh.node_count();
        let cm = build_constraints(mesh, shift);
        let dofs = DofMap::new(n, &cm);
        let y = &y_seed[..dofs.free_count()];
        let u = dofs.expand(y);
        prop_assert_eq!(&dofs.restrict(&u), y);
        for p in &cm.pairs {
            prop_assert_eq!(u[p.slave], f64::from(p.sign) * u[p.master]);
        }
        for &d in &cm.dirichlet {
            prop_assert_eq!(u[d], 0.0);
        }
        // fold is the transpose of expand.
        let x = &x[..n];
        let lhs = dot(&dofs.fold(x), y);
        let rhs = dot(x, &u);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn assembled_matrices_are_symmetric(shift in 0usize..16, u_seed in nodal(2000, 0.05)) {
        let model = template();
        let mesh = model.mesh();
        let dofs = DofMap::new(mesh.node_count(), &build_constraints(mesh, shift));
        let u = dofs.expand(&dofs.restrict(&u_seed[..mesh.node_count()]));
        let (_, k) = assemble_operator(mesh, &model.materials, &dofs, &u).unwrap();
        prop_assert_eq!(k.dim(), dofs.free_count());
        prop_assert!(k.max_asymmetry() <= 1e-12 * k.max_abs());
        let m = assemble_mass_sigma(mesh, &model.materials, &dofs, model.tau()).unwrap();
        prop_assert!(m.max_asymmetry() <= 1e-12 * m.max_abs());
    }

    #[test]
    fn eddy_currents_are_zero_mean_and_power_is_nonnegative(
        prev in nodal(2000, 1e-2), next in nodal(2000, 1e-2),
    ) {
        let model = template();
        let n = model.mesh().node_count();
        let field = eddy_density(model, &next[..n], &prev[..n]).unwrap();
        for group in model.mean_groups() {
            let (mut net, mut total) = (0.0, 0.0);
            for &t in group {
                let a = element(model.mesh(), t).unwrap().area;
                net += a * field.j_tilde[t];
                total += a * field.j[t].abs();
            }
            prop_assert!(net.abs() <= 1e-10 * total);
        }
        prop_assert!(power_step(model, &field).unwrap() >= 0.0);
    }

    #[test]
    fn emsh_round_trip_is_exact(dx in proptest::collection::vec(-1e-4..1e-4f64, 8)) {
        let model = template();
        let mut nodes = model.mesh().nodes().to_vec();
        for (i, d) in dx.iter().enumerate() {
            nodes[model.free_nodes()[i * 7]][i % 2] += d;
        }
        let mesh = model.mesh().with_nodes(nodes);
        let back = parse_emsh(&write_emsh(&mesh)).unwrap();
        prop_assert_eq!(back.nodes(), mesh.nodes());
        prop_assert_eq!(back.triangles(), mesh.triangles());
        prop_assert_eq!(back.symmetry(), mesh.symmetry());
        prop_assert_eq!(back.periodic_pairs(), mesh.periodic_pairs());
        prop_assert_eq!(quality(&back), quality(&mesh));
    }
}
