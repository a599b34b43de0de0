mod common;

use common::{brauer_iron, disk_model, linear_iron, template_model};
use emshape::mesh::{advect, quality, TemplateParams};
use emshape::shapeopt::{
    descent_field, evaluate, gradient_of, initial_step, lagrangian_coordinate_derivative, line_search, optimize,
    optimize_with, LineSearchOutcome, Rejection, Termination,
};
use emshape::{Model, ShapeGradient, ShapeOptSettings};

fn check_descent_identity(model: &Model, settings: &ShapeOptSettings) -> usize {
    let mut seen = 0;
    let (history, _) = optimize_with(model, settings, |state| {
        // The final geometry is observed without a direction.
        let Some((gt, b)) = state.record.descent else { return Ok(()) };
        if state.gradient.norm() > 0.0 {
            assert!(b > 0.0);
        }
        assert!(gt <= 0.0);
        assert!((gt + b).abs() <= 1e-10 * b.abs(), "g.theta {gt:e} vs b {b:e}");
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert!(history.records.windows(2).all(|w| w[1].j < w[0].j));
    seen
}

#[test]
fn descent_identity_holds_on_every_iteration() {
    let settings = ShapeOptSettings { max_iters: 3, ..Default::default() };
    assert!(check_descent_identity(&disk_model(linear_iron(), 1.0, 0.0, 4), &settings) >= 3);
    assert!(check_descent_identity(&disk_model(brauer_iron(), 1.0, 0.0, 4), &settings) >= 3);
    let params = TemplateParams { h: 0.004, ..Default::default() };
    let cr_free = ShapeOptSettings { alpha_cr: 0.0, ..settings };
    assert!(check_descent_identity(&template_model(&params, linear_iron(), 1e2, 1e-3), &cr_free) >= 3);
}

#[test]
fn zero_gradient_gives_zero_direction() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let zero = ShapeGradient { g: vec![[0.0; 2]; model.mesh().node_count()], free_mask: model.free_mask().to_vec() };
    let dir = descent_field(&model, &zero, 1.0, 1e-6).unwrap();
    assert!(dir.theta.iter().flatten().all(|&x| x == 0.0));
    assert_eq!((dir.directional_derivative, dir.energy), (0.0, 0.0));
    let settings = ShapeOptSettings::default();
    let out = line_search(&model, &dir.theta, 1.0, &settings, evaluate).unwrap();
    assert!(matches!(out, LineSearchOutcome::Rejected(Rejection::ZeroDirection)));
}

#[test]
fn direction_vanishes_on_masked_nodes() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    let dir = descent_field(&model, &grad, 1.0, 1e-6).unwrap();
    for (i, &free) in model.free_mask().iter().enumerate() {
        if !free {
            assert_eq!(grad.g[i], [0.0, 0.0]);
            assert_eq!(dir.theta[i], [0.0, 0.0]);
        }
    }
}

/// Moving every node by the same vector changes neither the eddy losses nor
/// the field equations on the disk.
#[test]
fn rigid_translation_leaves_power_unchanged() {
    let model = disk_model(brauer_iron(), 1.0, 0.0, 3);
    let eval = evaluate(&model).unwrap();
    let (adj, _) = gradient_of(&model, &eval).unwrap();
    let g = lagrangian_coordinate_derivative(&model, &eval.traj, &adj).unwrap();
    let scale: f64 = g.iter().map(|v| v[0].abs() + v[1].abs()).sum();
    for k in 0..2 {
        let total: f64 = g.iter().map(|v| v[k]).sum();
        assert!(total.abs() <= 1e-9 * scale, "{total:e} of {scale:e}");
    }
}

#[test]
fn disk_line_search_accepts_early() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 4);
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    let dir = descent_field(&model, &grad, 1.0, 1e-6).unwrap();
    let out = line_search(&model, &dir.theta, eval.cost.j, &ShapeOptSettings::default(), evaluate).unwrap();
    let LineSearchOutcome::Accepted { trials, eval: new, t, t0, .. } = out else { panic!("rejected") };
    assert!(trials <= 2);
    assert!(t <= t0);
    assert!(new.cost.j < eval.cost.j);
}

#[test]
fn oversized_step_is_halved_until_the_mesh_is_valid() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 4);
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    let dir = descent_field(&model, &grad, 1.0, 1e-6).unwrap();
    let settings = ShapeOptSettings { t0_factor: 20.0, max_halvings: 20, ..Default::default() };
    let t0 = initial_step(&model, &dir.theta, settings.t0_factor).unwrap();
    assert!(quality(&advect(model.mesh(), &dir.theta, t0)).inverted_count > 0);
    let out = line_search(&model, &dir.theta, eval.cost.j, &settings, evaluate).unwrap();
    let LineSearchOutcome::Accepted { trials, mesh, min_quality, .. } = out else { panic!("rejected") };
    assert!(trials > 1);
    assert_eq!(quality(&mesh).inverted_count, 0);
    assert!(min_quality >= settings.quality_floor);

    let few = ShapeOptSettings { max_halvings: 0, ..settings };
    let out = line_search(&model, &dir.theta, eval.cost.j, &few, evaluate).unwrap();
    assert!(matches!(out, LineSearchOutcome::Rejected(Rejection::Quality)));
}

#[test]
fn ascent_direction_is_rejected_for_cost() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    let dir = descent_field(&model, &grad, 1.0, 1e-6).unwrap();
    let up: Vec<[f64; 2]> = dir.theta.iter().map(|v| [-v[0], -v[1]]).collect();
    let settings = ShapeOptSettings { max_halvings: 4, ..Default::default() };
    let out = line_search(&model, &up, eval.cost.j, &settings, evaluate).unwrap();
    assert!(matches!(out, LineSearchOutcome::Rejected(Rejection::Cost)));
}

#[test]
fn zero_iterations_keep_only_the_initial_evaluation() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let (history, last) = optimize(&model, &ShapeOptSettings { max_iters: 0, ..Default::default() }).unwrap();
    assert_eq!(history.records.len(), 1);
    assert_eq!(history.termination, Termination::MaxIters);
    assert_eq!(last.mesh().nodes(), model.mesh().nodes());
}

#[test]
fn unattainable_quality_floor_stops_immediately() {
    let model = disk_model(linear_iron(), 1.0, 0.0, 2);
    let (history, _) = optimize(&model, &ShapeOptSettings { quality_floor: 1.0, ..Default::default() }).unwrap();
    assert_eq!(history.records.len(), 1);
    assert_eq!(history.termination, Termination::QualityFloor);
}

#[test]
fn optimization_moves_only_free_nodes() {
    let params = TemplateParams { h: 0.004, ..Default::default() };
    let mut model = template_model(&params, brauer_iron(), 1.0, 0.0);
    model.drive.peak_current = 50.0;
    let settings = ShapeOptSettings { max_iters: 5, ..Default::default() };
    let (history, last) = optimize(&model, &settings).unwrap();
    assert_eq!(history.records.len(), 6);
    assert!(history.records.windows(2).all(|w| w[1].j < w[0].j));
    let mut moved = 0;
    for (i, (a, b)) in model.mesh().nodes().iter().zip(last.mesh().nodes()).enumerate() {
        if model.free_mask()[i] {
            moved += usize::from(a != b);
        } else {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }
    assert!(moved > 0);
    assert_eq!(quality(last.mesh()).inverted_count, 0);
}

#[test]
fn both_cauchy_riemann_weights_descend_on_the_template() {
    let params = TemplateParams { h: 0.004, ..Default::default() };
    let mut model = template_model(&params, brauer_iron(), 1.0, 0.0);
    model.drive.peak_current = 50.0;
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    for alpha_cr in [0.0, 1.0] {
        let dir = descent_field(&model, &grad, alpha_cr, 1e-6).unwrap();
        assert!(dir.directional_derivative < 0.0);
        let settings = ShapeOptSettings { max_iters: 4, alpha_cr, ..Default::default() };
        let (history, last) = optimize(&model, &settings).unwrap();
        let end = history.records.last().unwrap();
        println!(
            "alpha_cr {alpha_cr}: P {:e} -> {:e}, min quality {:.4}",
            history.records[0].p, end.p, end.min_quality
        );
        assert_eq!(history.records.len(), 5);
        assert!(end.p < history.records[0].p);
        assert_eq!(quality(last.mesh()).inverted_count, 0);
    }
}
