use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emshape::assembly::assemble_operator;
use emshape::shapeopt::{descent_field, evaluate, gradient_of};
use emshape::solve_trajectory;
use emshape_bench::template_model;

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_operator");
    for h in [0.004, 0.0025] {
        let model = template_model(h);
        let traj = solve_trajectory(&model).unwrap();
        let dofs = model.dofs(1);
        group.bench_with_input(BenchmarkId::from_parameter(model.mesh().node_count()), &traj.u[1], |b, u| {
            b.iter(|| assemble_operator(model.mesh(), &model.materials, &dofs, u).unwrap())
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let model = template_model(0.0025);
    let eval = evaluate(&model).unwrap();
    let (_, grad) = gradient_of(&model, &eval).unwrap();
    let mut group = c.benchmark_group("template");
    group.sample_size(10);
    group.bench_function("state_trajectory", |b| b.iter(|| solve_trajectory(&model).unwrap()));
    group.bench_function("adjoint_and_gradient", |b| b.iter(|| gradient_of(&model, &eval).unwrap()));
    group.bench_function("descent_field", |b| b.iter(|| descent_field(&model, &grad, 1.0, 1e-6).unwrap()));
    group.finish();
}

criterion_group!(benches, assembly, pipeline);
criterion_main!(benches);
