use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oblique_stab::fem::{assemble_fem, feedback_matrices, run_closed_loop, ClosedLoopConfig, ConstantReaction, FemGrid};
use oblique_stab::linalg::sym_eigen;
use oblique_stab::projection::{assemble_cross_gram, build_projection};
use oblique_stab::{ActuatorSet, BoundaryCondition, EigenBasis, Placement};

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("projection");
    for m in [10, 50, 200] {
        let set = ActuatorSet::new(Placement::Mxe, PI, m, 0.3).unwrap();
        group.bench_with_input(BenchmarkId::new("cross_gram", m), &set, |b, set| {
            b.iter(|| assemble_cross_gram(BoundaryCondition::Neumann, black_box(set)).unwrap())
        });
        let gram = assemble_cross_gram(BoundaryCondition::Neumann, &set).unwrap();
        group.bench_with_input(BenchmarkId::new("build", m), &gram, |b, gram| {
            b.iter(|| build_projection(black_box(gram.clone())).unwrap())
        });
        let theta = build_projection(gram).unwrap().theta().clone();
        group.bench_with_input(BenchmarkId::new("jacobi", m), &theta, |b, theta| {
            b.iter(|| sym_eigen(black_box(theta)).unwrap())
        });
    }
    group.finish();
}

fn fem(c: &mut Criterion) {
    let mut group = c.benchmark_group("fem");
    group.sample_size(10);
    let grid = FemGrid::new(PI, 1001).unwrap();
    let fem = assemble_fem(&grid).unwrap();
    let set = ActuatorSet::new(Placement::Mxe, PI, 8, 0.5).unwrap();
    let basis = EigenBasis::new(BoundaryCondition::Dirichlet, PI, 8).unwrap();
    group.bench_function("feedback_matrices_n1001_m8", |b| {
        b.iter(|| feedback_matrices(BoundaryCondition::Dirichlet, &set, &basis, black_box(&fem)).unwrap())
    });
    for bc in BoundaryCondition::ALL {
        let cfg = ClosedLoopConfig::new(bc, 0.2);
        group.bench_function(BenchmarkId::new("closed_loop_200_steps", bc), |b| {
            b.iter(|| run_closed_loop(&cfg, &ConstantReaction(-3.5), Some(&set), &|x| 0.1 * x).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, projection, fem);
criterion_main!(benches);
