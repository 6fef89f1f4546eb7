use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use subspacekit::neuralnet::init_params;
use subspacekit::pipeline::dcfsc_gradients;
use subspacekit::{
    cluster_from_coefficients, solve_self_expression, ClusterConfig, LayerSpec, Matrix,
    NetworkSpec, SyntheticSpec,
};

fn subspace_data(k: usize, per: usize, ambient: usize, seed: u64) -> Matrix {
    let spec = SyntheticSpec {
        k,
        subspace_dim: 3,
        points_per_subspace: per,
        ambient_dim: ambient,
        noise_sigma: 0.01,
        orthogonal: true,
        seed,
    };
    spec.generate().unwrap().0
}

fn closed_form_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_self_expression");
    for &n in &[64usize, 128, 256] {
        let latent = subspace_data(4, n / 4, 16, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &latent, |b, m| {
            b.iter(|| solve_self_expression(black_box(m), 1.0).unwrap());
        });
    }
    group.finish();
}

fn spectral_tail(c: &mut Criterion) {
    let data = subspace_data(4, 40, 16, 2);
    let coeff = solve_self_expression(&data, 1.0).unwrap();
    let config = ClusterConfig {
        k: 4,
        ..ClusterConfig::default()
    };
    c.bench_function("cluster_from_coefficients n=160", |b| {
        b.iter(|| cluster_from_coefficients(black_box(&coeff), &config).unwrap());
    });
}

fn training_step(c: &mut Criterion) {
    let data = subspace_data(4, 40, 30, 3);
    let spec = NetworkSpec {
        input: (1, 1, 30),
        layers: vec![
            LayerSpec::Dense {
                in_dim: 30,
                out_dim: 12,
                bias: true,
            },
            LayerSpec::Dense {
                in_dim: 12,
                out_dim: 30,
                bias: true,
            },
        ],
        encoder_len: 1,
    };
    let params = init_params(&spec, 0).unwrap();
    c.bench_function("dcfsc_gradients n=160", |b| {
        b.iter(|| {
            let mut scratch = params.clone();
            dcfsc_gradients(&spec, &mut scratch, black_box(&data), 1.0).unwrap()
        });
    });
}

criterion_group!(benches, closed_form_solve, spectral_tail, training_step);
criterion_main!(benches);
