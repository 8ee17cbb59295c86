use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use polymer_core::environment::{EnvStream, Environment, GridSpec};
use polymer_core::partition::{
    ptp_forward, sample_boundary, stationary_forward, stationary_probes,
};
use polymer_core::paths::PathSampler;
use polymer_core::special::{gamma_sample, psi1, psi1_inv};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn bench_forward_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for &n in &[16usize, 64] {
        let t = n as f64 * psi1(1.0).unwrap();
        let grid = GridSpec::new(t, 0.02).unwrap();
        let env = Environment::generate(n, grid, 7, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let boundary = sample_boundary(1.0, n, &mut rng).unwrap();
        group.throughput(Throughput::Elements((n * grid.nodes()) as u64));
        group.bench_with_input(BenchmarkId::new("ptp", n), &n, |b, &n| {
            b.iter(|| ptp_forward(&env, n).unwrap().last())
        });
        group.bench_with_input(BenchmarkId::new("stationary", n), &n, |b, &n| {
            b.iter(|| stationary_forward(&env, &boundary, n).unwrap().last())
        });
        group.bench_with_input(BenchmarkId::new("stationary_rolling", n), &n, |b, &n| {
            let stream = EnvStream::new(grid, 7, 0);
            b.iter(|| {
                stationary_probes(&stream, &boundary, n, &[(n, grid.m_count)]).unwrap()[0]
            })
        });
    }
    group.finish();
}

fn bench_special(c: &mut Criterion) {
    c.bench_function("psi1_inv", |b| {
        let mut y = 0.013;
        b.iter(|| {
            y = if y > 1.0 { 0.013 } else { y * 1.7 };
            psi1_inv(y).unwrap()
        })
    });
    c.bench_function("gamma_sample_theta_16", |b| {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        b.iter(|| gamma_sample(16.0, &mut rng).unwrap())
    });
}

fn bench_path_sampling(c: &mut Criterion) {
    let n = 32usize;
    let t = n as f64 * psi1(1.0).unwrap();
    let grid = GridSpec::new(t, 0.02).unwrap();
    let env = Environment::generate(n, grid, 9, 0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let boundary = sample_boundary(1.0, n, &mut rng).unwrap();
    let table = stationary_forward(&env, &boundary, n).unwrap();
    c.bench_function("path_sampler_build", |b| {
        b.iter(|| PathSampler::new(&table, &env).unwrap())
    });
    let sampler = PathSampler::new(&table, &env).unwrap();
    c.bench_function("path_draw", |b| {
        let mut prng = ChaCha12Rng::seed_from_u64(4);
        b.iter(|| sampler.draw(&mut prng).unwrap())
    });
}

criterion_group!(
    benches,
    bench_forward_kernels,
    bench_special,
    bench_path_sampling
);
criterion_main!(benches);
