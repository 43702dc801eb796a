//! Rayon maps against the plain iterator fallback on two workloads: a batch
//! of part-metric runs and a scan of Floquet exponents.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lattice_kpp::coeffs::make_family;
use lattice_kpp::floquet::FloquetOptions;
use lattice_kpp::metrics::part_metric_monitor;
use lattice_kpp::{FamilyParams, FloquetSolver, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairs(n: usize, sites: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|_| {
            let u = (0..sites).map(|_| rng.gen_range(0.1..2.0)).collect();
            let v = (0..sites).map(|_| rng.gen_range(0.1..2.0)).collect();
            (u, v)
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let field = make_family(&FamilyParams::shipped_time_space_periodic()).unwrap();
    let sim = SimOptions::default();
    let work = pairs(16, 52);
    let run = |(u, v): &(Vec<f64>, Vec<f64>)| {
        part_metric_monitor(&field, u, v, 0.0, 2.0, &sim, 0.5, 1.0).unwrap().max_increase
    };

    let mut g = c.benchmark_group("part_metric_batch");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("parallel", lattice_kpp::par::is_parallel()), |b| {
        b.iter(|| lattice_kpp::par::map_slice(black_box(&work), run))
    });
    g.bench_function("sequential", |b| b.iter(|| black_box(&work).iter().map(run).collect::<Vec<_>>()));
    g.finish();

    let solver = FloquetSolver::new(&field, &FloquetOptions { dt: 1e-2, ..Default::default() }).unwrap();
    let mus: Vec<f64> = (1..=16).map(|k| 0.2 * k as f64).collect();
    let lambda = |mu: &f64| solver.lambda(*mu).unwrap();
    let mut g = c.benchmark_group("floquet_scan");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("parallel", lattice_kpp::par::is_parallel()), |b| {
        b.iter(|| lattice_kpp::par::map_slice(black_box(&mus), lambda))
    });
    g.bench_function("sequential", |b| b.iter(|| black_box(&mus).iter().map(lambda).collect::<Vec<_>>()));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
