use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfix::geometry::{ManifoldPoint, Quat};
use vfix::learning::kmp::kernel_matrix;
use vfix::learning::{fit_gmm, kmp_fit, GmmOptions, KmpParams, ReferenceDistribution};
use vfix::sim::letters::{letter_a_demos, letter_scenario, rollouts, LetterFieldParams};
use vfix::Execution;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn points(n: usize, seed: u64) -> Vec<ManifoldPoint> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ManifoldPoint::m1(Vector3::new(r.gen(), r.gen(), r.gen()), Quat::identity()))
        .collect()
}

fn kernel(c: &mut Criterion) {
    let xs = points(600, 1);
    let mut g = c.benchmark_group("kernel_matrix");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new(name, xs.len()), |b| b.iter(|| kernel_matrix(&xs, 2, 0.3, exec).unwrap()));
    }
    g.finish();
}

fn kmp(c: &mut Criterion) {
    let xs = points(300, 2);
    let reference = ReferenceDistribution {
        means: xs.iter().map(|x| DVector::from_vec(vec![x.position().unwrap().x, 1.0])).collect(),
        covs: vec![DMatrix::identity(2, 2) * 0.01; xs.len()],
        inputs: xs,
    };
    let params = KmpParams { l: 0.3, lambda: 0.1, lambda_c: 10.0, alpha: 1.0 };
    let mut g = c.benchmark_group("kmp_fit");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| kmp_fit(reference.clone(), params, exec).unwrap()));
    }
    g.finish();
}

fn gmm(c: &mut Criterion) {
    let xs = points(2000, 3);
    let data: Vec<_> = xs
        .iter()
        .map(|x| (ManifoldPoint::scalar(x.position().unwrap().x), x.clone()))
        .collect();
    let mut g = c.benchmark_group("gmm_fit");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = GmmOptions { exec, ..GmmOptions::default() };
        g.bench_function(name, |b| b.iter(|| fit_gmm(&data, 6, 0, &opts).unwrap()));
    }
    g.finish();
}

fn rollout(c: &mut Criterion) {
    let demos = letter_a_demos(3, 200, 2.0, 11).unwrap();
    let p = LetterFieldParams { duration: 1.0, ..LetterFieldParams::default() };
    let scenario = letter_scenario(&demos, &p).unwrap();
    let starts: Vec<Vector3<f64>> = (0..16).map(|k| Vector3::new(0.1 * (k % 4) as f64, 0.1 * (k / 4) as f64, 0.0)).collect();
    let mut g = c.benchmark_group("letter_rollouts");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| rollouts(&scenario, &starts, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, kernel, kmp, gmm, rollout);
criterion_main!(benches);
