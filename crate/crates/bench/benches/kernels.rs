use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use cavkin::fpe::{evolve_values, CavityTransport, DispersionModel, FpeGrid, FpeOptions};
use cavkin::kinetic::{dispersion, growth_rate, VelocityDistribution};
use cavkin::rng::{initial_condition_rng, NoiseStream};
use cavkin::sim::{sample_initial, GuardBounds, Integrator};
use cavkin::Complex64;
use cavkin_bench::{heavy_tail, organised};

fn sde_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("sde_step");
    for n in [100usize, 1000] {
        let params = organised(n);
        let init = sample_initial(&params, 300.0, &mut initial_condition_rng(1, 0));
        let mut it = Integrator::new(&params, init, 1e-3, GuardBounds::for_particles(n)).unwrap();
        let mut noise = NoiseStream::new(1, 0, 0);
        let mut k = 0u64;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let (x, y) = noise.standard_normals(k);
                k += 1;
                it.advance(x, y).unwrap();
            })
        });
    }
    group.finish();
}

fn dispersion_eval(c: &mut Criterion) {
    let params = heavy_tail(5000);
    let gaussian = VelocityDistribution::gaussian(1000.0).unwrap();
    let q = VelocityDistribution::q_gaussian(1.4, 1000.0).unwrap();
    let s = Complex64::new(3.0, 40.0);
    c.bench_function("dispersion/gaussian", |b| {
        b.iter(|| dispersion(black_box(s), &gaussian, &params).unwrap())
    });
    c.bench_function("dispersion/q_gaussian", |b| {
        b.iter(|| dispersion(black_box(s), &q, &params).unwrap())
    });
    let above = organised(250);
    let f = VelocityDistribution::gaussian(50.0).unwrap();
    c.bench_function("growth_rate/gaussian", |b| b.iter(|| growth_rate(&above, &f).unwrap()));
}

fn fpe_step(c: &mut Criterion) {
    let params = heavy_tail(5000);
    let f0 = VelocityDistribution::gaussian(2500.0).unwrap();
    let mut group = c.benchmark_group("fpe_step");
    group.sample_size(20);
    for cells in [400usize, 2000] {
        let grid = FpeGrid::new(2500.0, cells).unwrap();
        let values = grid.project(&f0);
        let mut options = FpeOptions::for_params(&params, 0.05, 0.01);
        options.refresh_interval = 0.0;
        group.bench_with_input(BenchmarkId::from_parameter(cells), &cells, |b, _| {
            b.iter(|| {
                let mut model = CavityTransport::new(params, DispersionModel::Full);
                evolve_values(&mut model, values.clone(), grid, options).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sde_step, dispersion_eval, fpe_step);
criterion_main!(benches);
