use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use hemo_bench::{curve_model, smooth_data};
use hemo_core::estimation::{estimate, OptimizerSettings};
use hemo_core::kernel::KernelConfig;
use hemo_core::vkoga::{vkoga_fit, StopRule};
use hemo_core::{desk, Simulation, DEFAULT_DT};

fn surrogate(c: &mut Criterion) {
    let model = curve_model(40);
    c.bench_function("evaluate 400 outputs, 40 centres", |b| {
        let mut out = vec![0.0; 400];
        let mut x = 0.0;
        b.iter(|| {
            x = (x + 0.1234567) % 1.0;
            model.evaluate_into(black_box(&[x]), &mut out);
            black_box(out[0])
        })
    });
    c.bench_function("derivative 400 outputs, 40 centres", |b| {
        b.iter(|| black_box(model.evaluate_derivative(black_box(0.42)).unwrap()))
    });

    let (xs, values) = smooth_data(160, 400);
    let kc = KernelConfig::gaussian(8.0, 1e-10);
    c.bench_function("greedy fit N=160 q=400", |b| {
        b.iter(|| black_box(vkoga_fit(&xs, 1, &values, 400, &kc, &StopRule::default()).unwrap().selected.len()))
    });

    let y = model.evaluate_scalar(0.9);
    c.bench_function("estimate from a 400-sample curve", |b| {
        b.iter(|| black_box(estimate(&y, &model, &OptimizerSettings::default()).unwrap().estimate))
    });
}

fn solver(c: &mut Criterion) {
    let net = desk::desk_network().unwrap();
    let mut group = c.benchmark_group("desk network");
    group.sample_size(20);
    group.bench_function("one heart beat (400 steps)", |b| {
        b.iter_batched(
            || Simulation::new(&net, DEFAULT_DT).unwrap(),
            |mut sim| {
                sim.advance_to(1.0, |_| {}).unwrap();
                black_box(sim.time())
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, surrogate, solver);
criterion_main!(benches);
