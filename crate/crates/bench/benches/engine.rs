use biphoton::coincidence::{coincidence_map, synth_frames, DetectorModel, Reduction};
use biphoton::entanglement::{conditional_entropy, evaluate_ef, DiscreteJoint, EntanglementConfig};
use biphoton::fields::{build_amplitude, position_pdf, AmplitudeOptions, Basis, ExtentPolicy, MomentumGrid4};
use biphoton::{collinear_angle, SellmeierModel};
use biphoton_bench::single_source;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn dispersion(c: &mut Criterion) {
    let model = SellmeierModel::bbo();
    c.bench_function("collinear_angle", |b| {
        b.iter(|| collinear_angle(&model, black_box(355e-9), 710e-9).unwrap())
    });
    let src = single_source(32.9);
    c.bench_function("amplitude_raw", |b| {
        b.iter(|| src.amplitude_raw(black_box(1.2e4), -3.0e3, -1.1e4, 2.5e3))
    });
}

fn fields(c: &mut Criterion) {
    let src = single_source(32.9);
    let mut group = c.benchmark_group("fields");
    group.sample_size(10);
    for n in [16usize, 32] {
        let grid = MomentumGrid4::auto(n, &src, &ExtentPolicy::default()).unwrap();
        group.bench_function(format!("build_amplitude_n{n}"), |b| {
            b.iter(|| build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap())
        });
        let amp = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap();
        group.bench_function(format!("propagate_to_position_n{n}"), |b| {
            b.iter_batched(
                || amp.clone(),
                |a| a.propagate(5e-3).unwrap().to_position().unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn entanglement(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..256 * 256).map(|_| rng.random::<f64>()).collect();
    let joint = DiscreteJoint::new(256, values, Basis::Position, 1e-5)
        .unwrap()
        .normalized()
        .unwrap();
    c.bench_function("conditional_entropy_m256", |b| {
        b.iter(|| conditional_entropy(&joint).unwrap())
    });

    let src = single_source(32.9);
    let cfg = EntanglementConfig {
        fine_n: 128,
        ..EntanglementConfig::default()
    };
    let mut group = c.benchmark_group("entanglement");
    group.sample_size(10);
    group.bench_function("ef_plane_m128", |b| {
        b.iter(|| evaluate_ef(&src, &cfg, &[5e-3]).unwrap())
    });
    group.finish();
}

fn coincidence(c: &mut Criterion) {
    let src = single_source(32.9);
    let grid = MomentumGrid4::auto(16, &src, &ExtentPolicy::default()).unwrap();
    let amp = build_amplitude(&grid, &src, AmplitudeOptions::default()).unwrap();
    let dist = position_pdf(&amp.propagate(5e-3).unwrap().to_position().unwrap()).unwrap();
    let det = DetectorModel {
        roi: (16, 16),
        ..DetectorModel::default()
    };
    let mut group = c.benchmark_group("coincidence");
    group.sample_size(10);
    group.bench_function("synth_2000_frames", |b| {
        b.iter(|| synth_frames(&dist, &det, 5.0, 2000, 7).unwrap())
    });
    let stack = synth_frames(&dist, &det, 5.0, 2000, 7).unwrap();
    group.bench_function("column_map_2000_frames", |b| {
        b.iter(|| coincidence_map(&stack, Reduction::ColumnPairs).unwrap())
    });
    group.finish();
}

criterion_group!(benches, dispersion, fields, entanglement, coincidence);
criterion_main!(benches);
