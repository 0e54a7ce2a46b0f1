use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use gazeval_bench::{channel, quick_protocol, trials};
use gazeval_core::features::fixation_density_map;
use gazeval_core::learn::{run_protocol, train_linear_svm, SvmParams};
use gazeval_core::{build_channel, FeatureKind, FeatureParams};

fn density(c: &mut Criterion) {
    let t = trials(5, 20);
    let id = t.images().keys().next().expect("one image").clone();
    let pts: Vec<(f64, f64)> = t.fixations_on(&id).iter().map(|f| (f.x, f.y)).collect();
    c.bench_function("fdm/single_image", |b| {
        b.iter(|| fixation_density_map(pts.iter().copied(), 1024.0, 768.0, 20.48).unwrap())
    });
    c.bench_function("fdm/channel_15_images", |b| {
        b.iter(|| build_channel(&t, FeatureKind::Fdm, &FeatureParams::default()).unwrap())
    });
}

fn svm(c: &mut Criterion) {
    let (ch, labels) = channel(100, 300);
    let rows: Vec<&[f64]> = ch.rows.values().map(Vec::as_slice).collect();
    let y: Vec<_> = labels.values().copied().collect();
    c.bench_function("svm/300x300_c1", |b| {
        b.iter(|| train_linear_svm(&rows, &y, &SvmParams::default()).unwrap())
    });
}

fn protocol(c: &mut Criterion) {
    let (ch, labels) = channel(40, 300);
    let mut g = c.benchmark_group("protocol");
    g.sample_size(10);
    g.bench_function("120_images_2_reps", |b| {
        b.iter_batched(
            || quick_protocol(2),
            |p| run_protocol(&ch, &labels, &p).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, density, svm, protocol);
criterion_main!(benches);
