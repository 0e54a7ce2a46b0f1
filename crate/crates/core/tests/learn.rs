use std::collections::BTreeMap;

use gazeval_core::learn::{classeme_analysis, observer_sweep, CvProtocol, CLASSEME_DIM};
use gazeval_core::synth::{generate, SpatialLayout, SpatialParams, SyntheticScenario};
use gazeval_core::{
    build_channel, late_fuse, run_protocol, ChannelSource, EmotionClass, FeatureChannel, FeatureKind, FeatureParams,
    ImageId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn protocol(seed: u64, repetitions: usize) -> CvProtocol {
    CvProtocol { repetitions, ..CvProtocol::with_seed(seed) }
}

fn labelled(n_per_class: usize) -> BTreeMap<ImageId, EmotionClass> {
    (0..3 * n_per_class)
        .map(|i| (ImageId::from(format!("img{i:04}")), EmotionClass::ALL[i % 3]))
        .collect()
}

fn channel(name: &str, labels: &BTreeMap<ImageId, EmotionClass>, dim: usize, f: impl Fn(EmotionClass, &mut ChaCha8Rng) -> Vec<f64>) -> FeatureChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let mut ch = FeatureChannel::new(name, dim, ChannelSource::Gaze);
    for (id, &c) in labels {
        ch.insert(id.clone(), f(c, &mut rng)).unwrap();
    }
    ch
}

#[test]
fn fusing_a_perfect_channel_does_not_hurt_a_noise_channel() {
    let labels = labelled(30);
    let perfect = channel("perfect", &labels, 3, |c, _| {
        let mut v = vec![0.0; 3];
        v[c.index()] = 1.0;
        v
    });
    let noise = channel("noise", &labels, 5, |_, r| (0..5).map(|_| r.random::<f64>()).collect());
    let p = protocol(2, 4);
    let alone = run_protocol(&noise, &labels, &p).unwrap();
    let fused = late_fuse(&[&perfect, &noise], &labels, &p).unwrap();
    assert!(fused.mean_accuracy >= alone.mean_accuracy, "{} < {}", fused.mean_accuracy, alone.mean_accuracy);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let labels = labelled(20);
    let ch = channel("blobs", &labels, 4, |c, r| {
        (0..4).map(|k| r.random::<f64>() + if k == c.index() { 0.3 } else { 0.0 }).collect()
    });
    let p = protocol(5, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_protocol(&ch, &labels, &p).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.predictions_csv(), b.predictions_csv());
}

#[test]
fn one_hot_classemes_are_learned_and_tabulated() {
    let labels = labelled(20);
    // Visual class k always belongs to emotion k % 3.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ch = FeatureChannel::new("classemes", CLASSEME_DIM, ChannelSource::Visual);
    for (id, c) in &labels {
        let k = 3 * rng.random_range(0..3) + c.index();
        let mut v = vec![0.0; CLASSEME_DIM];
        v[k] = 1.0;
        ch.insert(id.clone(), v).unwrap();
    }
    let (report, table) = classeme_analysis(&ch, &labels, &protocol(1, 3)).unwrap();
    assert!(report.mean_accuracy >= 95.0, "{}", report.mean_accuracy);
    for row in &table.rows {
        assert_eq!(row.fractions.iter().filter(|&&f| f == 1.0).count(), 1, "{row:?}");
    }
}

/// Classes differ only in where observers look; each observer contributes a
/// couple of fixations, so maps sharpen as observers are added.
fn spatial_scenario() -> SyntheticScenario {
    let mut s = SyntheticScenario {
        n_images_per_class: 15,
        n_observers: 8,
        layout: SpatialLayout::Independent,
        seed: 17,
        ..Default::default()
    };
    for (c, x) in s.classes.iter_mut().zip([-0.5, 0.0, 0.5]) {
        c.spatial = SpatialParams { mu: [x, 0.0], sigma: [0.35, 0.35] };
        c.fixations_per_trial = 1.5;
    }
    s
}

#[test]
fn sweep_at_full_count_equals_plain_run() {
    let d = generate(&spatial_scenario()).unwrap();
    let p = protocol(3, 2);
    let params = FeatureParams::default();
    let pts = observer_sweep(&d.trials, &p, &params, &[8], 3).unwrap();
    let ch = build_channel(&d.trials, FeatureKind::Fdm, &params).unwrap().channel;
    let plain = run_protocol(&ch, &d.trials.labels(), &p).unwrap();
    assert_eq!(pts[0].subsets, 1);
    assert_eq!(pts[0].per_subset_accuracy, vec![plain.mean_accuracy]);
    assert_eq!(pts[0].mean_accuracy, plain.mean_accuracy);
}

#[test]
fn sweep_accuracy_grows_with_observers() {
    let d = generate(&spatial_scenario()).unwrap();
    let pts = observer_sweep(&d.trials, &protocol(4, 2), &FeatureParams::default(), &[1, 3, 8], 2).unwrap();
    for w in pts.windows(2) {
        let slack = (w[0].ci95.1 - w[0].mean_accuracy) + (w[1].mean_accuracy - w[1].ci95.0);
        assert!(
            w[1].mean_accuracy + slack >= w[0].mean_accuracy,
            "n={} mA {} then n={} mA {}",
            w[0].n_observers,
            w[0].mean_accuracy,
            w[1].n_observers,
            w[1].mean_accuracy
        );
    }
    assert!(pts[2].mean_accuracy > pts[0].mean_accuracy, "{pts:?}");
}
