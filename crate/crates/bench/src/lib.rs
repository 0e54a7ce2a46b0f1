//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use gazeval_core::learn::CvProtocol;
use gazeval_core::synth::{generate, SyntheticScenario};
use gazeval_core::{ChannelSource, EmotionClass, FeatureChannel, ImageId, TrialSet};

pub fn trials(n_images_per_class: usize, n_observers: usize) -> TrialSet {
    let sc = SyntheticScenario {
        n_images_per_class,
        n_observers,
        seed: 17,
        ..Default::default()
    };
    generate(&sc).expect("valid scenario").trials
}

/// Noisy channel of dimension `dim` with a weak class signal in the first
/// three coordinates.
pub fn channel(n_per_class: usize, dim: usize) -> (FeatureChannel, BTreeMap<ImageId, EmotionClass>) {
    let mut ch = FeatureChannel::new("bench", dim, ChannelSource::Gaze);
    let mut labels = BTreeMap::new();
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..3 * n_per_class {
        let class = EmotionClass::ALL[i % 3];
        let mut v: Vec<f64> = (0..dim).map(|_| next()).collect();
        v[class.index()] += 0.5;
        let id = ImageId::from(format!("img{i:04}"));
        ch.insert(id.clone(), v).expect("fresh id");
        labels.insert(id, class);
    }
    (ch, labels)
}

pub fn quick_protocol(repetitions: usize) -> CvProtocol {
    CvProtocol {
        repetitions,
        ..CvProtocol::with_seed(5)
    }
}
