//! Gaze-based image pleasantness classification: event detection, gaze
//! feature channels, cross-validated linear SVM evaluation, descriptive
//! statistics and a synthetic data generator.

pub mod channel;
pub mod error;
pub mod events;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod stats;
pub mod synth;
pub mod types;

pub use channel::{l1_normalize, ChannelSource, FeatureChannel, FeatureVector};
pub use error::{Error, Result};
pub use events::{derive_saccades, detect_fixations, fold_slope, DetectionParams};
pub use features::{build_channel, FeatureKind, FeatureParams, HistogramRange, Measure};
pub use learn::{late_fuse, run_protocol, CvProtocol, EvalReport, LinearModel};
pub use types::{
    dataset_summary, label_emotion_class, DatasetSummary, EmotionClass, Fixation, GazeSample, ImageId, ImageRecord,
    ObserverId, Saccade, Scenario, ScenarioFlags, TrialSet,
};

/// Crate version, embedded in output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
