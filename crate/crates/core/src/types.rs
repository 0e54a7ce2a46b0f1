//! Domain types shared by the whole pipeline.
//!
//! Everything here is immutable once constructed. [`TrialSet`] is the unit
//! the feature extractors and statistics operate on: a set of images with
//! their valence metadata plus the fixations and saccades recorded on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::derive_saccades;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Identifies one participant.
    ObserverId
);
string_id!(
    /// Identifies one stimulus image.
    ImageId
);

/// Valence class of an image. The declaration order is the canonical class
/// order used for tie-breaking and for confusion-matrix layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Unpleasant,
    Neutral,
    Pleasant,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 3] = [
        EmotionClass::Unpleasant,
        EmotionClass::Neutral,
        EmotionClass::Pleasant,
    ];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionClass::Unpleasant => "unpleasant",
            EmotionClass::Neutral => "neutral",
            EmotionClass::Pleasant => "pleasant",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unpleasant" => Ok(EmotionClass::Unpleasant),
            "neutral" => Ok(EmotionClass::Neutral),
            "pleasant" => Ok(EmotionClass::Pleasant),
            other => Err(Error::Domain(format!("unknown emotion class '{other}'"))),
        }
    }
}

pub const SAM_MIN: f64 = 1.0;
pub const SAM_MAX: f64 = 9.0;
/// Lower edge of the neutral band (inclusive).
pub const NEUTRAL_LOW: f64 = 4.0;
/// Upper edge of the neutral band (inclusive).
pub const NEUTRAL_HIGH: f64 = 6.0;

/// Maps a mean SAM valence score to its class. The neutral band `[4, 6]` is
/// closed on both ends.
pub fn label_emotion_class(sam_mean: f64) -> Result<EmotionClass> {
    if !(SAM_MIN..=SAM_MAX).contains(&sam_mean) {
        return Err(Error::Domain(format!(
            "SAM score {sam_mean} outside [{SAM_MIN}, {SAM_MAX}]"
        )));
    }
    Ok(if sam_mean < NEUTRAL_LOW {
        EmotionClass::Unpleasant
    } else if sam_mean <= NEUTRAL_HIGH {
        EmotionClass::Neutral
    } else {
        EmotionClass::Pleasant
    })
}

/// One raw tracker sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub observer_id: ObserverId,
    pub image_id: ImageId,
    /// Milliseconds since trial onset.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub observer_id: ObserverId,
    pub image_id: ImageId,
    /// Centroid in image pixels, origin top-left.
    pub x: f64,
    pub y: f64,
    pub onset: f64,
    pub duration: f64,
    /// Set when the centroid was pulled back inside the image bounds.
    #[serde(default)]
    pub clamped: bool,
}

impl Fixation {
    /// Clamps the centroid to the nearest boundary pixel of a `width` x
    /// `height` image, flagging the fixation if it moved.
    pub fn clamp_to(&mut self, width: f64, height: f64) {
        let cx = self.x.clamp(0.0, (width - 1.0).max(0.0));
        let cy = self.y.clamp(0.0, (height - 1.0).max(0.0));
        if cx != self.x || cy != self.y {
            self.x = cx;
            self.y = cy;
            self.clamped = true;
        }
    }

    pub fn offset(&self) -> f64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saccade {
    pub observer_id: ObserverId,
    pub image_id: ImageId,
    /// Euclidean distance between consecutive fixation centroids, pixels.
    pub length: f64,
    /// Orientation in degrees, folded into `[0, 180)`.
    pub slope: f64,
    /// Gap between the previous fixation's offset and the next onset.
    pub duration: f64,
}

/// Image subsets used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    S95,
    S296,
    S382,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::S95, Scenario::S296, Scenario::S382];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::S95 => "s95",
            Scenario::S296 => "s296",
            Scenario::S382 => "s382",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s95" => Ok(Scenario::S95),
            "s296" => Ok(Scenario::S296),
            "s382" => Ok(Scenario::S382),
            other => Err(Error::Domain(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFlags {
    pub s95: bool,
    pub s296: bool,
    pub s382: bool,
}

impl ScenarioFlags {
    pub fn contains(&self, scenario: Scenario) -> bool {
        match scenario {
            Scenario::S95 => self.s95,
            Scenario::S296 => self.s296,
            Scenario::S382 => self.s382,
        }
    }

    pub fn set(&mut self, scenario: Scenario, member: bool) {
        match scenario {
            Scenario::S95 => self.s95 = member,
            Scenario::S296 => self.s296 = member,
            Scenario::S382 => self.s382 = member,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: ImageId,
    pub sam_mean_all: f64,
    pub sam_mean_male: f64,
    pub sam_mean_female: f64,
    pub emotion_class: EmotionClass,
    pub scenarios: ScenarioFlags,
    pub width: f64,
    pub height: f64,
}

impl ImageRecord {
    /// Validates the SAM scores and derives the emotion class from the
    /// all-observer mean.
    pub fn new(
        image_id: ImageId,
        sam_all: f64,
        sam_male: f64,
        sam_female: f64,
        width: f64,
        height: f64,
    ) -> Result<Self> {
        for (what, v) in [("all", sam_all), ("male", sam_male), ("female", sam_female)] {
            if !(SAM_MIN..=SAM_MAX).contains(&v) {
                return Err(Error::Domain(format!(
                    "image {image_id}: SAM ({what}) {v} outside [1, 9]"
                )));
            }
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Domain(format!(
                "image {image_id}: non-positive size {width}x{height}"
            )));
        }
        Ok(Self {
            emotion_class: label_emotion_class(sam_all)?,
            image_id,
            sam_mean_all: sam_all,
            sam_mean_male: sam_male,
            sam_mean_female: sam_female,
            scenarios: ScenarioFlags::default(),
            width,
            height,
        })
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

/// A whole recorded (or synthesized) dataset.
///
/// Fixations are stored sorted by `(image, observer, onset)` so every trial
/// is a contiguous run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialSet {
    images: BTreeMap<ImageId, ImageRecord>,
    fixations: Vec<Fixation>,
    saccades: Vec<Saccade>,
    observers: BTreeSet<ObserverId>,
}

impl TrialSet {
    /// Builds a trial set, clamping off-image fixations and deriving
    /// saccades from consecutive fixations of each trial.
    pub fn new(images: impl IntoIterator<Item = ImageRecord>, fixations: Vec<Fixation>) -> Result<Self> {
        let images: BTreeMap<ImageId, ImageRecord> = images
            .into_iter()
            .map(|r| (r.image_id.clone(), r))
            .collect();
        let mut fixations = fixations;
        let mut clamped = 0usize;
        for f in &mut fixations {
            let rec = images.get(&f.image_id).ok_or_else(|| {
                Error::Validation(format!(
                    "fixation of observer {} references unknown image {}",
                    f.observer_id, f.image_id
                ))
            })?;
            if !(f.duration > 0.0) {
                return Err(Error::Validation(format!(
                    "fixation of observer {} on {} at {} ms has non-positive duration {}",
                    f.observer_id, f.image_id, f.onset, f.duration
                )));
            }
            let was = f.clamped;
            f.clamp_to(rec.width, rec.height);
            if f.clamped && !was {
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::warn!("{clamped} fixation(s) outside image bounds were clamped");
        }
        fixations.sort_by(|a, b| {
            (&a.image_id, &a.observer_id)
                .cmp(&(&b.image_id, &b.observer_id))
                .then(a.onset.total_cmp(&b.onset))
        });
        let saccades = derive_saccades(&fixations);
        let observers = fixations.iter().map(|f| f.observer_id.clone()).collect();
        Ok(Self {
            images,
            fixations,
            saccades,
            observers,
        })
    }

    pub fn images(&self) -> &BTreeMap<ImageId, ImageRecord> {
        &self.images
    }

    pub fn image(&self, id: &ImageId) -> Option<&ImageRecord> {
        self.images.get(id)
    }

    pub fn fixations(&self) -> &[Fixation] {
        &self.fixations
    }

    pub fn saccades(&self) -> &[Saccade] {
        &self.saccades
    }

    pub fn observers(&self) -> &BTreeSet<ObserverId> {
        &self.observers
    }

    /// Ground-truth class of every image.
    pub fn labels(&self) -> BTreeMap<ImageId, EmotionClass> {
        self.images
            .iter()
            .map(|(id, r)| (id.clone(), r.emotion_class))
            .collect()
    }

    /// Fixations on one image, grouped per observer (observer order).
    pub fn fixations_by_observer(&self, image: &ImageId) -> BTreeMap<ObserverId, Vec<Fixation>> {
        let mut out: BTreeMap<ObserverId, Vec<Fixation>> = BTreeMap::new();
        for f in self.fixations_on(image) {
            out.entry(f.observer_id.clone()).or_default().push(f.clone());
        }
        out
    }

    /// Contiguous slice of all fixations on `image`.
    pub fn fixations_on(&self, image: &ImageId) -> &[Fixation] {
        let lo = self.fixations.partition_point(|f| &f.image_id < image);
        let hi = self.fixations.partition_point(|f| &f.image_id <= image);
        &self.fixations[lo..hi]
    }

    pub fn saccades_on(&self, image: &ImageId) -> impl Iterator<Item = &Saccade> {
        let lo = self.saccades.partition_point(|s| &s.image_id < image);
        let hi = self.saccades.partition_point(|s| &s.image_id <= image);
        self.saccades[lo..hi].iter()
    }

    /// Keeps only fixations from the given observers. Images are retained.
    pub fn restrict_to_observers(&self, keep: &BTreeSet<ObserverId>) -> TrialSet {
        let fixations = self
            .fixations
            .iter()
            .filter(|f| keep.contains(&f.observer_id))
            .cloned()
            .collect();
        Self::from_sorted(self.images.clone(), fixations)
    }

    /// Keeps only the images for which `keep` holds, with their fixations.
    pub fn restrict_to_images(&self, keep: impl Fn(&ImageRecord) -> bool) -> TrialSet {
        let images: BTreeMap<_, _> = self
            .images
            .iter()
            .filter(|(_, r)| keep(r))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let fixations = self
            .fixations
            .iter()
            .filter(|f| images.contains_key(&f.image_id))
            .cloned()
            .collect();
        Self::from_sorted(images, fixations)
    }

    pub fn restrict_to_scenario(&self, scenario: Scenario) -> TrialSet {
        self.restrict_to_images(|r| r.scenarios.contains(scenario))
    }

    // Fixations already validated, clamped and sorted.
    fn from_sorted(images: BTreeMap<ImageId, ImageRecord>, fixations: Vec<Fixation>) -> TrialSet {
        let saccades = derive_saccades(&fixations);
        let observers = fixations.iter().map(|f| f.observer_id.clone()).collect();
        TrialSet {
            images,
            fixations,
            saccades,
            observers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total_fixations: usize,
    /// Fixation counts in canonical class order.
    pub fixations_per_class: [usize; 3],
    pub images_per_class: [usize; 3],
    pub observer_count: usize,
    /// Sum of fixation durations, milliseconds.
    pub total_fixation_time_ms: f64,
}

impl DatasetSummary {
    pub fn fixations_in(&self, class: EmotionClass) -> usize {
        self.fixations_per_class[class.index()]
    }
}

pub fn dataset_summary(trials: &TrialSet) -> DatasetSummary {
    let mut per_class = [0usize; 3];
    let mut images_per_class = [0usize; 3];
    let mut total_time = 0.0;
    for r in trials.images().values() {
        images_per_class[r.emotion_class.index()] += 1;
    }
    for f in trials.fixations() {
        // TrialSet construction guarantees the image exists.
        let class = trials.images()[&f.image_id].emotion_class;
        per_class[class.index()] += 1;
        total_time += f.duration;
    }
    DatasetSummary {
        total_fixations: trials.fixations().len(),
        fixations_per_class: per_class,
        images_per_class,
        observer_count: trials.observers().len(),
        total_fixation_time_ms: total_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(id: &str, sam: f64) -> ImageRecord {
        ImageRecord::new(id.into(), sam, sam, sam, 1024.0, 768.0).unwrap()
    }

    fn fixation(obs: &str, img: &str, x: f64, y: f64, onset: f64) -> Fixation {
        Fixation {
            observer_id: obs.into(),
            image_id: img.into(),
            x,
            y,
            onset,
            duration: 200.0,
            clamped: false,
        }
    }

    #[test]
    fn labels_midpoint_and_boundaries() {
        assert_eq!(label_emotion_class(5.0).unwrap(), EmotionClass::Neutral);
        assert_eq!(label_emotion_class(4.0).unwrap(), EmotionClass::Neutral);
        assert_eq!(label_emotion_class(6.0).unwrap(), EmotionClass::Neutral);
        assert_eq!(label_emotion_class(3.999).unwrap(), EmotionClass::Unpleasant);
        assert_eq!(label_emotion_class(6.001).unwrap(), EmotionClass::Pleasant);
        assert_eq!(label_emotion_class(1.0).unwrap(), EmotionClass::Unpleasant);
        assert_eq!(label_emotion_class(9.0).unwrap(), EmotionClass::Pleasant);
    }

    #[test]
    fn labels_reject_out_of_scale() {
        assert!(matches!(label_emotion_class(0.99), Err(Error::Domain(_))));
        assert!(matches!(label_emotion_class(9.01), Err(Error::Domain(_))));
        assert!(label_emotion_class(f64::NAN).is_err());
    }

    #[test]
    fn summary_single_neutral_image() {
        let fx = (0..10)
            .map(|i| fixation("o1", "a", 10.0 * i as f64, 10.0, 300.0 * i as f64))
            .collect();
        let ts = TrialSet::new([image("a", 5.0)], fx).unwrap();
        let s = dataset_summary(&ts);
        assert_eq!(s.total_fixations, 10);
        assert_eq!(s.fixations_in(EmotionClass::Neutral), 10);
        assert_eq!(s.fixations_in(EmotionClass::Pleasant), 0);
        assert_eq!(s.fixations_in(EmotionClass::Unpleasant), 0);
        assert_eq!(s.observer_count, 1);
        assert_eq!(s.total_fixation_time_ms, 2000.0);
    }

    #[test]
    fn unknown_image_is_rejected() {
        let err = TrialSet::new([image("a", 5.0)], vec![fixation("o", "b", 1.0, 1.0, 0.0)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn off_image_fixations_are_clamped_and_flagged() {
        let ts = TrialSet::new(
            [image("a", 5.0)],
            vec![
                fixation("o", "a", -5.0, 800.0, 0.0),
                fixation("o", "a", 10.0, 10.0, 300.0),
            ],
        )
        .unwrap();
        let f = &ts.fixations()[0];
        assert_eq!((f.x, f.y), (0.0, 767.0));
        assert!(f.clamped);
        assert!(!ts.fixations()[1].clamped);
    }

    #[test]
    fn trials_are_time_ordered_and_saccades_derived() {
        let ts = TrialSet::new(
            [image("a", 5.0), image("b", 2.0)],
            vec![
                fixation("o2", "a", 100.0, 0.0, 400.0),
                fixation("o1", "b", 0.0, 0.0, 0.0),
                fixation("o2", "a", 0.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let on_a = ts.fixations_on(&"a".into());
        assert_eq!(on_a.len(), 2);
        assert!(on_a[0].onset < on_a[1].onset);
        assert_eq!(ts.saccades().len(), 1);
        assert_eq!(ts.saccades()[0].length, 100.0);
        assert_eq!(ts.observers().len(), 2);
    }

    #[test]
    fn restrict_to_observers_keeps_images() {
        let ts = TrialSet::new(
            [image("a", 5.0)],
            vec![fixation("o1", "a", 0.0, 0.0, 0.0), fixation("o2", "a", 5.0, 5.0, 0.0)],
        )
        .unwrap();
        let only: BTreeSet<ObserverId> = ["o1".into()].into_iter().collect();
        let r = ts.restrict_to_observers(&only);
        assert_eq!(r.fixations().len(), 1);
        assert_eq!(r.images().len(), 1);
    }
}
