//! Gaze feature representations and dataset-level gaze statistics.

pub mod center_bias;
pub mod density;
pub mod histogram;
pub mod iovc;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use center_bias::{fit_center_bias, fit_center_bias_trials, normalize_location, CenterBiasModel};
pub use density::{density_entropy, fixation_density_map, DensityMap, MAP_CELLS, MAP_COLS, MAP_ROWS};
pub use histogram::{histogram, summary_rep, HistogramSpec, Measure};
pub use iovc::{iovc, roc_auc, IovcScore};

use crate::channel::{l1_normalize, ChannelSource, FeatureChannel};
use crate::error::{Error, Result};
use crate::types::{ImageId, ImageRecord, TrialSet};

/// Per-image gaze feature channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Fdm,
    FdmEntropy,
    Iovc,
    MeanStd(Measure),
    Hist(Measure),
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 9] = [
        FeatureKind::Fdm,
        FeatureKind::FdmEntropy,
        FeatureKind::Iovc,
        FeatureKind::MeanStd(Measure::FixDuration),
        FeatureKind::MeanStd(Measure::SacLength),
        FeatureKind::MeanStd(Measure::SacSlope),
        FeatureKind::Hist(Measure::FixDuration),
        FeatureKind::Hist(Measure::SacLength),
        FeatureKind::Hist(Measure::SacSlope),
    ];

    pub fn dimension(self) -> usize {
        match self {
            FeatureKind::Fdm => MAP_CELLS,
            FeatureKind::FdmEntropy => 1,
            FeatureKind::Iovc | FeatureKind::MeanStd(_) => 2,
            FeatureKind::Hist(m) => m.bins(),
        }
    }

    pub fn name(self) -> String {
        match self {
            FeatureKind::Fdm => "fdm".into(),
            FeatureKind::FdmEntropy => "fdm_entropy".into(),
            FeatureKind::Iovc => "iovc".into(),
            FeatureKind::MeanStd(m) => format!("{}_meanstd", m.name()),
            FeatureKind::Hist(m) => format!("{}_hist", m.name()),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<String> = FeatureKind::ALL.iter().map(|k| k.name()).collect();
                Error::Domain(format!("unknown feature kind '{s}' (known: {})", known.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramRange {
    /// Fixed global constants shared by every dataset.
    #[default]
    Fixed,
    /// `[min, max]` of the measure over the whole trial set.
    Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    /// Kernel sigma as a fraction of image width.
    pub kernel_sigma_frac: f64,
    /// Absolute kernel sigma in pixels; overrides the fraction when set.
    pub kernel_sigma_px: Option<f64>,
    pub histogram_range: HistogramRange,
    pub l1_normalize_histograms: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            kernel_sigma_frac: 0.02,
            kernel_sigma_px: None,
            histogram_range: HistogramRange::Fixed,
            l1_normalize_histograms: false,
        }
    }
}

impl FeatureParams {
    pub fn kernel_sigma(&self, image: &ImageRecord) -> f64 {
        self.kernel_sigma_px.unwrap_or(self.kernel_sigma_frac * image.width)
    }
}

/// A built channel plus the images that had no data for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBuild {
    pub channel: FeatureChannel,
    pub missing: Vec<ImageId>,
}

fn measure_values(trials: &TrialSet, image: &ImageId, measure: Measure) -> Vec<f64> {
    match measure {
        Measure::FixDuration => trials.fixations_on(image).iter().map(|f| f.duration).collect(),
        Measure::SacLength => trials.saccades_on(image).map(|s| s.length).collect(),
        Measure::SacSlope => trials.saccades_on(image).map(|s| s.slope).collect(),
    }
}

/// Per-image values of a measure pooled over observers, for every image.
pub fn values_per_image(trials: &TrialSet, measure: Measure) -> BTreeMap<ImageId, Vec<f64>> {
    trials
        .images()
        .keys()
        .map(|id| (id.clone(), measure_values(trials, id, measure)))
        .collect()
}

fn histogram_spec(trials: &TrialSet, measure: Measure, params: &FeatureParams, image: &ImageRecord) -> HistogramSpec {
    match params.histogram_range {
        HistogramRange::Fixed => HistogramSpec::fixed(measure, image.diagonal()),
        HistogramRange::Dataset => {
            let all: Vec<f64> = match measure {
                Measure::FixDuration => trials.fixations().iter().map(|f| f.duration).collect(),
                Measure::SacLength => trials.saccades().iter().map(|s| s.length).collect(),
                Measure::SacSlope => trials.saccades().iter().map(|s| s.slope).collect(),
            };
            let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() {
                HistogramSpec::spanning(measure, lo, hi)
            } else {
                HistogramSpec::fixed(measure, image.diagonal())
            }
        }
    }
}

/// Feature vector of one image, or `None` when the image lacks the events
/// the kind needs.
pub fn image_feature(
    trials: &TrialSet,
    image: &ImageRecord,
    kind: FeatureKind,
    params: &FeatureParams,
) -> Result<Option<Vec<f64>>> {
    let id = &image.image_id;
    let fixations = trials.fixations_on(id);
    if fixations.is_empty() {
        return Ok(None);
    }
    let sigma = params.kernel_sigma(image);
    let locations = || fixations.iter().map(|f| (f.x, f.y));
    let v = match kind {
        FeatureKind::Fdm => fixation_density_map(locations(), image.width, image.height, sigma)?.into_values(),
        FeatureKind::FdmEntropy => {
            let map = fixation_density_map(locations(), image.width, image.height, sigma)?;
            vec![density_entropy(&map)?]
        }
        FeatureKind::Iovc => {
            let per_observer: Vec<Vec<(f64, f64)>> = trials
                .fixations_by_observer(id)
                .into_values()
                .map(|fs| fs.iter().map(|f| (f.x, f.y)).collect())
                .collect();
            if per_observer.len() < 2 {
                return Ok(None);
            }
            match iovc(id, &per_observer, image.width, image.height, sigma) {
                Ok(s) => vec![s.mean_auc, s.std_auc],
                Err(Error::InsufficientData(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        FeatureKind::MeanStd(m) => {
            let values = measure_values(trials, id, m);
            if values.is_empty() {
                return Ok(None);
            }
            summary_rep(&values)?.to_vec()
        }
        FeatureKind::Hist(m) => {
            let spec = histogram_spec(trials, m, params, image);
            let mut h = histogram(&measure_values(trials, id, m), &spec)?;
            if params.l1_normalize_histograms {
                l1_normalize(&mut h);
            }
            h
        }
    };
    Ok(Some(v))
}

/// Builds one channel over every image of the trial set. Images are
/// processed in parallel and merged in image-id order.
pub fn build_channel(trials: &TrialSet, kind: FeatureKind, params: &FeatureParams) -> Result<ChannelBuild> {
    let images: Vec<&ImageRecord> = trials.images().values().collect();
    let results: Vec<(ImageId, Option<Vec<f64>>)> = images
        .par_iter()
        .map(|r| image_feature(trials, r, kind, params).map(|v| (r.image_id.clone(), v)))
        .collect::<Result<_>>()?;
    let mut channel = FeatureChannel::new(kind.name(), kind.dimension(), ChannelSource::Gaze);
    let mut missing = Vec::new();
    for (id, v) in results {
        match v {
            Some(v) => channel.insert(id, v)?,
            None => missing.push(id),
        }
    }
    if !missing.is_empty() {
        log::warn!(
            "channel {}: {} image(s) without data excluded",
            channel.name,
            missing.len()
        );
    }
    Ok(ChannelBuild { channel, missing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Fixation;

    fn trials() -> TrialSet {
        let img = |id: &str, sam| ImageRecord::new(id.into(), sam, sam, sam, 800.0, 600.0).unwrap();
        let fx = |o: &str, i: &str, x: f64, y: f64, t: f64, d: f64| Fixation {
            observer_id: o.into(),
            image_id: i.into(),
            x,
            y,
            onset: t,
            duration: d,
            clamped: false,
        };
        TrialSet::new(
            [img("a", 2.0), img("b", 5.0), img("c", 8.0)],
            vec![
                fx("o1", "a", 100.0, 100.0, 0.0, 200.0),
                fx("o1", "a", 400.0, 100.0, 250.0, 300.0),
                fx("o2", "a", 120.0, 90.0, 0.0, 250.0),
                fx("o1", "b", 10.0, 10.0, 0.0, 100.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in FeatureKind::ALL {
            assert_eq!(k.name().parse::<FeatureKind>().unwrap(), k);
        }
        assert!("bogus".parse::<FeatureKind>().is_err());
    }

    #[test]
    fn fdm_channel_reports_missing_images() {
        let b = build_channel(&trials(), FeatureKind::Fdm, &FeatureParams::default()).unwrap();
        assert_eq!(b.channel.dimension, 300);
        assert_eq!(b.channel.len(), 2);
        assert_eq!(b.missing, vec![ImageId::from("c")]);
    }

    #[test]
    fn mean_std_matches_summary_rep() {
        let t = trials();
        let b = build_channel(&t, FeatureKind::MeanStd(Measure::FixDuration), &FeatureParams::default()).unwrap();
        assert_eq!(b.channel.get(&"a".into()).unwrap(), summary_rep(&[200.0, 300.0, 250.0]).unwrap());
        let s = build_channel(&t, FeatureKind::MeanStd(Measure::SacLength), &FeatureParams::default()).unwrap();
        assert_eq!(s.channel.get(&"a".into()).unwrap(), &[300.0, 0.0]);
        assert_eq!(s.missing.len(), 2);
    }

    #[test]
    fn iovc_channel_is_two_dimensional() {
        let b = build_channel(&trials(), FeatureKind::Iovc, &FeatureParams::default()).unwrap();
        assert_eq!(b.channel.dimension, 2);
        assert_eq!(b.channel.len(), 1);
        let v = b.channel.get(&"a".into()).unwrap();
        assert!((0.0..=1.0).contains(&v[0]));
    }

    #[test]
    fn histogram_channel_counts_and_normalization() {
        let t = trials();
        let raw = build_channel(&t, FeatureKind::Hist(Measure::FixDuration), &FeatureParams::default()).unwrap();
        assert_eq!(raw.channel.get(&"a".into()).unwrap().iter().sum::<f64>(), 3.0);
        let p = FeatureParams {
            l1_normalize_histograms: true,
            histogram_range: HistogramRange::Dataset,
            ..Default::default()
        };
        let norm = build_channel(&t, FeatureKind::Hist(Measure::FixDuration), &p).unwrap();
        let a = norm.channel.get(&"a".into()).unwrap();
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Dataset range [100, 300]: 300 ms lands in the last bin.
        assert!(a[59] > 0.0);
    }
}
