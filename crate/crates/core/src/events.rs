//! Fixation detection from raw samples (I-DT) and saccade derivation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Fixation, GazeSample, Saccade};

/// Parameters of the dispersion-threshold detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Maximum `(max x - min x) + (max y - min y)` of a fixation, pixels.
    pub dispersion_px: f64,
    pub min_duration_ms: f64,
    /// Longest run without valid data a fixation may bridge.
    pub max_gap_ms: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            dispersion_px: 40.0,
            min_duration_ms: 100.0,
            max_gap_ms: 75.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dispersion_px", self.dispersion_px),
            ("min_duration_ms", self.min_duration_ms),
            ("max_gap_ms", self.max_gap_ms),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Detects fixations in a sample stream.
///
/// The stream may hold several trials; each contiguous run of samples with
/// the same `(observer, image)` is processed independently and must be
/// sorted by time. A fixation's duration runs from its first sample to one
/// sampling period past its last sample, the period being the median
/// positive inter-sample interval of the trial.
pub fn detect_fixations(samples: &[GazeSample], params: &DetectionParams) -> Result<Vec<Fixation>> {
    params.validate()?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < samples.len() {
        let key = (&samples[start].observer_id, &samples[start].image_id);
        let mut end = start + 1;
        while end < samples.len() && (&samples[end].observer_id, &samples[end].image_id) == key {
            end += 1;
        }
        detect_in_trial(&samples[start..end], params, &mut out)?;
        start = end;
    }
    Ok(out)
}

fn sampling_period(trial: &[GazeSample]) -> f64 {
    let mut dts: Vec<f64> = trial
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .filter(|&d| d > 0.0)
        .collect();
    if dts.is_empty() {
        return 0.0;
    }
    dts.sort_by(f64::total_cmp);
    dts[dts.len() / 2]
}

#[derive(Clone, Copy)]
struct Bounds {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Bounds {
    fn of(s: &GazeSample) -> Self {
        Self {
            min_x: s.x,
            max_x: s.x,
            min_y: s.y,
            max_y: s.y,
        }
    }

    fn with(self, s: &GazeSample) -> Self {
        Self {
            min_x: self.min_x.min(s.x),
            max_x: self.max_x.max(s.x),
            min_y: self.min_y.min(s.y),
            max_y: self.max_y.max(s.y),
        }
    }

    fn dispersion(&self) -> f64 {
        (self.max_x - self.min_x) + (self.max_y - self.min_y)
    }
}

fn detect_in_trial(trial: &[GazeSample], params: &DetectionParams, out: &mut Vec<Fixation>) -> Result<()> {
    if let Some(w) = trial.windows(2).find(|w| w[1].t < w[0].t) {
        return Err(Error::Contract(format!(
            "samples of observer {} on image {} are not time-sorted ({} ms after {} ms)",
            w[0].observer_id, w[0].image_id, w[1].t, w[0].t
        )));
    }
    let valid: Vec<&GazeSample> = trial.iter().filter(|s| s.valid).collect();
    if valid.is_empty() {
        return Ok(());
    }
    let period = sampling_period(trial);
    // Two consecutive valid samples may share a fixation only if the data
    // hole between them is short enough.
    let bridged = |a: &GazeSample, b: &GazeSample| b.t - a.t - period <= params.max_gap_ms + 1e-9;
    let span = |a: &GazeSample, b: &GazeSample| b.t - a.t + period;

    let n = valid.len();
    let mut i = 0;
    while i < n {
        // Grow an initial window covering the minimum duration.
        let mut j = i;
        let mut bounds = Bounds::of(valid[i]);
        let mut broken = false;
        while span(valid[i], valid[j]) < params.min_duration_ms - 1e-9 {
            if j + 1 >= n || !bridged(valid[j], valid[j + 1]) {
                broken = true;
                break;
            }
            j += 1;
            bounds = bounds.with(valid[j]);
        }
        if broken || bounds.dispersion() > params.dispersion_px {
            i += 1;
            continue;
        }
        while j + 1 < n && bridged(valid[j], valid[j + 1]) {
            let grown = bounds.with(valid[j + 1]);
            if grown.dispersion() > params.dispersion_px {
                break;
            }
            bounds = grown;
            j += 1;
        }
        let members = &valid[i..=j];
        let k = members.len() as f64;
        let cx = members.iter().map(|s| s.x).sum::<f64>() / k;
        let cy = members.iter().map(|s| s.y).sum::<f64>() / k;
        out.push(Fixation {
            observer_id: valid[i].observer_id.clone(),
            image_id: valid[i].image_id.clone(),
            x: cx,
            y: cy,
            onset: valid[i].t,
            duration: span(valid[i], valid[j]),
            clamped: false,
        });
        i = j + 1;
    }
    Ok(())
}

/// Folds the orientation of `(dx, dy)` into `[0, 180)` degrees, measured
/// from the horizontal with the y-axis pointing down.
pub fn fold_slope(dx: f64, dy: f64) -> f64 {
    let deg = dy.atan2(dx).to_degrees().rem_euclid(180.0);
    // rem_euclid can round up to exactly 180 for tiny negative angles.
    if deg >= 180.0 {
        0.0
    } else {
        deg
    }
}

/// One saccade per consecutive fixation pair of every trial. The input must
/// have each trial's fixations contiguous and time-ordered.
pub fn derive_saccades(fixations: &[Fixation]) -> Vec<Saccade> {
    fixations
        .windows(2)
        .filter(|w| w[0].observer_id == w[1].observer_id && w[0].image_id == w[1].image_id)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            Saccade {
                observer_id: a.observer_id.clone(),
                image_id: a.image_id.clone(),
                length: dx.hypot(dy),
                slope: fold_slope(dx, dy),
                duration: (b.onset - a.offset()).max(0.0),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(t: f64, x: f64, y: f64) -> GazeSample {
        GazeSample {
            observer_id: "o".into(),
            image_id: "i".into(),
            t,
            x,
            y,
            valid: true,
        }
    }

    fn fix(x: f64, y: f64, onset: f64, duration: f64) -> Fixation {
        Fixation {
            observer_id: "o".into(),
            image_id: "i".into(),
            x,
            y,
            onset,
            duration,
            clamped: false,
        }
    }

    #[test]
    fn stationary_stream_is_one_fixation() {
        let s: Vec<_> = (0..30).map(|i| sample(10.0 * i as f64, 200.0, 150.0)).collect();
        let p = DetectionParams {
            dispersion_px: 50.0,
            min_duration_ms: 100.0,
            ..Default::default()
        };
        let f = detect_fixations(&s, &p).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].duration, 300.0);
        assert_eq!((f[0].x, f[0].y), (200.0, 150.0));
        assert_eq!(f[0].onset, 0.0);
    }

    #[test]
    fn two_clusters_two_fixations() {
        let mut s: Vec<_> = (0..20).map(|i| sample(10.0 * i as f64, 100.0, 100.0)).collect();
        s.extend((20..40).map(|i| sample(10.0 * i as f64, 500.0, 100.0)));
        let f = detect_fixations(&s, &DetectionParams::default()).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].duration, 200.0);
        assert_eq!(f[1].onset, 200.0);
        assert_eq!(f[1].x, 500.0);
    }

    #[test]
    fn short_dwell_is_not_a_fixation() {
        let s: Vec<_> = (0..5).map(|i| sample(10.0 * i as f64, 100.0, 100.0)).collect();
        assert!(detect_fixations(&s, &DetectionParams::default()).unwrap().is_empty());
    }

    #[test]
    fn unsorted_input_is_a_contract_violation() {
        let s = vec![sample(10.0, 0.0, 0.0), sample(0.0, 0.0, 0.0)];
        assert!(matches!(
            detect_fixations(&s, &DetectionParams::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn short_invalid_gap_is_bridged_long_gap_splits() {
        let p = DetectionParams::default();
        let mut s: Vec<_> = (0..40).map(|i| sample(10.0 * i as f64, 100.0, 100.0)).collect();
        for k in 15..19 {
            s[k].valid = false; // 40 ms hole
        }
        let f = detect_fixations(&s, &p).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].duration, 400.0);

        for k in 10..25 {
            s[k].valid = false; // 150 ms hole
        }
        let f = detect_fixations(&s, &p).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].duration, 100.0);
        assert_eq!(f[1].onset, 250.0);
    }

    #[test]
    fn saccade_geometry() {
        let s = derive_saccades(&[fix(0.0, 0.0, 0.0, 100.0), fix(100.0, 0.0, 150.0, 100.0)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].length, 100.0);
        assert_eq!(s[0].slope, 0.0);
        assert_eq!(s[0].duration, 50.0);

        let s = derive_saccades(&[fix(0.0, 0.0, 0.0, 100.0), fix(0.0, 100.0, 50.0, 100.0)]);
        assert_eq!(s[0].slope, 90.0);
        assert_eq!(s[0].duration, 0.0);
    }

    #[test]
    fn zero_or_one_fixation_has_no_saccade() {
        assert!(derive_saccades(&[]).is_empty());
        assert!(derive_saccades(&[fix(1.0, 1.0, 0.0, 10.0)]).is_empty());
    }

    #[test]
    fn saccades_do_not_cross_trials() {
        let mut b = fix(50.0, 50.0, 0.0, 100.0);
        b.image_id = "j".into();
        let s = derive_saccades(&[fix(0.0, 0.0, 0.0, 100.0), b]);
        assert!(s.is_empty());
    }

    #[test]
    fn fold_handles_negative_zero_rounding() {
        assert_eq!(fold_slope(1.0, -1e-300), 0.0);
        assert_eq!(fold_slope(-1.0, 0.0), 0.0);
        assert!((fold_slope(1.0, -1.0) - 135.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn slope_is_orientation_not_direction(
            ax in -2000.0..2000.0f64, ay in -2000.0..2000.0f64,
            bx in -2000.0..2000.0f64, by in -2000.0..2000.0f64,
        ) {
            let fwd = derive_saccades(&[fix(ax, ay, 0.0, 100.0), fix(bx, by, 200.0, 100.0)]);
            let back = derive_saccades(&[fix(bx, by, 0.0, 100.0), fix(ax, ay, 200.0, 100.0)]);
            let (f, b) = (fwd[0].slope, back[0].slope);
            prop_assert!((0.0..180.0).contains(&f));
            let d = (f - b).abs();
            prop_assert!(d < 1e-9 || (180.0 - d) < 1e-9, "{} vs {}", f, b);
        }

        #[test]
        fn saccade_count_is_fixations_minus_one(n in 0usize..30) {
            let f: Vec<_> = (0..n).map(|i| fix(i as f64, 2.0 * i as f64, 100.0 * i as f64, 50.0)).collect();
            prop_assert_eq!(derive_saccades(&f).len(), n.saturating_sub(1));
        }

        #[test]
        fn detection_is_translation_equivariant(
            dx in -500.0..500.0f64, dy in -500.0..500.0f64,
            pts in proptest::collection::vec((0.0..400.0f64, 0.0..300.0f64), 3..8),
        ) {
            // Piecewise-constant stream: each point held for 12 samples.
            let stream: Vec<_> = pts.iter().enumerate().flat_map(|(k, &(x, y))| {
                (0..12).map(move |i| sample(10.0 * (12 * k + i) as f64, x, y))
            }).collect();
            let shifted: Vec<_> = stream.iter().map(|s| GazeSample { x: s.x + dx, y: s.y + dy, ..s.clone() }).collect();
            let p = DetectionParams::default();
            let a = detect_fixations(&stream, &p).unwrap();
            let b = detect_fixations(&shifted, &p).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (fa, fb) in a.iter().zip(&b) {
                prop_assert_eq!(fa.onset, fb.onset);
                prop_assert_eq!(fa.duration, fb.duration);
                prop_assert!((fb.x - fa.x - dx).abs() < 1e-9);
                prop_assert!((fb.y - fa.y - dy).abs() < 1e-9);
            }
        }
    }
}
