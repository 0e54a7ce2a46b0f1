//! Grouped per-image summaries of gaze measures and box-plot tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Measure;
use crate::ingest::Gender;
use crate::types::{EmotionClass, ObserverId, TrialSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    EmotionClass,
    Gender,
}

/// Five-number summary with Tukey fences (1.5 IQR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPlot {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxPlot {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&s, 0.25);
        let q3 = quantile_sorted(&s, 0.75);
        let iqr = q3 - q1;
        Some(Self {
            min: s[0],
            q1,
            median: quantile_sorted(&s, 0.5),
            q3,
            max: s[s.len() - 1],
            lower_fence: q1 - 1.5 * iqr,
            upper_fence: q3 + 1.5 * iqr,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    /// Number of per-image averages in the group.
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Raw events (fixations or saccades) behind the averages.
    pub n_events: usize,
    pub box_plot: Option<BoxPlot>,
    /// The per-image averages, in image-id order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedSummary {
    pub group_by: GroupBy,
    pub measure: Measure,
    pub groups: Vec<GroupStats>,
}

impl GroupedSummary {
    /// Per-group value vectors, for ANOVA and post-hoc tests.
    pub fn group_values(&self) -> Vec<&[f64]> {
        self.groups.iter().map(|g| g.values.as_slice()).collect()
    }
}

fn stats_of(label: String, values: Vec<f64>, n_events: usize) -> GroupStats {
    let n = values.len();
    let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    GroupStats {
        label,
        n,
        mean,
        std,
        n_events,
        box_plot: BoxPlot::of(&values),
        values,
    }
}

fn events(trials: &TrialSet, image: &crate::types::ImageId, measure: Measure) -> Vec<(ObserverId, f64)> {
    match measure {
        Measure::FixDuration => trials
            .fixations_on(image)
            .iter()
            .map(|f| (f.observer_id.clone(), f.duration))
            .collect(),
        Measure::SacLength => trials
            .saccades_on(image)
            .map(|s| (s.observer_id.clone(), s.length))
            .collect(),
        Measure::SacSlope => trials
            .saccades_on(image)
            .map(|s| (s.observer_id.clone(), s.slope))
            .collect(),
    }
}

/// Averages the measure per image first (pooling observers), then groups
/// the image averages. Gender grouping averages each image separately over
/// each gender's observers and needs the observer sidecar.
pub fn grouped_summary(
    trials: &TrialSet,
    group_by: GroupBy,
    measure: Measure,
    genders: Option<&BTreeMap<ObserverId, Gender>>,
) -> Result<GroupedSummary> {
    let groups = match group_by {
        GroupBy::EmotionClass => {
            let mut values: [Vec<f64>; 3] = Default::default();
            let mut counts = [0usize; 3];
            for (id, rec) in trials.images() {
                let ev = events(trials, id, measure);
                if ev.is_empty() {
                    continue;
                }
                let c = rec.emotion_class.index();
                counts[c] += ev.len();
                values[c].push(ev.iter().map(|e| e.1).sum::<f64>() / ev.len() as f64);
            }
            EmotionClass::ALL
                .iter()
                .zip(values)
                .zip(counts)
                .map(|((c, v), n)| stats_of(c.name().to_owned(), v, n))
                .collect()
        }
        GroupBy::Gender => {
            let genders = genders.ok_or_else(|| {
                Error::Validation("gender grouping requires the observer metadata file".into())
            })?;
            let mut values: BTreeMap<Gender, Vec<f64>> = BTreeMap::new();
            let mut counts: BTreeMap<Gender, usize> = BTreeMap::new();
            let mut unknown = 0usize;
            for id in trials.images().keys() {
                let mut per: BTreeMap<Gender, (f64, usize)> = BTreeMap::new();
                for (obs, v) in events(trials, id, measure) {
                    match genders.get(&obs) {
                        Some(&g) => {
                            let e = per.entry(g).or_default();
                            e.0 += v;
                            e.1 += 1;
                        }
                        None => unknown += 1,
                    }
                }
                for (g, (sum, n)) in per {
                    values.entry(g).or_default().push(sum / n as f64);
                    *counts.entry(g).or_default() += n;
                }
            }
            if unknown > 0 {
                log::warn!("{unknown} event(s) from observers without gender metadata skipped");
            }
            [Gender::Male, Gender::Female]
                .into_iter()
                .map(|g| {
                    stats_of(
                        g.name().to_owned(),
                        values.remove(&g).unwrap_or_default(),
                        counts.get(&g).copied().unwrap_or(0),
                    )
                })
                .collect()
        }
    };
    Ok(GroupedSummary {
        group_by,
        measure,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Fixation, ImageRecord};

    fn fx(o: &str, i: &str, x: f64, t: f64, d: f64) -> Fixation {
        Fixation {
            observer_id: o.into(),
            image_id: i.into(),
            x,
            y: 100.0,
            onset: t,
            duration: d,
            clamped: false,
        }
    }

    fn img(id: &str, sam: f64) -> ImageRecord {
        ImageRecord::new(id.into(), sam, sam, sam, 800.0, 600.0).unwrap()
    }

    #[test]
    fn single_image_group_equals_image_stats() {
        let t = TrialSet::new(
            [img("a", 5.0)],
            vec![fx("o", "a", 0.0, 0.0, 100.0), fx("o", "a", 50.0, 200.0, 300.0)],
        )
        .unwrap();
        let s = grouped_summary(&t, GroupBy::EmotionClass, Measure::FixDuration, None).unwrap();
        let neutral = &s.groups[1];
        assert_eq!(neutral.label, "neutral");
        assert_eq!(neutral.n, 1);
        assert_eq!(neutral.mean, 200.0);
        assert_eq!(neutral.n_events, 2);
        assert_eq!(s.groups[0].n, 0);
    }

    #[test]
    fn planted_shift_is_recovered() {
        let mut images = Vec::new();
        let mut fix = Vec::new();
        for i in 0..6 {
            let (id, sam, d) = if i < 3 {
                (format!("u{i}"), 2.0, 200.0 + i as f64)
            } else {
                (format!("p{i}"), 8.0, 275.0 + (i - 3) as f64)
            };
            images.push(img(&id, sam));
            fix.push(fx("o", &id, 1.0, 0.0, d));
        }
        let t = TrialSet::new(images, fix).unwrap();
        let s = grouped_summary(&t, GroupBy::EmotionClass, Measure::FixDuration, None).unwrap();
        assert_eq!(s.groups[2].mean - s.groups[0].mean, 75.0);
    }

    #[test]
    fn gender_grouping_needs_sidecar() {
        let t = TrialSet::new(
            [img("a", 5.0)],
            vec![fx("m1", "a", 0.0, 0.0, 100.0), fx("f1", "a", 0.0, 0.0, 300.0)],
        )
        .unwrap();
        assert!(grouped_summary(&t, GroupBy::Gender, Measure::FixDuration, None).is_err());
        let g: BTreeMap<ObserverId, Gender> =
            [("m1".into(), Gender::Male), ("f1".into(), Gender::Female)].into_iter().collect();
        let s = grouped_summary(&t, GroupBy::Gender, Measure::FixDuration, Some(&g)).unwrap();
        assert_eq!(s.groups[0].mean, 100.0);
        assert_eq!(s.groups[1].mean, 300.0);
    }

    #[test]
    fn box_plot_quartiles() {
        let b = BoxPlot::of(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!((b.lower_fence, b.upper_fence), (-1.0, 7.0));
        assert!(BoxPlot::of(&[]).is_none());
    }
}
