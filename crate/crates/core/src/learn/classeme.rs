use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::channel::FeatureChannel;
use crate::error::{Error, Result};
use crate::learn::protocol::{evaluate, prepare, CvProtocol};
use crate::learn::EvalReport;
use crate::types::{EmotionClass, ImageId};

/// Number of visual categories in a classeme vector.
pub const CLASSEME_DIM: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceRow {
    pub visual_class: usize,
    pub n_images: usize,
    /// Share of the class's images per emotion class; sums to 1.
    pub fractions: [f64; 3],
    /// Mean emotion index (0 unpleasant, 2 pleasant) of the class's images.
    pub pleasantness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceTable {
    /// Ascending pleasantness, ties by class index.
    pub rows: Vec<CooccurrenceRow>,
    pub priors: [f64; 3],
}

impl CooccurrenceTable {
    pub fn distinct_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("visual_class,n_images,unpleasant,neutral,pleasant,pleasantness\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.visual_class, r.n_images, r.fractions[0], r.fractions[1], r.fractions[2], r.pleasantness
            );
        }
        s
    }
}

/// Groups images by their highest-scoring visual class (first on ties).
pub fn cooccurrence(channel: &FeatureChannel, labels: &BTreeMap<ImageId, EmotionClass>) -> Result<CooccurrenceTable> {
    let mut counts: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    let mut totals = [0usize; 3];
    for (id, v) in &channel.rows {
        let label = labels
            .get(id)
            .ok_or_else(|| Error::Validation(format!("image {id} has no label")))?;
        let mut best = 0;
        for (k, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = k;
            }
        }
        counts.entry(best).or_default()[label.index()] += 1;
        totals[label.index()] += 1;
    }
    let n: usize = totals.iter().sum();
    if n == 0 {
        return Err(Error::InsufficientData("classeme channel is empty".into()));
    }
    let mut rows: Vec<CooccurrenceRow> = counts
        .into_iter()
        .map(|(k, c)| {
            let m: usize = c.iter().sum();
            let fractions = c.map(|x| x as f64 / m as f64);
            let pleasantness = (c[1] + 2 * c[2]) as f64 / m as f64;
            CooccurrenceRow {
                visual_class: k,
                n_images: m,
                fractions,
                pleasantness,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.pleasantness.total_cmp(&b.pleasantness).then(a.visual_class.cmp(&b.visual_class)));
    Ok(CooccurrenceTable {
        rows,
        priors: totals.map(|x| x as f64 / n as f64),
    })
}

/// Protocol run on the raw classeme scores plus the visual-class by emotion
/// co-occurrence table.
pub fn classeme_analysis(
    channel: &FeatureChannel,
    labels: &BTreeMap<ImageId, EmotionClass>,
    protocol: &CvProtocol,
) -> Result<(EvalReport, CooccurrenceTable)> {
    if channel.dimension != CLASSEME_DIM {
        return Err(Error::Validation(format!(
            "classeme channel '{}' has dimension {}, expected {CLASSEME_DIM}",
            channel.name, channel.dimension
        )));
    }
    let report = evaluate(&prepare(&[channel], labels, true)?, protocol)?;
    Ok((report, cooccurrence(channel, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelSource;

    fn setup(rows: Vec<(Vec<f64>, EmotionClass)>) -> (FeatureChannel, BTreeMap<ImageId, EmotionClass>) {
        let dim = rows[0].0.len();
        let mut ch = FeatureChannel::new("cls", dim, ChannelSource::Visual);
        let mut labels = BTreeMap::new();
        for (i, (v, l)) in rows.into_iter().enumerate() {
            let id = ImageId::from(format!("i{i:03}"));
            ch.insert(id.clone(), v).unwrap();
            labels.insert(id, l);
        }
        (ch, labels)
    }

    #[test]
    fn uniform_scores_give_priors() {
        let rows = (0..10)
            .map(|i| (vec![0.25; 4], EmotionClass::ALL[if i < 5 { 0 } else if i < 7 { 1 } else { 2 }]))
            .collect();
        let (ch, labels) = setup(rows);
        let t = cooccurrence(&ch, &labels).unwrap();
        assert_eq!(t.distinct_classes(), 1);
        assert_eq!(t.rows[0].fractions, t.priors);
        assert_eq!(t.priors, [0.5, 0.2, 0.3]);
    }

    #[test]
    fn deterministic_mapping_gives_unit_rows_sorted() {
        let rows = (0..12)
            .map(|i| {
                let k = i % 4;
                let mut v = vec![0.0; 4];
                v[k] = 1.0;
                // classes 0 and 3 pleasant, 1 unpleasant, 2 neutral
                let l = [EmotionClass::Pleasant, EmotionClass::Unpleasant, EmotionClass::Neutral, EmotionClass::Pleasant][k];
                (v, l)
            })
            .collect();
        let (ch, labels) = setup(rows);
        let t = cooccurrence(&ch, &labels).unwrap();
        let order: Vec<usize> = t.rows.iter().map(|r| r.visual_class).collect();
        assert_eq!(order, vec![1, 2, 0, 3]);
        for r in &t.rows {
            assert_eq!(r.fractions.iter().filter(|&&f| f == 1.0).count(), 1);
            assert_eq!(r.fractions.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let (ch, labels) = setup(vec![(vec![1.0; 5], EmotionClass::Neutral)]);
        assert!(classeme_analysis(&ch, &labels, &CvProtocol::default()).is_err());
    }
}
