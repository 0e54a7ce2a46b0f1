//! Per-image feature channels, gaze-derived or loaded from disk.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ImageId;

/// Where a channel's vectors come from. Visual channels are L1-normalized
/// before training; gaze channels are used as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelSource {
    Gaze,
    Visual,
}

impl fmt::Display for ChannelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelSource::Gaze => "gaze",
            ChannelSource::Visual => "visual",
        })
    }
}

/// One feature vector of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub image_id: ImageId,
    pub channel_name: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// A named set of equal-length vectors keyed by image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChannel {
    pub name: String,
    pub dimension: usize,
    pub source: ChannelSource,
    pub rows: BTreeMap<ImageId, Vec<f64>>,
}

impl FeatureChannel {
    pub fn new(name: impl Into<String>, dimension: usize, source: ChannelSource) -> Self {
        Self {
            name: name.into(),
            dimension,
            source,
            rows: BTreeMap::new(),
        }
    }

    /// Inserts a row, rejecting wrong dimensions and duplicate images.
    pub fn insert(&mut self, image: ImageId, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dimension {
            return Err(Error::Validation(format!(
                "channel {}: image {image} has {} values, expected {}",
                self.name,
                values.len(),
                self.dimension
            )));
        }
        if self.rows.contains_key(&image) {
            return Err(Error::Validation(format!(
                "channel {}: duplicate image {image}",
                self.name
            )));
        }
        self.rows.insert(image, values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, image: &ImageId) -> Option<&[f64]> {
        self.rows.get(image).map(Vec::as_slice)
    }

    pub fn vectors(&self) -> impl Iterator<Item = FeatureVector> + '_ {
        self.rows.iter().map(|(id, v)| FeatureVector {
            image_id: id.clone(),
            channel_name: self.name.clone(),
            values: v.clone(),
        })
    }

    /// Copy restricted to the given images (missing ones are skipped).
    pub fn subset<'a>(&self, images: impl IntoIterator<Item = &'a ImageId>) -> FeatureChannel {
        let mut out = FeatureChannel::new(self.name.clone(), self.dimension, self.source);
        for id in images {
            if let Some(v) = self.rows.get(id) {
                out.rows.insert(id.clone(), v.clone());
            }
        }
        out
    }
}

/// Divides a vector by its L1 norm; all-zero vectors are left untouched.
pub fn l1_normalize(values: &mut [f64]) {
    let norm: f64 = values.iter().map(|v| v.abs()).sum();
    if norm > 0.0 {
        for v in values {
            *v /= norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_checks_dimension_and_uniqueness() {
        let mut c = FeatureChannel::new("c", 2, ChannelSource::Gaze);
        c.insert("a".into(), vec![1.0, 2.0]).unwrap();
        assert!(c.insert("b".into(), vec![1.0]).is_err());
        assert!(c.insert("a".into(), vec![1.0, 2.0]).is_err());
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn l1_normalization() {
        let mut v = vec![1.0, -3.0, 0.0];
        l1_normalize(&mut v);
        assert_eq!(v, vec![0.25, -0.75, 0.0]);
        let mut z = vec![0.0; 3];
        l1_normalize(&mut z);
        assert_eq!(z, vec![0.0; 3]);
    }
}
