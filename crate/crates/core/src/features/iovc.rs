//! Inter-observer visual congruency: leave-one-observer-out AUC of each
//! observer's fixations under the density map of everybody else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::density::{cell_of_location, fixation_density_map, MAP_CELLS};
use crate::types::ImageId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IovcScore {
    pub image_id: ImageId,
    pub mean_auc: f64,
    /// Population standard deviation over observers.
    pub std_auc: f64,
    pub per_observer: Vec<f64>,
}

/// Area under the ROC curve of `positives` against `negatives`, integrated
/// with the trapezoid rule over every distinct score threshold.
pub fn roc_auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut scored: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    let (mut tp, mut fp) = (0.0, 0.0);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let (tpr, fpr) = (tp / np, fp / nn);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Some(area)
}

/// AUC of the map cells hit by `fixations` (positives) against all other
/// cells (negatives), scored by `map_values`.
pub fn cell_auc(map_values: &[f64], fixations: &[(f64, f64)], width: f64, height: f64) -> Option<f64> {
    let mut hit = vec![false; MAP_CELLS];
    for &(x, y) in fixations {
        hit[cell_of_location(x, y, width, height)] = true;
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (v, h) in map_values.iter().zip(&hit) {
        if *h {
            pos.push(*v);
        } else {
            neg.push(*v);
        }
    }
    roc_auc(&pos, &neg)
}

/// Leave-one-out congruency of one image. `observers` holds each
/// observer's fixation locations; observers without fixations are ignored.
pub fn iovc(
    image_id: &ImageId,
    observers: &[Vec<(f64, f64)>],
    width: f64,
    height: f64,
    kernel_sigma: f64,
) -> Result<IovcScore> {
    let active: Vec<&Vec<(f64, f64)>> = observers.iter().filter(|o| !o.is_empty()).collect();
    if active.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "image {image_id}: congruency needs at least 2 observers with fixations, got {}",
            active.len()
        )));
    }
    let mut aucs = Vec::with_capacity(active.len());
    for (k, left_out) in active.iter().enumerate() {
        let rest = active
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, o)| o.iter().copied());
        let map = fixation_density_map(rest, width, height, kernel_sigma)?;
        // Every cell hit: no negatives, nothing to rank.
        if let Some(a) = cell_auc(map.values(), left_out, width, height) {
            aucs.push(a);
        }
    }
    if aucs.is_empty() {
        return Err(Error::InsufficientData(format!(
            "image {image_id}: every observer covered all map cells"
        )));
    }
    let n = aucs.len() as f64;
    let mean = aucs.iter().sum::<f64>() / n;
    let std = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(IovcScore {
        image_id: image_id.clone(),
        mean_auc: mean,
        std_auc: std,
        per_observer: aucs,
    })
}
