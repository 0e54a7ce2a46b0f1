//! Diagonal 2-D normal fitted to fixation locations in normalized image
//! coordinates (`[-1, 1]` on both axes, image centre at the origin, y down).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::TrialSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterBiasModel {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub n: usize,
    /// Set when a per-axis standard deviation is zero.
    pub degenerate: bool,
}

pub fn normalize_location(x: f64, y: f64, width: f64, height: f64) -> (f64, f64) {
    (2.0 * x / width - 1.0, 2.0 * y / height - 1.0)
}

/// Sample mean and per-axis sample standard deviation (`n - 1`).
pub fn fit_center_bias(points: &[(f64, f64)]) -> Result<CenterBiasModel> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "center bias needs at least 2 fixations, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let vx = points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let vy = points.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = [vx.sqrt(), vy.sqrt()];
    let degenerate = sigma.contains(&0.0);
    if degenerate {
        log::warn!("center bias fit is degenerate (sigma = {sigma:?})");
    }
    Ok(CenterBiasModel {
        mu: [mx, my],
        sigma,
        n: points.len(),
        degenerate,
    })
}

/// Fits the model to every fixation of a trial set, each normalized by its
/// own image's size.
pub fn fit_center_bias_trials(trials: &TrialSet) -> Result<CenterBiasModel> {
    let pts: Vec<(f64, f64)> = trials
        .fixations()
        .iter()
        .map(|f| {
            let r = &trials.images()[&f.image_id];
            normalize_location(f.x, f.y, r.width, r.height)
        })
        .collect();
    fit_center_bias(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn centred_fixations_are_degenerate() {
        let pts = vec![normalize_location(512.0, 384.0, 1024.0, 768.0); 5];
        let m = fit_center_bias(&pts).unwrap();
        assert_eq!(m.mu, [0.0, 0.0]);
        assert_eq!(m.sigma, [0.0, 0.0]);
        assert!(m.degenerate);
    }

    #[test]
    fn needs_two_points() {
        assert!(fit_center_bias(&[(0.0, 0.0)]).is_err());
    }

    #[test]
    fn corners_map_to_unit_square() {
        assert_eq!(normalize_location(0.0, 0.0, 100.0, 50.0), (-1.0, -1.0));
        assert_eq!(normalize_location(100.0, 50.0, 100.0, 50.0), (1.0, 1.0));
    }

    proptest! {
        #[test]
        fn fit_is_shift_equivariant(
            pts in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..50),
            dx in -0.5..0.5f64, dy in -0.5..0.5f64,
        ) {
            let a = fit_center_bias(&pts).unwrap();
            let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
            let b = fit_center_bias(&shifted).unwrap();
            prop_assert!((b.mu[0] - a.mu[0] - dx).abs() < 1e-9);
            prop_assert!((b.mu[1] - a.mu[1] - dy).abs() < 1e-9);
            prop_assert!((b.sigma[0] - a.sigma[0]).abs() < 1e-9);
            prop_assert!((b.sigma[1] - a.sigma[1]).abs() < 1e-9);
        }
    }
}
