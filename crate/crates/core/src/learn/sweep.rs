use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_channel, FeatureKind, FeatureParams};
use crate::learn::protocol::{run_protocol, CvProtocol};
use crate::learn::derive_seed;
use crate::stats::t_quantile;
use crate::types::{ObserverId, TrialSet};

/// One point of the accuracy-versus-observers curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n_observers: usize,
    pub subsets: usize,
    /// Mean over every repetition of every subset.
    pub mean_accuracy: f64,
    pub ci95: (f64, f64),
    pub per_subset_accuracy: Vec<f64>,
}

fn t_interval(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let half = t_quantile(0.975, n - 1.0) * sd / n.sqrt();
    (mean, mean - half, mean + half)
}

/// For each `n`, draws `subsets_per_n` observer subsets of size `n`, rebuilds
/// the fixation density channel from those observers and runs the protocol.
/// With `n` equal to the observer count a single subset is used, so that
/// point reproduces the plain density-map run.
pub fn observer_sweep(
    trials: &TrialSet,
    protocol: &CvProtocol,
    params: &FeatureParams,
    n_values: &[usize],
    subsets_per_n: usize,
) -> Result<Vec<SweepPoint>> {
    let observers: Vec<&ObserverId> = trials.observers().iter().collect();
    let total = observers.len();
    if subsets_per_n == 0 {
        return Err(Error::Validation("subsets per n must be positive".into()));
    }
    let labels = trials.labels();
    let mut points = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n == 0 || n > total {
            return Err(Error::Validation(format!(
                "observer count {n} outside 1..={total}"
            )));
        }
        let count = if n == total { 1 } else { subsets_per_n };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(protocol.seed, &[4, n as u64]));
        let mut per_subset = Vec::with_capacity(count);
        let mut pooled = Vec::with_capacity(count * protocol.repetitions);
        for _ in 0..count {
            let report = if n == total {
                let ch = build_channel(trials, FeatureKind::Fdm, params)?.channel;
                run_protocol(&ch, &labels, protocol)?
            } else {
                let keep: BTreeSet<ObserverId> = rand::seq::index::sample(&mut rng, total, n)
                    .into_iter()
                    .map(|i| observers[i].clone())
                    .collect();
                let sub = trials.restrict_to_observers(&keep);
                let ch = build_channel(&sub, FeatureKind::Fdm, params)?.channel;
                run_protocol(&ch, &labels, protocol)?
            };
            per_subset.push(report.mean_accuracy);
            pooled.extend_from_slice(&report.per_repetition_accuracy);
        }
        let (mean, lo, hi) = t_interval(&pooled);
        log::info!("observer sweep n = {n}: mA = {mean:.2}");
        points.push(SweepPoint {
            n_observers: n,
            subsets: count,
            mean_accuracy: mean,
            ci95: (lo, hi),
            per_subset_accuracy: per_subset,
        });
    }
    Ok(points)
}

/// Plot-ready table: `n_observers,subsets,mean_accuracy,ci_lo,ci_hi`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("n_observers,subsets,mean_accuracy,ci_lo,ci_hi\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p.n_observers, p.subsets, p.mean_accuracy, p.ci95.0, p.ci95.1
        ));
    }
    s
}
