//! One-vs-rest linear SVM trained by dual coordinate descent on the hinge
//! loss (L2-regularized, L1-loss), with a constant bias feature.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::EmotionClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    /// Stop when the projected-gradient spread falls below this.
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Value of the constant feature appended to every sample.
    pub bias_feature: f64,
    /// Seeds the per-epoch coordinate permutation.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 10_000,
            bias_feature: 1.0,
            seed: 0,
        }
    }
}

/// One binary hinge-loss model: `f(x) = w . x + b * bias_feature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual coordinate descent with shrinking. `targets` are `+1` / `-1`.
pub fn train_binary(rows: &[&[f64]], targets: &[f64], params: &SvmParams) -> BinaryModel {
    solve(rows, targets, params, vec![0.0; rows.len()]).0
}

/// Runs the solver from a feasible starting point `alpha` (each entry in
/// `[0, C]`) and returns the model together with the final dual variables.
fn solve(rows: &[&[f64]], targets: &[f64], params: &SvmParams, mut alpha: Vec<f64>) -> (BinaryModel, Vec<f64>) {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let c = params.c;
    let bias_sq = params.bias_feature * params.bias_feature;
    let mut w = vec![0.0; dim];
    let mut b = 0.0; // weight of the bias feature
    for (i, &a) in alpha.iter().enumerate() {
        if a != 0.0 {
            let d = a * targets[i];
            for (wj, xj) in w.iter_mut().zip(rows[i]) {
                *wj += d * xj;
            }
            b += d * params.bias_feature;
        }
    }
    let qd: Vec<f64> = rows.iter().map(|r| dot(r, r) + bias_sq).collect();
    let mut index: Vec<usize> = (0..n).collect();
    let mut active = n;
    let mut pg_max_old = f64::INFINITY;
    let mut pg_min_old = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut epochs = 0;
    let mut converged = false;

    while epochs < params.max_epochs {
        epochs += 1;
        index[..active].shuffle(&mut rng);
        let mut pg_max_new = f64::NEG_INFINITY;
        let mut pg_min_new = f64::INFINITY;
        let mut s = 0;
        while s < active {
            let i = index[s];
            let y = targets[i];
            let g = y * (dot(&w, rows[i]) + b * params.bias_feature) - 1.0;
            let mut pg = 0.0;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g < 0.0 {
                    pg = g;
                }
            } else if alpha[i] == c {
                if g < pg_min_old {
                    active -= 1;
                    index.swap(s, active);
                    continue;
                } else if g > 0.0 {
                    pg = g;
                }
            } else {
                pg = g;
            }
            pg_max_new = pg_max_new.max(pg);
            pg_min_new = pg_min_new.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let d = (alpha[i] - old) * y;
                for (wj, xj) in w.iter_mut().zip(rows[i]) {
                    *wj += d * xj;
                }
                b += d * params.bias_feature;
            }
            s += 1;
        }
        if pg_max_new - pg_min_new <= params.tolerance {
            if active == n {
                converged = true;
                break;
            }
            // Re-check every coordinate before declaring convergence.
            active = n;
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max_new <= 0.0 { f64::INFINITY } else { pg_max_new };
        pg_min_old = if pg_min_new >= 0.0 { f64::NEG_INFINITY } else { pg_min_new };
    }
    if !converged {
        log::debug!("dual coordinate descent stopped after {epochs} epochs without converging");
    }
    (
        BinaryModel {
            weights: w,
            bias: b,
            epochs,
            converged,
        },
        alpha,
    )
}

impl BinaryModel {
    pub fn decision(&self, x: &[f64], bias_feature: f64) -> f64 {
        dot(&self.weights, x) + self.bias * bias_feature
    }
}

/// Three one-vs-rest binary models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub models: Vec<BinaryModel>,
    pub c: f64,
    pub bias_feature: f64,
    pub dimension: usize,
    /// Identical training rows carried conflicting labels.
    pub non_separable: bool,
}

impl LinearModel {
    pub fn decision_values(&self, x: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, m) in out.iter_mut().zip(&self.models) {
            *o = m.decision(x, self.bias_feature);
        }
        out
    }

    pub fn predict(&self, x: &[f64]) -> EmotionClass {
        argmax_class(&self.decision_values(x))
    }
}

/// Index of the largest score; ties go to the earlier class.
pub fn argmax_class(scores: &[f64; 3]) -> EmotionClass {
    let mut best = 0;
    for k in 1..3 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    EmotionClass::ALL[best]
}

fn has_conflicting_duplicates(rows: &[&[f64]], labels: &[EmotionClass]) -> bool {
    let mut seen: HashMap<Vec<u64>, EmotionClass> = HashMap::new();
    for (r, &l) in rows.iter().zip(labels) {
        let key: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
        match seen.get(&key) {
            Some(&prev) if prev != l => return true,
            Some(_) => {}
            None => {
                seen.insert(key, l);
            }
        }
    }
    false
}

fn check_input(rows: &[&[f64]], labels: &[EmotionClass], params: &SvmParams) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Domain(format!("C must be positive, got {}", params.c)));
    }
    let dim = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::Contract(format!(
            "row {bad} has dimension {}, expected {dim}",
            rows[bad].len()
        )));
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Domain("training data contains non-finite values".into()));
    }
    Ok(())
}

/// Trains the one-vs-rest model. Classes without samples get an all-negative
/// binary problem.
pub fn train_linear_svm(rows: &[&[f64]], labels: &[EmotionClass], params: &SvmParams) -> Result<LinearModel> {
    Ok(train_linear_svm_path(rows, labels, params, &[params.c])?.remove(0))
}

/// Trains one model per value of `cs`, visiting them in ascending order and
/// warm-starting each solve from the previous dual solution. Models are
/// returned in the order of `cs`.
pub fn train_linear_svm_path(
    rows: &[&[f64]],
    labels: &[EmotionClass],
    params: &SvmParams,
    cs: &[f64],
) -> Result<Vec<LinearModel>> {
    if cs.is_empty() {
        return Err(Error::Contract("empty C grid".into()));
    }
    for &c in cs {
        check_input(rows, labels, &SvmParams { c, ..*params })?;
    }
    let dim = rows[0].len();
    let non_separable = has_conflicting_duplicates(rows, labels);
    if non_separable {
        log::warn!("identical training rows carry conflicting labels; data is not separable");
    }
    let mut order: Vec<usize> = (0..cs.len()).collect();
    order.sort_by(|&a, &b| cs[a].total_cmp(&cs[b]));
    let targets: Vec<Vec<f64>> = EmotionClass::ALL
        .iter()
        .map(|&class| labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect())
        .collect();
    let mut alphas: Vec<Vec<f64>> = vec![vec![0.0; rows.len()]; 3];
    let mut out: Vec<Option<LinearModel>> = vec![None; cs.len()];
    for &k in &order {
        let p = SvmParams { c: cs[k], ..*params };
        let mut models = Vec::with_capacity(3);
        for (t, alpha) in targets.iter().zip(alphas.iter_mut()) {
            let (m, a) = solve(rows, t, &p, std::mem::take(alpha));
            *alpha = a;
            models.push(m);
        }
        out[k] = Some(LinearModel {
            models,
            c: cs[k],
            bias_feature: params.bias_feature,
            dimension: dim,
            non_separable,
        });
    }
    Ok(out.into_iter().map(|m| m.expect("every C visited")).collect())
}
