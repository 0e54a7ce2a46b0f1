//! Repeated, stratified, class-balanced cross-validation.
//!
//! Each repetition shuffles every class, deals the concatenated class lists
//! round-robin into `n_folds` chunks and splits each chunk into a test and a
//! validation part. Fold `f` tests on the test part of chunk `f`, picks C on
//! its validation part and trains on all other chunks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{l1_normalize, ChannelSource, FeatureChannel};
use crate::error::{Error, Result};
use crate::learn::mcnemar::mcnemar_vs_chance;
use crate::learn::svm::{argmax_class, train_linear_svm_path, LinearModel, SvmParams};
use crate::learn::{derive_seed, EvalReport, Prediction};
use crate::stats::t_quantile;
use crate::types::{EmotionClass, ImageId};

pub const DEFAULT_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
/// Fewer samples than this in any class aborts fold construction.
pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvProtocol {
    pub n_folds: usize,
    pub repetitions: usize,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
    pub balance: bool,
    pub c_grid: Vec<f64>,
    pub svm: SvmParams,
}

impl Default for CvProtocol {
    fn default() -> Self {
        Self {
            n_folds: 10,
            repetitions: 20,
            train_ratio: 0.9,
            val_ratio: 0.05,
            test_ratio: 0.05,
            seed: 0,
            balance: true,
            c_grid: DEFAULT_C_GRID.to_vec(),
            svm: SvmParams::default(),
        }
    }
}

impl CvProtocol {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(Error::Validation(format!("n_folds must be at least 2, got {}", self.n_folds)));
        }
        if self.repetitions == 0 {
            return Err(Error::Validation("repetitions must be positive".into()));
        }
        let ratios = [self.train_ratio, self.val_ratio, self.test_ratio];
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Validation(format!("split ratios must be non-negative, got {ratios:?}")));
        }
        if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("split ratios must sum to 1, got {ratios:?}")));
        }
        if self.test_ratio <= 0.0 {
            return Err(Error::Validation("test ratio must be positive".into()));
        }
        // Validation and test share one chunk of size 1 / n_folds.
        if (self.val_ratio + self.test_ratio - 1.0 / self.n_folds as f64).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "val + test ratios ({}) must equal 1 / n_folds ({})",
                self.val_ratio + self.test_ratio,
                1.0 / self.n_folds as f64
            )));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Validation(format!("C grid must be non-empty and positive, got {:?}", self.c_grid)));
        }
        Ok(())
    }
}

/// Samples of one or more channels, aligned by image.
#[derive(Debug, Clone)]
pub(crate) struct Dataset {
    pub names: Vec<String>,
    pub images: Vec<ImageId>,
    pub labels: Vec<EmotionClass>,
    /// `rows[channel][item]`
    pub rows: Vec<Vec<Vec<f64>>>,
}

fn list_ids(ids: &BTreeSet<&ImageId>) -> String {
    const SHOW: usize = 20;
    let mut s: Vec<&str> = ids.iter().take(SHOW).map(|i| i.as_str()).collect();
    if ids.len() > SHOW {
        s.push("...");
    }
    format!("{} ({} total)", s.join(", "), ids.len())
}

/// Aligns channels by image and attaches labels. Visual channels are L1
/// normalized unless `raw` is set.
pub(crate) fn prepare(
    channels: &[&FeatureChannel],
    labels: &BTreeMap<ImageId, EmotionClass>,
    raw: bool,
) -> Result<Dataset> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Contract("no channel given".into()))?;
    let ids: BTreeSet<&ImageId> = first.rows.keys().collect();
    for ch in &channels[1..] {
        let other: BTreeSet<&ImageId> = ch.rows.keys().collect();
        if other != ids {
            let diff: BTreeSet<&ImageId> = ids.symmetric_difference(&other).copied().collect();
            return Err(Error::Validation(format!(
                "channels '{}' and '{}' cover different images; symmetric difference: {}",
                first.name,
                ch.name,
                list_ids(&diff)
            )));
        }
    }
    let mut missing = BTreeSet::new();
    let mut y = Vec::with_capacity(ids.len());
    for id in &ids {
        match labels.get(*id) {
            Some(&l) => y.push(l),
            None => {
                missing.insert(*id);
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Validation(format!("images without a label: {}", list_ids(&missing))));
    }
    let rows = channels
        .iter()
        .map(|ch| {
            ch.rows
                .values()
                .map(|v| {
                    let mut v = v.clone();
                    if !raw && ch.source == ChannelSource::Visual {
                        l1_normalize(&mut v);
                    }
                    v
                })
                .collect()
        })
        .collect();
    Ok(Dataset {
        names: channels.iter().map(|c| c.name.clone()).collect(),
        images: ids.into_iter().cloned().collect(),
        labels: y,
        rows,
    })
}

/// Per-item placement within one repetition.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Assignment {
    pub chunk: Vec<usize>,
    pub test: Vec<bool>,
}

pub(crate) fn assign_folds(labels: &[EmotionClass], protocol: &CvProtocol, rep: usize) -> Assignment {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(protocol.seed, &[0, rep as u64]));
    let mut order = Vec::with_capacity(labels.len());
    for class in EmotionClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let k = protocol.n_folds;
    let share = protocol.test_ratio / (protocol.test_ratio + protocol.val_ratio);
    let mut chunk = vec![0; labels.len()];
    let mut test = vec![false; labels.len()];
    let mut rank = vec![0usize; k];
    for (j, &i) in order.iter().enumerate() {
        let f = j % k;
        let r = rank[f] as f64;
        chunk[i] = f;
        // Spread test items evenly through the chunk.
        test[i] = ((r + 1.0) * share + 0.5).floor() > (r * share + 0.5).floor();
        rank[f] += 1;
    }
    Assignment { chunk, test }
}

/// Training indices for one fold, oversampled within class to the largest
/// class count when balancing.
pub(crate) fn training_set(
    labels: &[EmotionClass],
    assignment: &Assignment,
    fold: usize,
    balance: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let mut by_class: [Vec<usize>; 3] = Default::default();
    for (i, &c) in assignment.chunk.iter().enumerate() {
        if c != fold {
            by_class[labels[i].index()].push(i);
        }
    }
    if let Some(k) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::Protocol(format!(
            "fold {fold} has no training samples of class {}",
            EmotionClass::ALL[k]
        )));
    }
    if balance {
        let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
        for part in by_class.iter_mut() {
            let n = part.len();
            for _ in n..target {
                let pick = part[rng.random_range(0..n)];
                part.push(pick);
            }
        }
    }
    Ok(by_class.concat())
}

/// Mean per-class recall over the classes present in `truth`.
pub fn balanced_accuracy(truth: &[EmotionClass], predicted: &[EmotionClass]) -> f64 {
    let mut hit = [0usize; 3];
    let mut tot = [0usize; 3];
    for (&t, &p) in truth.iter().zip(predicted) {
        tot[t.index()] += 1;
        if t == p {
            hit[t.index()] += 1;
        }
    }
    let present: Vec<f64> = (0..3)
        .filter(|&k| tot[k] > 0)
        .map(|k| hit[k] as f64 / tot[k] as f64)
        .collect();
    if present.is_empty() {
        return f64::NAN;
    }
    present.iter().sum::<f64>() / present.len() as f64
}

#[derive(Debug, Clone)]
struct FoldOutcome {
    test: Vec<usize>,
    predicted: Vec<EmotionClass>,
    /// Index into the C grid, per channel.
    chosen: Vec<usize>,
    non_separable: bool,
}

fn select_model(
    models: Vec<LinearModel>,
    rows: &[Vec<f64>],
    labels: &[EmotionClass],
    val: &[usize],
) -> (usize, LinearModel) {
    let truth: Vec<EmotionClass> = val.iter().map(|&i| labels[i]).collect();
    let mut best = 0;
    let mut best_acc = f64::NEG_INFINITY;
    if !val.is_empty() {
        for (k, m) in models.iter().enumerate() {
            let pred: Vec<EmotionClass> = val.iter().map(|&i| m.predict(&rows[i])).collect();
            let acc = balanced_accuracy(&truth, &pred);
            if acc > best_acc {
                best_acc = acc;
                best = k;
            }
        }
    }
    let model = models.into_iter().nth(best).expect("grid index in range");
    (best, model)
}

/// Z-scores a test-split score matrix using one mean and deviation pooled
/// over every entry. An affine map shared by all classes keeps the argmax.
fn z_normalize(scores: &mut [[f64; 3]]) {
    let n = (scores.len() * 3) as f64;
    let mean = scores.iter().flatten().sum::<f64>() / n;
    let var = scores.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    for v in scores.iter_mut().flatten() {
        *v = (*v - mean) / sd;
    }
}

fn run_fold(
    data: &Dataset,
    assignment: &Assignment,
    protocol: &CvProtocol,
    rep: usize,
    fold: usize,
) -> Result<FoldOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(protocol.seed, &[1, rep as u64, fold as u64]));
    let train = training_set(&data.labels, assignment, fold, protocol.balance, &mut rng)?;
    let in_chunk = |i: &usize| assignment.chunk[*i] == fold;
    let test: Vec<usize> = (0..data.labels.len()).filter(|i| in_chunk(i) && assignment.test[*i]).collect();
    let val: Vec<usize> = (0..data.labels.len()).filter(|i| in_chunk(i) && !assignment.test[*i]).collect();
    let y: Vec<EmotionClass> = train.iter().map(|&i| data.labels[i]).collect();
    let svm = SvmParams {
        seed: derive_seed(protocol.seed, &[2, rep as u64, fold as u64]),
        ..protocol.svm
    };
    let mut chosen = Vec::with_capacity(data.rows.len());
    let mut non_separable = false;
    let mut channel_scores: Vec<Vec<[f64; 3]>> = Vec::with_capacity(data.rows.len());
    for rows in &data.rows {
        let x: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_slice()).collect();
        let models = train_linear_svm_path(&x, &y, &svm, &protocol.c_grid)?;
        let (k, model) = select_model(models, rows, &data.labels, &val);
        non_separable |= model.non_separable;
        chosen.push(k);
        channel_scores.push(test.iter().map(|&i| model.decision_values(&rows[i])).collect());
    }
    let predicted = if channel_scores.len() == 1 {
        channel_scores[0].iter().map(argmax_class).collect()
    } else {
        for s in channel_scores.iter_mut() {
            z_normalize(s);
        }
        let m = channel_scores.len() as f64;
        (0..test.len())
            .map(|t| {
                let mut fused = [0.0; 3];
                for s in &channel_scores {
                    for k in 0..3 {
                        fused[k] += s[t][k];
                    }
                }
                for v in fused.iter_mut() {
                    *v /= m;
                }
                argmax_class(&fused)
            })
            .collect()
    };
    Ok(FoldOutcome {
        test,
        predicted,
        chosen,
        non_separable,
    })
}

/// Correctness of each tested image's plurality prediction over all
/// repetitions (ties go to the earlier class), in image order. An image is
/// one test item no matter how often it was tested, so items stay
/// independent for the McNemar test.
fn consensus_correct(data: &Dataset, predictions: &[Prediction]) -> Vec<bool> {
    let index: BTreeMap<&ImageId, usize> = data.images.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut votes = vec![[0usize; 3]; data.images.len()];
    for p in predictions {
        votes[index[&p.image_id]][p.predicted.index()] += 1;
    }
    votes
        .iter()
        .zip(&data.labels)
        .filter(|(v, _)| v.iter().any(|&n| n > 0))
        .map(|(v, &truth)| {
            let mut best = 0;
            for k in 1..3 {
                if v[k] > v[best] {
                    best = k;
                }
            }
            EmotionClass::ALL[best] == truth
        })
        .collect()
}

pub(crate) fn evaluate(data: &Dataset, protocol: &CvProtocol) -> Result<EvalReport> {
    protocol.validate()?;
    let mut class_counts = [0usize; 3];
    for l in &data.labels {
        class_counts[l.index()] += 1;
    }
    for class in EmotionClass::ALL {
        let n = class_counts[class.index()];
        if n < MIN_PER_CLASS {
            return Err(Error::Protocol(format!(
                "class {class} has {n} sample(s); at least {MIN_PER_CLASS} are required"
            )));
        }
    }
    let assignments: Vec<Assignment> = (0..protocol.repetitions)
        .map(|r| assign_folds(&data.labels, protocol, r))
        .collect();
    let units: Vec<(usize, usize)> = (0..protocol.repetitions)
        .flat_map(|r| (0..protocol.n_folds).map(move |f| (r, f)))
        .collect();
    let outcomes: Vec<FoldOutcome> = units
        .par_iter()
        .map(|&(r, f)| run_fold(data, &assignments[r], protocol, r, f))
        .collect::<Result<_>>()?;

    let mut confusion_counts = [[0u64; 3]; 3];
    let mut per_rep = Vec::with_capacity(protocol.repetitions);
    let mut predictions = Vec::new();
    let mut c_selection = vec![vec![0usize; protocol.c_grid.len()]; data.rows.len()];
    let mut non_separable_folds = 0;
    for (r, chunk) in outcomes.chunks(protocol.n_folds).enumerate() {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (f, o) in chunk.iter().enumerate() {
            non_separable_folds += usize::from(o.non_separable);
            for (ch, &k) in o.chosen.iter().enumerate() {
                c_selection[ch][k] += 1;
            }
            for (&i, &p) in o.test.iter().zip(&o.predicted) {
                let t = data.labels[i];
                confusion_counts[t.index()][p.index()] += 1;
                truth.push(t);
                pred.push(p);
                predictions.push(Prediction {
                    repetition: r,
                    fold: f,
                    image_id: data.images[i].clone(),
                    actual: t,
                    predicted: p,
                });
            }
        }
        per_rep.push(100.0 * balanced_accuracy(&truth, &pred));
    }

    let mut confusion = [[0.0; 3]; 3];
    for (row, counts) in confusion.iter_mut().zip(&confusion_counts) {
        let total: u64 = counts.iter().sum();
        if total > 0 {
            for (v, &c) in row.iter_mut().zip(counts) {
                *v = 100.0 * c as f64 / total as f64;
            }
        }
    }
    let n = per_rep.len() as f64;
    let mean = per_rep.iter().sum::<f64>() / n;
    let ci95 = if per_rep.len() > 1 {
        let sd = (per_rep.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let half = t_quantile(0.975, n - 1.0) * sd / n.sqrt();
        (mean - half, mean + half)
    } else {
        (mean, mean)
    };
    let mcnemar = mcnemar_vs_chance(&consensus_correct(data, &predictions), derive_seed(protocol.seed, &[3]))?;

    Ok(EvalReport {
        channels: data.names.clone(),
        n_images: data.images.len(),
        class_counts,
        n_folds: protocol.n_folds,
        repetitions: protocol.repetitions,
        seed: protocol.seed,
        balance: protocol.balance,
        c_grid: protocol.c_grid.clone(),
        c_selection,
        confusion_counts,
        confusion,
        mean_accuracy: mean,
        ci95,
        mcnemar_p: mcnemar.p,
        mcnemar,
        per_repetition_accuracy: per_rep,
        non_separable_folds,
        predictions,
    })
}

/// Runs the protocol on a single channel.
pub fn run_protocol(
    channel: &FeatureChannel,
    labels: &BTreeMap<ImageId, EmotionClass>,
    protocol: &CvProtocol,
) -> Result<EvalReport> {
    evaluate(&prepare(&[channel], labels, false)?, protocol)
}

/// Late fusion: each channel trains and picks C on the shared folds; test
/// scores are z-scored per channel and averaged before the argmax.
pub fn late_fuse(
    channels: &[&FeatureChannel],
    labels: &BTreeMap<ImageId, EmotionClass>,
    protocol: &CvProtocol,
) -> Result<EvalReport> {
    if channels.len() < 2 {
        return Err(Error::Contract(format!(
            "late fusion needs at least 2 channels, got {}",
            channels.len()
        )));
    }
    evaluate(&prepare(channels, labels, false)?, protocol)
}
