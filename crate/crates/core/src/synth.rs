//! Synthetic gaze sessions with planted, class-conditional distributions.
//!
//! Every trial draws from its own generator, seeded by an FNV-1a hash of the
//! root seed, observer id and image id, so output does not depend on the
//! order in which trials are produced.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, Gender};
use crate::types::{EmotionClass, Fixation, GazeSample, ImageId, ImageRecord, ObserverId, Scenario, TrialSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    /// Mean of `ln(duration_ms)`.
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    /// Scale in pixels; the mean is `shape * scale`.
    pub scale: f64,
}

/// Axial von Mises on slopes: the doubled angle `2 * slope` is von Mises
/// with mean `2 * mean_deg` and concentration `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeParams {
    pub mean_deg: f64,
    pub kappa: f64,
}

/// Diagonal normal in normalized coordinates (`[-1, 1]`, centre at 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistributions {
    pub duration: LogNormalParams,
    pub saccade_length: GammaParams,
    pub slope: SlopeParams,
    pub spatial: SpatialParams,
    /// Poisson mean of fixations per trial.
    pub fixations_per_trial: f64,
}

impl Default for ClassDistributions {
    fn default() -> Self {
        Self {
            duration: LogNormalParams {
                mu: 250f64.ln(),
                sigma: 0.45,
            },
            saccade_length: GammaParams {
                shape: 4.0,
                scale: 37.5,
            },
            slope: SlopeParams {
                mean_deg: 0.0,
                kappa: 1.0,
            },
            spatial: SpatialParams {
                mu: [0.0, 0.0],
                sigma: [0.35, 0.35],
            },
            fixations_per_trial: 12.0,
        }
    }
}

/// How fixation positions are placed within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialLayout {
    /// Every fixation drawn independently from the spatial bias. Saccade
    /// lengths and slopes follow from the positions.
    Independent,
    /// First fixation from the spatial bias, then jumps with planted length
    /// and slope. A jump leaving the image is reversed (keeping length and
    /// slope) and clamped only if both directions leave it.
    Scanpath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub n_images_per_class: usize,
    pub n_observers: usize,
    pub image_width: f64,
    pub image_height: f64,
    /// Unpleasant, neutral, pleasant.
    pub classes: [ClassDistributions; 3],
    pub layout: SpatialLayout,
    /// Share of each class's images listed in s95, s296 and s382.
    pub scenario_fractions: [f64; 3],
    pub female_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            n_images_per_class: 20,
            n_observers: 10,
            image_width: 1024.0,
            image_height: 768.0,
            classes: [ClassDistributions::default(); 3],
            layout: SpatialLayout::Scanpath,
            scenario_fractions: [0.25, 0.775, 1.0],
            female_fraction: 0.5,
            seed: 0,
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(what()))
    }
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<()> {
        check(self.n_images_per_class > 0, || "n_images_per_class must be positive".into())?;
        check(self.n_observers > 0, || "n_observers must be positive".into())?;
        check(
            self.image_width >= 2.0 && self.image_height >= 2.0 && self.image_width.is_finite() && self.image_height.is_finite(),
            || format!("bad image size {}x{}", self.image_width, self.image_height),
        )?;
        for (c, d) in EmotionClass::ALL.iter().zip(&self.classes) {
            let pos = |v: f64| v > 0.0 && v.is_finite();
            check(d.duration.mu.is_finite() && pos(d.duration.sigma), || format!("{c}: bad duration parameters"))?;
            check(pos(d.saccade_length.shape) && pos(d.saccade_length.scale), || {
                format!("{c}: bad saccade-length parameters")
            })?;
            check(d.slope.mean_deg.is_finite() && d.slope.kappa >= 0.0 && d.slope.kappa.is_finite(), || {
                format!("{c}: bad slope parameters")
            })?;
            check(
                d.spatial.mu.iter().all(|m| m.is_finite()) && d.spatial.sigma.iter().all(|&s| pos(s)),
                || format!("{c}: bad spatial parameters"),
            )?;
            check(pos(d.fixations_per_trial), || format!("{c}: fixations_per_trial must be positive"))?;
        }
        check(
            self.scenario_fractions.iter().all(|f| (0.0..=1.0).contains(f)),
            || "scenario fractions must lie in [0, 1]".into(),
        )?;
        check((0.0..=1.0).contains(&self.female_fraction), || "female_fraction must lie in [0, 1]".into())
    }

    pub fn observer_ids(&self) -> Vec<ObserverId> {
        (1..=self.n_observers).map(|i| ObserverId::from(format!("obs{i:03}"))).collect()
    }

    /// Image ids cycle through the classes: the `i`-th image has class `i % 3`.
    pub fn image_ids(&self) -> Vec<(ImageId, EmotionClass)> {
        (0..3 * self.n_images_per_class)
            .map(|i| (ImageId::from(format!("img{:04}", i + 1)), EmotionClass::ALL[i % 3]))
            .collect()
    }
}

/// FNV-1a over the root seed and the given strings, with separators.
pub fn trial_seed(seed: u64, parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    };
    for b in seed.to_le_bytes() {
        eat(b);
    }
    for p in parts {
        eat(0xff);
        for &b in p.as_bytes() {
            eat(b);
        }
    }
    h
}

/// Von Mises sample in radians on `(-pi, pi]` around `mu` (Best and Fisher).
pub fn sample_von_mises<R: Rng + ?Sized>(rng: &mut R, mu: f64, kappa: f64) -> f64 {
    let wrap = |a: f64| {
        let w = (a + PI).rem_euclid(2.0 * PI) - PI;
        if w == -PI {
            PI
        } else {
            w
        }
    };
    if kappa < 1e-8 {
        return wrap(mu + rng.random_range(-PI..PI));
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return wrap(if u3 > 0.5 { mu + theta } else { mu - theta });
        }
    }
}

/// Slope in `[0, 180)` degrees from the axial von Mises.
pub fn sample_slope<R: Rng + ?Sized>(rng: &mut R, p: &SlopeParams) -> f64 {
    let doubled = sample_von_mises(rng, (2.0 * p.mean_deg).to_radians(), p.kappa);
    let s = (doubled.to_degrees() / 2.0).rem_euclid(180.0);
    if s >= 180.0 {
        0.0
    } else {
        s
    }
}

/// Planted ground truth of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub observer_id: ObserverId,
    pub image_id: ImageId,
    pub emotion_class: EmotionClass,
    pub n_fixations: usize,
    pub n_saccades: usize,
    /// Jumps that had to be clamped to the image, changing length and slope.
    pub n_clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLedger {
    pub scenario: SyntheticScenario,
    pub trials: Vec<TrialRecord>,
    pub fixations_per_class: [usize; 3],
    pub images_per_class: [usize; 3],
    pub total_fixations: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub trials: TrialSet,
    pub genders: BTreeMap<ObserverId, Gender>,
    pub scenario_lists: BTreeMap<Scenario, Vec<ImageId>>,
    pub ledger: GroundTruthLedger,
}

fn sam_for<R: Rng>(rng: &mut R, class: EmotionClass) -> f64 {
    match class {
        EmotionClass::Unpleasant => rng.random_range(1.5..3.5),
        EmotionClass::Neutral => rng.random_range(4.2..5.8),
        EmotionClass::Pleasant => rng.random_range(6.5..8.5),
    }
}

struct Sampler<'a> {
    d: &'a ClassDistributions,
    w: f64,
    h: f64,
    x_norm: Normal<f64>,
    y_norm: Normal<f64>,
}

impl<'a> Sampler<'a> {
    fn new(d: &'a ClassDistributions, w: f64, h: f64) -> Result<Self> {
        let n = |m: f64, s: f64| Normal::new(m, s).map_err(|e| Error::Validation(e.to_string()));
        Ok(Self {
            d,
            w,
            h,
            x_norm: n(d.spatial.mu[0], d.spatial.sigma[0])?,
            y_norm: n(d.spatial.mu[1], d.spatial.sigma[1])?,
        })
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        (0.0..=self.w - 1.0).contains(&x) && (0.0..=self.h - 1.0).contains(&y)
    }

    /// Spatial-bias draw, rejecting points off the image.
    fn position<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        for _ in 0..1000 {
            let x = (self.x_norm.sample(rng) + 1.0) * self.w / 2.0;
            let y = (self.y_norm.sample(rng) + 1.0) * self.h / 2.0;
            if self.inside(x, y) {
                return (x, y);
            }
        }
        let x = ((self.d.spatial.mu[0] + 1.0) * self.w / 2.0).clamp(0.0, self.w - 1.0);
        let y = ((self.d.spatial.mu[1] + 1.0) * self.h / 2.0).clamp(0.0, self.h - 1.0);
        (x, y)
    }
}

fn generate_trial(
    scenario: &SyntheticScenario,
    observer: &ObserverId,
    image: &ImageId,
    class: EmotionClass,
) -> Result<(Vec<Fixation>, TrialRecord)> {
    let d = &scenario.classes[class.index()];
    let (w, h) = (scenario.image_width, scenario.image_height);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(scenario.seed, &[observer.as_str(), image.as_str()]));
    let bad = |e: &dyn std::fmt::Display| Error::Validation(format!("{class}: {e}"));
    let count = Poisson::new(d.fixations_per_trial).map_err(|e| bad(&e))?.sample(&mut rng) as usize;
    let durations = LogNormal::new(d.duration.mu, d.duration.sigma).map_err(|e| bad(&e))?;
    let lengths = Gamma::new(d.saccade_length.shape, d.saccade_length.scale).map_err(|e| bad(&e))?;
    let sampler = Sampler::new(d, w, h)?;

    let mut fixations = Vec::with_capacity(count);
    let mut onset = 0.0;
    let mut clamped = 0;
    let (mut x, mut y) = sampler.position(&mut rng);
    for k in 0..count {
        if k > 0 {
            match scenario.layout {
                SpatialLayout::Independent => (x, y) = sampler.position(&mut rng),
                SpatialLayout::Scanpath => {
                    let len = lengths.sample(&mut rng);
                    let mut theta = sample_slope(&mut rng, &d.slope).to_radians();
                    if rng.random_bool(0.5) {
                        theta += PI;
                    }
                    let (dx, dy) = (len * theta.cos(), len * theta.sin());
                    if sampler.inside(x + dx, y + dy) {
                        (x, y) = (x + dx, y + dy);
                    } else if sampler.inside(x - dx, y - dy) {
                        (x, y) = (x - dx, y - dy);
                    } else {
                        clamped += 1;
                        (x, y) = ((x + dx).clamp(0.0, w - 1.0), (y + dy).clamp(0.0, h - 1.0));
                    }
                }
            }
            let prev: &Fixation = &fixations[k - 1];
            let jump = (x - prev.x).hypot(y - prev.y);
            // Saccade time grows with amplitude.
            onset = prev.offset() + (20.0 + jump / 10.0).round();
        }
        let duration = durations.sample(&mut rng).max(1.0);
        fixations.push(Fixation {
            observer_id: observer.clone(),
            image_id: image.clone(),
            x,
            y,
            onset,
            duration,
            clamped: false,
        });
    }
    let record = TrialRecord {
        observer_id: observer.clone(),
        image_id: image.clone(),
        emotion_class: class,
        n_fixations: fixations.len(),
        n_saccades: fixations.len().saturating_sub(1),
        n_clamped: clamped,
    };
    Ok((fixations, record))
}

/// Generates a complete synthetic dataset and its ground-truth ledger.
pub fn generate(scenario: &SyntheticScenario) -> Result<SyntheticDataset> {
    scenario.validate()?;
    let images = scenario.image_ids();
    let observers = scenario.observer_ids();

    let mut records = Vec::with_capacity(images.len());
    let mut per_class_rank = [0usize; 3];
    let mut scenario_lists: BTreeMap<Scenario, Vec<ImageId>> = BTreeMap::new();
    for (id, class) in &images {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(scenario.seed, &["image", id.as_str()]));
        let all = sam_for(&mut rng, *class);
        let mut jitter = |v: f64| (v + rng.random_range(-0.3..0.3)).clamp(1.0, 9.0);
        let (male, female) = (jitter(all), jitter(all));
        let mut rec = ImageRecord::new(id.clone(), all, male, female, scenario.image_width, scenario.image_height)?;
        let rank = per_class_rank[class.index()];
        per_class_rank[class.index()] += 1;
        for (s, frac) in [Scenario::S95, Scenario::S296, Scenario::S382].into_iter().zip(scenario.scenario_fractions) {
            let cutoff = (frac * scenario.n_images_per_class as f64).round() as usize;
            if rank < cutoff {
                rec.scenarios.set(s, true);
                scenario_lists.entry(s).or_default().push(id.clone());
            }
        }
        records.push(rec);
    }

    let mut fixations = Vec::new();
    let mut trials = Vec::with_capacity(images.len() * observers.len());
    let mut fixations_per_class = [0usize; 3];
    for o in &observers {
        for (id, class) in &images {
            let (f, rec) = generate_trial(scenario, o, id, *class)?;
            fixations_per_class[class.index()] += f.len();
            fixations.extend(f);
            trials.push(rec);
        }
    }
    let total_fixations = fixations.len();
    let trial_set = TrialSet::new(records, fixations)?;

    let n_female = (scenario.female_fraction * observers.len() as f64).round() as usize;
    let genders = observers
        .iter()
        .enumerate()
        .map(|(i, o)| (o.clone(), if i < n_female { Gender::Female } else { Gender::Male }))
        .collect();

    Ok(SyntheticDataset {
        trials: trial_set,
        genders,
        scenario_lists,
        ledger: GroundTruthLedger {
            scenario: scenario.clone(),
            trials,
            fixations_per_class,
            images_per_class: [scenario.n_images_per_class; 3],
            total_fixations,
        },
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// File names used by [`write_dataset`].
pub mod files {
    pub const FIXATIONS: &str = "fixations.csv";
    pub const METADATA: &str = "metadata.csv";
    pub const OBSERVERS: &str = "observers.csv";
    pub const LEDGER: &str = "ledger.json";
    pub const SCENARIOS_DIR: &str = "scenarios";
}

/// Writes the dataset in the ingest CSV schemas plus `ledger.json`.
pub fn write_dataset(dir: &Path, data: &SyntheticDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ingest::write_fixation_log(create(&dir.join(files::FIXATIONS))?, data.trials.fixations())?;
    let images: Vec<ImageRecord> = data.trials.images().values().cloned().collect();
    ingest::write_metadata(create(&dir.join(files::METADATA))?, &images)?;
    ingest::write_observer_genders(create(&dir.join(files::OBSERVERS))?, &data.genders)?;
    let sdir = dir.join(files::SCENARIOS_DIR);
    fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
    for s in [Scenario::S95, Scenario::S296, Scenario::S382] {
        let ids = data.scenario_lists.get(&s).map(Vec::as_slice).unwrap_or(&[]);
        ingest::write_scenario_list(create(&sdir.join(format!("{}.txt", s.name())))?, ids)?;
    }
    let ledger = dir.join(files::LEDGER);
    let mut json = serde_json::to_string_pretty(&data.ledger)?;
    json.push('\n');
    fs::write(&ledger, json).map_err(|e| Error::io(&ledger, e))
}

/// Raw-sample scenario mirroring the recording setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimelineScenario {
    pub n_observers: usize,
    pub n_images: usize,
    pub image_width: f64,
    pub image_height: f64,
    pub rate_hz: f64,
    pub trial_ms: f64,
    pub min_fixation_ms: f64,
    pub max_fixation_ms: f64,
    /// Minimum distance between consecutive planted fixations.
    pub min_jump_px: f64,
    /// Linearly interpolated samples between fixations (inclusive range).
    pub transition_samples: (usize, usize),
    /// Per-axis Gaussian noise added to every sample.
    pub jitter_px: f64,
    pub seed: u64,
}

impl Default for TimelineScenario {
    fn default() -> Self {
        Self {
            n_observers: 2,
            n_images: 3,
            image_width: 1024.0,
            image_height: 768.0,
            rate_hz: 60.0,
            trial_ms: 5000.0,
            min_fixation_ms: 150.0,
            max_fixation_ms: 400.0,
            min_jump_px: 150.0,
            transition_samples: (1, 2),
            jitter_px: 0.0,
            seed: 0,
        }
    }
}

impl TimelineScenario {
    pub fn samples_per_trial(&self) -> usize {
        (self.trial_ms * self.rate_hz / 1000.0).round() as usize
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.rate_hz
    }
}

/// A planted fixation covering samples `first..=last` of its trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFixation {
    pub observer_id: ObserverId,
    pub image_id: ImageId,
    pub first: usize,
    pub last: usize,
    pub onset: f64,
    pub duration: f64,
    pub x: f64,
    pub y: f64,
}

/// Raw sample streams with planted fixations, jumps of at least
/// `min_jump_px` and interpolated transition samples. Trials are emitted
/// sorted by (observer, image).
pub fn generate_trial_timeline(s: &TimelineScenario) -> Result<(Vec<GazeSample>, Vec<PlantedFixation>)> {
    check(s.rate_hz > 0.0 && s.trial_ms > 0.0, || "rate and trial length must be positive".into())?;
    check(s.jitter_px >= 0.0, || "jitter must be non-negative".into())?;
    check(
        s.min_fixation_ms > 0.0 && s.max_fixation_ms >= s.min_fixation_ms,
        || "bad fixation duration range".into(),
    )?;
    check(s.transition_samples.0 <= s.transition_samples.1, || "bad transition range".into())?;
    check(
        s.min_jump_px * 3.0 < s.image_width.min(s.image_height),
        || "min_jump_px too large for the image".into(),
    )?;
    let period = s.period_ms();
    let total = s.samples_per_trial();
    let min_len = (s.min_fixation_ms / period - 1e-9).ceil() as usize;
    let max_len = ((s.max_fixation_ms / period + 1e-9).floor() as usize).max(min_len);
    let noise = Normal::new(0.0, s.jitter_px.max(f64::MIN_POSITIVE)).map_err(|e| Error::Validation(e.to_string()))?;
    let margin = 20.0;
    let (w, h) = (s.image_width, s.image_height);

    let mut samples = Vec::with_capacity(s.n_observers * s.n_images * total);
    let mut planted = Vec::new();
    for oi in 1..=s.n_observers {
        let observer = ObserverId::from(format!("obs{oi:03}"));
        for ii in 1..=s.n_images {
            let image = ImageId::from(format!("img{ii:04}"));
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(s.seed, &[observer.as_str(), image.as_str()]));
            let mut pos = 0;
            let mut prev: Option<(f64, f64)> = None;
            let mut path: Vec<(f64, f64)> = Vec::with_capacity(total);
            while pos < total {
                let target = match prev {
                    None => (rng.random_range(margin..w - margin), rng.random_range(margin..h - margin)),
                    Some((px, py)) => loop {
                        let c = (rng.random_range(margin..w - margin), rng.random_range(margin..h - margin));
                        if (c.0 - px).hypot(c.1 - py) >= s.min_jump_px {
                            break c;
                        }
                    },
                };
                if let Some((px, py)) = prev {
                    let n_tr = rng.random_range(s.transition_samples.0..=s.transition_samples.1);
                    for k in 1..=n_tr {
                        if pos >= total {
                            break;
                        }
                        let a = k as f64 / (n_tr + 1) as f64;
                        path.push((px + a * (target.0 - px), py + a * (target.1 - py)));
                        pos += 1;
                    }
                }
                if pos >= total {
                    break;
                }
                let mut len = rng.random_range(min_len..=max_len);
                // The last fixation absorbs a remainder too short for another.
                if pos + len + s.transition_samples.1 + min_len > total {
                    len = total - pos;
                }
                len = len.min(total - pos);
                let first = pos;
                for _ in 0..len {
                    path.push(target);
                }
                pos += len;
                planted.push(PlantedFixation {
                    observer_id: observer.clone(),
                    image_id: image.clone(),
                    first,
                    last: pos - 1,
                    onset: first as f64 * period,
                    duration: len as f64 * period,
                    x: target.0,
                    y: target.1,
                });
                prev = Some(target);
            }
            for (i, (x, y)) in path.into_iter().enumerate() {
                let (jx, jy) = if s.jitter_px > 0.0 {
                    (noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    (0.0, 0.0)
                };
                samples.push(GazeSample {
                    observer_id: observer.clone(),
                    image_id: image.clone(),
                    t: i as f64 * period,
                    x: x + jx,
                    y: y + jy,
                    valid: true,
                });
            }
        }
    }
    Ok((samples, planted))
}
