//! Summary (mean, std) and histogram representations of gaze measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measures that have a histogram representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    FixDuration,
    SacLength,
    SacSlope,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::FixDuration, Measure::SacLength, Measure::SacSlope];

    pub fn bins(self) -> usize {
        match self {
            Measure::FixDuration => 60,
            Measure::SacSlope => 30,
            Measure::SacLength => 50,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::FixDuration => "fix_duration",
            Measure::SacLength => "sac_length",
            Measure::SacSlope => "sac_slope",
        }
    }
}

/// Upper end of the fixed fixation-duration range, milliseconds.
pub const MAX_FIX_DURATION_MS: f64 = 2000.0;

/// Bin layout of one histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub measure: Measure,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl HistogramSpec {
    /// The fixed global layout: durations over `[0, 2000]` ms, slopes in
    /// 6-degree bins over `[0, 180)`, lengths over `[0, image diagonal]`.
    pub fn fixed(measure: Measure, image_diagonal: f64) -> Self {
        let hi = match measure {
            Measure::FixDuration => MAX_FIX_DURATION_MS,
            Measure::SacSlope => 180.0,
            Measure::SacLength => image_diagonal,
        };
        Self {
            measure,
            lo: 0.0,
            hi,
            bins: measure.bins(),
        }
    }

    /// Layout spanning an observed `[min, max]` range (slope stays fixed).
    pub fn spanning(measure: Measure, min: f64, max: f64) -> Self {
        if measure == Measure::SacSlope {
            return Self::fixed(measure, 0.0);
        }
        Self {
            measure,
            lo: min,
            hi: max,
            bins: measure.bins(),
        }
    }

    /// Bin of one value. Slopes must lie in `[0, 180)`; other measures are
    /// clamped into the end bins.
    pub fn bin_of(&self, v: f64) -> Result<usize> {
        if !v.is_finite() {
            return Err(Error::Contract(format!("non-finite {} value", self.measure.name())));
        }
        if self.measure == Measure::SacSlope && !(0.0..180.0).contains(&v) {
            return Err(Error::Contract(format!("saccade slope {v} outside [0, 180)")));
        }
        let width = self.hi - self.lo;
        if !(width > 0.0) {
            return Ok(0);
        }
        let pos = ((v - self.lo) * self.bins as f64 / width).floor();
        Ok(pos.clamp(0.0, (self.bins - 1) as f64) as usize)
    }
}

/// Raw counts per bin.
pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Result<Vec<f64>> {
    let mut counts = vec![0.0; spec.bins];
    for &v in values {
        counts[spec.bin_of(v)?] += 1.0;
    }
    Ok(counts)
}

/// `(mean, std)` with the `n - 1` denominator; a single value has std 0.
pub fn summary_rep(values: &[f64]) -> Result<[f64; 2]> {
    if values.is_empty() {
        return Err(Error::InsufficientData("mean/std of an empty sequence".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok([mean, std])
}
