//! Classification and evaluation.

pub mod classeme;
pub mod mcnemar;
pub mod protocol;
pub mod svm;
pub mod sweep;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::types::{EmotionClass, ImageId};

pub use classeme::{classeme_analysis, CooccurrenceRow, CooccurrenceTable, CLASSEME_DIM};
pub use mcnemar::{mcnemar_paired, mcnemar_test, mcnemar_vs_chance, McNemar};
pub use protocol::{balanced_accuracy, late_fuse, run_protocol, CvProtocol, DEFAULT_C_GRID, MIN_PER_CLASS};
pub use svm::{argmax_class, train_binary, train_linear_svm, train_linear_svm_path, BinaryModel, LinearModel, SvmParams};
pub use sweep::{observer_sweep, SweepPoint};

/// Mixes a root seed with a path of integers (splitmix64 finalizer per step).
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(root), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub repetition: usize,
    pub fold: usize,
    pub image_id: ImageId,
    pub actual: EmotionClass,
    pub predicted: EmotionClass,
}

/// Outcome of a protocol run. Accuracies and confusion entries are percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub channels: Vec<String>,
    pub n_images: usize,
    pub class_counts: [usize; 3],
    pub n_folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub balance: bool,
    pub c_grid: Vec<f64>,
    /// How often each grid value was selected, per channel.
    pub c_selection: Vec<Vec<usize>>,
    /// Rows are actual classes, columns predicted.
    pub confusion_counts: [[u64; 3]; 3],
    pub confusion: [[f64; 3]; 3],
    pub mean_accuracy: f64,
    pub ci95: (f64, f64),
    pub mcnemar_p: f64,
    pub mcnemar: McNemar,
    pub per_repetition_accuracy: Vec<f64>,
    pub non_separable_folds: usize,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Aligned confusion matrix followed by the headline numbers.
    pub fn to_text(&self) -> String {
        let names: Vec<&str> = EmotionClass::ALL.iter().map(|c| c.name()).collect();
        let w = names.iter().map(|n| n.len()).max().unwrap_or(0).max(8);
        let mut s = String::new();
        let _ = writeln!(s, "channels: {}", self.channels.join(" + "));
        let _ = writeln!(s, "{:>w$}  predicted (%)", "actual");
        let _ = write!(s, "{:>w$}", "");
        for n in &names {
            let _ = write!(s, "  {n:>w$}");
        }
        s.push('\n');
        for (n, row) in names.iter().zip(&self.confusion) {
            let _ = write!(s, "{n:>w$}");
            for v in row {
                let _ = write!(s, "  {v:>w$.1}");
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "mA = {:.2}%  CI95 = [{:.2}, {:.2}]  McNemar p = {:.3e}",
            self.mean_accuracy, self.ci95.0, self.ci95.1, self.mcnemar_p
        );
        let _ = writeln!(
            s,
            "images = {}  repetitions = {}  folds = {}  seed = {}",
            self.n_images, self.repetitions, self.n_folds, self.seed
        );
        s
    }

    /// One line per test prediction.
    pub fn predictions_csv(&self) -> String {
        let mut s = String::from("repetition,fold,image_id,actual,predicted\n");
        for p in &self.predictions {
            let _ = writeln!(s, "{},{},{},{},{}", p.repetition, p.fold, p.image_id, p.actual, p.predicted);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_component() {
        let a = derive_seed(1, &[0, 1]);
        assert_ne!(a, derive_seed(1, &[1, 0]));
        assert_ne!(a, derive_seed(2, &[0, 1]));
        assert_ne!(a, derive_seed(1, &[0, 1, 0]));
        assert_eq!(a, derive_seed(1, &[0, 1]));
    }
}
