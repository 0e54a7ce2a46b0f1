//! Run configuration: a TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gazeval_core::learn::{CvProtocol, SvmParams, DEFAULT_C_GRID};
use gazeval_core::{DetectionParams, FeatureParams};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub fixations: Option<PathBuf>,
    /// Raw samples; fixations are detected when no fixation log is given.
    pub gaze: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    /// Optional `observer_id,gender` sidecar.
    pub observers: Option<PathBuf>,
    /// Holds `s95.txt`, `s296.txt` and `s382.txt`.
    pub scenarios_dir: Option<PathBuf>,
    /// Directory searched for channel files named on the command line.
    pub channels_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n_folds: usize,
    pub repetitions: usize,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub balance: bool,
    pub c_grid: Vec<f64>,
    pub svm_tolerance: f64,
    pub svm_max_epochs: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let p = CvProtocol::default();
        Self {
            n_folds: p.n_folds,
            repetitions: p.repetitions,
            train_ratio: p.train_ratio,
            val_ratio: p.val_ratio,
            test_ratio: p.test_ratio,
            balance: p.balance,
            c_grid: DEFAULT_C_GRID.to_vec(),
            svm_tolerance: p.svm.tolerance,
            svm_max_epochs: p.svm.max_epochs,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of all randomness.
    pub seed: u64,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub features: FeatureParams,
    pub events: DetectionParams,
    pub protocol: ProtocolConfig,
    /// Directory relative paths are resolved against. Not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Values given on the command line take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub repetitions: Option<usize>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            // Command-line paths are taken relative to the working directory.
            self.paths.output_dir = Some(std::path::absolute(d).unwrap_or_else(|_| d.clone()));
        }
        if let Some(r) = o.repetitions {
            self.protocol.repetitions = r;
        }
        if let Some(j) = o.jobs {
            self.jobs = Some(j);
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn path(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_deref().map(|p| self.resolve(p))
    }

    pub fn fixations(&self) -> Option<PathBuf> {
        self.path(&self.paths.fixations)
    }
    pub fn gaze(&self) -> Option<PathBuf> {
        self.path(&self.paths.gaze)
    }
    pub fn metadata(&self) -> Option<PathBuf> {
        self.path(&self.paths.metadata)
    }
    pub fn observers(&self) -> Option<PathBuf> {
        self.path(&self.paths.observers)
    }
    pub fn scenarios_dir(&self) -> Option<PathBuf> {
        self.path(&self.paths.scenarios_dir)
    }
    pub fn channels_dir(&self) -> Option<PathBuf> {
        self.path(&self.paths.channels_dir)
    }
    pub fn output_dir(&self) -> PathBuf {
        self.path(&self.paths.output_dir)
            .unwrap_or_else(|| self.base_dir.join("out"))
    }

    /// Every configured input path must exist.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("fixations", self.fixations()),
            ("gaze", self.gaze()),
            ("metadata", self.metadata()),
            ("observers", self.observers()),
            ("scenarios_dir", self.scenarios_dir()),
            ("channels_dir", self.channels_dir()),
        ];
        let missing: Vec<String> = named
            .iter()
            .filter_map(|(k, p)| p.as_ref().filter(|p| !p.exists()).map(|p| format!("{k}={}", p.display())))
            .collect();
        if !missing.is_empty() {
            bail!(gazeval_core::Error::Validation(format!(
                "configured paths do not exist: {}",
                missing.join(", ")
            )));
        }
        if let Some(j) = self.jobs {
            if j == 0 {
                bail!(gazeval_core::Error::Validation("jobs must be positive".into()));
            }
        }
        self.events.validate()?;
        self.cv_protocol().validate()?;
        Ok(())
    }

    pub fn cv_protocol(&self) -> CvProtocol {
        let p = &self.protocol;
        CvProtocol {
            n_folds: p.n_folds,
            repetitions: p.repetitions,
            train_ratio: p.train_ratio,
            val_ratio: p.val_ratio,
            test_ratio: p.test_ratio,
            seed: self.seed,
            balance: p.balance,
            c_grid: p.c_grid.clone(),
            svm: SvmParams {
                tolerance: p.svm_tolerance,
                max_epochs: p.svm_max_epochs,
                ..SvmParams::default()
            },
        }
    }

    /// First 16 hex digits of the SHA-256 of the effective configuration.
    /// The output location does not enter the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths.output_dir = None;
        c.jobs = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// `gazeval=<version> seed=<seed> config=<hash>`
    pub fn header(&self) -> String {
        format!("gazeval={} seed={} config={}", gazeval_core::VERSION, self.seed, self.hash())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_file_with_defaults() {
        let cfg: RunConfig = toml::from_str(
            "seed = 7\n[paths]\nmetadata = \"m.csv\"\n[protocol]\nrepetitions = 3\n[features]\nkernel_sigma_px = 12.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.protocol.repetitions, 3);
        assert_eq!(cfg.protocol.n_folds, 10);
        assert_eq!(cfg.features.kernel_sigma_px, Some(12.0));
        assert_eq!(cfg.cv_protocol().seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1\n").is_err());
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut a = RunConfig::default();
        let h = a.hash();
        assert_eq!(h, RunConfig::default().hash());
        a.apply(&Overrides { seed: Some(3), ..Default::default() });
        assert_ne!(h, a.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.paths.fixations = Some("f.csv".into());
        let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
