//! Experiment configuration: TOML schema, validation, canonical hashing.

use std::path::{Path, PathBuf};

use crate::data::preprocess::FrameConfig;
use crate::data::synth::SynthSpec;
use crate::error::{Error, Result};
use crate::filterbank::{FilterSpec, WindowConvention};
use crate::nn::model::{FrontEndConfig, FrontEndKind, HeadConfig};
use crate::nn::optimizer::OptimizerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Filter geometry plus initialization/constraint knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub num_filters: usize,
    pub kernel_len: usize,
    pub num_deform_points: usize,
    pub sample_rate: f64,
    pub min_segment_width: f64,
    pub window_convention: WindowConvention,
    pub mel_low_hz: f64,
    pub dh_init_range: f64,
    /// Optional symmetric clamp on Δh during training.
    pub dh_limit: Option<f64>,
    /// Keep Δh fixed at its initialization (the reduction check uses this).
    pub freeze_heights: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            num_filters: 32,
            kernel_len: 251,
            num_deform_points: 5,
            sample_rate: 4000.0,
            min_segment_width: 1e-4,
            window_convention: WindowConvention::Symmetric,
            mel_low_hz: 30.0,
            dh_init_range: 0.1,
            dh_limit: None,
            freeze_heights: false,
        }
    }
}

impl FilterConfig {
    pub fn spec(&self) -> FilterSpec {
        FilterSpec {
            num_filters: self.num_filters,
            kernel_len: self.kernel_len,
            num_deform_points: self.num_deform_points,
            sample_rate: self.sample_rate,
            min_segment_width: self.min_segment_width,
            window_convention: self.window_convention,
        }
    }
}

/// Exactly one data source: a synthetic spec or a corpus manifest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub manifest: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    /// Impostor claims generated per test utterance.
    pub nontargets_per_target: usize,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            nontargets_per_target: 3,
        }
    }
}

/// Full experiment description.
///
/// Defaults are the desk profile (32 filters of length 251 with S = 5, a
/// 16-channel/128-wide head, 4 kHz synthetic corpus) so a run finishes in
/// minutes; the reference-recipe head (60 channels, 2048-wide dense stack,
/// 16 kHz, 200 ms/10 ms frames) is reachable through the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub front_end: FrontEndKind,
    pub epochs: usize,
    pub eval_every: usize,
    pub seed: u64,
    /// Where metrics logs, checkpoints, and exports go; `None` disables
    /// writing. Excluded from the config hash.
    pub output_dir: Option<PathBuf>,
    /// Resume training from this checkpoint. Excluded from the config hash.
    pub resume: Option<PathBuf>,
    pub filter: FilterConfig,
    pub head: HeadConfig,
    pub optimizer: OptimizerConfig,
    pub data: DataConfig,
    pub frames: FrameConfig,
    pub verification: VerificationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            front_end: FrontEndKind::Pfnet,
            epochs: 30,
            eval_every: 1,
            seed: 1,
            output_dir: None,
            resume: None,
            filter: FilterConfig::default(),
            head: HeadConfig::desk(),
            optimizer: OptimizerConfig::default(),
            data: DataConfig {
                manifest: None,
                synth: Some(SynthSpec::default()),
            },
            frames: FrameConfig {
                window_ms: 100.0,
                hop_ms: 25.0,
                ..FrameConfig::default()
            },
            verification: VerificationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.spec().validate()?;
        self.head.validate()?;
        self.optimizer.validate()?;
        self.frames.validate()?;
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be >= 1"));
        }
        match (&self.data.manifest, &self.data.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "exactly one data source: set either data.manifest or data.synth, not both",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "exactly one data source: set data.manifest or data.synth",
                ))
            }
            _ => {}
        }
        if let Some(synth) = &self.data.synth {
            synth.validate()?;
            if synth.sample_rate != self.filter.sample_rate {
                return Err(Error::config(format!(
                    "synth sample_rate {} differs from filter sample_rate {}",
                    synth.sample_rate, self.filter.sample_rate
                )));
            }
        }
        if self.front_end == FrontEndKind::Sincnet && self.filter.num_deform_points != 0 {
            return Err(Error::config(
                "sincnet front end requires filter.num_deform_points = 0",
            ));
        }
        if let Some(lim) = self.filter.dh_limit {
            if lim.is_nan() || lim <= 0.0 {
                return Err(Error::config("dh_limit must be positive when set"));
            }
        }
        Ok(())
    }

    pub fn front_end_config(&self) -> FrontEndConfig {
        FrontEndConfig {
            kind: self.front_end,
            filter: self.filter.spec(),
            mel_low_hz: self.filter.mel_low_hz,
            dh_init_range: self.filter.dh_init_range,
            dh_limit: self.filter.dh_limit,
            freeze_heights: self.filter.freeze_heights,
        }
    }

    /// SHA-256 of the canonical serialization, excluding fields with no
    /// semantic effect on the experiment (output locations, resume path).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        canonical.resume = None;
        sha256_hex(&toml::to_string(&canonical).expect("config serializes"))
    }

    /// Like [`ExperimentConfig::hash`] but with the stopping rule (`epochs`)
    /// normalized out; identifies the experiment *setup*, so a checkpoint can
    /// be resumed under a config that only extends the epoch count.
    pub fn setup_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        canonical.resume = None;
        canonical.epochs = 0;
        sha256_hex(&toml::to_string(&canonical).expect("config serializes"))
    }
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
