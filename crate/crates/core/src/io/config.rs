//! Flat TOML run configuration. Unknown keys are rejected; every key has a
//! default, and command-line flags override values read from a file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{StftConfig, WindowKind};
use crate::error::{Error, Result};
use crate::features::{Aggregation, FeatureKind, MicPair, PairSet};
use crate::room::{ProtocolParams, Rt60Band};
use crate::select::{SelectionStrategy, StrategyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subcommand that produced this record, when written as run metadata.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,

    pub window_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
    pub sample_rate: u32,
    pub sound_speed: f64,

    /// Kernel length K in frames.
    pub kernel_frames: usize,
    /// Microphone pairs; empty means every pair.
    pub pairs: Vec<[usize; 2]>,
    pub aggregation: Aggregation,
    pub strategy: StrategyKind,
    pub ref_channel: usize,

    pub band: Rt60Band,
    pub sir_min: f64,
    pub sir_max: f64,
    pub overlap_min: f64,
    pub overlap_max: f64,
    pub utterance_seconds: f64,
    pub solo_seconds: f64,
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solo: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    /// Source index within `scenario` whose bearing drives 3-D features.
    pub source: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stft = StftConfig::default();
        let protocol = ProtocolParams::default();
        Self {
            command: None,
            window_len: stft.window_len,
            hop: stft.hop,
            fft_size: stft.fft_size,
            window: stft.window,
            sample_rate: stft.sample_rate,
            sound_speed: stft.sound_speed,
            kernel_frames: 10,
            pairs: Vec::new(),
            aggregation: Aggregation::Mean,
            strategy: StrategyKind::Compose,
            ref_channel: 0,
            band: Rt60Band::Weak,
            sir_min: protocol.sir_db.0,
            sir_max: protocol.sir_db.1,
            overlap_min: protocol.overlap.0,
            overlap_max: protocol.overlap.1,
            utterance_seconds: protocol.utterance_seconds,
            solo_seconds: protocol.solo_seconds,
            n: 50,
            seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
            feature: None,
            mixture: None,
            solo: None,
            rir: None,
            scenario: None,
            source: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn stft_config(&self) -> StftConfig {
        StftConfig {
            window_len: self.window_len,
            hop: self.hop,
            fft_size: self.fft_size,
            window: self.window,
            sample_rate: self.sample_rate,
            sound_speed: self.sound_speed,
        }
    }

    pub fn pair_set(&self, channels: usize) -> Result<PairSet> {
        let set = if self.pairs.is_empty() {
            PairSet::all_pairs(channels, self.aggregation)?
        } else {
            let pairs = self.pairs.iter().map(|[a, b]| MicPair::new(*a, *b)).collect::<Result<Vec<_>>>()?;
            PairSet::new(pairs, self.aggregation)?
        };
        set.validate_for(channels)?;
        Ok(set)
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            utterance_seconds: self.utterance_seconds,
            solo_seconds: self.solo_seconds,
            sir_db: (self.sir_min, self.sir_max),
            overlap: (self.overlap_min, self.overlap_max),
        }
    }

    pub fn selection(&self) -> SelectionStrategy {
        SelectionStrategy { kind: self.strategy, seed: self.seed, ref_channel: self.ref_channel }
    }

    /// Checks every parameter before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.stft_config().validate()?;
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.kernel_frames == 0 {
            return fail("kernel_frames must be >= 1".into());
        }
        if !(self.sir_min.is_finite() && self.sir_max.is_finite() && self.sir_min <= self.sir_max) {
            return fail(format!("SIR range [{}, {}] is invalid", self.sir_min, self.sir_max));
        }
        if !(self.overlap_min > 0.0 && self.overlap_min <= self.overlap_max && self.overlap_max <= 1.0) {
            return fail(format!("overlap range [{}, {}] must lie in (0, 1]", self.overlap_min, self.overlap_max));
        }
        if !(self.utterance_seconds > 0.0 && self.solo_seconds > 0.0) {
            return fail("utterance_seconds and solo_seconds must be > 0".into());
        }
        if self.n == 0 || self.workers == 0 {
            return fail("n and workers must be >= 1".into());
        }
        for [a, b] in &self.pairs {
            MicPair::new(*a, *b)?;
        }
        if self.output_dir.as_os_str().is_empty() {
            return fail("output_dir must not be empty".into());
        }
        Ok(())
    }
}
