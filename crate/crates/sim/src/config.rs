//! Declarative experiment configuration (TOML) with full defaults.

use std::path::{Path, PathBuf};

use jscc_phy::channel::ChannelProfile;
use jscc_phy::feature::FeatureSpec;
use jscc_phy::link::CsiMode;
use jscc_phy::precoder::OptimizerSettings;
use jscc_phy::stream::PipelineConfig;
use jscc_phy::OfdmConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, SimError, SimResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed; every random stream is derived from it.
    pub seed: u64,
    /// Average power per data symbol.
    pub p_t: f64,
    pub ofdm: OfdmConfig,
    pub features: FeatureSection,
    pub channel: ChannelSection,
    pub precoder: PrecoderSection,
    pub pa: PaSection,
    pub budget: BudgetSection,
    pub papr: PaprSection,
    pub correlation: CorrelationSection,
    pub e2e: E2eSection,
    pub schedule: ScheduleSection,
    pub stream: StreamSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            p_t: 1.0,
            ofdm: OfdmConfig::wlan_20(),
            features: FeatureSection::default(),
            channel: ChannelSection::default(),
            precoder: PrecoderSection::default(),
            pa: PaSection::default(),
            budget: BudgetSection::default(),
            papr: PaprSection::default(),
            correlation: CorrelationSection::default(),
            e2e: E2eSection::default(),
            schedule: ScheduleSection::default(),
            stream: StreamSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// Synthetic AR(1) source used when `file` is absent.
    pub synthetic: FeatureSpec,
    /// Feature tensor file; relative paths resolve against the config file.
    pub file: Option<PathBuf>,
    pub quantize_half: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            synthetic: FeatureSpec {
                rho: 0.95,
                ..FeatureSpec::default()
            },
            file: None,
            quantize_half: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepFade {
    pub center: usize,
    pub width: usize,
    pub depth_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub profile: ChannelProfile,
    /// Replaces the random multipath channel with a fixed notch.
    pub deep_fade: Option<DeepFade>,
    pub csi: CsiMode,
    pub phase_tracking: bool,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            profile: ChannelProfile::default(),
            deep_fade: None,
            csi: CsiMode::Perfect,
            phase_tracking: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecoderSection {
    pub enabled: bool,
    /// Persisted matrix to use instead of optimizing.
    pub matrix: Option<PathBuf>,
    /// Coherence bandwidth in subcarriers; derived from the channel
    /// profile when absent.
    pub coherence: Option<usize>,
    /// Treat `optimizer.omega` as a weight relative to the two objective
    /// terms at `V = I` rather than as the raw coefficient.
    pub normalize_omega: bool,
    /// Feature blocks used to estimate the symbol covariance.
    pub training_blocks: usize,
    pub optimizer: OptimizerSettings,
}

impl Default for PrecoderSection {
    fn default() -> Self {
        PrecoderSection {
            enabled: true,
            matrix: None,
            coherence: None,
            normalize_omega: true,
            training_blocks: 2,
            optimizer: OptimizerSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaSection {
    pub enabled: bool,
    /// Clip level as a multiple of the frame RMS amplitude.
    pub backoff: f64,
}

impl Default for PaSection {
    fn default() -> Self {
        PaSection {
            enabled: true,
            backoff: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// Latency budget in seconds.
    pub t_max: f64,
    /// Charge the preamble against the budget.
    pub include_preamble: bool,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            t_max: 3e-3,
            include_preamble: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaprSection {
    /// OFDM symbols per variant.
    pub n_symbols: usize,
}

impl Default for PaprSection {
    fn default() -> Self {
        PaprSection { n_symbols: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    pub max_distance: usize,
    /// Received OFDM symbols per correlation matrix.
    pub n_blocks: usize,
    /// SNR of the flat channel the symbols are received over.
    pub snr_db: f64,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        CorrelationSection {
            max_distance: 16,
            n_blocks: 10_000,
            snr_db: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct E2eSection {
    pub snr_db: Vec<f64>,
    /// Channel draws per SNR point.
    pub realizations: usize,
    /// Write the first transmitted frame as an I/Q file.
    pub write_iq: bool,
    /// Send only the channels that fit the latency budget and zero-fill
    /// the rest at the receiver.
    pub apply_budget: bool,
}

impl Default for E2eSection {
    fn default() -> Self {
        E2eSection {
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            realizations: 4,
            write_iq: true,
            apply_budget: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub bandwidths_hz: Vec<f64>,
    pub t_max: Vec<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection {
            bandwidths_hz: vec![5e6, 10e6, 20e6, 40e6],
            t_max: vec![0.5e-3, 1e-3, 2e-3, 3e-3, 5e-3, 10e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub pipeline: PipelineConfig,
    /// Push a feature block through the modem and channel for every frame
    /// and report its PSNR.
    pub with_link: bool,
    /// Per-frame feature tensor when `with_link` is set.
    pub frame_features: FeatureSpec,
    pub snr_db: f64,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            pipeline: PipelineConfig::default(),
            with_link: true,
            frame_features: FeatureSpec {
                height: 16,
                width: 16,
                channels: 8,
                rho: 0.95,
                sigma: 0.5,
            },
            snr_db: 20.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> SimResult<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Reads a config and resolves relative file paths against its directory.
    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.features.file, &mut cfg.precoder.matrix].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> SimResult<String> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering, lowercase hex.
    pub fn hash(&self) -> SimResult<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(format!("{digest:x}"))
    }

    /// Checks what can be checked before running.
    pub fn validate(&self) -> SimResult<()> {
        self.ofdm.validate()?;
        self.features.synthetic.validate()?;
        self.channel.profile.validate()?;
        self.stream.pipeline.validate()?;
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(SimError::Config(format!("p_t = {} must be positive", self.p_t)));
        }
        if self.pa.enabled && !(self.pa.backoff > 0.0) {
            return Err(SimError::Config("pa.backoff must be positive".into()));
        }
        for p in [&self.features.file, &self.precoder.matrix].into_iter().flatten() {
            if !p.is_file() {
                return Err(SimError::Config(format!("{} does not exist", p.display())));
            }
        }
        if let Some(fade) = self.channel.deep_fade {
            if fade.center >= self.ofdm.n_subcarriers || fade.width > self.ofdm.n_subcarriers {
                return Err(SimError::Config("deep-fade notch does not fit the subcarrier grid".into()));
            }
        }
        if self.precoder.training_blocks == 0 {
            return Err(SimError::Config("precoder.training_blocks must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.ofdm.n_data(), 48);
        assert_eq!(cfg.budget.t_max, 3e-3);
        cfg.validate().unwrap();
    }

    #[test]
    fn canonical_rendering_roundtrips_and_hash_tracks_content() {
        let cfg = ExperimentConfig::from_toml("seed = 4\n[channel.profile]\nsnr_db = inf\n").unwrap();
        assert_eq!(cfg.channel.profile.snr_db, f64::INFINITY);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
        let reformatted = ExperimentConfig::from_toml("# comment\nseed   =   4\n\n[channel.profile]\nsnr_db=inf").unwrap();
        assert_eq!(reformatted.hash().unwrap(), cfg.hash().unwrap());
        let other = ExperimentConfig { seed: 5, ..cfg.clone() };
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml("sead = 1").is_err());
        let cfg = ExperimentConfig::from_toml("p_t = -1").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml("[features]\nfile = \"/nonexistent/f.bin\"").unwrap();
        assert!(cfg.validate().is_err());
    }
}
