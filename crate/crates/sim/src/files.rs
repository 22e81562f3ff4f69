//! Binary file formats: feature tensors, precoding matrices and I/Q frames
//! with their JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use jscc_phy::feature::FeatureBlock;
use jscc_phy::modem::OfdmFrame;
use jscc_phy::precoder::PrecodingMatrix;
use jscc_phy::{OfdmConfig, C64};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, SimError, SimResult};

pub fn save_features(path: &Path, block: &FeatureBlock) -> SimResult<()> {
    fs::write(path, block.to_bytes()).map_err(io_err(path))
}

pub fn load_features(path: &Path) -> SimResult<FeatureBlock> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(FeatureBlock::from_bytes(&bytes)?)
}

pub fn save_precoder(path: &Path, v: &PrecodingMatrix) -> SimResult<()> {
    fs::write(path, v.to_bytes()).map_err(io_err(path))
}

pub fn load_precoder(path: &Path) -> SimResult<PrecodingMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(PrecodingMatrix::from_bytes(&bytes)?)
}

/// Metadata written next to an I/Q file as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqSidecar {
    pub config_hash: String,
    pub n_samples: usize,
    pub n_payload_symbols: usize,
    pub pad_count: usize,
    pub scales: Vec<f64>,
    pub retained_channels: usize,
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub preamble_repeats: usize,
    pub sample_rate_hz: f64,
}

impl IqSidecar {
    pub fn new(frame: &OfdmFrame, config: &OfdmConfig, config_hash: &str) -> Self {
        IqSidecar {
            config_hash: config_hash.to_owned(),
            n_samples: frame.time_samples.len(),
            n_payload_symbols: frame.n_payload_symbols,
            pad_count: frame.metadata.pad_count,
            scales: frame.metadata.scales.clone(),
            retained_channels: frame.metadata.retained_channels,
            n_subcarriers: config.n_subcarriers,
            cp_len: config.cp_len,
            preamble_repeats: config.preamble_repeats,
            sample_rate_hz: config.bandwidth_hz,
        }
    }
}

pub fn sidecar_path(iq_path: &Path) -> PathBuf {
    let mut name = iq_path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Interleaved little-endian f32 I/Q.
pub fn iq_to_bytes(samples: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for v in samples {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub fn iq_from_bytes(bytes: &[u8]) -> Option<Vec<C64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                C64::new(re as f64, im as f64)
            })
            .collect(),
    )
}

/// Writes the frame samples and the sidecar.
pub fn write_iq(path: &Path, samples: &[C64], sidecar: &IqSidecar) -> SimResult<()> {
    fs::write(path, iq_to_bytes(samples)).map_err(io_err(path))?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(sidecar)?).map_err(io_err(side))
}

/// Reads samples and sidecar, checking that the sample count and frame
/// structure agree.
pub fn read_iq(path: &Path) -> SimResult<(Vec<C64>, IqSidecar)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |message: String| SimError::Artifact { path: path.to_owned(), message };
    let samples = iq_from_bytes(&bytes).ok_or_else(|| bad(format!("{} bytes is not a whole number of I/Q pairs", bytes.len())))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let sidecar: IqSidecar = serde_json::from_str(&text)?;
    let symbol = sidecar.n_subcarriers + sidecar.cp_len;
    let expected = (sidecar.preamble_repeats + sidecar.n_payload_symbols) * symbol;
    if samples.len() != sidecar.n_samples || samples.len() != expected {
        return Err(bad(format!(
            "{} samples, sidecar declares {} and the frame structure implies {expected}",
            samples.len(),
            sidecar.n_samples
        )));
    }
    if sidecar.scales.len() != sidecar.n_payload_symbols {
        return Err(bad("one scale per payload symbol required".into()));
    }
    Ok((samples, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use jscc_phy::feature::{generate_features, FeatureSpec};
    use jscc_phy::link::{build_frame, LinkParams};

    #[test]
    fn feature_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let block = generate_features(&FeatureSpec { height: 3, width: 5, channels: 2, rho: 0.5, sigma: 0.5 }, 1).unwrap();
        save_features(&path, &block).unwrap();
        let back = load_features(&path).unwrap();
        // The file stores f32.
        for (a, b) in back.as_slice().iter().zip(block.as_slice()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(load_features(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn iq_roundtrip_and_structure_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.iq");
        let cfg = OfdmConfig::wlan_20();
        let values: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let (frame, _) = build_frame(&values, &LinkParams::ideal(&cfg)).unwrap();
        let side = IqSidecar::new(&frame, &cfg, "abc");
        write_iq(&path, &frame.time_samples, &side).unwrap();
        let (samples, back) = read_iq(&path).unwrap();
        assert_eq!(back, side);
        for (a, b) in samples.iter().zip(&frame.time_samples) {
            assert!((a - b).norm() < 1e-6);
        }
        fs::write(&path, &iq_to_bytes(&frame.time_samples)[..8 * 100]).unwrap();
        assert!(matches!(read_iq(&path), Err(SimError::Artifact { .. })));
    }
}
