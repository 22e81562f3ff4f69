//! Tapped-delay-line Rayleigh channels with an exponential power-delay
//! profile, AWGN and coherence-bandwidth estimation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods without std
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::rng::seeded;
use crate::signal::{DftPlan, OfdmConfig, C64};

/// Statistical description of a multipath channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ChannelProfile {
    pub n_taps: usize,
    /// Power-delay-profile decay rate per tap.
    pub decay: f64,
    /// Per-data-subcarrier SNR at the receiver input, dB. `inf` disables noise.
    pub snr_db: f64,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        ChannelProfile {
            n_taps: 4,
            decay: 0.5,
            snr_db: 20.0,
        }
    }
}

impl ChannelProfile {
    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 {
            return Err(invalid("channel needs at least one tap"));
        }
        if !self.decay.is_finite() || self.decay < 0.0 {
            return Err(invalid(alloc::format!("decay {} must be finite and non-negative", self.decay)));
        }
        if self.snr_db.is_nan() {
            return Err(invalid("snr_db is NaN"));
        }
        Ok(())
    }

    /// Normalized tap powers `exp(-decay*i) / sum`.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.n_taps).map(|i| (-self.decay * i as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    /// Noise variance per sample (and per unitary-DFT bin).
    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.snr_db)
    }
}

/// `10^(-snr/10)` for unit symbol power; zero for infinite SNR.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// One channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<C64>,
    /// `h[k] = sum_n taps[n] e^{-j 2 pi n k / K}`.
    pub freq_response: Vec<C64>,
}

impl ChannelRealization {
    pub fn from_taps(taps: Vec<C64>, config: &OfdmConfig) -> Result<Self> {
        let k = config.n_subcarriers;
        if taps.is_empty() || taps.len() > k {
            return Err(invalid(alloc::format!("{} taps for K = {k}", taps.len())));
        }
        let mut padded = taps.clone();
        padded.resize(k, C64::new(0.0, 0.0));
        DftPlan::new(k).forward_in_place(&mut padded);
        let gain = (k as f64).sqrt();
        let freq_response = padded.into_iter().map(|v| v * gain).collect();
        Ok(ChannelRealization { taps, freq_response })
    }
}

/// Draws independent circular Gaussian taps with the profile's powers.
pub fn sample_taps(profile: &ChannelProfile, config: &OfdmConfig, seed: u64) -> Result<ChannelRealization> {
    profile.validate()?;
    let mut rng = seeded(seed);
    let taps = profile
        .tap_powers()
        .into_iter()
        .map(|p| {
            let s = (p / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re * s, im * s)
        })
        .collect();
    ChannelRealization::from_taps(taps, config)
}

/// Adds circular complex Gaussian noise of total variance `variance`.
pub fn add_awgn(samples: &mut [C64], variance: f64, seed: u64) {
    if variance <= 0.0 {
        return;
    }
    let mut rng = seeded(seed);
    let s = (variance / 2.0).sqrt();
    for v in samples {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += C64::new(re * s, im * s);
    }
}

/// Linear convolution with the taps (truncated to the input length) plus
/// AWGN at the profile's SNR.
pub fn apply_channel(
    frame_samples: &[C64],
    realization: &ChannelRealization,
    profile: &ChannelProfile,
    config: &OfdmConfig,
    seed: u64,
) -> Result<Vec<C64>> {
    let taps = &realization.taps;
    if taps.len() > config.cp_len.max(1) {
        return Err(Error::DelaySpread {
            taps: taps.len(),
            cp: config.cp_len,
        });
    }
    let mut out: Vec<C64> = (0..frame_samples.len())
        .map(|n| {
            taps.iter()
                .take(n + 1)
                .enumerate()
                .map(|(i, t)| t * frame_samples[n - i])
                .sum()
        })
        .collect();
    add_awgn(&mut out, profile.noise_variance(), seed);
    Ok(out)
}

/// Applies the frequency response symbol by symbol (CP stripped, multiplied
/// per bin, CP rebuilt). Models channels whose impulse response exceeds the
/// cyclic prefix as an ideal per-subcarrier gain.
pub fn apply_frequency_response(frame_samples: &[C64], realization: &ChannelRealization, config: &OfdmConfig) -> Result<Vec<C64>> {
    let (k, sym) = (config.n_subcarriers, config.symbol_len());
    if frame_samples.len() % sym != 0 {
        return Err(Error::Frame(alloc::format!(
            "{} samples is not a whole number of {sym}-sample symbols",
            frame_samples.len()
        )));
    }
    if realization.freq_response.len() != k {
        return Err(invalid("frequency response must cover all K bins"));
    }
    let plan = DftPlan::new(k);
    let mut out = Vec::with_capacity(frame_samples.len());
    let mut body = vec![C64::new(0.0, 0.0); k];
    for s in frame_samples.chunks_exact(sym) {
        body.copy_from_slice(&s[config.cp_len..]);
        plan.forward_in_place(&mut body);
        for (b, h) in body.iter_mut().zip(&realization.freq_response) {
            *b *= h;
        }
        plan.inverse_in_place(&mut body);
        out.extend_from_slice(&body[k - config.cp_len..]);
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// RMS delay spread in seconds for a tap spacing of `1/B`.
pub fn rms_delay_spread(profile: &ChannelProfile, bandwidth_hz: f64) -> f64 {
    let powers = profile.tap_powers();
    let ts = 1.0 / bandwidth_hz;
    let mean: f64 = powers.iter().enumerate().map(|(i, p)| p * i as f64 * ts).sum();
    let second: f64 = powers.iter().enumerate().map(|(i, p)| p * (i as f64 * ts).powi(2)).sum();
    (second - mean * mean).max(0.0).sqrt()
}

/// Coherence bandwidth in subcarriers, `round(1/(5 sigma_tau) / delta_f)`,
/// clamped to `[1, K]`. A zero delay spread gives `K`.
pub fn coherence_subcarriers(profile: &ChannelProfile, config: &OfdmConfig) -> Result<usize> {
    profile.validate()?;
    let k = config.n_subcarriers;
    let spread = rms_delay_spread(profile, config.bandwidth_hz);
    if spread <= 0.0 {
        return Ok(k);
    }
    let bc = 1.0 / (5.0 * spread);
    let kc = (bc / config.subcarrier_spacing()).round();
    Ok((kc as usize).clamp(1, k))
}

/// Deterministic channel equal to 1 everywhere except `notch_width` bins
/// starting `notch_width / 2` below `notch_center` (modulo K), which are
/// attenuated by `notch_depth_db`.
pub fn deep_fade_channel(config: &OfdmConfig, notch_center: usize, notch_width: usize, notch_depth_db: f64) -> Result<ChannelRealization> {
    let k = config.n_subcarriers;
    if notch_center >= k || notch_width > k {
        return Err(invalid(alloc::format!(
            "notch at {notch_center} of width {notch_width} does not fit K = {k}"
        )));
    }
    let gain = 10f64.powf(-notch_depth_db / 20.0);
    let mut response = vec![C64::new(1.0, 0.0); k];
    for i in 0..notch_width {
        let bin = (notch_center + k + i - notch_width / 2) % k;
        response[bin] = C64::new(gain, 0.0);
    }
    let scale = 1.0 / (k as f64).sqrt();
    let taps = DftPlan::new(k).inverse(&response)?.into_iter().map(|v| v * scale).collect();
    Ok(ChannelRealization {
        taps,
        freq_response: response,
    })
}

/// Bins covered by a [`deep_fade_channel`] notch.
pub fn notch_bins(config: &OfdmConfig, notch_center: usize, notch_width: usize) -> Vec<usize> {
    let k = config.n_subcarriers;
    (0..notch_width).map(|i| (notch_center + k + i - notch_width / 2) % k).collect()
}
