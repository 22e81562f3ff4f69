//! OFDM frame construction, power-amplifier emulation, demodulation,
//! least-squares channel estimation, common-phase-error tracking and
//! zero-forcing equalization.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods without std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::mapper::SymbolSegment;
use crate::signal::{DftPlan, OfdmConfig, C64};

/// Receiver-side bookkeeping carried alongside a frame.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameMetadata {
    /// Zero reals padded onto the last feature segment.
    pub pad_count: usize,
    /// Per-payload-symbol power normalization factors.
    pub scales: Vec<f64>,
    /// Feature channels carried by the frame.
    pub retained_channels: usize,
}

/// Time-domain samples of a preamble followed by payload symbols, each
/// prefixed with its cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    pub time_samples: Vec<C64>,
    pub n_payload_symbols: usize,
    pub metadata: FrameMetadata,
}

impl OfdmFrame {
    pub fn with_retained_channels(mut self, channels: usize) -> Self {
        self.metadata.retained_channels = channels;
        self
    }

    /// Samples after the preamble.
    pub fn payload<'a>(&'a self, config: &OfdmConfig) -> &'a [C64] {
        &self.time_samples[config.preamble_repeats * config.symbol_len()..]
    }
}

fn add_cp(body: &[C64], cp_len: usize, out: &mut Vec<C64>) {
    out.extend_from_slice(&body[body.len() - cp_len..]);
    out.extend_from_slice(body);
}

/// Frequency-domain grid of one payload symbol: data on data bins, pilots
/// on pilot bins, zeros elsewhere.
pub fn payload_grid(x_t: &[C64], config: &OfdmConfig) -> Result<Vec<C64>> {
    if x_t.len() != config.n_data() {
        return Err(invalid(alloc::format!(
            "{} data symbols for K_d = {}",
            x_t.len(),
            config.n_data()
        )));
    }
    let mut grid = vec![C64::new(0.0, 0.0); config.n_subcarriers];
    for (&i, &x) in config.data_indices.iter().zip(x_t) {
        grid[i] = x;
    }
    for (&i, &p) in config.pilot_indices.iter().zip(&config.pilot_values) {
        grid[i] = p;
    }
    Ok(grid)
}

/// One OFDM symbol body (K samples, no CP) carrying `x_t`.
pub fn ofdm_symbol(x_t: &[C64], config: &OfdmConfig, plan: &DftPlan) -> Result<Vec<C64>> {
    let mut grid = payload_grid(x_t, config)?;
    plan.inverse_in_place(&mut grid);
    Ok(grid)
}

/// Preamble waveform: `preamble_repeats` CP-extended training symbols.
pub fn preamble(config: &OfdmConfig) -> Vec<C64> {
    let mut body = config.training_symbol();
    DftPlan::new(config.n_subcarriers).inverse_in_place(&mut body);
    let mut out = Vec::with_capacity(config.preamble_repeats * config.symbol_len());
    for _ in 0..config.preamble_repeats {
        add_cp(&body, config.cp_len, &mut out);
    }
    out
}

/// Builds a frame from already-precoded segments.
pub fn modulate_frame(segments: &[SymbolSegment], config: &OfdmConfig) -> Result<OfdmFrame> {
    config.validate()?;
    let plan = DftPlan::new(config.n_subcarriers);
    let mut time_samples = preamble(config);
    time_samples.reserve(segments.len() * config.symbol_len());
    for seg in segments {
        let body = ofdm_symbol(&seg.symbols, config, &plan)?;
        add_cp(&body, config.cp_len, &mut time_samples);
    }
    Ok(OfdmFrame {
        time_samples,
        n_payload_symbols: segments.len(),
        metadata: FrameMetadata {
            pad_count: segments.last().map_or(0, |s| s.pad_count),
            scales: segments.iter().map(|s| s.scale).collect(),
            retained_channels: 0,
        },
    })
}

/// Memoryless soft limiter: samples above `clip_amplitude` are scaled down
/// to it, keeping their phase.
pub fn pa_soft_clip(samples: &[C64], clip_amplitude: f64) -> Result<Vec<C64>> {
    if !(clip_amplitude > 0.0) {
        return Err(invalid(alloc::format!(
            "clip amplitude {clip_amplitude} must be positive"
        )));
    }
    Ok(samples
        .iter()
        .map(|&v| {
            let mag = v.norm();
            if mag > clip_amplitude {
                v * (clip_amplitude / mag)
            } else {
                v
            }
        })
        .collect())
}

/// Clip level for a given input back-off: `backoff * RMS(samples)`.
pub fn clip_amplitude_for_backoff(samples: &[C64], backoff: f64) -> f64 {
    let mean_power = samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / samples.len().max(1) as f64;
    backoff * mean_power.sqrt()
}

/// Per-subcarrier channel estimate over all K bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: Vec<C64>,
}

impl ChannelEstimate {
    /// Perfect CSI.
    pub fn from_response(freq_response: &[C64]) -> Self {
        ChannelEstimate {
            h_hat: freq_response.to_vec(),
        }
    }
}

/// Least-squares estimate from the received preamble with the configured
/// training symbol.
pub fn estimate_channel_ls(preamble_rx: &[C64], config: &OfdmConfig) -> Result<ChannelEstimate> {
    estimate_channel_ls_with(preamble_rx, &config.training_symbol(), config)
}

/// Least-squares estimate against an explicit training symbol, averaged
/// over the preamble repeats.
pub fn estimate_channel_ls_with(preamble_rx: &[C64], training: &[C64], config: &OfdmConfig) -> Result<ChannelEstimate> {
    let (k, sym) = (config.n_subcarriers, config.symbol_len());
    if config.preamble_repeats == 0 {
        return Err(Error::Config("no preamble to estimate the channel from".into()));
    }
    if training.len() != k {
        return Err(invalid("training symbol must have K entries"));
    }
    if let Some(bin) = training.iter().position(|t| t.norm_sqr() == 0.0) {
        return Err(Error::Config(alloc::format!("training symbol is zero on bin {bin}")));
    }
    if preamble_rx.len() != config.preamble_repeats * sym {
        return Err(Error::Frame(alloc::format!(
            "preamble has {} samples, expected {}",
            preamble_rx.len(),
            config.preamble_repeats * sym
        )));
    }
    let plan = DftPlan::new(k);
    let mut acc = vec![C64::new(0.0, 0.0); k];
    let mut body = vec![C64::new(0.0, 0.0); k];
    for rep in preamble_rx.chunks_exact(sym) {
        body.copy_from_slice(&rep[config.cp_len..]);
        plan.forward_in_place(&mut body);
        for ((a, y), t) in acc.iter_mut().zip(&body).zip(training) {
            *a += y / t;
        }
    }
    let reps = config.preamble_repeats as f64;
    Ok(ChannelEstimate {
        h_hat: acc.into_iter().map(|v| v / reps).collect(),
    })
}

/// Output of [`demodulate_frame`].
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    /// Received data symbols per payload symbol, in `data_indices` order.
    pub data: Vec<Vec<C64>>,
    /// Received pilot symbols per payload symbol, in `pilot_indices` order.
    pub pilots: Vec<Vec<C64>>,
}

/// Splits a received frame into its preamble and payload parts.
pub fn split_frame<'a>(rx: &'a [C64], config: &OfdmConfig) -> Result<(&'a [C64], &'a [C64])> {
    let sym = config.symbol_len();
    let pre = config.preamble_repeats * sym;
    if rx.len() < pre || rx.len() % sym != 0 {
        return Err(Error::Frame(alloc::format!(
            "{} samples is not a whole frame of {sym}-sample symbols with a {pre}-sample preamble",
            rx.len()
        )));
    }
    Ok(rx.split_at(pre))
}

/// Strips CPs, transforms each payload symbol and extracts data and pilot
/// bins. `rx` is the full frame including the preamble.
pub fn demodulate_frame(rx: &[C64], config: &OfdmConfig) -> Result<Demodulated> {
    config.validate()?;
    let (_, payload) = split_frame(rx, config)?;
    let plan = DftPlan::new(config.n_subcarriers);
    let mut body = vec![C64::new(0.0, 0.0); config.n_subcarriers];
    let mut data = Vec::with_capacity(payload.len() / config.symbol_len());
    let mut pilots = Vec::with_capacity(data.capacity());
    for sym in payload.chunks_exact(config.symbol_len()) {
        body.copy_from_slice(&sym[config.cp_len..]);
        plan.forward_in_place(&mut body);
        data.push(config.data_indices.iter().map(|&i| body[i]).collect());
        pilots.push(config.pilot_indices.iter().map(|&i| body[i]).collect());
    }
    Ok(Demodulated { data, pilots })
}

/// Result of common-phase-error correction.
#[derive(Debug, Clone, PartialEq)]
pub struct CpeCorrection {
    pub symbols: Vec<Vec<C64>>,
    /// Estimated phase per payload symbol, radians.
    pub phases: Vec<f64>,
    /// Payload symbols whose pilots carried no usable energy (left unrotated).
    pub uncorrected: Vec<usize>,
}

/// Removes the common phase `arg(sum_p z_p conj(h_p p))` of each payload
/// symbol, estimated from its pilots.
pub fn cpe_correct(symbols: &[Vec<C64>], pilot_obs: &[Vec<C64>], h_hat: &ChannelEstimate, config: &OfdmConfig) -> Result<CpeCorrection> {
    if config.n_pilots() == 0 {
        return Err(invalid("phase tracking needs at least one pilot"));
    }
    if symbols.len() != pilot_obs.len() {
        return Err(invalid("one pilot observation per payload symbol required"));
    }
    if h_hat.h_hat.len() != config.n_subcarriers {
        return Err(invalid("channel estimate must cover all K bins"));
    }
    let reference: Vec<C64> = config
        .pilot_indices
        .iter()
        .zip(&config.pilot_values)
        .map(|(&i, &p)| h_hat.h_hat[i] * p)
        .collect();
    let mut out = Vec::with_capacity(symbols.len());
    let mut phases = Vec::with_capacity(symbols.len());
    let mut uncorrected = Vec::new();
    for (n, (z, obs)) in symbols.iter().zip(pilot_obs).enumerate() {
        if obs.len() != reference.len() {
            return Err(invalid("pilot observation length does not match the pilot plan"));
        }
        let acc: C64 = obs.iter().zip(&reference).map(|(o, r)| o * r.conj()).sum();
        let phi = if acc.norm_sqr() > 0.0 {
            acc.arg()
        } else {
            log::warn!("payload symbol {n}: pilots carry no energy, skipping phase correction");
            uncorrected.push(n);
            0.0
        };
        let rot = C64::from_polar(1.0, -phi);
        out.push(z.iter().map(|v| v * rot).collect());
        phases.push(phi);
    }
    Ok(CpeCorrection {
        symbols: out,
        phases,
        uncorrected,
    })
}

/// Zero-forcing output for one payload symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<C64>,
    /// Positions (into the data vector) whose estimate fell below the floor.
    pub floored: Vec<usize>,
}

/// Relative magnitude floor: `|h| < EQ_FLOOR * median|h|` is clamped.
pub const EQ_FLOOR: f64 = 1e-3;

/// Equalization floor for an estimate: `1e-3 * median |h_hat|` over the
/// data bins.
pub fn equalization_floor(h_hat: &ChannelEstimate, config: &OfdmConfig) -> f64 {
    let mut mags: Vec<f64> = config.data_indices.iter().map(|&i| h_hat.h_hat[i].norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = mags.len();
    let median = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    EQ_FLOOR * median
}

/// `x̂[k] = z[k] / ĥ[data_index(k)]`, with `|ĥ|` floored at
/// [`equalization_floor`] (phase kept).
pub fn equalize(z: &[C64], h_hat: &ChannelEstimate, config: &OfdmConfig) -> Result<Equalized> {
    equalize_with_floor(z, h_hat, config, equalization_floor(h_hat, config))
}

pub fn equalize_with_floor(z: &[C64], h_hat: &ChannelEstimate, config: &OfdmConfig, floor: f64) -> Result<Equalized> {
    if z.len() != config.n_data() {
        return Err(invalid(alloc::format!("{} symbols for K_d = {}", z.len(), config.n_data())));
    }
    if h_hat.h_hat.len() != config.n_subcarriers {
        return Err(invalid("channel estimate must cover all K bins"));
    }
    let mut floored = Vec::new();
    let symbols = z
        .iter()
        .zip(&config.data_indices)
        .enumerate()
        .map(|(pos, (&v, &bin))| {
            let h = h_hat.h_hat[bin];
            let mag = h.norm();
            if mag < floor || mag == 0.0 {
                floored.push(pos);
                let phase = if mag > 0.0 { h / mag } else { C64::new(1.0, 0.0) };
                v / (phase * floor.max(f64::MIN_POSITIVE))
            } else {
                v / h
            }
        })
        .collect();
    Ok(Equalized { symbols, floored })
}
