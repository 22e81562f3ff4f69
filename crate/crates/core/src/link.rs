//! End-to-end transceiver chain: segment, normalize and map features,
//! precode, modulate, amplify, pass through a channel, demodulate,
//! equalize, undo precoding and rebuild the features.

use alloc::vec::Vec;

use crate::channel::{add_awgn, apply_channel, apply_frequency_response, noise_variance, ChannelProfile, ChannelRealization};
use crate::error::Result;
use crate::feature::FeatureBlock;
use crate::mapper::{map_to_symbols, power_normalize, segment_values, segments_to_values, SymbolSegment};
use crate::modem::{
    clip_amplitude_for_backoff, cpe_correct, demodulate_frame, equalize, estimate_channel_ls, modulate_frame, pa_soft_clip,
    split_frame, ChannelEstimate, OfdmFrame,
};
use crate::precoder::{apply_precoding, invert_precoding, PrecodingMatrix};
use crate::signal::{OfdmConfig, C64};

#[derive(Debug, Clone, Copy)]
pub enum LinkChannel<'a> {
    /// Unit gain on every subcarrier.
    Ideal,
    /// Time-domain convolution; taps must fit in the cyclic prefix.
    Taps(&'a ChannelRealization),
    /// Per-subcarrier multiplication by the frequency response.
    Response(&'a ChannelRealization),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CsiMode {
    /// The receiver knows the true frequency response.
    Perfect,
    /// Least-squares estimate from the preamble.
    Estimated,
}

#[derive(Debug, Clone, Copy)]
pub struct LinkParams<'a> {
    pub config: &'a OfdmConfig,
    pub precoder: Option<&'a PrecodingMatrix>,
    /// Average power per data symbol.
    pub p_t: f64,
    /// Soft-limiter back-off; `None` disables the PA model.
    pub pa_backoff: Option<f64>,
    pub channel: LinkChannel<'a>,
    pub snr_db: f64,
    pub csi: CsiMode,
    pub phase_tracking: bool,
    pub seed: u64,
}

impl<'a> LinkParams<'a> {
    /// Ideal channel, no noise, no PA, perfect CSI, unit power.
    pub fn ideal(config: &'a OfdmConfig) -> Self {
        LinkParams {
            config,
            precoder: None,
            p_t: 1.0,
            pa_backoff: None,
            channel: LinkChannel::Ideal,
            snr_db: f64::INFINITY,
            csi: CsiMode::Perfect,
            phase_tracking: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinkOutput {
    /// Data symbols before precoding, per OFDM symbol.
    pub sent: Vec<Vec<C64>>,
    /// Recovered data symbols after equalization and inverse precoding.
    pub received: Vec<Vec<C64>>,
    /// Equalized symbols still in the precoded domain.
    pub equalized: Vec<Vec<C64>>,
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub frame: OfdmFrame,
    /// Data positions clamped by the equalization floor.
    pub floored: Vec<usize>,
}

/// Maps real values onto normalized symbol segments (no precoding).
pub fn values_to_segments(values: &[f64], config: &OfdmConfig, p_t: f64) -> Result<Vec<SymbolSegment>> {
    let seg = segment_values(values, config.n_data())?;
    let last = seg.segments.len().saturating_sub(1);
    seg.segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (scaled, scale) = power_normalize(s, p_t);
            Ok(SymbolSegment {
                symbols: map_to_symbols(&scaled)?,
                scale,
                pad_count: if i == last { seg.pad_count } else { 0 },
            })
        })
        .collect()
}

/// Builds the transmitted frame for `values`: returns the frame and the
/// unprecoded symbols.
pub fn build_frame(values: &[f64], params: &LinkParams<'_>) -> Result<(OfdmFrame, Vec<SymbolSegment>)> {
    let segments = values_to_segments(values, params.config, params.p_t)?;
    let precoded = match params.precoder {
        Some(v) => segments
            .iter()
            .map(|s| {
                Ok(SymbolSegment {
                    symbols: apply_precoding(v, &s.symbols)?,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => segments.clone(),
    };
    Ok((modulate_frame(&precoded, params.config)?, segments))
}

/// Sends `values` through the full chain.
pub fn transmit_values(values: &[f64], params: &LinkParams<'_>) -> Result<LinkOutput> {
    let config = params.config;
    let (frame, segments) = build_frame(values, params)?;

    let tx = match params.pa_backoff {
        Some(backoff) => {
            // Clip level is set on the payload so the preamble does not skew it.
            let level = clip_amplitude_for_backoff(frame.payload(config), backoff);
            pa_soft_clip(&frame.time_samples, level)?
        }
        None => frame.time_samples.clone(),
    };

    let (mut rx, response) = match params.channel {
        LinkChannel::Ideal => (tx, None),
        LinkChannel::Taps(r) => {
            let quiet = ChannelProfile {
                n_taps: r.taps.len(),
                decay: 0.0,
                snr_db: f64::INFINITY,
            };
            (apply_channel(&tx, r, &quiet, config, params.seed)?, Some(r))
        }
        LinkChannel::Response(r) => (apply_frequency_response(&tx, r, config)?, Some(r)),
    };
    add_awgn(&mut rx, noise_variance(params.snr_db), params.seed);

    let estimate = match params.csi {
        CsiMode::Perfect => match response {
            Some(r) => ChannelEstimate::from_response(&r.freq_response),
            None => ChannelEstimate::from_response(&alloc::vec![C64::new(1.0, 0.0); config.n_subcarriers]),
        },
        CsiMode::Estimated => estimate_channel_ls(split_frame(&rx, config)?.0, config)?,
    };

    let demod = demodulate_frame(&rx, config)?;
    let data = if params.phase_tracking {
        cpe_correct(&demod.data, &demod.pilots, &estimate, config)?.symbols
    } else {
        demod.data
    };

    let mut equalized = Vec::with_capacity(data.len());
    let mut floored = Vec::new();
    for z in &data {
        let eq = equalize(z, &estimate, config)?;
        for p in eq.floored {
            if !floored.contains(&p) {
                floored.push(p);
            }
        }
        equalized.push(eq.symbols);
    }
    let received = match params.precoder {
        Some(v) => equalized.iter().map(|x| invert_precoding(v, x)).collect::<Result<Vec<_>>>()?,
        None => equalized.clone(),
    };

    let scales: Vec<f64> = segments.iter().map(|s| s.scale).collect();
    let pad = segments.last().map_or(0, |s| s.pad_count);
    let values = segments_to_values(&received, &scales, pad)?;
    Ok(LinkOutput {
        sent: segments.into_iter().map(|s| s.symbols).collect(),
        received,
        equalized,
        scales,
        values,
        frame,
        floored,
    })
}

/// Sends a feature block and rebuilds it at the receiver. Recovered values
/// are not clipped back into `[-1, 1]`; use [`transmit_values`] output for
/// error statistics.
pub fn transmit_block(block: &FeatureBlock, params: &LinkParams<'_>) -> Result<LinkOutput> {
    transmit_values(block.as_slice(), params)
}
