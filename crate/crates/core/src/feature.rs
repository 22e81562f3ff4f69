//! Encoder-like feature tensors: the synthetic AR(1) source, the clip
//! activation, half-precision quantization and the binary tensor format.

use alloc::vec::Vec;

use half::f16;
#[allow(unused_imports)] // float methods without std
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Magic bytes opening every feature tensor file.
pub const FEATURE_MAGIC: [u8; 2] = *b"JF";
pub const FEATURE_FORMAT_VERSION: u16 = 1;
pub const FEATURE_HEADER_LEN: usize = 16;

/// An `H x W x C` real feature tensor.
///
/// Values are stored channel-major (each channel is one contiguous `H*W`
/// plane in row-major order), which is also the transmission order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureBlock {
    /// Builds a block from channel-major data, checking the `[-1, 1]` range.
    pub fn from_channel_major(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("feature height and width must be at least 1"));
        }
        if data.len() != height * width * channels {
            return Err(invalid(alloc::format!(
                "{} values for a {height}x{width}x{channels} tensor",
                data.len()
            )));
        }
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(Error::Validation(alloc::format!("element {i} = {v} is outside [-1, 1]")));
        }
        Ok(FeatureBlock { height, width, channels, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureBlock {
            height,
            width,
            channels,
            data: alloc::vec![0.0; height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Elements per channel plane, `H * W`.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Channel-major flattened values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, row: usize, col: usize, c: usize) -> f64 {
        self.data[c * self.plane_len() + row * self.width + col]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Serializes to the binary tensor format: a 16-byte little-endian header
    /// (`magic: [u8; 2]`, `version: u16`, `H, W, C: u32`) followed by
    /// `H*W*C` little-endian `f32` values in row-major `H, W, C` order.
    ///
    /// Values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * self.len());
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_FORMAT_VERSION.to_le_bytes());
        for dim in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for row in 0..self.height {
            for col in 0..self.width {
                for c in 0..self.channels {
                    out.extend_from_slice(&(self.get(row, col, c) as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FEATURE_HEADER_LEN {
            return Err(Error::Format(alloc::format!(
                "feature file has {} bytes, header alone is {FEATURE_HEADER_LEN}",
                bytes.len()
            )));
        }
        if bytes[..2] != FEATURE_MAGIC {
            return Err(Error::Format("bad feature file magic".into()));
        }
        let version = u16::from_le_bytes([bytes[2], bytes[3]]);
        if version != FEATURE_FORMAT_VERSION {
            return Err(Error::Format(alloc::format!("unsupported feature format version {version}")));
        }
        let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        let (height, width, channels) = (dim(4), dim(8), dim(12));
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Format(alloc::format!(
                "header declares a {height}x{width}x{channels} tensor"
            )));
        }
        let count = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Format("tensor dimensions overflow".into()))?;
        let payload = &bytes[FEATURE_HEADER_LEN..];
        if payload.len() != count * 4 {
            return Err(Error::Format(alloc::format!(
                "payload has {} bytes, header implies {}",
                payload.len(),
                count * 4
            )));
        }
        let plane = height * width;
        let mut data = alloc::vec![0.0; count];
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
            let (pixel, c) = (i / channels, i % channels);
            data[c * plane + pixel] = v;
        }
        FeatureBlock::from_channel_major(height, width, channels, data)
    }
}

/// Parameters of the synthetic encoder stand-in.
///
/// Channels are independent and statistically exchangeable, so unlike a
/// trained progressive encoder they carry no importance ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FeatureSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// AR(1) coefficient over the flattened per-channel index.
    pub rho: f64,
    /// Marginal standard deviation before clipping.
    pub sigma: f64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            height: 64,
            width: 64,
            channels: 12,
            rho: 0.9,
            sigma: 0.5,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return Err(invalid("feature dimensions must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid(alloc::format!("rho = {} outside [0, 1)", self.rho)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid(alloc::format!("sigma = {} must be positive", self.sigma)));
        }
        Ok(())
    }
}

/// Pre-activation AR(1) Gaussian features, channel-major.
pub fn generate_raw_features(spec: &FeatureSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = spec.height * spec.width;
    let innovation = spec.sigma * (1.0 - spec.rho * spec.rho).sqrt();
    let mut data = Vec::with_capacity(plane * spec.channels);
    for _ in 0..spec.channels {
        let mut prev: f64 = 0.0;
        for i in 0..plane {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = if i == 0 { spec.sigma * z } else { spec.rho * prev + innovation * z };
            data.push(prev);
        }
    }
    Ok(data)
}

/// AR(1) features passed through the clip activation.
pub fn generate_features(spec: &FeatureSpec, seed: u64) -> Result<FeatureBlock> {
    let raw = generate_raw_features(spec, seed)?;
    let data = raw.into_iter().map(clamp_unit).collect();
    FeatureBlock::from_channel_major(spec.height, spec.width, spec.channels, data)
}

#[inline]
fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// `min(max(x, -1), 1)`.
pub fn clip_activation(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(invalid("clip activation of NaN"));
    }
    Ok(clamp_unit(x))
}

/// Rounds every value to the nearest IEEE binary16 value (ties to even).
pub fn quantize_half(block: &FeatureBlock) -> FeatureBlock {
    FeatureBlock {
        data: block.data.iter().map(|&v| f16::from_f64(v).to_f64()).collect(),
        ..*block
    }
}

/// Lag-`d` Pearson correlation of each flattened channel, averaged over
/// channels, for `d = 0..=max_distance`.
pub fn empirical_feature_correlation(block: &FeatureBlock, max_distance: usize) -> Result<Vec<f64>> {
    let n = block.plane_len();
    if n <= max_distance {
        return Err(invalid(alloc::format!(
            "H*W = {n} must exceed max_distance = {max_distance}"
        )));
    }
    if block.channels() == 0 {
        return Err(invalid("block has no channels"));
    }
    let mut acc = alloc::vec![0.0; max_distance + 1];
    for c in 0..block.channels() {
        let x = block.channel(c);
        for (d, slot) in acc.iter_mut().enumerate() {
            *slot += lagged_correlation(x, d)?;
        }
    }
    let channels = block.channels() as f64;
    Ok(acc.into_iter().map(|v| v / channels).collect())
}

/// Pearson correlation between `x[..n-d]` and `x[d..]`.
pub fn lagged_correlation(x: &[f64], d: usize) -> Result<f64> {
    if x.len() <= d {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: x.len(),
        });
    }
    let (a, b) = (&x[..x.len() - d], &x[d..]);
    let constant = |s: &[f64]| s.iter().all(|&v| v == s[0]);
    if constant(a) || constant(b) {
        return Err(Error::UndefinedCorrelation);
    }
    let m = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / m;
    let mean_b = b.iter().sum::<f64>() / m;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&u, &v) in a.iter().zip(b) {
        let (du, dv) = (u - mean_a, v - mean_b);
        sab += du * dv;
        saa += du * du;
        sbb += dv * dv;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    if d == 0 {
        return Ok(1.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}
