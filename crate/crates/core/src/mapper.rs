//! Real feature sequences to complex data symbols and back.
//!
//! A segment `s` of `2 K_d` reals becomes `K_d` symbols: the first half
//! feeds the real parts and the second half the imaginary parts, with the
//! imaginary sign alternating from one symbol to the next. With symbols
//! numbered from 1, odd symbols get `+j` and even symbols `-j`.

use alloc::vec::Vec;

#[allow(unused_imports)] // float methods without std
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::feature::FeatureBlock;
use crate::signal::{OfdmConfig, C64};

/// One OFDM symbol's worth of data symbols plus what the receiver needs to
/// undo the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSegment {
    pub symbols: Vec<C64>,
    /// Amplitude factor applied by [`power_normalize`].
    pub scale: f64,
    /// Zero reals appended to the source segment.
    pub pad_count: usize,
}

/// A feature tensor cut into `2 K_d`-long real segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<Vec<f64>>,
    /// Zeros appended to the final segment.
    pub pad_count: usize,
    /// Number of real values before padding.
    pub source_len: usize,
}

/// Splits the channel-major flattened block into segments of `2 K_d`,
/// zero-padding the last one.
pub fn segment_features(block: &FeatureBlock, config: &OfdmConfig) -> Result<Segmentation> {
    segment_values(block.as_slice(), config.n_data())
}

pub fn segment_values(values: &[f64], n_data: usize) -> Result<Segmentation> {
    if values.is_empty() {
        return Err(invalid("cannot segment an empty feature sequence"));
    }
    if n_data == 0 {
        return Err(invalid("no data subcarriers"));
    }
    let seg_len = 2 * n_data;
    let segments: Vec<Vec<f64>> = values
        .chunks(seg_len)
        .map(|chunk| {
            let mut s = chunk.to_vec();
            s.resize(seg_len, 0.0);
            s
        })
        .collect();
    let pad_count = segments.len() * seg_len - values.len();
    Ok(Segmentation {
        segments,
        pad_count,
        source_len: values.len(),
    })
}

/// Concatenates segments and drops the trailing padding.
pub fn unsegment(segments: &[Vec<f64>], pad_count: usize) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = segments.iter().flatten().copied().collect();
    if pad_count > out.len() {
        return Err(invalid(alloc::format!(
            "pad count {pad_count} exceeds {} values",
            out.len()
        )));
    }
    out.truncate(out.len() - pad_count);
    Ok(out)
}

/// Scales a real segment so its mapped symbols carry average power `p_t`:
/// with mean square `m`, `scale = sqrt(p_t / (2 m))` because every symbol
/// holds two reals. An all-zero segment is returned as is with scale 1.
pub fn power_normalize(segment: &[f64], p_t: f64) -> (Vec<f64>, f64) {
    let m = segment.iter().map(|v| v * v).sum::<f64>() / segment.len().max(1) as f64;
    if m == 0.0 {
        return (segment.to_vec(), 1.0);
    }
    let scale = (p_t / (2.0 * m)).sqrt();
    (segment.iter().map(|v| v * scale).collect(), scale)
}

pub fn power_denormalize(segment: &[f64], scale: f64) -> Vec<f64> {
    segment.iter().map(|v| v / scale).collect()
}

#[inline]
fn imag_sign(k: usize) -> f64 {
    // k is zero-based, so k = 0 is the first (odd) symbol.
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps `2 K_d` reals to `K_d` complex symbols.
pub fn map_to_symbols(s: &[f64]) -> Result<Vec<C64>> {
    if s.len() % 2 != 0 || s.is_empty() {
        return Err(invalid(alloc::format!(
            "segment length {} is not 2 K_d",
            s.len()
        )));
    }
    let half = s.len() / 2;
    Ok((0..half)
        .map(|k| C64::new(s[k], imag_sign(k) * s[k + half]))
        .collect())
}

/// Same as [`map_to_symbols`] with an explicit `K_d` check.
pub fn map_to_symbols_checked(s: &[f64], n_data: usize) -> Result<Vec<C64>> {
    if s.len() != 2 * n_data {
        return Err(invalid(alloc::format!(
            "segment has {} values, expected 2 K_d = {}",
            s.len(),
            2 * n_data
        )));
    }
    map_to_symbols(s)
}

/// Left inverse of [`map_to_symbols`].
pub fn inverse_map(x: &[C64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(invalid("empty symbol vector"));
    }
    let half = x.len();
    let mut s = alloc::vec![0.0; 2 * half];
    for (k, v) in x.iter().enumerate() {
        s[k] = v.re;
        s[k + half] = imag_sign(k) * v.im;
    }
    Ok(s)
}

pub fn inverse_map_checked(x: &[C64], n_data: usize) -> Result<Vec<f64>> {
    if x.len() != n_data {
        return Err(invalid(alloc::format!(
            "{} symbols, expected K_d = {n_data}",
            x.len()
        )));
    }
    inverse_map(x)
}

/// The direct mapping that places adjacent reals on the real and imaginary
/// parts of one symbol. Kept as a baseline for comparisons.
pub fn map_adjacent_pairs(s: &[f64]) -> Result<Vec<C64>> {
    if s.len() % 2 != 0 || s.is_empty() {
        return Err(invalid("segment length must be even"));
    }
    Ok(s.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
}

/// Segments, normalizes and maps a whole block.
pub fn block_to_segments(block: &FeatureBlock, config: &OfdmConfig, p_t: f64) -> Result<Vec<SymbolSegment>> {
    let seg = segment_features(block, config)?;
    let last = seg.segments.len() - 1;
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

/// Inverse of [`block_to_segments`]: `symbols[i]` are the recovered data
/// symbols of segment `i`, `scales[i]` its normalization factor.
pub fn segments_to_values(symbols: &[Vec<C64>], scales: &[f64], pad_count: usize) -> Result<Vec<f64>> {
    if symbols.len() != scales.len() {
        return Err(invalid("one scale per segment required"));
    }
    let reals = symbols
        .iter()
        .zip(scales)
        .map(|(x, &scale)| Ok(power_denormalize(&inverse_map(x)?, scale)))
        .collect::<Result<Vec<_>>>()?;
    unsegment(&reals, pad_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{generate_features, FeatureSpec};
    use proptest::prelude::*;

    #[test]
    fn worked_mapping_example() {
        let x = map_to_symbols(&[0.1, -0.2, 0.3, 0.4]).unwrap();
        assert_eq!(x, alloc::vec![C64::new(0.1, 0.3), C64::new(-0.2, -0.4)]);
        assert_eq!(inverse_map(&x).unwrap(), alloc::vec![0.1, -0.2, 0.3, 0.4]);
        assert_eq!(map_to_symbols(&[0.0; 8]).unwrap(), alloc::vec![C64::new(0.0, 0.0); 4]);
        assert_eq!(inverse_map(&[C64::new(0.0, 0.0); 4]).unwrap(), alloc::vec![0.0; 8]);
    }

    #[test]
    fn length_checks() {
        assert!(map_to_symbols(&[0.1, 0.2, 0.3]).is_err());
        assert!(map_to_symbols_checked(&[0.0; 6], 2).is_err());
        assert!(inverse_map_checked(&[C64::new(0.0, 0.0); 3], 2).is_err());
    }

    #[test]
    fn segmentation_lengths() {
        let kd = 48;
        let exact = segment_values(&alloc::vec![0.5; 96], kd).unwrap();
        assert_eq!((exact.segments.len(), exact.pad_count), (1, 0));
        let over = segment_values(&alloc::vec![0.5; 97], kd).unwrap();
        assert_eq!((over.segments.len(), over.pad_count), (2, 95));
        assert!(over.segments[1][1..].iter().all(|&v| v == 0.0));
        assert!(segment_values(&[], kd).is_err());
    }

    #[test]
    fn segmentation_roundtrip_on_block() {
        let cfg = OfdmConfig::wlan_20();
        let spec = FeatureSpec { height: 7, width: 5, channels: 3, rho: 0.9, sigma: 0.5 };
        let b = generate_features(&spec, 4).unwrap();
        let seg = segment_features(&b, &cfg).unwrap();
        assert_eq!(unsegment(&seg.segments, seg.pad_count).unwrap(), b.as_slice());
    }

    #[test]
    fn normalization() {
        let (z, scale) = power_normalize(&[0.0; 4], 1.0);
        assert_eq!((z, scale), (alloc::vec![0.0; 4], 1.0));

        let s = [0.5, -0.25, 1.0, 0.75];
        let m = s.iter().map(|v| v * v).sum::<f64>() / 4.0;
        let (scaled, scale) = power_normalize(&s, 1.0);
        assert!((scale - 1.0 / (2.0 * m).sqrt()).abs() < 1e-15);
        let x = map_to_symbols(&scaled).unwrap();
        let power = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        assert!((power - 1.0).abs() < 1e-12);
        let back = power_denormalize(&scaled, scale);
        for (a, b) in back.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn block_pipeline_roundtrip() {
        let cfg = OfdmConfig::wlan_20();
        let spec = FeatureSpec { height: 9, width: 9, channels: 2, rho: 0.9, sigma: 0.5 };
        let b = generate_features(&spec, 8).unwrap();
        let segs = block_to_segments(&b, &cfg, 1.0).unwrap();
        let symbols: Vec<_> = segs.iter().map(|s| s.symbols.clone()).collect();
        let scales: Vec<_> = segs.iter().map(|s| s.scale).collect();
        let pad = segs.last().unwrap().pad_count;
        let back = segments_to_values(&symbols, &scales, pad).unwrap();
        for (a, b) in back.iter().zip(b.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn mapping_roundtrip_is_exact(s in prop::collection::vec(-1.0f64..1.0, 1..64usize)) {
            let mut s = s;
            if s.len() % 2 == 1 { s.push(0.0); }
            let x = map_to_symbols(&s).unwrap();
            prop_assert_eq!(inverse_map(&x).unwrap(), s.clone());
            let energy_s: f64 = s.iter().map(|v| v * v).sum();
            let energy_x: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((energy_s - energy_x).abs() <= 1e-12 * energy_s.max(1.0));
        }
    }
}
