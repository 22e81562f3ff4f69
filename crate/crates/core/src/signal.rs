//! Shared numeric types, the subcarrier plan and unitary DFT utilities.
//!
//! Every transform in this crate uses the unitary convention: both the
//! forward and the inverse DFT are scaled by `1/sqrt(K)`, so Parseval holds
//! exactly and per-subcarrier powers carry over to the time domain.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // float methods without std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Complex baseband sample.
pub type C64 = Complex64;

const TRAINING_SEED: u64 = 0x0fd3_7a11_2b5e_e0c1;

/// Subcarrier plan and frame timing for one OFDM link.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct OfdmConfig {
    /// FFT size `K`.
    pub n_subcarriers: usize,
    /// Cyclic prefix length `L` in samples.
    pub cp_len: usize,
    /// Sample rate / occupied bandwidth `B` in Hz.
    pub bandwidth_hz: f64,
    /// Data subcarrier bins in `[0, K)`, in transmission order.
    pub data_indices: Vec<usize>,
    /// In-symbol pilot bins in `[0, K)`.
    pub pilot_indices: Vec<usize>,
    /// Known symbols transmitted on `pilot_indices`.
    pub pilot_values: Vec<C64>,
    /// Number of full-band training symbols forming the preamble.
    pub preamble_repeats: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self::wlan_20()
    }
}

impl OfdmConfig {
    /// The legacy 64-bin WLAN plan: 48 data bins at frequency offsets
    /// -26..=26 (DC and pilots excluded), pilots at -21, -7, 7, 21,
    /// L = 16, 10 MHz and a two-symbol preamble.
    pub fn wlan_20() -> Self {
        let k = 64usize;
        let pilot_offsets = [-21i64, -7, 7, 21];
        let bin = |f: i64| f.rem_euclid(k as i64) as usize;
        let data_indices = (-26i64..=26)
            .filter(|f| *f != 0 && !pilot_offsets.contains(f))
            .map(bin)
            .collect();
        let pilot_indices = pilot_offsets.iter().map(|&f| bin(f)).collect();
        let pilot_values = [1.0, -1.0, 1.0, -1.0]
            .iter()
            .map(|&v| C64::new(v, 0.0))
            .collect();
        OfdmConfig {
            n_subcarriers: k,
            cp_len: 16,
            bandwidth_hz: 10e6,
            data_indices,
            pilot_indices,
            pilot_values,
            preamble_repeats: 2,
        }
    }

    /// A plan with every bin carrying data and no pilots. Mostly useful for
    /// small hand-checked cases.
    pub fn all_data(n_subcarriers: usize, cp_len: usize, bandwidth_hz: f64) -> Self {
        OfdmConfig {
            n_subcarriers,
            cp_len,
            bandwidth_hz,
            data_indices: (0..n_subcarriers).collect(),
            pilot_indices: Vec::new(),
            pilot_values: Vec::new(),
            preamble_repeats: 1,
        }
    }

    pub fn n_data(&self) -> usize {
        self.data_indices.len()
    }

    pub fn n_pilots(&self) -> usize {
        self.pilot_indices.len()
    }

    /// Samples per CP-extended OFDM symbol, `K + L`.
    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    /// Duration of one CP-extended symbol in seconds.
    pub fn symbol_duration(&self) -> f64 {
        self.symbol_len() as f64 / self.bandwidth_hz
    }

    /// Preamble duration `T_p = repeats * (K + L) / B`.
    pub fn preamble_duration(&self) -> f64 {
        self.preamble_repeats as f64 * self.symbol_duration()
    }

    /// Subcarrier spacing `B / K` in Hz.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth_hz / self.n_subcarriers as f64
    }

    /// Signed frequency offset of bin `idx` (bins above K/2 are negative).
    pub fn frequency_offset(&self, idx: usize) -> i64 {
        let k = self.n_subcarriers as i64;
        let i = idx as i64;
        if i >= (k + 1) / 2 {
            i - k
        } else {
            i
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_subcarriers;
        if k == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if self.cp_len == 0 || self.cp_len >= k {
            return Err(Error::Config(alloc::format!(
                "CP length {} must satisfy 0 < L < K = {k}",
                self.cp_len
            )));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if self.data_indices.is_empty() {
            return Err(Error::Config("no data subcarriers".into()));
        }
        if self.pilot_values.len() != self.pilot_indices.len() {
            return Err(Error::Config(alloc::format!(
                "{} pilot values for {} pilot bins",
                self.pilot_values.len(),
                self.pilot_indices.len()
            )));
        }
        let mut used = vec![false; k];
        for &i in self.data_indices.iter().chain(&self.pilot_indices) {
            if i >= k {
                return Err(Error::Config(alloc::format!("bin {i} outside [0, {k})")));
            }
            if core::mem::replace(&mut used[i], true) {
                return Err(Error::Config(alloc::format!("bin {i} assigned twice")));
            }
        }
        if self.pilot_values.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("pilot values must be finite".into()));
        }
        Ok(())
    }

    /// Known full-band training symbol used by every preamble repeat:
    /// unit-magnitude QPSK phases drawn from a fixed seed.
    pub fn training_symbol(&self) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(TRAINING_SEED);
        (0..self.n_subcarriers)
            .map(|_| {
                let quadrant = rng.random_range(0..4u32) as f64;
                C64::from_polar(1.0, PI / 4.0 + quadrant * PI / 2.0)
            })
            .collect()
    }

    /// Time-domain power of the pilot-only waveform at each of the K
    /// sample positions (pilots are deterministic, so this is `|y_p[n]|^2`).
    pub fn pilot_time_power(&self) -> Vec<f64> {
        let mut freq = vec![C64::new(0.0, 0.0); self.n_subcarriers];
        for (&i, &p) in self.pilot_indices.iter().zip(&self.pilot_values) {
            freq[i] = p;
        }
        unitary_idft(&freq).iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Precomputed radix-2 (or direct, for other sizes) unitary DFT of size K.
#[derive(Debug, Clone)]
pub struct DftPlan {
    n: usize,
    twiddles: Vec<C64>,
    scale: f64,
}

impl DftPlan {
    pub fn new(n: usize) -> Self {
        // twiddles[m] = exp(-2πi m / n)
        let twiddles = (0..n.max(1))
            .map(|m| C64::from_polar(1.0, -2.0 * PI * m as f64 / n.max(1) as f64))
            .collect();
        DftPlan {
            n,
            twiddles,
            scale: 1.0 / (n.max(1) as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.checked_copy(x)?;
        self.forward_in_place(&mut out);
        Ok(out)
    }

    pub fn inverse(&self, x: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.checked_copy(x)?;
        self.inverse_in_place(&mut out);
        Ok(out)
    }

    /// Panics if `buf.len() != self.len()`.
    pub fn forward_in_place(&self, buf: &mut [C64]) {
        self.transform(buf, false);
    }

    /// Panics if `buf.len() != self.len()`.
    pub fn inverse_in_place(&self, buf: &mut [C64]) {
        self.transform(buf, true);
    }

    fn checked_copy(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.n {
            return Err(invalid(alloc::format!(
                "DFT input has {} samples, plan size is {}",
                x.len(),
                self.n
            )));
        }
        Ok(x.to_vec())
    }

    fn twiddle(&self, m: usize, inverse: bool) -> C64 {
        let w = self.twiddles[m % self.n];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    fn transform(&self, buf: &mut [C64], inverse: bool) {
        assert_eq!(buf.len(), self.n, "DFT buffer length");
        let n = self.n;
        if n <= 1 {
            return;
        }
        if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            for i in 0..n {
                let j = i.reverse_bits() >> (usize::BITS - bits);
                if j > i {
                    buf.swap(i, j);
                }
            }
            let mut len = 2;
            while len <= n {
                let stride = n / len;
                for start in (0..n).step_by(len) {
                    for m in 0..len / 2 {
                        let w = self.twiddle(m * stride, inverse);
                        let a = buf[start + m];
                        let b = buf[start + m + len / 2] * w;
                        buf[start + m] = a + b;
                        buf[start + m + len / 2] = a - b;
                    }
                }
                len <<= 1;
            }
        } else {
            let input = buf.to_vec();
            for (k, out) in buf.iter_mut().enumerate() {
                *out = input
                    .iter()
                    .enumerate()
                    .map(|(t, &v)| v * self.twiddle(k * t, inverse))
                    .sum();
            }
        }
        for v in buf.iter_mut() {
            *v *= self.scale;
        }
    }
}

/// Unitary forward DFT of `x` (size taken from the input).
pub fn unitary_dft(x: &[C64]) -> Vec<C64> {
    let mut out = x.to_vec();
    DftPlan::new(x.len()).forward_in_place(&mut out);
    out
}

/// Unitary inverse DFT of `x`; `unitary_dft(&unitary_idft(x)) == x`.
pub fn unitary_idft(x: &[C64]) -> Vec<C64> {
    let mut out = x.to_vec();
    DftPlan::new(x.len()).inverse_in_place(&mut out);
    out
}

/// The data-subcarrier rows of the K-point unitary DFT matrix (`K_d x K`).
#[derive(Debug, Clone, PartialEq)]
pub struct DftMatrixTruncated {
    pub entries: DMatrix<C64>,
}

impl DftMatrixTruncated {
    /// Column `k`, i.e. the vector `f_k` with `y[k] = f_k^H x`.
    pub fn column(&self, k: usize) -> Vec<C64> {
        self.entries.column(k).iter().copied().collect()
    }
}

pub fn truncated_dft_matrix(config: &OfdmConfig) -> Result<DftMatrixTruncated> {
    config.validate()?;
    let k = config.n_subcarriers;
    let scale = 1.0 / (k as f64).sqrt();
    let entries = DMatrix::from_fn(config.n_data(), k, |r, n| {
        let idx = (config.data_indices[r] * n) % k;
        C64::from_polar(scale, -2.0 * PI * idx as f64 / k as f64)
    });
    Ok(DftMatrixTruncated { entries })
}

/// Sum of squared magnitudes.
pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    /// Direct O(K^2) evaluation of the unitary DFT definition.
    fn naive_dft(x: &[C64], sign: f64) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, &v)| v * C64::from_polar(1.0, sign * 2.0 * PI * (k * t) as f64 / n as f64))
                    .sum::<C64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn zeros_map_to_zeros() {
        let z = vec![c(0.0, 0.0); 64];
        assert_eq!(unitary_dft(&z), z);
        assert_eq!(unitary_idft(&z), z);
    }

    #[test]
    fn impulse_and_flat_spectrum() {
        let impulse = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        for v in unitary_dft(&impulse) {
            assert!((v - c(0.5, 0.0)).norm() < 1e-15);
        }
        let flat = [c(1.0, 0.0); 4];
        let y = unitary_idft(&flat);
        let expected = [c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        for (a, b) in y.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn matches_direct_evaluation() {
        for n in [4, 16, 64, 6, 12] {
            let x = random_vec(n, n as u64);
            let fast = unitary_dft(&x);
            let slow = naive_dft(&x, -1.0);
            let fast_inv = unitary_idft(&x);
            let slow_inv = naive_dft(&x, 1.0);
            for i in 0..n {
                assert!((fast[i] - slow[i]).norm() < 1e-12);
                assert!((fast_inv[i] - slow_inv[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_and_inverse_pair() {
        for n in [4, 16, 64] {
            let x = random_vec(n, 7 + n as u64);
            let y = unitary_idft(&x);
            assert!((energy(&y) - energy(&x)).abs() <= 1e-10 * energy(&x));
            let back = unitary_dft(&y);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn plan_rejects_length_mismatch() {
        let plan = DftPlan::new(64);
        assert!(matches!(plan.forward(&[c(1.0, 0.0); 63]), Err(Error::InvalidArgument(_))));
        assert!(matches!(plan.inverse(&[c(1.0, 0.0); 65]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn wlan_plan_partitions_bins() {
        let cfg = OfdmConfig::wlan_20();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_data(), 48);
        assert_eq!(cfg.n_pilots(), 4);
        assert_eq!(cfg.n_subcarriers - cfg.n_data() - cfg.n_pilots(), 12);
        assert!(!cfg.data_indices.contains(&0));
        let t_p = cfg.preamble_duration();
        assert!((t_p - 2.0 * 80.0 / 10e6).abs() < 1e-18);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = OfdmConfig::wlan_20();
        cfg.cp_len = 64;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = OfdmConfig::wlan_20();
        cfg.pilot_indices[0] = cfg.data_indices[0];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = OfdmConfig::wlan_20();
        cfg.data_indices.push(64);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn truncated_matrix_without_truncation_is_full_dft() {
        let cfg = OfdmConfig::all_data(4, 1, 1.0);
        let f = truncated_dft_matrix(&cfg).unwrap();
        for r in 0..4 {
            let mut e = vec![c(0.0, 0.0); 4];
            e[r] = c(1.0, 0.0);
            // The DFT matrix is symmetric, so DFT(e_r) is row r.
            let row = unitary_dft(&e);
            for (k, v) in row.iter().enumerate() {
                assert!((f.entries[(r, k)] - v).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn truncated_matrix_rows_orthonormal_and_column_norms() {
        let cfg = OfdmConfig::wlan_20();
        let f = truncated_dft_matrix(&cfg).unwrap();
        let gram = &f.entries * f.entries.adjoint();
        let eye = DMatrix::<C64>::identity(48, 48);
        let max_dev = (gram - eye).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(max_dev < 1e-10);
        for k in 0..64 {
            let col = f.column(k);
            assert!((energy(&col) - 48.0 / 64.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pilot_power_sums_to_pilot_energy() {
        let cfg = OfdmConfig::wlan_20();
        let p: f64 = cfg.pilot_time_power().iter().sum();
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn frequency_offsets_are_signed() {
        let cfg = OfdmConfig::wlan_20();
        assert_eq!(cfg.frequency_offset(1), 1);
        assert_eq!(cfg.frequency_offset(63), -1);
        assert_eq!(cfg.frequency_offset(38), -26);
    }
}
