//! Cross-subcarrier precoding: symbol and channel covariance models, the
//! decorrelation + peak-power objective, the row-wise optimizer and the
//! precoding transform itself.

mod optimize;

pub use optimize::{
    balanced_omega, optimize_from_init, optimize_precoder, optimize_precoder_traced, select_best, InitResult, InitTrace,
    OptimizerSettings, PrecoderProblem,
};

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // float methods without std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::signal::{truncated_dft_matrix, OfdmConfig, C64};

/// Sample covariance `E{x x^H}` of the data symbols of one OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCovariance {
    pub matrix: DMatrix<C64>,
    pub sample_count: usize,
}

impl SymbolCovariance {
    pub fn identity(n: usize) -> Self {
        SymbolCovariance {
            matrix: DMatrix::identity(n, n),
            sample_count: 0,
        }
    }

    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        let cov = SymbolCovariance { matrix, sample_count: 0 };
        cov.validate()?;
        Ok(cov)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|v| v.re).sum()
    }

    /// Checks squareness, Hermitian symmetry (1e-10) and positive
    /// semidefiniteness (smallest eigenvalue >= -1e-8 * trace).
    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DegenerateCovariance(alloc::format!(
                "covariance must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(asym <= 1e-10 * m.iter().map(|v| v.norm()).fold(1.0, f64::max)) {
            return Err(Error::DegenerateCovariance(alloc::format!(
                "covariance is not Hermitian (max asymmetry {asym:e})"
            )));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -1e-8 * self.trace().abs().max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateCovariance(alloc::format!(
                "covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Mean-removed sample covariance `(1/M) sum (x - mu)(x - mu)^H` of `M`
/// symbol vectors, symmetrized.
pub fn estimate_symbol_covariance(segments: &[Vec<C64>]) -> Result<SymbolCovariance> {
    if segments.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: segments.len(),
        });
    }
    let n = segments[0].len();
    if n == 0 || segments.iter().any(|s| s.len() != n) {
        return Err(invalid("symbol vectors must share one non-zero length"));
    }
    let m = segments.len() as f64;
    // Work relative to the first vector: covariance is shift invariant and
    // identical vectors then center to exact zeros.
    let origin = &segments[0];
    let mut mean = alloc::vec![C64::new(0.0, 0.0); n];
    for s in segments {
        for ((acc, v), o) in mean.iter_mut().zip(s).zip(origin) {
            *acc += v - o;
        }
    }
    for v in mean.iter_mut() {
        *v /= m;
    }
    // upper triangle, row-major, then mirrored
    let mut acc = alloc::vec![C64::new(0.0, 0.0); n * n];
    let mut centered = alloc::vec![C64::new(0.0, 0.0); n];
    for s in segments {
        for (((c, v), o), mu) in centered.iter_mut().zip(s).zip(origin).zip(&mean) {
            *c = (v - o) - mu;
        }
        for i in 0..n {
            let xi = centered[i];
            let row = &mut acc[i * n..(i + 1) * n];
            for j in i..n {
                row[j] += xi * centered[j].conj();
            }
        }
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(acc[i * n + i].re / m, 0.0)
        } else if i < j {
            acc[i * n + j] / m
        } else {
            acc[j * n + i].conj() / m
        }
    });
    Ok(SymbolCovariance {
        matrix,
        sample_count: segments.len(),
    })
}

/// Fading correlation between data subcarriers: 1 within the coherence
/// bandwidth, 0 beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCovariance {
    pub matrix: DMatrix<f64>,
    /// Coherence bandwidth `K_c` in subcarriers.
    pub coherence: usize,
}

/// Banded 0/1 channel covariance: entry `(i, j)` is 1 iff the physical
/// (signed) frequency offsets of data bins `i` and `j` differ by less than
/// `K_c`. No wrap-around.
pub fn banded_channel_covariance(config: &OfdmConfig, coherence: usize) -> Result<ChannelCovariance> {
    config.validate()?;
    if coherence == 0 || coherence > config.n_subcarriers {
        return Err(invalid(alloc::format!(
            "K_c = {coherence} outside [1, {}]",
            config.n_subcarriers
        )));
    }
    let offsets: Vec<i64> = config.data_indices.iter().map(|&i| config.frequency_offset(i)).collect();
    let n = offsets.len();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if (offsets[i] - offsets[j]).unsigned_abs() < coherence as u64 {
            1.0
        } else {
            0.0
        }
    });
    Ok(ChannelCovariance { matrix, coherence })
}

/// A unitary `K_d x K_d` precoding matrix with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    v: DMatrix<C64>,
    pub objective_value: f64,
    pub omega: f64,
    pub init_count: usize,
}

/// Unitarity tolerance accepted when building or loading a precoder.
pub const UNITARY_TOLERANCE: f64 = 1e-6;

const PRECODER_MAGIC: [u8; 4] = *b"JPRC";

impl PrecodingMatrix {
    /// Wraps `v`, rejecting matrices with `||V V^H - I||_F > 1e-6`.
    pub fn new(v: DMatrix<C64>, objective_value: f64, omega: f64, init_count: usize) -> Result<Self> {
        if v.nrows() != v.ncols() || v.nrows() == 0 {
            return Err(invalid("precoding matrix must be square and non-empty"));
        }
        let dev = unitarity_error(&v);
        if !(dev <= UNITARY_TOLERANCE) {
            return Err(Error::InvalidPrecoder(dev));
        }
        Ok(PrecodingMatrix {
            v,
            objective_value,
            omega,
            init_count,
        })
    }

    pub fn identity(n: usize) -> Self {
        PrecodingMatrix {
            v: DMatrix::identity(n, n),
            objective_value: f64::NAN,
            omega: 0.0,
            init_count: 0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.v)
    }

    /// Binary layout, all little-endian: `b"JPRC"`, `K_d: u32`, `K_d^2`
    /// row-major entries as `(re: f64, im: f64)`, `objective: f64`,
    /// `omega: f64`, `N_r: u32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.dim();
        let mut out = Vec::with_capacity(8 + 16 * n * n + 20);
        out.extend_from_slice(&PRECODER_MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for i in 0..n {
            for j in 0..n {
                let z = self.v[(i, j)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.objective_value.to_le_bytes());
        out.extend_from_slice(&self.omega.to_le_bytes());
        out.extend_from_slice(&(self.init_count as u32).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || bytes[..4] != PRECODER_MAGIC {
            return Err(Error::Format("not a precoding matrix file".into()));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let expected = 8 + 16 * n * n + 20;
        if n == 0 || bytes.len() != expected {
            return Err(Error::Format(alloc::format!(
                "precoder file has {} bytes, K_d = {n} implies {expected}",
                bytes.len()
            )));
        }
        let f = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let v = DMatrix::from_fn(n, n, |i, j| {
            let at = 8 + 16 * (i * n + j);
            C64::new(f(at), f(at + 8))
        });
        let tail = 8 + 16 * n * n;
        let init_count = u32::from_le_bytes(bytes[tail + 16..tail + 20].try_into().unwrap()) as usize;
        PrecodingMatrix::new(v, f(tail), f(tail + 8), init_count)
    }
}

/// `||V V^H - I||_F`.
pub fn unitarity_error(v: &DMatrix<C64>) -> f64 {
    let n = v.nrows();
    let gram = v * v.adjoint();
    (gram - DMatrix::<C64>::identity(n, n)).norm()
}

/// `x^t = V x^d`.
pub fn apply_precoding(v: &PrecodingMatrix, x: &[C64]) -> Result<Vec<C64>> {
    let n = v.dim();
    if x.len() != n {
        return Err(invalid(alloc::format!("{} symbols for a {n}x{n} precoder", x.len())));
    }
    Ok((0..n)
        .map(|i| (0..n).map(|j| v.v[(i, j)] * x[j]).sum())
        .collect())
}

/// `V^H x̂`, the exact inverse of [`apply_precoding`].
pub fn invert_precoding(v: &PrecodingMatrix, x_hat: &[C64]) -> Result<Vec<C64>> {
    let n = v.dim();
    if x_hat.len() != n {
        return Err(invalid(alloc::format!("{} symbols for a {n}x{n} precoder", x_hat.len())));
    }
    Ok((0..n)
        .map(|j| (0..n).map(|i| v.v[(i, j)].conj() * x_hat[i]).sum())
        .collect())
}

/// Precoded symbol covariance `V C V^H`.
pub fn transmit_covariance(v: &DMatrix<C64>, cov: &SymbolCovariance) -> DMatrix<C64> {
    v * &cov.matrix * v.adjoint()
}

fn check_dims(v: &DMatrix<C64>, cov: &SymbolCovariance, config: &OfdmConfig, pilot_time_power: &[f64]) -> Result<()> {
    let n = config.n_data();
    if v.nrows() != n || v.ncols() != n || cov.dim() != n {
        return Err(invalid(alloc::format!(
            "V is {}x{}, covariance {}x{}, but K_d = {n}",
            v.nrows(),
            v.ncols(),
            cov.dim(),
            cov.dim()
        )));
    }
    if pilot_time_power.len() != config.n_subcarriers {
        return Err(invalid(alloc::format!(
            "{} pilot powers for K = {}",
            pilot_time_power.len(),
            config.n_subcarriers
        )));
    }
    Ok(())
}

/// Expected power at every time-domain sample of an OFDM symbol,
/// `p_y[k] = p_t f_k^H V C V^H f_k + p_p[k]`.
pub fn expected_ofdm_power(
    v: &PrecodingMatrix,
    cov: &SymbolCovariance,
    config: &OfdmConfig,
    p_t: f64,
    pilot_time_power: &[f64],
) -> Result<Vec<f64>> {
    check_dims(&v.v, cov, config, pilot_time_power)?;
    Ok(expected_power_of(&v.v, cov, config, p_t, pilot_time_power))
}

fn expected_power_of(
    v: &DMatrix<C64>,
    cov: &SymbolCovariance,
    config: &OfdmConfig,
    p_t: f64,
    pilot_time_power: &[f64],
) -> Vec<f64> {
    let f = truncated_dft_matrix(config).expect("validated by caller").entries;
    let r = transmit_covariance(v, cov);
    (0..config.n_subcarriers)
        .map(|k| {
            let fk = f.column(k);
            let rf = &r * fk;
            let quad: C64 = fk.iter().zip(rf.iter()).map(|(a, b)| a.conj() * b).sum();
            p_t * quad.re + pilot_time_power[k]
        })
        .collect()
}

/// Two parts of the precoding objective, kept apart for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    /// `sum rho_h[i,j] |rho_xt[i,j]|` with `rho_xt` normalized to unit diagonal.
    pub correlation: f64,
    /// `max_k p_y[k]`.
    pub peak_power: f64,
}

impl ObjectiveTerms {
    pub fn total(&self, omega: f64) -> f64 {
        self.correlation + omega * self.peak_power
    }
}

pub fn objective_terms(
    v: &DMatrix<C64>,
    cov_x: &SymbolCovariance,
    cov_h: &ChannelCovariance,
    config: &OfdmConfig,
    p_t: f64,
    pilot_time_power: &[f64],
) -> Result<ObjectiveTerms> {
    check_dims(v, cov_x, config, pilot_time_power)?;
    if cov_h.matrix.nrows() != config.n_data() || cov_h.matrix.ncols() != config.n_data() {
        return Err(invalid("channel covariance does not match K_d"));
    }
    let r = transmit_covariance(v, cov_x);
    let n = r.nrows();
    let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].re).collect();
    let scale = diag.iter().copied().fold(0.0, f64::max);
    if let Some(i) = diag.iter().position(|&d| !(d > 1e-14 * scale.max(f64::MIN_POSITIVE))) {
        return Err(Error::DegenerateCovariance(alloc::format!(
            "precoded symbol {i} has zero variance"
        )));
    }
    let mut correlation = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = cov_h.matrix[(i, j)];
            if w != 0.0 {
                correlation += w * r[(i, j)].norm() / (diag[i] * diag[j]).sqrt();
            }
        }
    }
    let peak_power = expected_power_of(v, cov_x, config, p_t, pilot_time_power)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ObjectiveTerms { correlation, peak_power })
}

/// `sum rho_h[i,j] |rho_xt[i,j]| + omega * max_k p_y[k]`.
pub fn precoding_objective(
    v: &DMatrix<C64>,
    cov_x: &SymbolCovariance,
    cov_h: &ChannelCovariance,
    config: &OfdmConfig,
    p_t: f64,
    pilot_time_power: &[f64],
    omega: f64,
) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(invalid(alloc::format!("omega = {omega} must be non-negative")));
    }
    Ok(objective_terms(v, cov_x, cov_h, config, p_t, pilot_time_power)?.total(omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_unitary(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| {
            c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        g.qr().q()
    }

    fn two_data_config() -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: 4,
            cp_len: 1,
            bandwidth_hz: 1.0,
            data_indices: alloc::vec![1, 2],
            pilot_indices: Vec::new(),
            pilot_values: Vec::new(),
            preamble_repeats: 1,
        }
    }

    #[test]
    fn covariance_of_white_symbols_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let segs: Vec<Vec<C64>> = (0..100_000)
            .map(|_| {
                (0..8)
                    .map(|_| {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        c(a * s, b * s)
                    })
                    .collect()
            })
            .collect();
        let cov = estimate_symbol_covariance(&segs).unwrap();
        let dev = (&cov.matrix - DMatrix::<C64>::identity(8, 8)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(dev < 0.02, "{dev}");
        cov.validate().unwrap();
    }

    #[test]
    fn repeated_segment_has_zero_covariance() {
        let seg = alloc::vec![c(0.3, -0.1), c(1.0, 0.5), c(-0.2, 0.0)];
        let cov = estimate_symbol_covariance(&[seg.clone(), seg.clone(), seg]).unwrap();
        assert!(cov.matrix.iter().all(|v| v.norm() < 1e-15));
        assert!(matches!(
            estimate_symbol_covariance(&[alloc::vec![c(1.0, 0.0)]]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn random_covariances_are_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let segs: Vec<Vec<C64>> = (0..20)
                .map(|_| (0..6).map(|_| c(rng.random::<f64>(), rng.random::<f64>() - 0.5)).collect())
                .collect();
            estimate_symbol_covariance(&segs).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn banded_covariance_shapes() {
        let cfg = OfdmConfig::wlan_20();
        let id = banded_channel_covariance(&cfg, 1).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(48, 48));
        let full = banded_channel_covariance(&cfg, 64).unwrap();
        assert!(full.matrix.iter().all(|&v| v == 1.0));
        let small = OfdmConfig {
            data_indices: alloc::vec![1, 2, 3, 4],
            ..OfdmConfig::all_data(16, 1, 1.0)
        };
        let tri = banded_channel_covariance(&small, 2).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[1., 1., 0., 0., 1., 1., 1., 0., 0., 1., 1., 1., 0., 0., 1., 1.],
        );
        assert_eq!(tri.matrix, expected);
        assert!(banded_channel_covariance(&cfg, 0).is_err());
        assert!(banded_channel_covariance(&cfg, 65).is_err());
        // bins 63 and 1 sit either side of DC: two subcarriers apart
        let i63 = cfg.data_indices.iter().position(|&i| i == 63).unwrap();
        let i1 = cfg.data_indices.iter().position(|&i| i == 1).unwrap();
        let k3 = banded_channel_covariance(&cfg, 3).unwrap();
        assert_eq!(k3.matrix[(i63, i1)], 1.0);
    }

    #[test]
    fn expected_power_identity_case() {
        let cfg = OfdmConfig::wlan_20();
        let v = PrecodingMatrix::identity(48);
        let cov = SymbolCovariance::identity(48);
        let zeros = alloc::vec![0.0; 64];
        let p = expected_ofdm_power(&v, &cov, &cfg, 1.0, &zeros).unwrap();
        assert!(p.iter().all(|&x| (x - 0.75).abs() < 1e-12));
        let p0 = expected_ofdm_power(&v, &cov, &cfg, 0.0, &zeros).unwrap();
        assert!(p0.iter().all(|&x| x == 0.0));
        assert!(expected_ofdm_power(&v, &cov, &cfg, 1.0, &zeros[..10]).is_err());
    }

    #[test]
    fn expected_power_total_is_unitary_invariant() {
        let cfg = OfdmConfig::wlan_20();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(48, 48, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let cov = SymbolCovariance::from_matrix(&a * a.adjoint()).unwrap();
        let pilots = cfg.pilot_time_power();
        let pilot_total: f64 = pilots.iter().sum();
        for seed in 0..3 {
            let v = PrecodingMatrix::new(random_unitary(48, seed), 0.0, 0.0, 1).unwrap();
            let p1 = expected_ofdm_power(&v, &cov, &cfg, 1.0, &pilots).unwrap();
            let p2 = expected_ofdm_power(&v, &cov, &cfg, 2.0, &pilots).unwrap();
            let total: f64 = p1.iter().sum();
            assert!((total - (cov.trace() + pilot_total)).abs() < 1e-8 * total);
            for k in 0..64 {
                assert!(((p2[k] - pilots[k]) - 2.0 * (p1[k] - pilots[k])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn objective_worked_example() {
        let cfg = two_data_config();
        let cov = SymbolCovariance::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)],
        ))
        .unwrap();
        let h = banded_channel_covariance(&cfg, 4).unwrap();
        let zeros = alloc::vec![0.0; 4];
        let j = precoding_objective(&DMatrix::identity(2, 2), &cov, &h, &cfg, 1.0, &zeros, 0.0).unwrap();
        assert!((j - 3.0).abs() < 1e-12);
        assert!(precoding_objective(&DMatrix::identity(2, 2), &cov, &h, &cfg, 1.0, &zeros, -1.0).is_err());
    }

    #[test]
    fn objective_of_white_source_is_unitary_invariant() {
        let cfg = OfdmConfig::wlan_20();
        let cov = SymbolCovariance::identity(48);
        let h = banded_channel_covariance(&cfg, 5).unwrap();
        let p = cfg.pilot_time_power();
        for seed in 0..3 {
            let j = precoding_objective(&random_unitary(48, seed), &cov, &h, &cfg, 1.0, &p, 0.0).unwrap();
            assert!((j - 48.0).abs() < 1e-9);
        }
    }

    #[test]
    fn large_omega_is_dominated_by_peak_power() {
        let cfg = OfdmConfig::wlan_20();
        let cov = SymbolCovariance::identity(48);
        let h = banded_channel_covariance(&cfg, 5).unwrap();
        let p = cfg.pilot_time_power();
        let v = random_unitary(48, 9);
        let terms = objective_terms(&v, &cov, &h, &cfg, 1.0, &p).unwrap();
        let big = precoding_objective(&v, &cov, &h, &cfg, 1.0, &p, 1e9).unwrap();
        assert!((big / (1e9 * terms.peak_power) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_variance_precoded_symbol_is_degenerate() {
        let cfg = two_data_config();
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        let cov = SymbolCovariance::from_matrix(m).unwrap();
        let h = banded_channel_covariance(&cfg, 1).unwrap();
        assert!(matches!(
            precoding_objective(&DMatrix::identity(2, 2), &cov, &h, &cfg, 1.0, &[0.0; 4], 0.0),
            Err(Error::DegenerateCovariance(_))
        ));
    }

    #[test]
    fn precoding_roundtrip_and_structure() {
        let v = PrecodingMatrix::new(random_unitary(8, 3), 1.0, 0.1, 4).unwrap();
        let x: Vec<C64> = (0..8).map(|i| c(i as f64 * 0.1, 1.0 - i as f64 * 0.2)).collect();
        let xt = apply_precoding(&v, &x).unwrap();
        let energy = |y: &[C64]| y.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!((energy(&xt) - energy(&x)).abs() < 1e-10);
        let back = invert_precoding(&v, &xt).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-10);
        }
        let id = PrecodingMatrix::identity(8);
        assert_eq!(apply_precoding(&id, &x).unwrap(), x);
        assert_eq!(invert_precoding(&id, &x).unwrap(), x);

        let mut perm = DMatrix::<C64>::zeros(3, 3);
        perm[(0, 2)] = c(1.0, 0.0);
        perm[(1, 0)] = c(1.0, 0.0);
        perm[(2, 1)] = c(1.0, 0.0);
        let p = PrecodingMatrix::new(perm, 0.0, 0.0, 0).unwrap();
        let y = apply_precoding(&p, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert_eq!(y, alloc::vec![c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        assert!(apply_precoding(&p, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn non_unitary_matrix_rejected() {
        let m = DMatrix::<C64>::identity(3, 3) * c(1.01, 0.0);
        assert!(matches!(PrecodingMatrix::new(m, 0.0, 0.0, 0), Err(Error::InvalidPrecoder(_))));
    }

    #[test]
    fn persistence_roundtrip() {
        let v = PrecodingMatrix::new(random_unitary(5, 4), 12.5, 0.25, 8).unwrap();
        let bytes = v.to_bytes();
        assert_eq!(bytes.len(), 8 + 16 * 25 + 20);
        assert_eq!(PrecodingMatrix::from_bytes(&bytes).unwrap(), v);
        assert!(PrecodingMatrix::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[8..16].copy_from_slice(&2.0f64.to_le_bytes());
        assert!(matches!(PrecodingMatrix::from_bytes(&corrupt), Err(Error::InvalidPrecoder(_))));
    }
}
