//! Evaluation metrics: PAPR, empirical CDFs, cross-subcarrier correlation,
//! per-subcarrier MSE, PSNR, MS-SSIM and the weighted MSE/PAPR loss.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // float methods without std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::signal::C64;

/// Value reported for zero-error PSNR / MS-SSIM.
pub const SATURATION_DB: f64 = 100.0;

/// A dB figure that may have been clamped at [`SATURATION_DB`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Decibels {
    pub value: f64,
    pub saturated: bool,
}

impl Decibels {
    fn from_ratio(ratio: f64) -> Self {
        if ratio.is_finite() {
            let value = 10.0 * ratio.log10();
            if value < SATURATION_DB {
                return Decibels { value, saturated: false };
            }
        }
        Decibels {
            value: SATURATION_DB,
            saturated: true,
        }
    }
}

/// `10 log10(max|v|^2 / mean|v|^2)`.
pub fn papr_db(time_samples: &[C64]) -> Result<f64> {
    if time_samples.is_empty() {
        return Err(Error::UndefinedMetric("PAPR of an empty signal".into()));
    }
    let (mut peak, mut sum) = (0.0f64, 0.0f64);
    for v in time_samples {
        let p = v.norm_sqr();
        peak = peak.max(p);
        sum += p;
    }
    if sum == 0.0 {
        return Err(Error::UndefinedMetric("PAPR of an all-zero signal".into()));
    }
    Ok(10.0 * (peak * time_samples.len() as f64 / sum).log10())
}

/// Sorted `(value, i/n)` pairs, `i` counting from 1.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect()
}

/// `P(X <= x)` under an empirical CDF.
pub fn cdf_at(cdf: &[(f64, f64)], x: f64) -> f64 {
    let idx = cdf.partition_point(|&(v, _)| v <= x);
    if idx == 0 {
        0.0
    } else {
        cdf[idx - 1].1
    }
}

/// Nearest-rank quantile, `q` in `(0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("quantile of an empty sample".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid(alloc::format!("quantile {q} outside (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Magnitude of the complex Pearson correlation between subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub matrix: DMatrix<f64>,
    /// Subcarriers with zero variance; their off-diagonal entries are 0.
    pub flagged: Vec<usize>,
}

impl CorrelationMatrix {
    /// Mean off-diagonal entry over pairs where `mask` is nonzero, e.g. the
    /// pairs inside one coherence bandwidth.
    pub fn mean_within(&self, mask: &DMatrix<f64>) -> f64 {
        let n = self.matrix.nrows();
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 0..n {
            for j in 0..n {
                if i != j && mask[(i, j)] != 0.0 {
                    sum += self.matrix[(i, j)];
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn cross_subcarrier_correlation(received_blocks: &[Vec<C64>]) -> Result<CorrelationMatrix> {
    if received_blocks.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: received_blocks.len(),
        });
    }
    let n = received_blocks[0].len();
    if received_blocks.iter().any(|b| b.len() != n) {
        return Err(invalid("all blocks must have the same length"));
    }
    let m = received_blocks.len() as f64;
    let mut mean = vec![C64::new(0.0, 0.0); n];
    for b in received_blocks {
        for (a, v) in mean.iter_mut().zip(b) {
            *a += v;
        }
    }
    for a in &mut mean {
        *a /= m;
    }
    let mut cov = DMatrix::<C64>::zeros(n, n);
    let mut centered = vec![C64::new(0.0, 0.0); n];
    for b in received_blocks {
        for ((c, v), mu) in centered.iter_mut().zip(b).zip(&mean) {
            *c = v - mu;
        }
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] += centered[i] * centered[j].conj();
            }
        }
    }
    let var: Vec<f64> = (0..n).map(|i| cov[(i, i)].re).collect();
    let scale = var.iter().cloned().fold(0.0, f64::max);
    let flagged: Vec<usize> = (0..n).filter(|&i| var[i] <= scale * 1e-24).collect();
    let mut matrix = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if flagged.contains(&i) || flagged.contains(&j) {
                continue;
            }
            let r = (cov[(i, j)].norm() / (var[i] * var[j]).sqrt()).min(1.0);
            matrix[(i, j)] = r;
            matrix[(j, i)] = r;
        }
    }
    Ok(CorrelationMatrix { matrix, flagged })
}

/// Mean `|tx - rx|^2` per symbol position across blocks.
pub fn per_subcarrier_mse(tx_symbols: &[Vec<C64>], rx_symbols: &[Vec<C64>]) -> Result<Vec<f64>> {
    if tx_symbols.len() != rx_symbols.len() || tx_symbols.is_empty() {
        return Err(invalid("tx and rx must hold the same nonzero number of blocks"));
    }
    let n = tx_symbols[0].len();
    let mut acc = vec![0.0; n];
    for (t, r) in tx_symbols.iter().zip(rx_symbols) {
        if t.len() != n || r.len() != n {
            return Err(invalid("block length mismatch"));
        }
        for ((a, x), y) in acc.iter_mut().zip(t).zip(r) {
            *a += (x - y).norm_sqr();
        }
    }
    let m = tx_symbols.len() as f64;
    Ok(acc.into_iter().map(|v| v / m).collect())
}

/// Mean squared error between equal-length real sequences.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid(alloc::format!("shape mismatch: {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(max_value^2 / MSE)`, saturating at 100 dB.
pub fn psnr_db(a: &[f64], b: &[f64], max_value: f64) -> Result<Decibels> {
    if !(max_value > 0.0) {
        return Err(invalid("max_value must be positive"));
    }
    let e = mse(a, b)?;
    Ok(Decibels::from_ratio(max_value * max_value / e))
}

/// A single-channel real image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(invalid(alloc::format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(Image { width, height, pixels })
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    fn downsample(&self) -> Image {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let s = self.at(2 * x, 2 * y) + self.at(2 * x + 1, 2 * y) + self.at(2 * x, 2 * y + 1) + self.at(2 * x + 1, 2 * y + 1);
                pixels.push(s / 4.0);
            }
        }
        Image { width: w, height: h, pixels }
    }
}

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

/// Smallest side length accepted by [`ms_ssim`].
pub const MS_SSIM_MIN_SIDE: usize = WINDOW << (MS_SSIM_WEIGHTS.len() - 1);

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering with the Gaussian window.
fn filter(img: &[f64], width: usize, height: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (ow, oh) = (width + 1 - WINDOW, height + 1 - WINDOW);
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        for x in 0..ow {
            rows[y * ow + x] = g.iter().enumerate().map(|(i, w)| w * img[y * width + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(i, w)| w * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(a: &Image, b: &Image, c1: f64, c2: f64, g: &[f64; WINDOW]) -> (f64, f64) {
    let (w, h) = (a.width, a.height);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.pixels.iter().zip(&b.pixels).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter(&a.pixels, w, h, g);
    let mu_b = filter(&b.pixels, w, h, g);
    let aa = filter(&prod(&|x, _| x * x), w, h, g);
    let bb = filter(&prod(&|_, y| y * y), w, h, g);
    let ab = filter(&prod(&|x, y| x * y), w, h, g);
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let cs_i = (2.0 * cov + c2) / (va + vb + c2);
        let l_i = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim += l_i * cs_i;
        cs += cs_i;
    }
    let n = mu_a.len() as f64;
    (ssim / n, cs / n)
}

/// Five-scale MS-SSIM with an 11x11 Gaussian window (sigma 1.5),
/// `K1 = 0.01`, `K2 = 0.03`, and 2x2 average pooling between scales.
/// Negative per-scale terms are clamped to zero.
pub fn ms_ssim(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(invalid("images must have the same shape"));
    }
    if a.width < MS_SSIM_MIN_SIDE || a.height < MS_SSIM_MIN_SIDE {
        return Err(invalid(alloc::format!(
            "{}x{} image is smaller than the {MS_SSIM_MIN_SIDE}px minimum",
            a.width,
            a.height
        )));
    }
    if !(data_range > 0.0) {
        return Err(invalid("data_range must be positive"));
    }
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);
    let g = gaussian_window();
    let (mut x, mut y) = (a.clone(), b.clone());
    let mut value = 1.0;
    let last = MS_SSIM_WEIGHTS.len() - 1;
    for (scale, &w) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (ssim, cs) = ssim_terms(&x, &y, c1, c2, &g);
        let term = if scale == last { ssim } else { cs };
        value *= term.max(0.0).powf(w);
        if scale < last {
            x = x.downsample();
            y = y.downsample();
        }
    }
    Ok(value)
}

/// `-10 log10(1 - value)`, saturating at 100 dB.
pub fn ssim_to_db(value: f64) -> Decibels {
    Decibels::from_ratio(1.0 / (1.0 - value))
}

pub fn ms_ssim_db(a: &Image, b: &Image, data_range: f64) -> Result<Decibels> {
    Ok(ssim_to_db(ms_ssim(a, b, data_range)?))
}

/// `alpha * mse + (1 - alpha) * papr_linear`.
pub fn weighted_loss(mse: f64, papr_linear: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(alloc::format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(alpha * mse + (1.0 - alpha) * papr_linear)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum MetricValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metric {
    pub name: String,
    pub value: MetricValue,
    pub unit: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub saturated: bool,
}

/// Named metrics of one experiment run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

impl MetricsReport {
    pub fn new(experiment: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        MetricsReport {
            experiment: experiment.into(),
            config_hash: config_hash.into(),
            seed,
            metrics: Vec::new(),
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64, unit: &str) -> &mut Self {
        self.push(name, MetricValue::Scalar(value), unit, false)
    }

    pub fn decibels(&mut self, name: &str, value: Decibels) -> &mut Self {
        self.push(name, MetricValue::Scalar(value.value), "dB", value.saturated)
    }

    pub fn vector(&mut self, name: &str, value: Vec<f64>, unit: &str) -> &mut Self {
        self.push(name, MetricValue::Vector(value), unit, false)
    }

    fn push(&mut self, name: &str, value: MetricValue, unit: &str, saturated: bool) -> &mut Self {
        self.metrics.push(Metric {
            name: name.into(),
            value,
            unit: unit.into(),
            saturated,
        });
        self
    }

    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn get_scalar(&self, name: &str) -> Option<f64> {
        match self.get(name)?.value {
            MetricValue::Scalar(v) => Some(v),
            MetricValue::Vector(_) => None,
        }
    }

    /// Every value finite, or flagged saturated.
    pub fn validate(&self) -> Result<()> {
        for m in &self.metrics {
            let finite = match &m.value {
                MetricValue::Scalar(v) => v.is_finite(),
                MetricValue::Vector(v) => v.iter().all(|x| x.is_finite()),
            };
            if !finite && !m.saturated {
                return Err(Error::UndefinedMetric(alloc::format!("metric {} is not finite", m.name)));
            }
        }
        Ok(())
    }
}
