//! Pieces shared by several experiments: feature sources, precoder
//! construction and per-symbol PAPR.

use jscc_phy::channel::coherence_subcarriers;
use jscc_phy::feature::{clip_activation, generate_features, generate_raw_features, quantize_half, FeatureBlock};
use jscc_phy::link::values_to_segments;
use jscc_phy::metrics::papr_db;
use jscc_phy::modem::ofdm_symbol;
use jscc_phy::precoder::{
    apply_precoding, balanced_omega, banded_channel_covariance, estimate_symbol_covariance, objective_terms, optimize_from_init,
    select_best, ChannelCovariance, InitTrace, ObjectiveTerms, OptimizerSettings, PrecoderProblem, PrecodingMatrix,
    SymbolCovariance,
};
use jscc_phy::rng::derive_seed;
use jscc_phy::signal::DftPlan;
use jscc_phy::OfdmConfig;
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{SimError, SimResult};
use crate::files::{load_features, load_precoder};

/// Independent random streams derived from the base seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Training = 1,
    Evaluation = 2,
    Channel = 3,
    Noise = 4,
    Pipeline = 5,
    Optimizer = 6,
}

pub fn stream_seed(base: u64, stream: Stream, index: u64) -> u64 {
    derive_seed(derive_seed(base, stream as u64), index)
}

/// Evaluation block `index`: the feature file if configured (same block
/// for every index), otherwise a fresh synthetic draw.
pub fn evaluation_block(cfg: &ExperimentConfig, index: u64) -> SimResult<FeatureBlock> {
    source_block(cfg, Stream::Evaluation, index)
}

pub fn source_block(cfg: &ExperimentConfig, stream: Stream, index: u64) -> SimResult<FeatureBlock> {
    let block = match &cfg.features.file {
        Some(path) => load_features(path)?,
        None => generate_features(&cfg.features.synthetic, stream_seed(cfg.seed, stream, index))?,
    };
    Ok(if cfg.features.quantize_half { quantize_half(&block) } else { block })
}

/// Pre-clip and clipped values of synthetic block `index`.
pub fn raw_and_clipped(cfg: &ExperimentConfig, index: u64) -> SimResult<(Vec<f64>, Vec<f64>)> {
    let raw = generate_raw_features(&cfg.features.synthetic, stream_seed(cfg.seed, Stream::Evaluation, index))?;
    let clipped = raw.iter().map(|&v| clip_activation(v)).collect::<Result<Vec<_>, _>>()?;
    Ok((raw, clipped))
}

/// Unprecoded data symbols of every OFDM symbol carrying `values`.
pub fn symbol_vectors(values: &[f64], ofdm: &OfdmConfig, p_t: f64) -> SimResult<Vec<Vec<jscc_phy::C64>>> {
    Ok(values_to_segments(values, ofdm, p_t)?.into_iter().map(|s| s.symbols).collect())
}

pub struct PrecoderBuild {
    pub matrix: PrecodingMatrix,
    pub cov_x: SymbolCovariance,
    pub cov_h: ChannelCovariance,
    pub omega: f64,
    pub identity_terms: ObjectiveTerms,
    pub terms: ObjectiveTerms,
    pub traces: Vec<InitTrace>,
}

impl PrecoderBuild {
    pub fn identity_objective(&self) -> f64 {
        self.identity_terms.total(self.omega)
    }
}

pub fn coherence(cfg: &ExperimentConfig) -> SimResult<usize> {
    match cfg.precoder.coherence {
        Some(k) => Ok(k),
        None => Ok(coherence_subcarriers(&cfg.channel.profile, &cfg.ofdm)?),
    }
}

pub fn training_covariance(cfg: &ExperimentConfig) -> SimResult<SymbolCovariance> {
    let mut symbols = Vec::new();
    for i in 0..cfg.precoder.training_blocks {
        let block = source_block(cfg, Stream::Training, i as u64)?;
        symbols.extend(symbol_vectors(block.as_slice(), &cfg.ofdm, cfg.p_t)?);
    }
    Ok(estimate_symbol_covariance(&symbols)?)
}

/// Optimizes `V` with the initializations spread over the rayon pool.
pub fn optimize_parallel(problem: &PrecoderProblem<'_>, settings: &OptimizerSettings) -> SimResult<(PrecodingMatrix, Vec<InitTrace>)> {
    let runs = (0..settings.n_inits)
        .into_par_iter()
        .map(|init| optimize_from_init(problem, settings, init))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_best(problem, settings, runs)?)
}

/// Loads, optimizes or (when disabled) returns the identity precoder,
/// together with its objective terms.
pub fn build_precoder(cfg: &ExperimentConfig) -> SimResult<PrecoderBuild> {
    let ofdm = &cfg.ofdm;
    let n = ofdm.n_data();
    let cov_x = training_covariance(cfg)?;
    let cov_h = banded_channel_covariance(ofdm, coherence(cfg)?)?;
    let pilots = ofdm.pilot_time_power();
    let problem = PrecoderProblem {
        cov_x: &cov_x,
        cov_h: &cov_h,
        config: ofdm,
        p_t: cfg.p_t,
        pilot_time_power: &pilots,
    };
    let settings = &cfg.precoder.optimizer;
    let omega = if cfg.precoder.normalize_omega {
        balanced_omega(&problem, settings.omega)?
    } else {
        settings.omega
    };
    let terms_of = |v: &DMatrix<jscc_phy::C64>| objective_terms(v, &cov_x, &cov_h, ofdm, cfg.p_t, &pilots);
    let identity_terms = terms_of(&DMatrix::identity(n, n))?;

    let (matrix, traces) = if let Some(path) = &cfg.precoder.matrix {
        let v = load_precoder(path)?;
        if v.dim() != n {
            return Err(SimError::Config(format!("{}: {}x{} precoder for K_d = {n}", path.display(), v.dim(), v.dim())));
        }
        (v, Vec::new())
    } else if cfg.precoder.enabled {
        let settings = OptimizerSettings {
            omega,
            seed: stream_seed(cfg.seed, Stream::Optimizer, settings.seed),
            ..*settings
        };
        optimize_parallel(&problem, &settings)?
    } else {
        (PrecodingMatrix::identity(n), Vec::new())
    };
    let terms = terms_of(matrix.matrix())?;
    Ok(PrecoderBuild {
        matrix,
        cov_x,
        cov_h,
        omega,
        identity_terms,
        terms,
        traces,
    })
}

/// PAPR (dB) of the body of every OFDM symbol carrying `values`,
/// including the pilots.
pub fn papr_per_symbol(values: &[f64], ofdm: &OfdmConfig, precoder: Option<&PrecodingMatrix>, p_t: f64) -> SimResult<Vec<f64>> {
    let plan = DftPlan::new(ofdm.n_subcarriers);
    symbol_vectors(values, ofdm, p_t)?
        .into_iter()
        .map(|x| {
            let x = match precoder {
                Some(v) => apply_precoding(v, &x)?,
                None => x,
            };
            Ok(papr_db(&ofdm_symbol(&x, ofdm, &plan)?)?)
        })
        .collect()
}
