//! Row-by-row search for the precoding matrix.
//!
//! Each random unitary start is refined by sweeps over the rows of `V`.
//! Row `k` is re-solved with every other row held fixed, over the convex
//! set {orthogonal to the rows already updated in this sweep, norm <= 1},
//! by projected gradient descent with Armijo backtracking on a smoothed
//! objective (soft magnitudes, log-sum-exp in place of the peak). The
//! result is scaled back to unit norm and the rows after it are
//! re-orthonormalized, so `V` is unitary between row updates. A sweep is
//! kept only if it lowers the exact objective.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // float methods without std
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{objective_terms, ChannelCovariance, PrecodingMatrix, SymbolCovariance};
use crate::error::{invalid, Error, Result};
use crate::rng::derive_seed;
use crate::signal::{truncated_dft_matrix, OfdmConfig, C64};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;

/// Everything the objective depends on apart from `V` and `omega`.
#[derive(Debug, Clone, Copy)]
pub struct PrecoderProblem<'a> {
    pub cov_x: &'a SymbolCovariance,
    pub cov_h: &'a ChannelCovariance,
    pub config: &'a OfdmConfig,
    /// Transmit power per data symbol.
    pub p_t: f64,
    /// `|y_p[k]|^2` of the pilot waveform, length `K`.
    pub pilot_time_power: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct OptimizerSettings {
    /// Weight of the peak-power term.
    pub omega: f64,
    /// Number of random unitary initializations `N_r`.
    pub n_inits: usize,
    pub max_sweeps: usize,
    /// A sweep improving the objective by less than this ends the search.
    pub tol: f64,
    pub seed: u64,
    /// Log-sum-exp sharpness standing in for `max_k`.
    pub softmax_temperature: f64,
    /// Projected-gradient iterations per row.
    pub max_inner_iterations: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            omega: 0.1,
            n_inits: 8,
            max_sweeps: 20,
            tol: 1e-6,
            seed: 0,
            softmax_temperature: 50.0,
            max_inner_iterations: 100,
        }
    }
}

/// Objective after the random start (`objectives[0]`) and after each kept sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InitTrace {
    pub init: usize,
    pub objectives: Vec<f64>,
}

/// `weight * corr(I) / peak(I)`: an `omega` that makes the peak-power term
/// `weight` times as large as the correlation term at `V = I`.
pub fn balanced_omega(problem: &PrecoderProblem<'_>, weight: f64) -> Result<f64> {
    let n = problem.config.n_data();
    let terms = objective_terms(
        &DMatrix::identity(n, n),
        problem.cov_x,
        problem.cov_h,
        problem.config,
        problem.p_t,
        problem.pilot_time_power,
    )?;
    Ok(weight * terms.correlation / terms.peak_power)
}

pub fn optimize_precoder(problem: &PrecoderProblem<'_>, settings: &OptimizerSettings) -> Result<PrecodingMatrix> {
    optimize_precoder_traced(problem, settings).map(|(v, _)| v)
}

/// Runs the search and also returns the per-initialization objective traces.
/// The identity matrix competes as an extra candidate, so the result never
/// scores worse than no precoding.
pub fn optimize_precoder_traced(
    problem: &PrecoderProblem<'_>,
    settings: &OptimizerSettings,
) -> Result<(PrecodingMatrix, Vec<InitTrace>)> {
    check_settings(settings)?;
    let runs = (0..settings.n_inits)
        .map(|init| optimize_from_init(problem, settings, init))
        .collect::<Result<Vec<_>>>()?;
    select_best(problem, settings, runs)
}

/// Outcome of one random initialization.
#[derive(Debug, Clone)]
pub struct InitResult {
    rows: Vec<C64>,
    pub objective: f64,
    pub trace: InitTrace,
}

fn check_settings(settings: &OptimizerSettings) -> Result<()> {
    if settings.n_inits == 0 {
        return Err(invalid("at least one initialization is required"));
    }
    if !(settings.omega >= 0.0) || !(settings.softmax_temperature > 0.0) {
        return Err(invalid("omega must be >= 0 and the softmax temperature > 0"));
    }
    Ok(())
}

/// Runs the sweep loop from initialization `init` (seeded by
/// `derive_seed(settings.seed, init)`). Initializations are independent
/// and may run concurrently; combine them with [`select_best`].
pub fn optimize_from_init(problem: &PrecoderProblem<'_>, settings: &OptimizerSettings, init: usize) -> Result<InitResult> {
    check_settings(settings)?;
    problem.cov_x.validate()?;
    let model = Model::new(problem, settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, init as u64));
    let mut rows = random_unitary_rows(model.n, &mut rng);
    let mut current = model.objective(&rows)?;
    let mut objectives = vec![current];
    for _ in 0..settings.max_sweeps {
        let mut candidate = rows.clone();
        model.sweep(&mut candidate, settings);
        let value = match model.objective(&candidate) {
            Ok(v) => v,
            Err(_) => break,
        };
        if value > current {
            break;
        }
        let gain = current - value;
        rows = candidate;
        current = value;
        objectives.push(current);
        if gain < settings.tol {
            break;
        }
    }
    log::debug!("precoder init {init}: {} -> {current}", objectives[0]);
    Ok(InitResult {
        rows,
        objective: current,
        trace: InitTrace { init, objectives },
    })
}

/// Picks the lowest true objective among the runs and the identity.
pub fn select_best(
    problem: &PrecoderProblem<'_>,
    settings: &OptimizerSettings,
    runs: Vec<InitResult>,
) -> Result<(PrecodingMatrix, Vec<InitTrace>)> {
    check_settings(settings)?;
    let model = Model::new(problem, settings)?;
    let n = model.n;
    let mut best_rows = identity_rows(n);
    let mut best = model.objective(&best_rows)?;
    let mut traces = Vec::with_capacity(runs.len());
    for run in runs {
        if run.rows.len() != n * n {
            return Err(invalid("initialization result has the wrong dimension"));
        }
        if run.objective < best {
            best = run.objective;
            best_rows = run.rows;
        }
        traces.push(run.trace);
    }
    let v = DMatrix::from_row_slice(n, n, &best_rows);
    Ok((PrecodingMatrix::new(v, best, settings.omega, settings.n_inits)?, traces))
}

fn identity_rows(n: usize) -> Vec<C64> {
    let mut rows = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        rows[i * n + i] = C64::new(1.0, 0.0);
    }
    rows
}

fn random_unitary_rows(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut rows: Vec<C64> = (0..n * n)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    orthonormalize_rows(&mut rows, n, 0);
    rows
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    // a^H b
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Gram-Schmidt (twice, for stability) on rows `from..n`, keeping rows
/// `0..from` untouched. Rows that collapse are replaced by the first
/// standard basis vector that survives projection.
fn orthonormalize_rows(rows: &mut [C64], n: usize, from: usize) {
    for i in from..n {
        let (done, rest) = rows.split_at_mut(i * n);
        let row = &mut rest[..n];
        project_out(row, done, n);
        let mut len = norm(row);
        if len < 1e-8 {
            for e in 0..n {
                row.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                row[e] = C64::new(1.0, 0.0);
                project_out(row, done, n);
                len = norm(row);
                if len > 1e-3 {
                    break;
                }
            }
        }
        row.iter_mut().for_each(|v| *v /= len);
    }
}

/// Removes from `row` its components along every row in `basis`
/// (orthonormal rows of length `n`), as `row <- row - (row . b^*) b`.
fn project_out(row: &mut [C64], basis: &[C64], n: usize) {
    for _ in 0..2 {
        for b in basis.chunks_exact(n) {
            let coef = dot(b, row);
            for (r, bv) in row.iter_mut().zip(b) {
                *r -= coef * bv;
            }
        }
    }
}

/// Dense copies of the problem data in the layout the row solver wants.
struct Model {
    n: usize,
    k: usize,
    /// Symbol covariance, row-major `n x n`.
    cov: Vec<C64>,
    /// Channel covariance, row-major `n x n`.
    band: Vec<f64>,
    /// Truncated DFT, row-major `n x K`.
    dft: Vec<C64>,
    p_t: f64,
    pilot: Vec<f64>,
    omega: f64,
    beta: f64,
    eps2: f64,
    problem_cov_x: SymbolCovariance,
    problem_cov_h: ChannelCovariance,
    config: OfdmConfig,
}

impl Model {
    fn new(problem: &PrecoderProblem<'_>, settings: &OptimizerSettings) -> Result<Self> {
        let config = problem.config;
        let n = config.n_data();
        let k = config.n_subcarriers;
        if problem.cov_x.dim() != n || problem.cov_h.matrix.nrows() != n || problem.cov_h.matrix.ncols() != n {
            return Err(invalid("covariance dimensions do not match K_d"));
        }
        if problem.pilot_time_power.len() != k {
            return Err(invalid("pilot power must have K entries"));
        }
        let f = truncated_dft_matrix(config)?.entries;
        let cov_m = &problem.cov_x.matrix;
        let scale = problem.cov_x.trace() / n as f64;
        if !(scale > 0.0) {
            return Err(Error::DegenerateCovariance("covariance has zero trace".into()));
        }
        Ok(Model {
            n,
            k,
            cov: (0..n * n).map(|i| cov_m[(i / n, i % n)]).collect(),
            band: (0..n * n).map(|i| problem.cov_h.matrix[(i / n, i % n)]).collect(),
            dft: (0..n * k).map(|i| f[(i / k, i % k)]).collect(),
            p_t: problem.p_t,
            pilot: problem.pilot_time_power.to_vec(),
            omega: settings.omega,
            beta: settings.softmax_temperature,
            eps2: (1e-9 * scale) * (1e-9 * scale),
            problem_cov_x: problem.cov_x.clone(),
            problem_cov_h: problem.cov_h.clone(),
            config: config.clone(),
        })
    }

    /// Exact objective of the matrix whose rows are `rows`.
    fn objective(&self, rows: &[C64]) -> Result<f64> {
        let v = DMatrix::from_row_slice(self.n, self.n, rows);
        Ok(objective_terms(
            &v,
            &self.problem_cov_x,
            &self.problem_cov_h,
            &self.config,
            self.p_t,
            &self.pilot,
        )?
        .total(self.omega))
    }

    /// `C a` for a column vector `a`.
    fn cov_times(&self, a: &[C64], out: &mut [C64]) {
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.cov[l * self.n..(l + 1) * self.n]
                .iter()
                .zip(a)
                .map(|(c, x)| c * x)
                .sum();
        }
    }

    fn sweep(&self, rows: &mut [C64], settings: &OptimizerSettings) {
        for k in 0..self.n {
            self.update_row(rows, k, settings);
            orthonormalize_rows(rows, self.n, k + 1);
        }
    }

    fn update_row(&self, rows: &mut [C64], k: usize, settings: &OptimizerSettings) {
        let n = self.n;
        let sub = RowProblem::new(self, rows, k);
        let fixed = &rows[..k * n];

        let project = |u: &mut [C64]| {
            // orthogonal to v_i (i < k) means u ⟂ conj(v_i) as columns
            for _ in 0..2 {
                for b in fixed.chunks_exact(n) {
                    let coef: C64 = b.iter().zip(u.iter()).map(|(x, y)| x * y).sum();
                    for (r, bv) in u.iter_mut().zip(b) {
                        *r -= coef * bv.conj();
                    }
                }
            }
            let len = norm(u);
            if len > 1.0 {
                u.iter_mut().for_each(|v| *v /= len);
            }
        };

        let start: Vec<C64> = rows[k * n..(k + 1) * n].iter().map(|v| v.conj()).collect();
        let mut u = start.clone();
        project(&mut u);
        let mut grad = vec![C64::new(0.0, 0.0); n];
        let Some(mut value) = sub.value_and_gradient(&u, Some(&mut grad)) else {
            return;
        };
        let gnorm = norm(&grad);
        if gnorm == 0.0 {
            return;
        }
        let mut step = 0.5 / gnorm;
        let mut trial = vec![C64::new(0.0, 0.0); n];

        for _ in 0..settings.max_inner_iterations {
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                for ((t, x), g) in trial.iter_mut().zip(&u).zip(&grad) {
                    *t = x - g * step;
                }
                project(&mut trial);
                let decrease: f64 = grad
                    .iter()
                    .zip(trial.iter().zip(&u))
                    .map(|(g, (t, x))| (g.conj() * (t - x)).re)
                    .sum();
                if decrease >= 0.0 {
                    break;
                }
                match sub.value_and_gradient(&trial, None) {
                    Some(v) if v <= value + ARMIJO_C * decrease => {
                        accepted = Some(v);
                        break;
                    }
                    _ => step *= BACKTRACK_SHRINK,
                }
            }
            let Some(new_value) = accepted else { break };
            let gain = value - new_value;
            core::mem::swap(&mut u, &mut trial);
            value = match sub.value_and_gradient(&u, Some(&mut grad)) {
                Some(v) => v,
                None => break,
            };
            if gain <= 1e-12 * value.abs().max(1.0) {
                break;
            }
            step *= 2.0;
        }

        let len = norm(&u);
        let chosen = if len > 1e-8 {
            u.iter().map(|v| v / len).collect::<Vec<_>>()
        } else {
            let mut s = start;
            project(&mut s);
            let l = norm(&s).max(f64::MIN_POSITIVE);
            s.iter().map(|v| v / l).collect()
        };
        for (dst, src) in rows[k * n..(k + 1) * n].iter_mut().zip(&chosen) {
            *dst = src.conj();
        }
    }
}

/// The objective restricted to row `k`, as a function of `u = v_k^H`.
struct RowProblem<'m> {
    model: &'m Model,
    k: usize,
    /// `C v_j^H` for every row (row `k` unused).
    cov_rows: Vec<Vec<C64>>,
    /// `v_j C v_j^H`.
    row_power: Vec<f64>,
    /// Per time sample `t`: `C r_t` where `r_t = sum_{i != k} v_i^H F[i,t]`.
    cov_rest: Vec<Vec<C64>>,
    /// `r_t^H C r_t`.
    rest_power: Vec<f64>,
}

impl<'m> RowProblem<'m> {
    fn new(model: &'m Model, rows: &[C64], k: usize) -> Self {
        let n = model.n;
        let mut cov_rows = Vec::with_capacity(n);
        let mut row_power = Vec::with_capacity(n);
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = &rows[j * n..(j + 1) * n];
            let vjh: Vec<C64> = vj.iter().map(|v| v.conj()).collect();
            model.cov_times(&vjh, &mut col);
            row_power.push(dot(&vjh, &col).re);
            cov_rows.push(col.clone());
        }
        let mut cov_rest = Vec::with_capacity(model.k);
        let mut rest_power = Vec::with_capacity(model.k);
        let mut rest = vec![C64::new(0.0, 0.0); n];
        for t in 0..model.k {
            rest.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for i in (0..n).filter(|&i| i != k) {
                let f = model.dft[i * model.k + t];
                for (r, v) in rest.iter_mut().zip(&rows[i * n..(i + 1) * n]) {
                    *r += v.conj() * f;
                }
            }
            model.cov_times(&rest, &mut col);
            rest_power.push(dot(&rest, &col).re);
            cov_rest.push(col.clone());
        }
        RowProblem {
            model,
            k,
            cov_rows,
            row_power,
            cov_rest,
            rest_power,
        }
    }

    /// Smoothed row objective; fills `grad` with `2 d/d(conj u)` if given.
    /// `None` when `u` has no power through the covariance.
    fn value_and_gradient(&self, u: &[C64], grad: Option<&mut [C64]>) -> Option<f64> {
        let m = self.model;
        let n = m.n;
        let k = self.k;
        let mut cu = vec![C64::new(0.0, 0.0); n];
        m.cov_times(u, &mut cu);
        let rkk = dot(u, &cu).re;
        if !(rkk > 0.0) {
            return None;
        }
        let inv_sqrt_rkk = 1.0 / rkk.sqrt();

        // correlation terms involving row k (both (k, j) and (j, k))
        let mut corr = 0.0;
        let mut cross = Vec::with_capacity(n);
        for j in (0..n).filter(|&j| j != k) {
            let w = m.band[k * n + j];
            if w == 0.0 || self.row_power[j] <= 0.0 {
                continue;
            }
            let rkj = dot(u, &self.cov_rows[j]);
            let soft = (rkj.norm_sqr() + m.eps2).sqrt();
            let inv_sqrt_rjj = 1.0 / self.row_power[j].sqrt();
            corr += 2.0 * w * soft * inv_sqrt_rkk * inv_sqrt_rjj;
            cross.push((j, w, rkj, soft, inv_sqrt_rjj));
        }

        // expected sample powers
        let fk = &m.dft[k * m.k..(k + 1) * m.k];
        let powers: Vec<f64> = (0..m.k)
            .map(|t| {
                let ub = dot(u, &self.cov_rest[t]);
                m.p_t * (self.rest_power[t] + 2.0 * (fk[t].conj() * ub).re + fk[t].norm_sqr() * rkk) + m.pilot[t]
            })
            .collect();
        let peak = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = powers.iter().map(|p| (m.beta * (p - peak)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let lse = peak + total.ln() / m.beta;
        let value = corr + m.omega * lse;

        if let Some(grad) = grad {
            grad.iter_mut().for_each(|g| *g = C64::new(0.0, 0.0));
            for &(j, w, rkj, soft, inv_sqrt_rjj) in &cross {
                let a = w * inv_sqrt_rjj * inv_sqrt_rkk / soft;
                let b = w * inv_sqrt_rjj * soft * inv_sqrt_rkk * inv_sqrt_rkk * inv_sqrt_rkk;
                let coef = rkj.conj() * a;
                for ((g, pc), c) in grad.iter_mut().zip(&self.cov_rows[j]).zip(&cu) {
                    // 2 * 2 * [ pc conj(R)/(2 m) / sqrt(Rkk Rjj) - m Cu / (2 Rkk^{3/2} sqrt(Rjj)) ]
                    *g += (pc * coef - c * b) * 2.0;
                }
            }
            if m.omega != 0.0 {
                for t in 0..m.k {
                    let s = 2.0 * m.omega * m.p_t * weights[t] / total;
                    if s == 0.0 {
                        continue;
                    }
                    let fc = fk[t].conj();
                    let f2 = fk[t].norm_sqr();
                    for ((g, b), c) in grad.iter_mut().zip(&self.cov_rest[t]).zip(&cu) {
                        *g += (b * fc + c * f2) * s;
                    }
                }
            }
        }
        Some(value)
    }
}
