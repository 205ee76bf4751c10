//! Order-parameter fixed points and the reconstruction threshold.
//!
//! Expectations over the disorder `(z, x0)` are estimated by Monte Carlo:
//! a fixed set of long chains is drawn once and reused across all fixed-point
//! iterations and all `alpha` values of a bisection (common random numbers),
//! so every map below is a smooth deterministic function of its parameters
//! for a given seed.
//!
//! Two solvers share the machinery:
//!
//! * [`solve_saddle`] iterates the six-equation system
//!   `qhat = mhat = alpha/chi`, `chihat = alpha (q - 2m + rho) / chi^2`,
//!   with `(q, m, chi)` refreshed from averaged chain minimizers.
//!   Successful reconstruction shows up as `chi -> 0` with `q = m = rho`.
//! * [`bracket_factor`] solves the rescaled reconstruction-limit system:
//!   `chihat` self-consistently from threshold-mode chains, then reports the
//!   bracket factor, the parenthesized expectation of the `chi` equation.
//!
//! The bracket factor equals 1 exactly at `alpha = alpha_c`, sits above 1
//! below the threshold, and decreases through 1 as `alpha` grows past it:
//! it is the local contraction rate of the `chihat` map, and the threshold
//! is precisely where the stable fixed point loses stability. Below the
//! threshold the `chihat` iteration has no finite fixed point (it escapes
//! toward infinity); [`FpStatus`] records which branch an evaluation hit.
//!
//! Nothing in this module takes an observation-side (`Rr`) parameter: the
//! threshold does not depend on it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::chain::{chain_objective, fold_noise, rt_quad, rt_weighted_sums, sweep_loop, ChainOptions};
use crate::exec::Parallelism;
use crate::linalg::dot;
use crate::math;
use crate::model::{tridiagonal_factors, SignalPrior};
use crate::rng::{purpose, Stream};

/// `chi` below this is the successful-reconstruction branch.
pub const CHI_SUCCESS_FLOOR: f64 = 1e-8;
/// `chihat` beyond this counts as escaped (no fixed point at this `alpha`).
const CHIHAT_CEILING: f64 = 1e9;
/// Keeps `sqrt(chihat)` well-defined when the update grazes zero.
const CHIHAT_FLOOR: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplicaError {
    #[error("compression rate must lie in (0,1), got {0}")]
    BadAlpha(f64),
    #[error("correlation parameter out of range: |r| must be <= 1/2, got {0}")]
    BadCorrelation(f64),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(
        "threshold not bracketed: bracket({alpha_lo}) = {lo_mean}, bracket({alpha_hi}) = {hi_mean}; \
         need lo > 1 > hi"
    )]
    NotBracketed {
        alpha_lo: f64,
        lo_mean: f64,
        alpha_hi: f64,
        hi_mean: f64,
    },
    #[error("bracket slope indistinguishable from noise near the crossing")]
    Inconclusive { trace: Vec<TracePoint> },
}

/// Monte Carlo resolution: chain length and number of disorder samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_chain: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_chain: 100_000,
            n_samples: 50,
            seed: 0,
        }
    }
}

/// Damped fixed-point iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IterConfig {
    fn default() -> Self {
        IterConfig {
            damping: 0.5,
            tol: 1e-6,
            max_iters: 4000,
        }
    }
}

/// Bisection window and target width for the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectConfig {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub tol_alpha: f64,
}

impl Default for BisectConfig {
    fn default() -> Self {
        BisectConfig {
            alpha_lo: 0.02,
            alpha_hi: 0.999,
            tol_alpha: 0.0015,
        }
    }
}

/// Order parameters and conjugates at (or near) a saddle point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleState {
    pub q: f64,
    pub m: f64,
    pub chi: f64,
    pub qhat: f64,
    pub mhat: f64,
    pub chihat: f64,
}

/// Outcome of [`solve_saddle`].
#[derive(Debug, Clone)]
pub struct SaddleReport {
    pub state: SaddleState,
    /// True when the iteration settled (by residual or by `chi` collapse).
    pub converged: bool,
    /// True when the fixed point is the successful-reconstruction branch.
    pub recovered: bool,
    pub residual: f64,
    pub iters: usize,
    /// Monte Carlo standard errors backing the classification.
    pub q_stderr: f64,
    pub qm_stderr: f64,
    /// Chain solves that exhausted their sweep budget (diagnostic).
    pub chain_failures: usize,
}

/// How a `chihat` fixed-point evaluation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Converged,
    /// Escaped past the ceiling: no fixed point at this `alpha` (below threshold).
    Diverged,
    MaxIters,
}

/// Converged bracket-factor estimate at one `alpha`.
#[derive(Debug, Clone, Copy)]
pub struct BracketEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub chihat: f64,
    pub status: FpStatus,
    pub iters: usize,
    pub chain_failures: usize,
}

/// One evaluated point of the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub alpha: f64,
    pub bracket_mean: f64,
    pub bracket_stderr: f64,
    pub chihat: f64,
    pub converged: bool,
}

/// Located threshold with its trace and uncertainty.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub alpha_c: f64,
    /// Bisection width and Monte Carlo error propagated through the local
    /// bracket slope, combined in quadrature.
    pub mc_stderr: f64,
    pub chihat_at_threshold: f64,
    pub bracket_trace: Vec<TracePoint>,
    pub samples_used: usize,
    pub n_used: usize,
    /// Trace monotonicity sanity gate (decreasing in `alpha` within errors).
    pub monotone_ok: bool,
    /// Local bracket slope used for the refined crossing, when available.
    pub fit_slope: Option<f64>,
}

fn check_alpha(alpha: f64) -> Result<(), ReplicaError> {
    if alpha > 0.0 && alpha < 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(ReplicaError::BadAlpha(alpha))
    }
}

fn check_r(r: f64) -> Result<(), ReplicaError> {
    if r.is_finite() && math::abs(r) <= 0.5 {
        Ok(())
    } else {
        Err(ReplicaError::BadCorrelation(r))
    }
}

fn check_mc(mc: &McConfig) -> Result<(), ReplicaError> {
    if mc.n_chain < 3 {
        return Err(ReplicaError::BadConfig(String::from(
            "n_chain must be at least 3",
        )));
    }
    if mc.n_samples == 0 {
        return Err(ReplicaError::BadConfig(String::from(
            "n_samples must be positive",
        )));
    }
    Ok(())
}

/// Per-sample disorder realization plus reusable solver state.
struct Workspace {
    zfold: Vec<f64>,
    /// Saddle mode: `x0_i + r (x0_{i-1} + x0_{i+1})`; empty in threshold mode.
    x0rt: Vec<f64>,
    /// Threshold mode: `sgn(x0_i)`; empty in saddle mode.
    sign0: Vec<f64>,
    /// `x0' Rt x0 / N` for this sample.
    u: f64,
    x: Vec<f64>,
    drive: Vec<f64>,
    out: [f64; 4],
    converged: bool,
}

fn draw_workspaces<P: Parallelism>(
    prior: SignalPrior,
    r: f64,
    mc: &McConfig,
    saddle: bool,
    pool: &P,
) -> Vec<Workspace> {
    let n = mc.n_chain;
    let (lp, lm) = tridiagonal_factors(r);
    pool.map_collect(mc.n_samples, |k| {
        let mut zs = Stream::from_path(mc.seed, &[purpose::MC_NOISE, k as u64]);
        let mut z = vec![0.0; n];
        zs.fill_gaussian(&mut z);
        let mut xs = Stream::from_path(mc.seed, &[purpose::MC_SIGNAL, k as u64]);
        let mut x0 = vec![0.0; n];
        for v in x0.iter_mut() {
            if xs.next_f64() < prior.rho() {
                *v = xs.next_gaussian();
            }
        }
        let mut zfold = vec![0.0; n];
        fold_noise(&z, lp, lm, &mut zfold);
        let u = rt_weighted_sums(&x0, &x0, r).0 / n as f64;
        let (x0rt, sign0) = if saddle {
            let mut x0rt = vec![0.0; n];
            for i in 0..n {
                let prev = if i == 0 { n - 1 } else { i - 1 };
                let next = if i + 1 == n { 0 } else { i + 1 };
                x0rt[i] = x0[i] + r * (x0[prev] + x0[next]);
            }
            (x0rt, Vec::new())
        } else {
            let sign0 = x0
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (Vec::new(), sign0)
        };
        Workspace {
            zfold,
            x0rt,
            sign0,
            u,
            x: vec![0.0; n],
            drive: vec![0.0; n],
            out: [0.0; 4],
            converged: true,
        }
    })
}

fn mean_of(ws: &[Workspace], slot: usize) -> f64 {
    ws.iter().map(|w| w.out[slot]).sum::<f64>() / ws.len() as f64
}

fn stderr_of(ws: &[Workspace], slot: usize, mean: f64) -> f64 {
    let s = ws.len();
    if s < 2 {
        return 0.0;
    }
    let var = ws
        .iter()
        .map(|w| {
            let d = w.out[slot] - mean;
            d * d
        })
        .sum::<f64>()
        / (s - 1) as f64;
    math::sqrt(var / s as f64)
}

/// Chain solve settings for the Monte Carlo averages. Sweeps stop on a
/// coordinate tolerance comfortably below the fixed-point tolerance, with
/// a bounded budget plus objective-plateau fallback: at `|r| = 1/2` the
/// correlation is semidefinite and its near-null modes contract slowly,
/// but they enter every reported contraction through `Rt` (or its square
/// root) and carry almost no weight in the averages. Budgets of 50 and
/// 1200 sweeps give bracket factors identical to six digits.
fn chain_opts() -> ChainOptions {
    ChainOptions {
        tol: 1e-8,
        max_sweeps: 50,
        objective_tol: 1e-11,
        objective_fallback: Some(true),
        check_monotone: false,
    }
}

/// One threshold-mode pass at fixed `chihat`: solves every chain (warm) and
/// records `out = [chihat contrib, bracket contrib, 0, 0]`.
fn threshold_pass<P: Parallelism>(
    ws: &mut [Workspace],
    r: f64,
    alpha: f64,
    chihat: f64,
    opts: &ChainOptions,
    pool: &P,
) {
    let s = math::sqrt(chihat);
    let opts = *opts;
    pool.for_each_mut(ws, |_, w| {
        let n = w.zfold.len();
        for i in 0..n {
            w.drive[i] = s * w.zfold[i];
        }
        let drive = &w.drive;
        let sign0 = &w.sign0;
        let outcome = sweep_loop(drive, Some(sign0), r, 1.0, &opts, &mut w.x, |xs| {
            chain_objective(xs, drive, Some(sign0), r, 1.0)
        });
        w.converged = outcome.converged;
        let nf = n as f64;
        w.out[0] = rt_quad(&w.x, r) / (alpha * nf);
        w.out[1] = dot(&w.x, &w.zfold) / (alpha * s * nf);
    });
}

/// Damped fixed point of the `chihat` equation at one `alpha`, followed by a
/// consistent evaluation of the bracket factor.
fn bracket_at(
    ws: &mut [Workspace],
    r: f64,
    alpha: f64,
    iter: &IterConfig,
    chihat_init: f64,
    pool: &impl Parallelism,
) -> BracketEstimate {
    bracket_at_opts(ws, r, alpha, iter, chihat_init, &chain_opts(), pool)
}

fn bracket_at_opts(
    ws: &mut [Workspace],
    r: f64,
    alpha: f64,
    iter: &IterConfig,
    chihat_init: f64,
    opts: &ChainOptions,
    pool: &impl Parallelism,
) -> BracketEstimate {
    let mut chihat = chihat_init.max(CHIHAT_FLOOR);
    let mut status = FpStatus::MaxIters;
    let mut iters = iter.max_iters;
    let mut failures = 0usize;
    // Below the threshold the iteration slips past the ghost of the
    // vanished fixed point and then accelerates away; a contraction never
    // shows a sustained acceleration, so a long strictly-growing streak of
    // upward steps identifies the runaway branch early.
    let mut prev_rel = f64::INFINITY;
    let mut growth_streak = 0usize;
    for it in 0..iter.max_iters {
        threshold_pass(ws, r, alpha, chihat, opts, pool);
        failures += ws.iter().filter(|w| !w.converged).count();
        let new = mean_of(ws, 0).max(CHIHAT_FLOOR);
        let rel = math::abs(new - chihat) / chihat.max(CHIHAT_FLOOR);
        if new > chihat && rel > prev_rel * (1.0 + 1e-9) {
            growth_streak += 1;
        } else {
            growth_streak = 0;
        }
        prev_rel = rel;
        chihat = (1.0 - iter.damping) * chihat + iter.damping * new;
        if rel < iter.tol {
            status = FpStatus::Converged;
            iters = it + 1;
            break;
        }
        if chihat > CHIHAT_CEILING || growth_streak >= 64 {
            status = FpStatus::Diverged;
            iters = it + 1;
            break;
        }
    }
    threshold_pass(ws, r, alpha, chihat, opts, pool);
    let mean = mean_of(ws, 1);
    let stderr = stderr_of(ws, 1, mean);
    BracketEstimate {
        mean,
        stderr,
        chihat,
        status,
        iters,
        chain_failures: failures,
    }
}

/// Self-consistent bracket factor at a single compression rate.
///
/// Returns the Monte Carlo mean and standard error of the bracket factor at
/// the settled `chihat`, which crosses 1 exactly at the threshold (from
/// above: values > 1 mean `alpha` is below the threshold).
pub fn bracket_factor<P: Parallelism>(
    prior: SignalPrior,
    r: f64,
    alpha: f64,
    mc: &McConfig,
    iter: &IterConfig,
    pool: &P,
) -> Result<BracketEstimate, ReplicaError> {
    bracket_factor_with_opts(prior, r, alpha, mc, iter, &chain_opts(), pool)
}

/// As [`bracket_factor`] with explicit chain-solve options (used to study
/// sweep-budget sensitivity).
pub fn bracket_factor_with_opts<P: Parallelism>(
    prior: SignalPrior,
    r: f64,
    alpha: f64,
    mc: &McConfig,
    iter: &IterConfig,
    opts: &ChainOptions,
    pool: &P,
) -> Result<BracketEstimate, ReplicaError> {
    check_alpha(alpha)?;
    check_r(r)?;
    check_mc(mc)?;
    let mut ws = draw_workspaces(prior, r, mc, false, pool);
    Ok(bracket_at_opts(&mut ws, r, alpha, iter, 1.0, opts, pool))
}

/// Locates `alpha_c` by bisection on the bracket factor with common random
/// numbers, refined near the crossing by a local weighted linear fit.
pub fn find_threshold<P: Parallelism>(
    prior: SignalPrior,
    r: f64,
    mc: &McConfig,
    bisect: &BisectConfig,
    iter: &IterConfig,
    pool: &P,
) -> Result<ThresholdResult, ReplicaError> {
    check_r(r)?;
    check_mc(mc)?;
    check_alpha(bisect.alpha_lo)?;
    check_alpha(bisect.alpha_hi)?;
    if !(bisect.alpha_lo < bisect.alpha_hi) {
        return Err(ReplicaError::BadConfig(String::from(
            "alpha_lo must be below alpha_hi",
        )));
    }
    if !(bisect.tol_alpha > 0.0) {
        return Err(ReplicaError::BadConfig(String::from(
            "tol_alpha must be positive",
        )));
    }
    let mut ws = draw_workspaces(prior, r, mc, false, pool);
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut warm: Option<f64> = None;

    let mut eval = |alpha: f64, warm: &mut Option<f64>, trace: &mut Vec<TracePoint>| {
        let init = warm.unwrap_or(1.0);
        let be = bracket_at(&mut ws, r, alpha, iter, init, pool);
        if be.status == FpStatus::Converged {
            *warm = Some(be.chihat);
        }
        trace.push(TracePoint {
            alpha,
            bracket_mean: be.mean,
            bracket_stderr: be.stderr,
            chihat: be.chihat,
            converged: be.status == FpStatus::Converged,
        });
        be
    };

    let mut lo = bisect.alpha_lo;
    let mut hi = bisect.alpha_hi;
    let be_lo = eval(lo, &mut warm, &mut trace);
    let be_hi = eval(hi, &mut warm, &mut trace);
    if !(be_lo.mean > 1.0 && be_hi.mean < 1.0) {
        return Err(ReplicaError::NotBracketed {
            alpha_lo: lo,
            lo_mean: be_lo.mean,
            alpha_hi: hi,
            hi_mean: be_hi.mean,
        });
    }
    let mut chihat_hi = be_hi.chihat;
    while hi - lo > bisect.tol_alpha {
        let mid = 0.5 * (lo + hi);
        let be = eval(mid, &mut warm, &mut trace);
        if be.mean >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
            chihat_hi = be.chihat;
        }
    }
    let width = hi - lo;
    let midpoint = 0.5 * (lo + hi);

    // Refinement near the crossing. The bracket leaves 1 with square-root
    // geometry from above (the fixed point disappears in a tangency), so a
    // model `bracket = 1 - A sqrt(alpha - alpha_c)` through the two
    // converged points nearest the crossing locates it; the estimate is
    // clamped into the final bisection bracket, which bounds the answer by
    // construction.
    let mut above: Vec<&TracePoint> = trace
        .iter()
        .filter(|t| t.converged && t.bracket_mean < 1.0)
        .collect();
    above.sort_by(|x, y| x.alpha.partial_cmp(&y.alpha).unwrap());
    let mut alpha_c = midpoint;
    let mut fit_slope = None;
    if above.len() >= 2 {
        let p1 = above[0];
        let p2 = above[1];
        let d1 = 1.0 - p1.bracket_mean;
        let d2 = 1.0 - p2.bracket_mean;
        let noise = p1.bracket_stderr.max(p2.bracket_stderr);
        // Secant slope doubles as the noise-propagation factor and as the
        // sanity gate against an MC-noise-dominated crossing.
        let secant = (p2.bracket_mean - p1.bracket_mean) / (p2.alpha - p1.alpha);
        if secant >= 0.0 && d2 > 4.0 * noise {
            return Err(ReplicaError::Inconclusive { trace });
        }
        fit_slope = Some(secant);
        if d1 > 0.0 && d2 > d1.max(3.0 * noise) {
            let k = d1 / d2;
            let k2 = k * k;
            let crossing = (k2 * p2.alpha - p1.alpha) / (k2 - 1.0);
            if crossing.is_finite() {
                alpha_c = crossing.clamp(lo, hi);
            }
        }
    }

    // Uncertainty: bisection half-width plus MC error through the local
    // slope (the secant is shallower than the true near-crossing slope,
    // which errs on the conservative side).
    let stderr_near = above
        .iter()
        .take(2)
        .map(|t| t.bracket_stderr)
        .fold(0.0f64, f64::max)
        .max(be_hi.stderr);
    let slope_mag = fit_slope.map(math::abs).unwrap_or(0.0);
    let noise_term = if slope_mag > 1e-9 {
        (stderr_near / slope_mag).min(4.0 * width)
    } else {
        width
    };
    let mc_stderr = math::sqrt((0.5 * width) * (0.5 * width) + noise_term * noise_term);

    trace.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap());
    let monotone_ok = trace.windows(2).all(|w| {
        w[1].bracket_mean
            <= w[0].bracket_mean + 2.0 * (w[0].bracket_stderr + w[1].bracket_stderr)
    });

    Ok(ThresholdResult {
        alpha_c,
        mc_stderr,
        chihat_at_threshold: chihat_hi,
        bracket_trace: trace,
        samples_used: mc.n_samples,
        n_used: mc.n_chain,
        monotone_ok,
        fit_slope,
    })
}

/// Solves the full saddle-point system at `(rho, r, alpha)`.
pub fn solve_saddle<P: Parallelism>(
    prior: SignalPrior,
    r: f64,
    alpha: f64,
    mc: &McConfig,
    iter: &IterConfig,
    pool: &P,
) -> Result<SaddleReport, ReplicaError> {
    check_alpha(alpha)?;
    check_r(r)?;
    check_mc(mc)?;
    let mut ws = draw_workspaces(prior, r, mc, true, pool);
    let rho = prior.rho();

    let mut q = rho;
    let mut m = rho / 2.0;
    let mut chi = 1.0;
    // q - 2m + u, tracked from the previous chain pass so chihat stays
    // non-negative (per sample it is a positive semidefinite quadratic form).
    let mut delta2 = (q - 2.0 * m + rho).max(0.0);

    let opts = chain_opts();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut floor_hit = false;
    let mut iters = 0;
    let mut failures = 0usize;
    let mut qhat = alpha / chi;
    let mut mhat = qhat;
    let mut chihat = (alpha * delta2 / (chi * chi)).max(CHIHAT_FLOOR);

    for it in 0..iter.max_iters {
        iters = it + 1;
        qhat = alpha / chi;
        mhat = qhat;
        chihat = (alpha * delta2 / (chi * chi)).max(CHIHAT_FLOOR);
        let s = math::sqrt(chihat);
        pool.for_each_mut(&mut ws, |_, w| {
            let n = w.zfold.len();
            for i in 0..n {
                w.drive[i] = mhat * w.x0rt[i] + s * w.zfold[i];
            }
            let drive = &w.drive;
            let outcome = sweep_loop(drive, None, r, qhat, &opts, &mut w.x, |xs| {
                chain_objective(xs, drive, None, r, qhat)
            });
            w.converged = outcome.converged;
            let nf = n as f64;
            let q_s = rt_quad(&w.x, r) / nf;
            // x0rt is Rt x0, so the plain dot gives x' Rt x0.
            let m_s = dot(&w.x, &w.x0rt) / nf;
            let chi_s = dot(&w.x, &w.zfold) / (s * nf);
            w.out = [q_s, m_s, chi_s, (q_s - 2.0 * m_s + w.u).max(0.0)];
        });
        failures += ws.iter().filter(|w| !w.converged).count();
        let q_new = mean_of(&ws, 0);
        let m_new = mean_of(&ws, 1);
        let chi_new = mean_of(&ws, 2).max(1e-300);
        let delta2_new = mean_of(&ws, 3);
        residual = rel_change(q, q_new)
            .max(rel_change(m, m_new))
            .max(rel_change(chi, chi_new));
        let lambda = iter.damping;
        q = (1.0 - lambda) * q + lambda * q_new;
        m = (1.0 - lambda) * m + lambda * m_new;
        chi = ((1.0 - lambda) * chi + lambda * chi_new).max(1e-300);
        delta2 = ((1.0 - lambda) * delta2 + lambda * delta2_new).max(0.0);
        if chi < CHI_SUCCESS_FLOOR {
            floor_hit = true;
            converged = true;
            break;
        }
        if residual < iter.tol {
            converged = true;
            break;
        }
    }

    let q_mean = mean_of(&ws, 0);
    let q_stderr = stderr_of(&ws, 0, q_mean);
    let s_count = ws.len();
    let mut qm = Vec::with_capacity(s_count);
    for w in &ws {
        qm.push(w.out[0] - w.out[1]);
    }
    let u_mean = ws.iter().map(|w| w.u).sum::<f64>() / s_count as f64;
    let qm_stderr = slice_stderr(&qm);
    // Success iff q = m = rho within Monte Carlo resolution (3 x stderr of
    // the q estimate), or chi collapsed through the floor outright. In the
    // success region chi shrinks until limited by sample noise, so both
    // routes land here.
    let eps = 3.0 * q_stderr.max(1e-12);
    let recovered =
        floor_hit || (math::abs(q - m) < eps && math::abs(q - u_mean) < eps);

    Ok(SaddleReport {
        state: SaddleState {
            q,
            m,
            chi,
            qhat,
            mhat,
            chihat,
        },
        converged,
        recovered,
        residual,
        iters,
        q_stderr,
        qm_stderr,
        chain_failures: failures,
    })
}

fn rel_change(old: f64, new: f64) -> f64 {
    math::abs(new - old) / math::abs(old).max(1e-12)
}

fn slice_stderr(v: &[f64]) -> f64 {
    let s = v.len();
    if s < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / s as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (s - 1) as f64;
    math::sqrt(var / s as f64)
}

/// Thresholds over a density grid, one independent search per `rho`.
/// Per-point failures are recorded and the sweep continues.
pub fn threshold_curve<P: Parallelism>(
    rhos: &[f64],
    r: f64,
    mc: &McConfig,
    bisect: &BisectConfig,
    iter: &IterConfig,
    pool: &P,
) -> Vec<(f64, Result<ThresholdResult, ReplicaError>)> {
    rhos.iter()
        .map(|&rho| {
            let result = SignalPrior::new(rho)
                .map_err(|_| ReplicaError::BadConfig(String::from("rho outside [0,1]")))
                .and_then(|prior| {
                    // The threshold always lies above rho; clamp the window
                    // so the lower endpoint stays on the bracketing side.
                    let lo_floor = rho + (0.005f64).min((1.0 - rho) / 4.0);
                    let cfg = BisectConfig {
                        alpha_lo: bisect.alpha_lo.max(lo_floor),
                        alpha_hi: bisect.alpha_hi,
                        tol_alpha: bisect.tol_alpha,
                    };
                    find_threshold(prior, r, mc, &cfg, iter, pool)
                });
            (rho, result)
        })
        .collect()
}
