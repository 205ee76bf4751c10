//! Empirical phase-transition study: success-probability curves over the
//! compression rate, per-size threshold estimation by logistic fit, and
//! finite-size-scaling extrapolation to infinite size.

use alloc::string::String;
use alloc::vec::Vec;

use crate::exec::Parallelism;
use crate::math;
use crate::model::{make_instance, CorrelationFamily, CorrelationSpec, ModelError, SignalPrior};
use crate::recovery::{basis_pursuit, BasisPursuitParams, RecoveryError};
use crate::rng::{purpose, Stream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("alpha grid must be strictly increasing inside (0,1)")]
    BadAlphaGrid,
    #[error("trials per alpha must be positive")]
    NoTrials,
    #[error("need at least {need} distinct sizes, got {got}")]
    TooFewSizes { need: usize, got: usize },
    #[error("scaling fit design matrix is ill-conditioned")]
    IllConditioned,
    #[error("logistic fit failed: {0}")]
    FitFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

/// Success counts at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionPoint {
    pub alpha: f64,
    pub trials: u32,
    pub successes: u32,
    /// Solver runs dropped for non-convergence (counted, not classified).
    pub excluded: u32,
}

/// Empirical transition at one size, with the fitted 50% crossing.
#[derive(Debug, Clone)]
pub struct TransitionCurve {
    pub n: usize,
    pub rho: f64,
    pub r: f64,
    pub points: Vec<TransitionPoint>,
    pub alpha_c_n: f64,
    pub alpha_c_n_stderr: f64,
    /// Set when more than 1% of runs were excluded.
    pub flagged: bool,
}

/// Which vanishing variable the extrapolation regresses on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingVariable {
    InvSqrtN,
    InvN,
}

impl ScalingVariable {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            ScalingVariable::InvSqrtN => 1.0 / math::sqrt(n as f64),
            ScalingVariable::InvN => 1.0 / n as f64,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ScalingVariable::InvSqrtN => "n^-1/2",
            ScalingVariable::InvN => "n^-1",
        }
    }
}

/// Quadratic extrapolation of per-size thresholds to infinite size.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub curve: Vec<(usize, f64, f64)>,
    /// `alpha_c(v) = c0 + c1 v + c2 v^2` in the scaling variable `v`.
    pub coefficients: [f64; 3],
    pub alpha_c_inf: f64,
    pub alpha_c_inf_stderr: f64,
    pub scaling_variable: ScalingVariable,
    pub chi2_dof: f64,
}

/// Counts successful reconstructions at one `(n, alpha)` grid point.
/// Trials map to pre-assigned seed sub-streams, so results do not depend
/// on execution order or worker count.
///
/// Classification is certificate-first: the exact-recovery dual certificate
/// settles clear successes without iterating, the feasible-undercut
/// certificate ends clear failures early, and only inconclusive instances
/// run the splitting solver to full tolerance. The certificates imply the
/// same success/failure labels the converged solver would produce.
#[allow(clippy::too_many_arguments)]
fn transition_point<P: Parallelism>(
    n: usize,
    prior: SignalPrior,
    rt: &CorrelationSpec,
    rr: &CorrelationFamily,
    alpha: f64,
    alpha_index: usize,
    trials: usize,
    seed: u64,
    params: &BasisPursuitParams,
    pool: &P,
) -> Result<TransitionPoint, ExperimentError> {
    let p = math::floor(alpha * n as f64 + 0.5) as usize;
    let rr_spec = rr.bind(p)?;
    let solver_params = BasisPursuitParams {
        failure_certificate: true,
        ..*params
    };
    let outcomes = pool.map_collect(trials, |t| {
        let mut ids = Stream::from_path(
            seed,
            &[purpose::TRIAL, n as u64, alpha_index as u64, t as u64],
        );
        let trial_seed = ids.next_u64();
        let inst = match make_instance(prior, n, alpha, rt, &rr_spec, trial_seed) {
            Ok(i) => i,
            Err(_) => return 2u8,
        };
        match basis_pursuit(&inst, &solver_params) {
            Ok(res) if res.certified_failure => 0,
            Ok(res) if !res.converged => 2,
            Ok(res) if res.success => 1,
            Ok(_) => 0,
            Err(_) => 2,
        }
    });
    let successes = outcomes.iter().filter(|&&o| o == 1).count() as u32;
    let excluded = outcomes.iter().filter(|&&o| o == 2).count() as u32;
    Ok(TransitionPoint {
        alpha,
        trials: trials as u32 - excluded,
        successes,
        excluded,
    })
}

fn rt_spec_for(n: usize, r: f64) -> Result<CorrelationSpec, ExperimentError> {
    Ok(if r == 0.0 {
        CorrelationSpec::identity(n)
    } else {
        CorrelationSpec::tridiagonal(n, r)?
    })
}

/// Runs `trials_per_alpha` independent reconstructions at each grid point
/// and fits the 50% crossing.
#[allow(clippy::too_many_arguments)]
pub fn run_transition<P: Parallelism>(
    n: usize,
    rho: f64,
    r: f64,
    rr: &CorrelationFamily,
    alpha_grid: &[f64],
    trials_per_alpha: usize,
    seed: u64,
    params: &BasisPursuitParams,
    pool: &P,
) -> Result<TransitionCurve, ExperimentError> {
    if alpha_grid.is_empty()
        || alpha_grid.windows(2).any(|w| w[0] >= w[1])
        || alpha_grid.iter().any(|&a| !(0.0 < a && a < 1.0))
    {
        return Err(ExperimentError::BadAlphaGrid);
    }
    if trials_per_alpha == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let prior = SignalPrior::new(rho)?;
    let rt = rt_spec_for(n, r)?;
    let points: Vec<TransitionPoint> = alpha_grid
        .iter()
        .enumerate()
        .map(|(ai, &alpha)| {
            transition_point(
                n,
                prior,
                &rt,
                rr,
                alpha,
                ai,
                trials_per_alpha,
                seed,
                params,
                pool,
            )
        })
        .collect::<Result<_, _>>()?;
    let total: u32 = points.iter().map(|p| p.trials + p.excluded).sum();
    let excluded: u32 = points.iter().map(|p| p.excluded).sum();
    let flagged = excluded as f64 > 0.01 * total as f64;
    let fit = logistic::fit_crossing(&points)?;
    Ok(TransitionCurve {
        n,
        rho,
        r,
        points,
        alpha_c_n: fit.alpha50,
        alpha_c_n_stderr: fit.stderr,
        flagged,
    })
}

/// Weighted quadratic regression of per-size thresholds on the scaling
/// variable; the intercept is the infinite-size threshold.
pub fn fit_scaling(
    curves: &[TransitionCurve],
    variable: ScalingVariable,
) -> Result<ScalingFit, ExperimentError> {
    let mut seen: Vec<usize> = curves.iter().map(|c| c.n).collect();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 4 {
        return Err(ExperimentError::TooFewSizes {
            need: 4,
            got: seen.len(),
        });
    }
    let pts: Vec<(f64, f64, f64)> = curves
        .iter()
        .map(|c| {
            (
                variable.value(c.n),
                c.alpha_c_n,
                c.alpha_c_n_stderr.max(1e-6),
            )
        })
        .collect();
    // Normal equations for [1, v, v^2] with weights 1/sigma^2.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(v, y, s) in &pts {
        let w = 1.0 / (s * s);
        let basis = [1.0, v, v * v];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * basis[i] * basis[j];
            }
            atb[i] += w * basis[i] * y;
        }
    }
    let (coef, cov00) = solve3(&ata, &atb).ok_or(ExperimentError::IllConditioned)?;
    let mut chi2 = 0.0;
    for &(v, y, s) in &pts {
        let pred = coef[0] + coef[1] * v + coef[2] * v * v;
        let d = (y - pred) / s;
        chi2 += d * d;
    }
    let dof = (pts.len() as f64 - 3.0).max(1.0);
    Ok(ScalingFit {
        curve: curves
            .iter()
            .map(|c| (c.n, c.alpha_c_n, c.alpha_c_n_stderr))
            .collect(),
        coefficients: coef,
        alpha_c_inf: coef[0],
        alpha_c_inf_stderr: math::sqrt(cov00),
        scaling_variable: variable,
        chi2_dof: chi2 / dof,
    })
}

/// Solves the 3x3 SPD system and returns `(solution, (A^-1)_00)`.
fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<([f64; 3], f64)> {
    // Cholesky on the 3x3.
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = math::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let solve = |rhs: &[f64; 3]| {
        let mut y = [0.0f64; 3];
        for i in 0..3 {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        let mut x = [0.0f64; 3];
        for i in (0..3).rev() {
            let mut s = y[i];
            for k in (i + 1)..3 {
                s -= l[k][i] * x[k];
            }
            x[i] = s / l[i][i];
        }
        x
    };
    let x = solve(b);
    let e0 = solve(&[1.0, 0.0, 0.0]);
    Some((x, e0[0]))
}

/// Result of comparing success fractions across observation-side
/// correlation choices at a single compression rate.
#[derive(Debug, Clone)]
pub struct RrIndependenceReport {
    pub arms: Vec<RrArm>,
    /// `(arm_i, arm_j, z)` two-proportion statistics for every pair.
    pub pairwise_z: Vec<(usize, usize, f64)>,
    /// True when no pair differs at the 3-sigma level.
    pub supported: bool,
}

#[derive(Debug, Clone)]
pub struct RrArm {
    pub label: String,
    pub trials: u32,
    pub successes: u32,
    pub fraction: f64,
}

/// Runs identical trials under each observation-side correlation and tests
/// whether any pair of success fractions differs significantly.
#[allow(clippy::too_many_arguments)]
pub fn rr_independence_check<P: Parallelism>(
    n: usize,
    rho: f64,
    r_t: f64,
    rr_specs: &[(String, CorrelationFamily)],
    alpha: f64,
    trials: usize,
    seed: u64,
    params: &BasisPursuitParams,
    pool: &P,
) -> Result<RrIndependenceReport, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(ExperimentError::BadAlphaGrid);
    }
    let prior = SignalPrior::new(rho)?;
    let rt = rt_spec_for(n, r_t)?;
    let mut arms = Vec::with_capacity(rr_specs.len());
    for (arm_idx, (label, rr)) in rr_specs.iter().enumerate() {
        // Arms draw independent instances; equality of fractions is then a
        // genuine statistical statement, not an artifact of shared noise.
        let point = transition_point(
            n,
            prior,
            &rt,
            rr,
            alpha,
            0,
            trials,
            seed ^ ((arm_idx as u64 + 1) << 32),
            params,
            pool,
        )?;
        arms.push(RrArm {
            label: label.clone(),
            trials: point.trials,
            successes: point.successes,
            fraction: point.successes as f64 / point.trials.max(1) as f64,
        });
    }
    let mut pairwise_z = Vec::new();
    let mut supported = true;
    for i in 0..arms.len() {
        for j in (i + 1)..arms.len() {
            let z = two_proportion_z(
                arms[i].successes,
                arms[i].trials,
                arms[j].successes,
                arms[j].trials,
            );
            if math::abs(z) >= 3.0 {
                supported = false;
            }
            pairwise_z.push((i, j, z));
        }
    }
    Ok(RrIndependenceReport {
        arms,
        pairwise_z,
        supported,
    })
}

/// Pooled two-proportion z statistic.
pub fn two_proportion_z(k1: u32, n1: u32, k2: u32, n2: u32) -> f64 {
    if n1 == 0 || n2 == 0 {
        return 0.0;
    }
    let p1 = k1 as f64 / n1 as f64;
    let p2 = k2 as f64 / n2 as f64;
    let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64);
    if var <= 0.0 {
        return 0.0;
    }
    (p1 - p2) / math::sqrt(var)
}

/// Crossing fit result: the 50% point of the success curve.
#[derive(Debug, Clone, Copy)]
pub struct CrossingFit {
    pub alpha50: f64,
    pub stderr: f64,
    /// Logistic slope; `None` when the interpolation fallback was used.
    pub slope: Option<f64>,
}

pub mod logistic {
    //! Maximum-likelihood logistic fit of success probability against the
    //! compression rate, with a linear-interpolation fallback for separated
    //! or degenerate data.

    use super::{CrossingFit, ExperimentError, TransitionPoint};
    use crate::math;
    use alloc::format;
    use alloc::vec::Vec;

    fn sigmoid(t: f64) -> f64 {
        if t >= 0.0 {
            1.0 / (1.0 + math::exp(-t))
        } else {
            let e = math::exp(t);
            e / (1.0 + e)
        }
    }

    /// Fits `P(success)(alpha) = sigmoid(a + b alpha)` by Newton-Raphson and
    /// returns the 50% crossing `-a/b` with its delta-method standard error.
    pub fn fit_crossing(points: &[TransitionPoint]) -> Result<CrossingFit, ExperimentError> {
        let usable: Vec<&TransitionPoint> = points.iter().filter(|p| p.trials > 0).collect();
        if usable.is_empty() {
            return Err(ExperimentError::FitFailed(format!(
                "no usable points out of {}",
                points.len()
            )));
        }
        // Moment-based start from clamped empirical logits.
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let m = usable.len() as f64;
        for p in &usable {
            let frac = (p.successes as f64 + 0.5) / (p.trials as f64 + 1.0);
            let logit = math::ln(frac / (1.0 - frac));
            sx += p.alpha;
            sy += logit;
            sxx += p.alpha * p.alpha;
            sxy += p.alpha * logit;
        }
        let det = m * sxx - sx * sx;
        let (mut a, mut b) = if math::abs(det) > 1e-12 {
            let b0 = (m * sxy - sx * sy) / det;
            let a0 = (sy - b0 * sx) / m;
            (a0, b0.max(1.0))
        } else {
            (0.0, 1.0)
        };

        let mut converged = false;
        for _ in 0..200 {
            let mut g = [0.0f64; 2];
            let mut h = [[0.0f64; 2]; 2];
            for p in &usable {
                let mu = sigmoid(a + b * p.alpha);
                let w = p.trials as f64 * mu * (1.0 - mu);
                let resid = p.successes as f64 - p.trials as f64 * mu;
                g[0] += resid;
                g[1] += resid * p.alpha;
                h[0][0] += w;
                h[0][1] += w * p.alpha;
                h[1][1] += w * p.alpha * p.alpha;
            }
            h[1][0] = h[0][1];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if !det.is_finite() || det.abs() < 1e-12 {
                break;
            }
            let da = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
            let db = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
            a += da;
            b += db;
            if !(a.is_finite() && b.is_finite()) || b.abs() > 1e4 {
                break;
            }
            if da.abs() < 1e-10 && db.abs() < 1e-10 {
                converged = true;
                break;
            }
        }

        if converged && b.is_finite() && b > 0.0 {
            // Delta method on alpha50 = -a/b.
            let mut h = [[0.0f64; 2]; 2];
            for p in &usable {
                let mu = sigmoid(a + b * p.alpha);
                let w = p.trials as f64 * mu * (1.0 - mu);
                h[0][0] += w;
                h[0][1] += w * p.alpha;
                h[1][1] += w * p.alpha * p.alpha;
            }
            h[1][0] = h[0][1];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if det > 1e-12 {
                let inv = [
                    [h[1][1] / det, -h[0][1] / det],
                    [-h[1][0] / det, h[0][0] / det],
                ];
                let grad = [-1.0 / b, a / (b * b)];
                let var = grad[0] * grad[0] * inv[0][0]
                    + 2.0 * grad[0] * grad[1] * inv[0][1]
                    + grad[1] * grad[1] * inv[1][1];
                if var.is_finite() && var >= 0.0 {
                    return Ok(CrossingFit {
                        alpha50: -a / b,
                        stderr: math::sqrt(var),
                        slope: Some(b),
                    });
                }
            }
        }
        interpolation_fallback(&usable)
    }

    /// Linear interpolation of the empirical fractions through 0.5; used
    /// when the likelihood is separated or otherwise degenerate.
    fn interpolation_fallback(points: &[&TransitionPoint]) -> Result<CrossingFit, ExperimentError> {
        let fracs: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|p| {
                let f = p.successes as f64 / p.trials as f64;
                let se =
                    math::sqrt((f * (1.0 - f)).max(0.25 / p.trials as f64) / p.trials as f64);
                (p.alpha, f, se)
            })
            .collect();
        for w in fracs.windows(2) {
            let (a0, f0, s0) = w[0];
            let (a1, f1, s1) = w[1];
            if (f0 - 0.5) * (f1 - 0.5) <= 0.0 && f1 != f0 {
                let t = (0.5 - f0) / (f1 - f0);
                let alpha50 = a0 + t * (a1 - a0);
                let slope = (f1 - f0) / (a1 - a0);
                let se = (s0.max(s1)) / math::abs(slope);
                return Ok(CrossingFit {
                    alpha50,
                    stderr: se.min(a1 - a0),
                    slope: None,
                });
            }
        }
        Err(ExperimentError::FitFailed(format!(
            "success curve never crosses 0.5 over {} points",
            points.len()
        )))
    }
}
