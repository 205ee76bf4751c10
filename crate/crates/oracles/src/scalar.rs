//! Uncorrelated-case (`r = 0`) order-parameter equations evaluated by
//! one-dimensional Gaussian quadrature.
//!
//! With no chain coupling every coordinate decouples, so each expectation
//! reduces to an integral of a piecewise-smooth function against the
//! standard normal density. Integrals use composite Simpson on segments
//! split at the soft-threshold kinks, which keeps the integrand smooth on
//! every panel.

const Z_RANGE: f64 = 12.0;
const PANELS: usize = 4096;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * core::f64::consts::PI).sqrt()
}

/// Composite Simpson of `f(z) phi(z)` over `[a, b]`.
fn simpson_segment(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) & !1; // even
    let h = (b - a) / n as f64;
    let g = |z: f64| f(z) * normal_pdf(z);
    let mut acc = g(a) + g(b);
    for i in 1..n {
        let z = a + h * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(z);
    }
    acc * h / 3.0
}

/// Expectation of `f(z)` under the standard normal, with the integration
/// domain split at `kinks` so each panel sees a smooth integrand.
pub fn gauss_expect(f: &dyn Fn(f64) -> f64, kinks: &[f64]) -> f64 {
    let mut cuts = vec![-Z_RANGE];
    for &k in kinks {
        if k > -Z_RANGE && k < Z_RANGE {
            cuts.push(k);
        }
    }
    cuts.push(Z_RANGE);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let frac = (w[1] - w[0]) / (2.0 * Z_RANGE);
        let panels = ((PANELS as f64 * frac) as usize).max(64);
        total += simpson_segment(f, w[0], w[1], panels);
    }
    total
}

fn soft(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// `E[soft(s z, 1)^2]`.
fn moment_soft_sq(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let k = 1.0 / s;
    gauss_expect(&|z| soft(s * z, 1.0).powi(2), &[-k, k])
}

/// `E[z soft(s z, 1)]`.
fn moment_z_soft(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let k = 1.0 / s;
    gauss_expect(&|z| z * soft(s * z, 1.0), &[-k, k])
}

/// Threshold-mode `chihat` update map at `r = 0`:
/// zero coordinates contribute `E[soft(sqrt(chihat) z, 1)^2]`, sampled ones
/// `E[(sqrt(chihat) z - 1)^2] = chihat + 1`.
fn chihat_rhs(rho: f64, alpha: f64, chihat: f64) -> f64 {
    let s = chihat.sqrt();
    ((1.0 - rho) * moment_soft_sq(s) + rho * (chihat + 1.0)) / alpha
}

/// Bracket factor at `r = 0` given `chihat`.
fn bracket_given(rho: f64, alpha: f64, chihat: f64) -> f64 {
    let s = chihat.sqrt();
    ((1.0 - rho) * moment_z_soft(s) + rho * s) / (alpha * s)
}

/// Bracket factor at the stable `chihat` fixed point, or `None` when no
/// finite fixed point exists (i.e. `alpha` is below the threshold).
///
/// `h(c) = rhs(c) - c` has monotone-increasing slope (`rhs'` runs from
/// `rho/alpha` up to `1/alpha`), so it is unimodal with a single dip:
/// ternary search locates the minimum, then bisection finds the stable
/// (left) crossing when the dip goes negative.
pub fn bracket_r0(rho: f64, alpha: f64) -> Option<f64> {
    let h = |c: f64| chihat_rhs(rho, alpha, c) - c;
    let (mut a, mut b) = ((1e-8f64).ln(), (1e10f64).ln());
    for _ in 0..300 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if h(m1.exp()) < h(m2.exp()) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let c_min = (0.5 * (a + b)).exp();
    if h(c_min) > 0.0 {
        return None;
    }
    let mut lo = 1e-8;
    let mut hi = c_min;
    if h(lo) < 0.0 {
        return Some(bracket_given(rho, alpha, lo));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(bracket_given(rho, alpha, 0.5 * (lo + hi)))
}

/// Reconstruction threshold `alpha_c(rho)` at `r = 0`.
///
/// Eliminating `alpha` between the `chihat` equation and the bracket = 1
/// condition leaves one scalar equation,
/// `(1 - rho) (sqrt(c) E[z soft(sqrt(c) z, 1)] - E[soft(sqrt(c) z, 1)^2]) = rho`,
/// solved by bisection; the threshold follows from the bracket condition.
pub fn threshold_alpha_r0(rho: f64) -> f64 {
    assert!(rho > 0.0 && rho < 1.0, "threshold defined for rho in (0,1)");
    let w = |c: f64| {
        let s = c.sqrt();
        (1.0 - rho) * (s * moment_z_soft(s) - moment_soft_sq(s)) - rho
    };
    let mut lo: f64 = 1e-10;
    let mut hi: f64 = 1e-6;
    while w(hi) < 0.0 {
        hi *= 2.0;
        assert!(hi < 1e14, "threshold bisection failed to bracket");
    }
    lo = lo.max(hi / 2.0 / 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let chihat = 0.5 * (lo + hi);
    let s = chihat.sqrt();
    (1.0 - rho) * moment_z_soft(s) / s + rho
}

/// Fixed point of the full saddle system at `r = 0` by damped iteration
/// with quadrature expectations.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSaddle {
    pub q: f64,
    pub m: f64,
    pub chi: f64,
    pub chihat: f64,
    pub success: bool,
}

/// Solves the uncorrelated saddle system. For the Gaussian part the joint
/// expectations over `(x0, z)` reduce to one-dimensional integrals in
/// `u = mhat x0 + sqrt(chihat) z ~ N(0, mhat^2 + chihat)` via
/// `E[x0 f(u)] = (mhat / var) E[u f(u)]` and the analogue for `z`.
pub fn saddle_r0(rho: f64, alpha: f64) -> ScalarSaddle {
    let mut q = rho;
    let mut m = rho / 2.0;
    let mut chi = 1.0;
    let mut delta2 = (q - 2.0 * m + rho).max(0.0);
    let damping = 0.5;
    let chi_floor = 1e-8;
    let mut chihat = 0.0;
    for _ in 0..4000 {
        let qhat = alpha / chi;
        let mhat = qhat;
        chihat = (alpha * delta2 / (chi * chi)).max(1e-18);
        let s = chihat.sqrt();
        let var = mhat * mhat + chihat;
        let sigma = var.sqrt();

        let i1_s = moment_soft_sq(s);
        let i2_s = moment_z_soft(s);
        let i1_sig = moment_soft_sq(sigma);
        let i2_sig = moment_z_soft(sigma);
        // E[u soft(u,1)] with u = sigma w equals sigma * E[w soft(sigma w, 1)]
        let q_new = ((1.0 - rho) * i1_s + rho * i1_sig) / (qhat * qhat);
        let m_new = rho * (mhat / sigma) * i2_sig / qhat;
        let chi_new = ((1.0 - rho) * i2_s + rho * (s / sigma) * i2_sig) / (s * qhat);
        let delta2_new = (q_new - 2.0 * m_new + rho).max(0.0);

        let rel = ((q_new - q).abs() / q.abs().max(1e-12))
            .max((m_new - m).abs() / m.abs().max(1e-12))
            .max((chi_new - chi).abs() / chi.abs().max(1e-12));
        q = (1.0 - damping) * q + damping * q_new;
        m = (1.0 - damping) * m + damping * m_new;
        chi = ((1.0 - damping) * chi + damping * chi_new).max(1e-300);
        delta2 = (1.0 - damping) * delta2 + damping * delta2_new;
        if chi < chi_floor {
            return ScalarSaddle {
                q,
                m,
                chi,
                chihat,
                success: true,
            };
        }
        if rel < 1e-10 {
            break;
        }
    }
    let success = (q - m).abs() < 1e-6 && (q - rho).abs() < 1e-6;
    ScalarSaddle {
        q,
        m,
        chi,
        chihat,
        success,
    }
}
