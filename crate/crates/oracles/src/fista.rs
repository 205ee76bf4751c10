//! Accelerated proximal-gradient reference solver for small cyclic-chain
//! problems. A generic first-order method, independent of the coordinate
//! sweep logic under test.

/// Which penalty the chain carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FistaMode {
    /// `(qhat/2) x' Rt x - d' x + |x|_1`
    Saddle { qhat: f64, mhat: f64 },
    /// `(1/2) x' Rt x - d' x + sum_i psi_i`, `psi_i = |x_i|` if `x0_i = 0`
    /// else `sgn(x0_i) x_i`
    Threshold,
}

fn cyc(i: usize, n: usize) -> usize {
    if i >= n {
        i - n
    } else {
        i
    }
}

/// Builds the linear drive exactly as the objective defines it.
fn drive(mode: FistaMode, r: f64, chihat: f64, z: &[f64], x0: &[f64]) -> Vec<f64> {
    let n = z.len();
    let a = (1.0 + 2.0 * r).sqrt();
    let b = (1.0 - 2.0 * r).sqrt();
    let (lp, lm) = ((a + b) / 2.0, (a - b) / 2.0);
    let s = chihat.sqrt();
    let mut d = vec![0.0; n];
    for i in 0..n {
        d[i] = s * (lp * z[i] + lm * z[cyc(i + n - 1, n)]);
        if let FistaMode::Saddle { mhat, .. } = mode {
            d[i] += mhat * (x0[i] + r * (x0[cyc(i + n - 1, n)] + x0[cyc(i + 1, n)]));
        }
    }
    d
}

fn grad_smooth(x: &[f64], d: &[f64], r: f64, quad: f64, out: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let nb = x[cyc(i + n - 1, n)] + x[cyc(i + 1, n)];
        out[i] = quad * (x[i] + r * nb) - d[i];
    }
}

fn objective(x: &[f64], d: &[f64], sign0: &[f64], r: f64, quad: f64, mixed: bool) -> f64 {
    let n = x.len();
    let mut sq = 0.0;
    let mut cross = 0.0;
    let mut lin = 0.0;
    let mut pen = 0.0;
    for i in 0..n {
        sq += x[i] * x[i];
        cross += x[i] * x[cyc(i + 1, n)];
        lin += d[i] * x[i];
        pen += if mixed && sign0[i] != 0.0 {
            sign0[i] * x[i]
        } else {
            x[i].abs()
        };
    }
    0.5 * quad * (sq + 2.0 * r * cross) - lin + pen
}

/// Solves the chain problem with FISTA (function-value restart) and returns
/// `(minimizer, objective)`.
pub fn fista_chain(
    mode: FistaMode,
    r: f64,
    chihat: f64,
    z: &[f64],
    x0: &[f64],
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let n = z.len();
    let d = drive(mode, r, chihat, z, x0);
    let quad = match mode {
        FistaMode::Saddle { qhat, .. } => qhat,
        FistaMode::Threshold => 1.0,
    };
    let mixed = matches!(mode, FistaMode::Threshold);
    let sign0: Vec<f64> = x0.iter().map(|&v| v.signum() * f64::from(v != 0.0)).collect();
    // Lipschitz constant of the smooth part: quad * lambda_max(Rt).
    let lip = quad * (1.0 + 2.0 * r.abs());
    let eta = 1.0 / lip;

    let mut x = vec![0.0; n];
    let mut yv = x.clone();
    let mut g = vec![0.0; n];
    let mut t: f64 = 1.0;
    let mut best_obj = objective(&x, &d, &sign0, r, quad, mixed);
    let mut best_x = x.clone();
    let mut prev_obj = best_obj;
    for _ in 0..max_iters {
        grad_smooth(&yv, &d, r, quad, &mut g);
        let mut xn = vec![0.0; n];
        for i in 0..n {
            let w = yv[i] - eta * g[i];
            xn[i] = if mixed && sign0[i] != 0.0 {
                w - eta * sign0[i]
            } else {
                let lam = eta;
                if w > lam {
                    w - lam
                } else if w < -lam {
                    w + lam
                } else {
                    0.0
                }
            };
        }
        let obj = objective(&xn, &d, &sign0, r, quad, mixed);
        if obj > prev_obj {
            // restart momentum
            t = 1.0;
            yv.copy_from_slice(&x);
            prev_obj = objective(&x, &d, &sign0, r, quad, mixed);
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        for i in 0..n {
            yv[i] = xn[i] + ((t - 1.0) / tn) * (xn[i] - x[i]);
        }
        t = tn;
        x = xn;
        if obj < best_obj {
            if best_obj - obj < 1e-15 * (1.0 + obj.abs()) {
                best_obj = obj;
                best_x = x.clone();
                break;
            }
            best_obj = obj;
            best_x = x.clone();
        }
        prev_obj = obj;
    }
    (best_x, best_obj)
}

#[derive(Debug, Clone, Copy)]
pub struct GaussState(u64);

/// Tiny deterministic generator for test data; not for production use.
impl GaussState {
    pub fn new(seed: u64) -> Self {
        GaussState(seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        // xorshift64*
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn gaussian(&mut self) -> f64 {
        // Box-Muller
        let u1 = (self.uniform()).max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
    }
}
