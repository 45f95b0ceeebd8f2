//! Closed forms used as one route of every dual-route check: harmonic
//! sums, beta-function log-moment integrals, and the radial tail profile
//! of the uniform ball.
//!
//! For the unit ball in dimension n, the one-dimensional marginal of a
//! uniform point along any direction has density c_n (1 - t^2)^((n-1)/2)
//! on [-1, 1], with c_n = Gamma(n/2 + 1) / (sqrt(pi) Gamma((n+1)/2)).
//! The upper tail F(r) = c_n int_r^1 (1 - t^2)^((n-1)/2) dt factors as
//! F(r) = (1 - r^2)^((n+1)/2) h(r),
//! where h is smooth, bounded, and pinched between 1/sqrt(2 pi (n+2))
//! and 1/(r sqrt(2 pi n)). All tail evaluations near r = 1 go through
//! this factorization so the log-tail stays accurate where F underflows.

use crate::error::{Error, Result};
use crate::quad::integrate;

#[cfg(test)]
use crate::quad::integrate_auto;

/// Largest argument for which the harmonic number is evaluated by exact
/// summation.
pub const HARMONIC_MAX: u64 = 1_000_000;

/// H_m = sum_{k=1}^m 1/k by exact summation; H_0 = 0.
pub fn harmonic(m: u64) -> Result<f64> {
    if m > HARMONIC_MAX {
        return Err(Error::domain(format!(
            "harmonic({m}) exceeds the exact-summation cap {HARMONIC_MAX}"
        )));
    }
    // Summing small terms first keeps every partial sum exact to 1 ulp.
    Ok((1..=m).rev().map(|k| 1.0 / k as f64).sum())
}

fn sum_reciprocal_squares(m: u64) -> f64 {
    (1..=m).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum()
}

/// The two beta-function log moments:
/// I1(n) = int_0^1 r^(n-1) ln(1 - r) dr = -H_n / n and
/// I2(n) = int_0^1 r^(n-1) ln^2(1 - r) dr = (H_n^2 + sum_{k<=n} 1/k^2) / n,
/// obtained by differentiating B(n, y) at y = 1. Both follow from
/// dB/dy = B (psi(y) - psi(x+y)) and
/// d2B/dy2 = B [(psi(y) - psi(x+y))^2 + (psi'(y) - psi'(x+y))].
/// Spot checks: I2(1) = 2 and I2(2) = 7/4, matching direct quadrature.
pub fn log_integral_moments(n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("log_integral_moments requires n >= 1"));
    }
    let h = harmonic(n)?;
    let nf = n as f64;
    let i1 = -h / nf;
    let i2 = (h * h + sum_reciprocal_squares(n)) / nf;
    Ok((i1, i2))
}

/// ln Gamma for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Upper tail of the standard normal, P(Z >= x).
pub fn gaussian_upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// ln P(Z >= x), switching to the asymptotic expansion where erfc
/// underflows (x beyond ~37).
pub fn log_gaussian_upper_tail(x: f64) -> f64 {
    if x < 35.0 {
        gaussian_upper_tail(x).ln()
    } else {
        let x2 = x * x;
        // Tail = phi(x)/x (1 - 1/x^2 + 3/x^4 - ...).
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2);
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
    }
}

/// Radial tail profile of the uniform unit ball in a fixed dimension.
#[derive(Debug, Clone)]
pub struct BallTail {
    n: u64,
    c_n: f64,
    /// Cached values and derivatives of h on a uniform grid over [0, 1].
    h_grid: Vec<(f64, f64)>,
}

const H_GRID_NODES: usize = 4097;

impl BallTail {
    pub fn new(n: u64) -> Result<BallTail> {
        if n == 0 {
            return Err(Error::domain("BallTail requires dimension n >= 1"));
        }
        let nf = n as f64;
        let c_n = (ln_gamma(nf / 2.0 + 1.0) - ln_gamma((nf + 1.0) / 2.0)).exp()
            / std::f64::consts::PI.sqrt();
        let mut h_grid = Vec::with_capacity(H_GRID_NODES);
        for i in 0..H_GRID_NODES {
            let r = i as f64 / (H_GRID_NODES - 1) as f64;
            h_grid.push((h_exact(n, c_n, r), dh_exact(n, c_n, r)));
        }
        Ok(BallTail { n, c_n, h_grid })
    }

    pub fn dim(&self) -> u64 {
        self.n
    }

    /// Normalizing constant of the one-dimensional marginal.
    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    /// The bounded factor h(r) = F(r) / (1 - r^2)^((n+1)/2), from the
    /// cubic Hermite cache.
    pub fn h(&self, r: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&r));
        let m = (H_GRID_NODES - 1) as f64;
        let pos = (r.clamp(0.0, 1.0) * m).min(m - 1e-9);
        let cell = pos.floor() as usize;
        let t = pos - cell as f64;
        let dx = 1.0 / m;
        let (y0, d0) = self.h_grid[cell];
        let (y1, d1) = self.h_grid[cell + 1];
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * dx * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * dx * d1
    }

    /// F(r) for r in [-1, 1]: the marginal upper tail. Clamps to {1, 0}
    /// outside that interval.
    pub fn tail(&self, r: f64) -> f64 {
        if r <= -1.0 {
            return 1.0;
        }
        if r >= 1.0 {
            return 0.0;
        }
        if r < 0.0 {
            return 1.0 - self.tail(-r);
        }
        self.log_tail(r).exp()
    }

    /// ln F(r) for r in [0, 1); stable arbitrarily close to r = 1.
    pub fn log_tail(&self, r: f64) -> f64 {
        debug_assert!((0.0..1.0 + 1e-15).contains(&r));
        if r >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let half_exp = (self.n as f64 + 1.0) / 2.0;
        half_exp * ((-r).ln_1p() + r.ln_1p()) + self.h(r).ln()
    }
}

/// h(r) by quadrature of the smooth representation
/// h(r) = c_n int_0^1 (1 - v^2)^((n-1)/2) v / sqrt(r^2 + v^2 (1 - r^2)) dv,
/// which has no endpoint singularity for any r in [0, 1].
fn h_exact(n: u64, c_n: f64, r: f64) -> f64 {
    let a = (n as f64 - 1.0) / 2.0;
    let r2 = r * r;
    let q = integrate(
        |v: f64| {
            let base = (1.0 - v * v).max(0.0);
            let w = if a == 0.0 { 1.0 } else { base.powf(a) };
            w * v / (r2 + v * v * (1.0 - r2)).sqrt()
        },
        0.0,
        1.0,
        1e-13,
        0.0,
        20_000,
    );
    c_n * q.value
}

/// dh/dr = -c_n r int_0^1 (1 - v^2)^((n+1)/2) (r^2 + v^2 (1 - r^2))^(-3/2) dv
/// after the same v-substitution; finite on all of [0, 1].
fn dh_exact(n: u64, c_n: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let a = (n as f64 - 1.0) / 2.0;
    let r2 = r * r;
    let q = integrate(
        |v: f64| {
            let base = (1.0 - v * v).max(0.0);
            let w = if a == 0.0 { 1.0 } else { base.powf(a) };
            let x = r2 + v * v * (1.0 - r2);
            w * v * (1.0 - v * v) / (x * x.sqrt())
        },
        0.0,
        1.0,
        1e-13,
        0.0,
        20_000,
    );
    -c_n * r * q.value
}

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
/// by the power series for x < a + 1 and the Lentz continued fraction for
/// the complement otherwise.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::domain(format!(
            "regularized_lower_gamma needs a > 0 and x >= 0, got a = {a}, x = {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a, x) = e^{-x} x^a / Gamma(a) * sum_k x^k / (a (a+1) ... (a+k))
        let mut term = 1.0 / a;
        let mut sum = term;
        for k in 1..500 {
            term *= x / (a + k as f64);
            sum += term;
            if term < sum * 1e-16 {
                return Ok((log_prefix + sum.ln()).exp().min(1.0));
            }
        }
        Err(Error::precision(
            "incomplete gamma series stalled",
            (log_prefix + sum.ln()).exp(),
        ))
    } else {
        // Q(a, x) = e^{-x} x^a / Gamma(a) * 1/(x+1-a- 1(1-a)/(x+3-a- ...))
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                return Ok(1.0 - (log_prefix + h.ln()).exp());
            }
        }
        Err(Error::precision(
            "incomplete gamma continued fraction stalled",
            1.0 - (log_prefix + h.ln()).exp(),
        ))
    }
}

/// P(chi^2_n <= x) for n degrees of freedom.
pub fn chi_square_cdf(n: u64, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("chi_square_cdf requires n >= 1"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    regularized_lower_gamma(n as f64 / 2.0, x / 2.0)
}

/// mu(B_t) for the standard Gaussian in dimension n: the rate function is
/// |x|^2 / 2, so the sublevel set of height t is the ball of squared radius
/// 2t and its measure is P(chi^2_n <= 2t).
pub fn gaussian_sublevel_measure(n: u64, t: f64) -> Result<f64> {
    chi_square_cdf(n, 2.0 * t)
}

/// E omega for the uniform unit ball: -n int_0^1 r^(n-1) ln F(r) dr,
/// where omega(x) = -ln F(|x|) is the log-reciprocal depth at radius |x|.
pub fn ball_mean_omega(n: u64) -> Result<f64> {
    let tail = BallTail::new(n)?;
    let nf = n as f64;
    let q = integrate(
        |r: f64| r.powf(nf - 1.0) * tail.log_tail(r.min(1.0 - 1e-15)),
        0.0,
        1.0,
        1e-11,
        0.0,
        40_000,
    );
    if !q.converged {
        return Err(Error::precision("ball_mean_omega quadrature", -nf * q.value));
    }
    Ok(-nf * q.value)
}

/// E omega^2 for the uniform unit ball: n int_0^1 r^(n-1) ln^2 F(r) dr.
pub fn ball_second_omega(n: u64) -> Result<f64> {
    let tail = BallTail::new(n)?;
    let nf = n as f64;
    let q = integrate(
        |r: f64| {
            let l = tail.log_tail(r.min(1.0 - 1e-15));
            r.powf(nf - 1.0) * l * l
        },
        0.0,
        1.0,
        1e-11,
        0.0,
        40_000,
    );
    if !q.converged {
        return Err(Error::precision("ball_second_omega quadrature", nf * q.value));
    }
    Ok(nf * q.value)
}

/// Leading term (n+1)/2 * H_{n/2} of E omega; exact only for even n.
pub fn ball_mean_leading(n: u64) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::domain(
            "ball_mean_leading uses the integer harmonic number H_{n/2}; n must be even",
        ));
    }
    Ok((n as f64 + 1.0) / 2.0 * harmonic(n / 2)?)
}

/// Leading term (n+1)^2/4 * H_{n/2}^2 of E omega^2; exact only for even n.
pub fn ball_second_leading(n: u64) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::domain(
            "ball_second_leading uses the integer harmonic number H_{n/2}; n must be even",
        ));
    }
    let h = harmonic(n / 2)?;
    let np1 = n as f64 + 1.0;
    Ok(np1 * np1 / 4.0 * h * h)
}
