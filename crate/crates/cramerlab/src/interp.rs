//! Piecewise cubic Hermite interpolation on a sorted node grid, with a
//! Fritsch-Carlson slope limiter so monotone data produces a monotone
//! interpolant. Used for CDF/quantile caches and the radial Legendre cache.

use crate::error::{Error, Result};

/// C^1 piecewise cubic with explicit node derivatives.
#[derive(Clone, Debug)]
pub struct CubicHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl CubicHermite {
    /// Nodes must be strictly increasing and finite; one derivative per node.
    pub fn with_derivatives(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() || x.len() != d.len() {
            return Err(Error::domain("interpolation needs matching node arrays, length >= 2"));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::domain("interpolation nodes must be strictly increasing"));
            }
        }
        if x.iter().chain(y.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("interpolation data must be finite"));
        }
        Ok(CubicHermite { x, y, d })
    }

    /// Same, but the slopes are limited in place (Fritsch-Carlson) so that
    /// monotone node values give a monotone interpolant.
    pub fn monotone(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != d.len() || x.len() < 2 {
            return Err(Error::domain("interpolation needs matching node arrays, length >= 2"));
        }
        let m = x.len() - 1;
        let mut delta = vec![0.0f64; m];
        for i in 0..m {
            let h = x[i + 1] - x[i];
            if !(h > 0.0) {
                return Err(Error::domain("interpolation nodes must be strictly increasing"));
            }
            delta[i] = (y[i + 1] - y[i]) / h;
        }
        // Flat intervals force flat slopes; elsewhere clip (alpha, beta) into
        // the disk of radius 3 that guarantees monotonicity.
        for i in 0..m {
            if delta[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            }
        }
        for i in 0..m {
            if delta[i] == 0.0 {
                continue;
            }
            let a = d[i] / delta[i];
            let b = d[i + 1] / delta[i];
            if a < 0.0 {
                d[i] = 0.0;
            }
            if b < 0.0 {
                d[i + 1] = 0.0;
            }
            let a = d[i] / delta[i];
            let b = d[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[i] = t * a * delta[i];
                d[i + 1] = t * b * delta[i];
            }
        }
        Self::with_derivatives(x, y, d)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn interval(&self, t: f64) -> usize {
        // partition_point returns the count of nodes <= t; clamp to a valid
        // left endpoint so out-of-range queries extrapolate from the edge.
        let k = self.x.partition_point(|&v| v <= t);
        k.saturating_sub(1).min(self.x.len() - 2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let dh00 = 6.0 * s2 - 6.0 * s;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = -6.0 * s2 + 6.0 * s;
        let dh11 = 3.0 * s2 - 2.0 * s;
        (dh00 * self.y[i] + dh01 * self.y[i + 1]) / h + dh10 * self.d[i] + dh11 * self.d[i + 1]
    }

    /// Inverse of a nondecreasing interpolant: the t in the node range with
    /// eval(t) = v, by bisection to ~1 ulp of the argument. Values outside
    /// the node range clamp to the corresponding endpoint.
    pub fn inverse_monotone(&self, v: f64) -> f64 {
        let (mut lo, mut hi) = self.domain();
        if v <= self.y[0] {
            return lo;
        }
        if v >= *self.y.last().unwrap() {
            return hi;
        }
        // Bisection is branch-predictable and immune to flat spots where a
        // Newton step would divide by a vanishing derivative.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let x = grid(9, -1.0, 2.0);
        let f = |t: f64| 0.5 * t * t * t - t + 2.0;
        let df = |t: f64| 1.5 * t * t - 1.0;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let d: Vec<f64> = x.iter().map(|&t| df(t)).collect();
        let c = CubicHermite::with_derivatives(x, y, d).unwrap();
        for i in 0..=100 {
            let t = -1.0 + 3.0 * i as f64 / 100.0;
            assert!((c.eval(t) - f(t)).abs() < 1e-12);
            assert!((c.eval_derivative(t) - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn monotone_limiter_prevents_overshoot() {
        // Steep data with deliberately exaggerated slopes.
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![0.0, 0.1, 0.9, 1.0];
        let d = vec![5.0, 5.0, 5.0, 5.0];
        let c = CubicHermite::monotone(x, y, d).unwrap();
        let mut prev = c.eval(0.0);
        for i in 1..=300 {
            let t = 3.0 * i as f64 / 300.0;
            let v = c.eval(t);
            assert!(v >= prev - 1e-12, "non-monotone at t={t}");
            prev = v;
        }
        assert!(c.eval(3.0) <= 1.0 + 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let x = grid(64, 0.0, 1.0);
        let y: Vec<f64> = x.iter().map(|&t| t * t * (3.0 - 2.0 * t)).collect();
        let d: Vec<f64> = x.iter().map(|&t| 6.0 * t * (1.0 - t)).collect();
        let c = CubicHermite::monotone(x, y, d).unwrap();
        for i in 1..100 {
            let v = i as f64 / 100.0;
            let t = c.inverse_monotone(v);
            assert!((c.eval(t) - v).abs() < 1e-12, "roundtrip failed at v={v}");
        }
        assert_eq!(c.inverse_monotone(-0.5), 0.0);
        assert_eq!(c.inverse_monotone(1.5), 1.0);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(CubicHermite::with_derivatives(vec![0.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(CubicHermite::with_derivatives(vec![0.0], vec![0.0], vec![0.0]).is_err());
        assert!(CubicHermite::with_derivatives(vec![0.0, f64::NAN], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
