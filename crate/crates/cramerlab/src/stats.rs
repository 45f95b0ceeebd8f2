//! Summary statistics and confidence-interval helpers shared by the
//! Monte Carlo estimators. All intervals are normal-approximation
//! intervals at the 95% level unless stated otherwise.

use crate::scalar::Scalar;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Mean of a slice; zero for an empty slice.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let sum = values.iter().fold(S::zero(), |acc, v| acc + *v);
    sum / S::from_usize(values.len()).unwrap()
}

/// Two-pass sample variance with the n-1 denominator.
pub fn sample_variance<S: Scalar>(values: &[S]) -> S {
    if values.len() < 2 {
        return S::zero();
    }
    let m = mean(values);
    let ss = values.iter().fold(S::zero(), |acc, v| {
        let d = *v - m;
        acc + d * d
    });
    ss / S::from_usize(values.len() - 1).unwrap()
}

/// Mean, variance, and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let m = mean(values);
        let v = sample_variance(values);
        let se = if values.is_empty() {
            f64::INFINITY
        } else {
            (v / values.len() as f64).sqrt()
        };
        Summary {
            n: values.len(),
            mean: m,
            variance: v,
            stderr: se,
        }
    }

    /// Half width of the 95% interval around the mean.
    pub fn ci_half_width(&self) -> f64 {
        Z95 * self.stderr
    }
}

/// log(sum(exp(x_i))) with max shifting; -inf for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    m + s.ln()
}

/// Merges partial log-sum-exp states (max, sum of shifted exponentials)
/// in the order given, so the result does not depend on how work was
/// chunked. Returns the merged (max, shifted sum).
pub fn merge_lse(parts: &[(f64, f64)]) -> (f64, f64) {
    let gmax = parts
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !gmax.is_finite() {
        return (gmax, 0.0);
    }
    let mut total = 0.0;
    for &(m, s) in parts {
        if m.is_finite() {
            total += s * (m - gmax).exp();
        }
    }
    (gmax, total)
}

/// Proportion estimate with a 95% interval that stays informative at the
/// boundary: at zero successes the upper limit is the rule-of-three bound.
#[derive(Debug, Clone, Copy)]
pub struct Proportion {
    pub estimate: f64,
    pub ci_half_width: f64,
}

pub fn proportion(successes: u64, total: u64) -> Proportion {
    assert!(total > 0, "proportion of an empty sample");
    let p = successes as f64 / total as f64;
    let wald = Z95 * (p * (1.0 - p) / total as f64).sqrt();
    let floor = 3.0 / total as f64;
    let hw = if successes == 0 || successes == total {
        floor
    } else {
        wald.max(1.0 / total as f64)
    };
    Proportion {
        estimate: p,
        ci_half_width: hw,
    }
}

/// Delta-method variance of g(m) for an estimator vector m with covariance
/// `cov` (row-major d x d) and gradient `grad` of g at m.
pub fn delta_method_variance(grad: &[f64], cov: &[f64]) -> f64 {
    let d = grad.len();
    debug_assert_eq!(cov.len(), d * d);
    let mut v = 0.0;
    for i in 0..d {
        for j in 0..d {
            v += grad[i] * cov[i * d + j] * grad[j];
        }
    }
    v.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_hand_values() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.stderr - (5.0 / 12.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_handles_large_shifts() {
        let v = [1000.0, 1000.0f64.ln() + 1000.0];
        let expect = 1000.0 + (1.0 + 1000.0f64).ln();
        assert!((log_sum_exp(&v) - expect).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn merge_is_chunk_invariant() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 30.0).collect();
        let whole = log_sum_exp(&xs);
        let parts: Vec<(f64, f64)> = xs
            .chunks(7)
            .map(|c| {
                let m = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m, c.iter().map(|v| (v - m).exp()).sum())
            })
            .collect();
        let (m, s) = merge_lse(&parts);
        assert!((m + s.ln() - whole).abs() < 1e-12);
    }

    #[test]
    fn proportion_zero_uses_rule_of_three() {
        let p = proportion(0, 1000);
        assert_eq!(p.estimate, 0.0);
        assert!((p.ci_half_width - 0.003).abs() < 1e-15);
    }

    #[test]
    fn generic_variance_f32() {
        let v = sample_variance(&[1.0f32, 2.0, 3.0]);
        assert!((v - 1.0).abs() < 1e-6);
    }
}
