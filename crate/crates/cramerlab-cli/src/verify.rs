//! Named verification suites: each replays an invariant family against
//! an independent oracle and reports one named check per instance.

use serde_json::json;

use cramerlab::analysis::{
    beta_parameter, cramer_moments, rho_bounds, MomentOpts, Regime, DEFAULT_C2,
};
use cramerlab::closedform::log_integral_moments;
use cramerlab::quad::integrate;
use cramerlab::{MeasureModel, RngStream};

pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub const SUITES: [&str; 3] = ["log-moments", "moment-identities", "rho-arithmetic"];

pub fn run_suite(suite: &str, seed: u64) -> Result<Vec<Check>, String> {
    match suite {
        "log-moments" => Ok(log_moments()),
        "moment-identities" => moment_identities(seed).map_err(|e| e.to_string()),
        "rho-arithmetic" => Ok(rho_arithmetic()),
        other => Err(format!(
            "unknown suite '{other}' (expected one of {})",
            SUITES.join(", ")
        )),
    }
}

fn rel_check(name: String, got: f64, want: f64, rel: f64) -> Check {
    let denom = want.abs().max(1e-300);
    let err = (got - want).abs() / denom;
    Check {
        passed: err <= rel,
        detail: format!("value={got:.15e} oracle={want:.15e} rel_err={err:.3e}"),
        name,
    }
}

/// Closed-form log-weighted radial integrals against adaptive quadrature,
/// both integrals for n in 2..=50: 98 checks.
fn log_moments() -> Vec<Check> {
    let mut checks = Vec::with_capacity(98);
    for n in 2u64..=50 {
        let (i1, i2) = log_integral_moments(n).expect("n >= 1");
        let nf = n as f64;
        // clamp keeps deep refinement off the log singularity at r = 1
        let q1 = integrate(
            |r: f64| r.powf(nf - 1.0) * (-r.min(1.0 - 1e-16)).ln_1p(),
            0.0,
            1.0,
            1e-13,
            0.0,
            40_000,
        );
        let q2 = integrate(
            |r: f64| {
                let l = (-r.min(1.0 - 1e-16)).ln_1p();
                r.powf(nf - 1.0) * l * l
            },
            0.0,
            1.0,
            1e-13,
            0.0,
            40_000,
        );
        checks.push(rel_check(format!("log_moment_first_n{n}"), i1, q1.value, 1e-10));
        checks.push(rel_check(format!("log_moment_second_n{n}"), i2, q2.value, 1e-10));
    }
    checks
}

/// Gaussian closed moments, dispersion ratio, and product additivity.
fn moment_identities(seed: u64) -> cramerlab::Result<Vec<Check>> {
    let mut checks = Vec::new();
    for n in [2usize, 4, 8, 12, 16, 20] {
        let model = MeasureModel::standard_gaussian(n)?;
        let opts = MomentOpts::new(RngStream::new(seed));
        let r = cramer_moments(&model, &opts)?;
        let nf = n as f64;
        checks.push(rel_check(
            format!("gaussian_mean_n{n}"),
            r.mean,
            0.5 * nf,
            1e-12,
        ));
        checks.push(rel_check(
            format!("gaussian_variance_n{n}"),
            r.variance,
            0.5 * nf,
            1e-12,
        ));
        let b = beta_parameter(&model, &opts)?;
        checks.push(rel_check(
            format!("gaussian_beta_n{n}"),
            b.value,
            2.0 / nf,
            1e-12,
        ));
    }
    let comp = cramerlab::Custom1D::laplace()?;
    let one = cramer_moments(
        &MeasureModel::custom_1d(comp.clone())?,
        &MomentOpts::new(RngStream::new(seed)),
    )?;
    for k in [2usize, 4] {
        let many = cramer_moments(
            &MeasureModel::product(vec![comp.clone(); k])?,
            &MomentOpts::new(RngStream::new(seed)),
        )?;
        checks.push(rel_check(
            format!("product_mean_additivity_x{k}"),
            many.mean,
            k as f64 * one.mean,
            1e-9,
        ));
        let ident = (many.variance - (many.second_moment - many.mean * many.mean)).abs();
        checks.push(Check {
            name: format!("variance_identity_x{k}"),
            passed: ident <= 1e-9 * many.variance.abs().max(1e-12),
            detail: format!("|var - (m2 - m1^2)| = {ident:.3e}"),
        });
    }
    Ok(checks)
}

/// Pure arithmetic of the threshold-bracket formulas.
fn rho_arithmetic() -> Vec<Check> {
    let mut checks = Vec::new();
    let r = rho_bounds(1e-12, 0.1, 0.76, 10, 0.3, DEFAULT_C2).expect("valid");
    checks.push(Check {
        name: "bracket_pinches_at_zero_dispersion".into(),
        passed: (r.rho1_bound - 0.76).abs() < 1e-5 && (r.rho2_bound - 0.76).abs() < 1e-5,
        detail: format!("rho1={} rho2={}", r.rho1_bound, r.rho2_bound),
    });
    let r = rho_bounds(0.1 / 32.0, 0.1, 1.0, 10, 0.3, DEFAULT_C2).expect("valid");
    checks.push(Check {
        name: "half_width_factors_at_beta_delta_over_32".into(),
        passed: (r.rho1_bound - 0.5).abs() < 1e-12 && (r.rho2_bound - 1.5).abs() < 1e-12,
        detail: format!("rho1={} rho2={}", r.rho1_bound, r.rho2_bound),
    });
    let r = rho_bounds(0.05, 0.2, 0.5, 10, 0.3, DEFAULT_C2).expect("valid");
    checks.push(Check {
        name: "large_dispersion_regime_forced".into(),
        passed: r.regime == Regime::LargeBeta && r.rho1_bound <= r.mean_over_n,
        detail: format!("regime={:?} rho1={}", r.regime, r.rho1_bound),
    });
    checks.push(Check {
        name: "invalid_delta_rejected".into(),
        passed: rho_bounds(0.1, 1.5, 0.5, 4, 0.3, DEFAULT_C2).is_err(),
        detail: "delta = 1.5".into(),
    });
    checks.push(Check {
        name: "nonpositive_beta_rejected".into(),
        passed: rho_bounds(0.0, 0.5, 0.5, 4, 0.3, DEFAULT_C2).is_err(),
        detail: "beta = 0".into(),
    });
    checks
}

pub fn checks_json(checks: &[Check]) -> serde_json::Value {
    json!(checks
        .iter()
        .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
        .collect::<Vec<_>>())
}
