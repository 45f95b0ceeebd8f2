//! Moments of the rate function Lambda* and the log-depth omega, the
//! dispersion parameters beta = Var(Lambda*)/(E Lambda*)^2 and
//! tau = Var(omega)/(E omega)^2, the isotropic constant, and the
//! threshold-location bounds they imply.
//!
//! Every estimator has a deterministic route where one exists (closed
//! Gaussian formulas, per-coordinate quadrature for separable models) and
//! a Monte Carlo route with delta-method confidence intervals; balls
//! default to Monte Carlo over the radial profile cache. Draws the tilt
//! solver cannot finish are excluded and counted, and a report whose
//! censored share exceeds 0.1% carries a right-censored flag.

use crate::depth::{depth, DepthOpts};
use crate::error::{Error, Result};
use crate::measures::{Custom1D, Kind, MeasureModel, Preset};
use crate::parallel::{par_chunked, par_indexed};
use crate::quad::integrate;
use crate::rng::RngStream;
use crate::stats::{proportion, Z95};
use crate::transform::{cholesky, cramer, CramerOpts, RadialCramer, SolveStatus};

/// Censored-draw share beyond which a report is flagged right-censored.
const CENSOR_FLAG_SHARE: f64 = 1e-3;
/// Relative trim that keeps quadrature nodes away from support endpoints,
/// where the tilt solver would leave its certified range.
const EDGE_TRIM: f64 = 1e-7;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-draw rate-function evaluator; the ball profile is cached once.
pub(crate) enum Rate {
    Gaussian,
    Ball(RadialCramer),
    Solve,
}

impl Rate {
    pub(crate) fn new(model: &MeasureModel) -> Result<Rate> {
        Ok(match model.kind() {
            Kind::StandardGaussian => Rate::Gaussian,
            Kind::UniformBallVol1 | Kind::UniformBallUnit => Rate::Ball(RadialCramer::new(model)?),
            _ => Rate::Solve,
        })
    }

    /// None when the solver cannot certify a finite value for the draw.
    pub(crate) fn eval(&self, model: &MeasureModel, x: &[f64]) -> Option<f64> {
        match self {
            Rate::Gaussian => Some(0.5 * dot(x, x)),
            Rate::Ball(rc) => {
                let v = rc.value(dot(x, x).sqrt());
                v.is_finite().then_some(v)
            }
            Rate::Solve => match cramer(model, x, &CramerOpts::default()) {
                Ok(r) if r.status == SolveStatus::Converged => Some(r.value),
                _ => None,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MomentCi {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub exp_half: f64,
}

/// First and second moments of the rate function under the measure, with
/// the variance tied to them by construction.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// E exp(Lambda*/2), filled only when requested.
    pub exp_half_moment: Option<f64>,
    pub sample_count: usize,
    /// Draws excluded because the solver certified no finite value.
    pub censored: usize,
    pub right_censored: bool,
    pub ci: MomentCi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentMethod {
    /// Closed Gaussian formulas, separable quadrature, Monte Carlo balls.
    Auto,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug)]
pub struct MomentOpts {
    pub samples: usize,
    pub stream: RngStream,
    pub method: MomentMethod,
    pub exp_half: bool,
}

impl MomentOpts {
    pub fn new(stream: RngStream) -> MomentOpts {
        MomentOpts {
            samples: 1 << 17,
            stream,
            method: MomentMethod::Auto,
            exp_half: false,
        }
    }
}

/// Report plus the spread statistics the ratio estimators need.
struct MomentDetail {
    report: MomentReport,
    se_mean: f64,
    se_var: f64,
    cov_mean_var: f64,
    statistical: bool,
}

#[derive(Clone, Copy, Default)]
struct Sums {
    kept: u64,
    censored: u64,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    eh1: f64,
    eh2: f64,
}

fn merge(mut a: Sums, b: Sums) -> Sums {
    a.kept += b.kept;
    a.censored += b.censored;
    a.s1 += b.s1;
    a.s2 += b.s2;
    a.s3 += b.s3;
    a.s4 += b.s4;
    a.eh1 += b.eh1;
    a.eh2 += b.eh2;
    a
}

fn mc_moments(model: &MeasureModel, opts: &MomentOpts) -> Result<MomentDetail> {
    let rate = Rate::new(model)?;
    let n = model.dimension();
    let sums = par_chunked(
        opts.samples as u64,
        4096,
        |c, _start, len| {
            let pts = model.sample_flat(len as usize, opts.stream.substream(c));
            let mut s = Sums::default();
            for x in pts.chunks(n) {
                match rate.eval(model, x) {
                    Some(v) => {
                        s.kept += 1;
                        s.s1 += v;
                        s.s2 += v * v;
                        s.s3 += v * v * v;
                        s.s4 += v * v * v * v;
                        if opts.exp_half {
                            let e = (0.5 * v).exp();
                            s.eh1 += e;
                            s.eh2 += e * e;
                        }
                    }
                    None => s.censored += 1,
                }
            }
            s
        },
        Sums::default(),
        merge,
    );
    if sums.kept < 2 {
        return Err(Error::EstimatorDegenerate(format!(
            "{} of {} draws were censored",
            sums.censored, opts.samples
        )));
    }
    let k = sums.kept as f64;
    let m = sums.s1 / k;
    let raw2 = sums.s2 / k;
    let raw3 = sums.s3 / k;
    let raw4 = sums.s4 / k;
    let c2 = (raw2 - m * m).max(0.0);
    let c3 = raw3 - 3.0 * m * raw2 + 2.0 * m * m * m;
    let c4 = (raw4 - 4.0 * m * raw3 + 6.0 * m * m * raw2 - 3.0 * m * m * m * m).max(0.0);
    let se_mean = (c2 / k).sqrt();
    let se_second = ((raw4 - raw2 * raw2).max(0.0) / k).sqrt();
    let se_var = ((c4 - c2 * c2).max(0.0) / k).sqrt();
    let cov_mean_var = c3 / k;
    let (exp_half_moment, se_eh) = if opts.exp_half {
        let eh = sums.eh1 / k;
        (Some(eh), ((sums.eh2 / k - eh * eh).max(0.0) / k).sqrt())
    } else {
        (None, 0.0)
    };
    let report = MomentReport {
        mean: m,
        second_moment: raw2,
        variance: raw2 - m * m,
        exp_half_moment,
        sample_count: sums.kept as usize,
        censored: sums.censored as usize,
        right_censored: sums.censored as f64 > CENSOR_FLAG_SHARE * opts.samples as f64,
        ci: MomentCi {
            mean: Z95 * se_mean,
            second_moment: Z95 * se_second,
            variance: Z95 * se_var,
            exp_half: Z95 * se_eh,
        },
    };
    Ok(MomentDetail {
        report,
        se_mean,
        se_var,
        cov_mean_var,
        statistical: true,
    })
}

/// E chi^2_n = n and E (chi^2_n)^2 = n(n+2) give every Gaussian moment of
/// |X|^2/2 in closed form; E exp(|X|^2/4) = 2^{n/2} coordinatewise.
fn gaussian_moments(n: usize, exp_half: bool) -> MomentDetail {
    let nf = n as f64;
    let report = MomentReport {
        mean: 0.5 * nf,
        second_moment: 0.25 * nf * (nf + 2.0),
        variance: 0.25 * nf * (nf + 2.0) - 0.25 * nf * nf,
        exp_half_moment: exp_half.then(|| 2.0f64.powf(0.5 * nf)),
        sample_count: 0,
        censored: 0,
        right_censored: false,
        ci: MomentCi::default(),
    };
    MomentDetail {
        report,
        se_mean: 0.0,
        se_var: 0.0,
        cov_mean_var: 0.0,
        statistical: false,
    }
}

/// First two moments of the one-dimensional rate under its own component
/// density, by adaptive quadrature trimmed away from support endpoints
/// where the rate diverges logarithmically. Returns (m1, m2, e1, e2) with
/// e-values bounding quadrature plus trim error.
fn component_rate_moments(comp: &Custom1D) -> Result<(f64, f64, f64, f64)> {
    let model = MeasureModel::custom_1d(comp.clone())?;
    let copts = CramerOpts::default();
    let (wa, wb) = comp.window();
    let d = EDGE_TRIM * (wb - wa);
    let (a, b) = (wa + d, wb - d);
    let mut failed = None;
    let mut rate = |x: f64| -> f64 {
        match cramer(&model, &[x], &copts) {
            Ok(r) if r.status == SolveStatus::Converged => r.value,
            Ok(_) => {
                failed = Some(x);
                0.0
            }
            Err(_) => {
                failed = Some(x);
                0.0
            }
        }
    };
    let q1 = integrate(
        |x| rate(x) * comp.log_density(x).exp(),
        a,
        b,
        1e-10,
        1e-14,
        8192,
    );
    let q2 = integrate(
        |x| {
            let v = rate(x);
            v * v * comp.log_density(x).exp()
        },
        a,
        b,
        1e-10,
        1e-14,
        8192,
    );
    let (ra, rb) = (rate(a), rate(b));
    if let Some(x) = failed {
        return Err(Error::precision(
            format!("rate solve failed inside the trimmed window at x = {x:.6e}"),
            q1.value,
        ));
    }
    let (fa, fb) = (comp.log_density(a).exp(), comp.log_density(b).exp());
    let trim1 = d * (fa * ra + fb * rb);
    let trim2 = d * (fa * ra * ra + fb * rb * rb);
    Ok((
        q1.value,
        q2.value,
        q1.abs_error + trim1,
        q2.abs_error + trim2,
    ))
}

/// The rate of a separable model is the sum of coordinate rates, so its
/// moments assemble from one-dimensional quadrature.
fn separable_moments(model: &MeasureModel, exp_half: bool) -> Result<MomentDetail> {
    let comps: Vec<Custom1D> = match model.kind() {
        Kind::UniformCube { side } => vec![Custom1D::uniform(0.5 * side)?],
        Kind::Product(cs) => cs.to_vec(),
        Kind::Custom1D(c) => vec![c.clone()],
        _ => unreachable!("separable kinds only"),
    };
    let repeat = if matches!(model.kind(), Kind::UniformCube { .. }) {
        model.dimension()
    } else {
        1
    };
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut e_mean = 0.0;
    let mut e_var = 0.0;
    let mut eh_mid = 1.0;
    let mut eh_rel = 0.0;
    for comp in &comps {
        let (m1, m2, e1, e2) = component_rate_moments(comp)?;
        let r = repeat as f64;
        mean += r * m1;
        var += r * (m2 - m1 * m1);
        e_mean += r * e1;
        e_var += r * (e2 + 2.0 * m1 * e1);
        if exp_half {
            // independence: the exponential of a sum factorizes
            let h = exp_half_moment_1d(comp)?;
            let mid = h.value + 0.5 * h.tail_allowance;
            eh_mid *= mid.powi(repeat as i32);
            eh_rel += r * 0.5 * h.tail_allowance / mid;
        }
    }
    let second = var + mean * mean;
    let e_second = e_var + 2.0 * mean * e_mean;
    let report = MomentReport {
        mean,
        second_moment: second,
        variance: second - mean * mean,
        exp_half_moment: exp_half.then_some(eh_mid),
        sample_count: 0,
        censored: 0,
        right_censored: false,
        ci: MomentCi {
            mean: e_mean,
            second_moment: e_second,
            variance: e_var,
            exp_half: eh_mid * eh_rel,
        },
    };
    Ok(MomentDetail {
        report,
        se_mean: e_mean,
        se_var: e_var,
        cov_mean_var: 0.0,
        statistical: false,
    })
}

fn moments_detail(model: &MeasureModel, opts: &MomentOpts) -> Result<MomentDetail> {
    match opts.method {
        MomentMethod::MonteCarlo => mc_moments(model, opts),
        MomentMethod::Auto => match model.kind() {
            Kind::StandardGaussian => Ok(gaussian_moments(model.dimension(), opts.exp_half)),
            Kind::UniformCube { .. } | Kind::Product(_) | Kind::Custom1D(_) => {
                separable_moments(model, opts.exp_half)
            }
            Kind::UniformBallVol1 | Kind::UniformBallUnit => mc_moments(model, opts),
        },
    }
}

/// Moments of the rate function under the measure itself.
pub fn cramer_moments(model: &MeasureModel, opts: &MomentOpts) -> Result<MomentReport> {
    Ok(moments_detail(model, opts)?.report)
}

#[derive(Clone, Debug)]
pub struct BetaEstimate {
    pub value: f64,
    pub ci: f64,
    pub report: MomentReport,
}

/// beta = Var(Lambda*) / (E Lambda*)^2 with a delta-method interval.
pub fn beta_parameter(model: &MeasureModel, opts: &MomentOpts) -> Result<BetaEstimate> {
    let d = moments_detail(model, opts)?;
    let m = d.report.mean;
    let v = d.report.variance;
    if m - d.report.ci.mean <= 0.0 {
        return Err(Error::EstimatorDegenerate(
            "mean rate interval touches zero; the ratio is undefined".into(),
        ));
    }
    let value = v / (m * m);
    let g_m = -2.0 * v / (m * m * m);
    let g_v = 1.0 / (m * m);
    let ci = if d.statistical {
        let var = (g_m * d.se_mean).powi(2)
            + (g_v * d.se_var).powi(2)
            + 2.0 * g_m * g_v * d.cov_mean_var;
        Z95 * var.max(0.0).sqrt()
    } else {
        g_m.abs() * d.se_mean + g_v * d.se_var
    };
    Ok(BetaEstimate {
        value,
        ci,
        report: d.report,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct TauOpts {
    pub draws: usize,
    pub stream: RngStream,
    /// Direction-search effort per draw; exact kinds ignore these.
    pub search_starts: usize,
    pub search_samples: usize,
    pub search_steps: usize,
}

impl TauOpts {
    pub fn new(stream: RngStream) -> TauOpts {
        TauOpts {
            draws: 512,
            stream,
            search_starts: 8,
            search_samples: 1 << 13,
            search_steps: 12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TauEstimate {
    pub value: f64,
    pub ci: f64,
    pub mean_omega: f64,
    pub var_omega: f64,
    pub draws: usize,
    pub censored: usize,
    /// Set when per-draw depth noise carries over 10% of Var(omega).
    pub low_confidence: bool,
}

/// tau = Var(omega) / (E omega)^2 over draws from a uniform body, with
/// omega evaluated through the depth machinery (exact for balls).
pub fn tau_parameter(model: &MeasureModel, opts: &TauOpts) -> Result<TauEstimate> {
    if !matches!(
        model.kind(),
        Kind::UniformCube { .. } | Kind::UniformBallVol1 | Kind::UniformBallUnit
    ) {
        return Err(Error::domain("tau is defined for uniform bodies only"));
    }
    if opts.draws < 8 {
        return Err(Error::domain("tau needs at least 8 draws"));
    }
    let n = model.dimension();
    let points = model.sample_flat(opts.draws, opts.stream.substream(0));
    let per_draw: Vec<Result<Option<(f64, f64)>>> = par_indexed(opts.draws as u64, |i| {
        let x = &points[i as usize * n..(i as usize + 1) * n];
        let mut dopts = DepthOpts::new(opts.stream.substream(1 + i));
        dopts.starts = opts.search_starts;
        dopts.tail_samples = opts.search_samples;
        dopts.descent_steps = opts.search_steps;
        let d = depth(model, x, &dopts)?;
        if d.phi <= 0.0 {
            return Ok(None);
        }
        // delta-method variance of -ln(phi) from the phi interval
        let noise = (d.ci / d.phi).powi(2);
        Ok(Some((d.log_depth_omega, noise)))
    });
    let mut omegas = Vec::with_capacity(opts.draws);
    let mut noise_sum = 0.0;
    let mut censored = 0usize;
    for r in per_draw {
        match r? {
            Some((w, noise)) => {
                omegas.push(w);
                noise_sum += noise;
            }
            None => censored += 1,
        }
    }
    if omegas.len() < 8 {
        return Err(Error::EstimatorDegenerate(format!(
            "only {} of {} draws produced a finite omega",
            omegas.len(),
            opts.draws
        )));
    }
    let k = omegas.len() as f64;
    let m = omegas.iter().sum::<f64>() / k;
    let (mut c2, mut c3, mut c4) = (0.0, 0.0, 0.0);
    for &w in &omegas {
        let d = w - m;
        c2 += d * d;
        c3 += d * d * d;
        c4 += d * d * d * d;
    }
    c2 /= k;
    c3 /= k;
    c4 /= k;
    let value = c2 / (m * m);
    let g_m = -2.0 * c2 / (m * m * m);
    let g_v = 1.0 / (m * m);
    let var = (g_m * g_m) * (c2 / k)
        + (g_v * g_v) * ((c4 - c2 * c2).max(0.0) / k)
        + 2.0 * g_m * g_v * (c3 / k);
    Ok(TauEstimate {
        value,
        ci: Z95 * var.max(0.0).sqrt(),
        mean_omega: m,
        var_omega: c2,
        draws: omegas.len(),
        censored,
        low_confidence: noise_sum / k > 0.1 * c2,
    })
}

/// L = (sup f)^{1/n} det(Cov)^{1/(2n)} with the covariance estimated from
/// samples and the density supremum taken from the model kind.
pub fn isotropic_constant(model: &MeasureModel, samples: usize, stream: RngStream) -> Result<f64> {
    let n = model.dimension();
    if samples < 16 * n {
        return Err(Error::domain("too few samples for a covariance estimate"));
    }
    #[derive(Clone)]
    struct Acc {
        count: f64,
        mean: Vec<f64>,
        raw: Vec<f64>,
    }
    let acc = par_chunked(
        samples as u64,
        8192,
        |c, _start, len| {
            let pts = model.sample_flat(len as usize, stream.substream(c));
            let mut a = Acc {
                count: len as f64,
                mean: vec![0.0; n],
                raw: vec![0.0; n * n],
            };
            for x in pts.chunks(n) {
                for i in 0..n {
                    a.mean[i] += x[i];
                    for j in 0..=i {
                        a.raw[i * n + j] += x[i] * x[j];
                    }
                }
            }
            a
        },
        Acc {
            count: 0.0,
            mean: vec![0.0; n],
            raw: vec![0.0; n * n],
        },
        |mut t, p| {
            t.count += p.count;
            for (a, b) in t.mean.iter_mut().zip(&p.mean) {
                *a += b;
            }
            for (a, b) in t.raw.iter_mut().zip(&p.raw) {
                *a += b;
            }
            t
        },
    );
    let k = acc.count;
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = (acc.raw[i * n + j] - acc.mean[i] * acc.mean[j] / k) / (k - 1.0);
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    let l = cholesky(&cov).ok_or_else(|| {
        Error::EstimatorDegenerate("empirical covariance is not positive definite".into())
    })?;
    let log_det: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    let nf = n as f64;
    Ok((model.density_sup().ln() / nf + log_det / (2.0 * nf)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SmallBeta,
    LargeBeta,
}

#[derive(Clone, Copy, Debug)]
pub struct Conditions {
    /// n / L^2 >= c2 ln(2/delta) sqrt(delta/beta)
    pub n_over_l2: bool,
    /// beta < 1/8 and 8 beta < delta
    pub small_beta_split: bool,
}

/// Bracket on the threshold location ln(N)/n, scaled by E(Lambda*)/n.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdReport {
    pub beta: f64,
    pub delta: f64,
    pub mean_over_n: f64,
    pub rho1_bound: f64,
    pub rho2_bound: f64,
    pub regime: Regime,
    pub conditions: Conditions,
}

pub const DEFAULT_C2: f64 = 1.0;

/// Threshold bracket from the dispersion parameter: below rho1 the random
/// polytope misses most mass, above rho2 it captures it. The small-beta
/// regime uses the 1 -+ sqrt(8 beta / delta) factors; large beta falls
/// back to the quartic-root factor on the lower side.
pub fn rho_bounds(
    beta: f64,
    delta: f64,
    mean_over_n: f64,
    n: usize,
    l_mu: f64,
    c2: f64,
) -> Result<ThresholdReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta = {beta} must be positive")));
    }
    let small = beta < 0.125 && 8.0 * beta < delta;
    let spread = (8.0 * beta / delta).sqrt();
    let rho1 = if small {
        (1.0 - spread) * mean_over_n
    } else {
        (1.0 - (2.0 * beta / (beta + delta)).powf(0.25)) * mean_over_n
    };
    let rho2 = (1.0 + spread) * mean_over_n;
    let hypothesis =
        n as f64 / (l_mu * l_mu) >= c2 * (2.0 / delta).ln() * (delta / beta).sqrt();
    Ok(ThresholdReport {
        beta,
        delta,
        mean_over_n,
        rho1_bound: rho1,
        rho2_bound: rho2,
        regime: if small { Regime::SmallBeta } else { Regime::LargeBeta },
        conditions: Conditions {
            n_over_l2: hypothesis,
            small_beta_split: small,
        },
    })
}

/// Outcome of the moment-comparison inequality
/// (n+1)^2 (E Lambda*)^2 <= n(n+2) E(Lambda*^2) for uniform bodies.
#[derive(Clone, Copy, Debug)]
pub struct RatioCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// The rearranged consequence Var >= mean^2 / (n(n+2)).
    pub variance_floor: f64,
}

pub fn moment_ratio_check(model: &MeasureModel, opts: &MomentOpts) -> Result<RatioCheck> {
    if !matches!(
        model.kind(),
        Kind::UniformCube { .. } | Kind::UniformBallVol1 | Kind::UniformBallUnit
    ) {
        return Err(Error::domain(
            "the moment comparison is stated for uniform bodies",
        ));
    }
    let r = cramer_moments(model, opts)?;
    let nf = model.dimension() as f64;
    let lhs = (nf + 1.0) * (nf + 1.0) * r.mean * r.mean;
    let rhs = nf * (nf + 2.0) * r.second_moment;
    let ci_lhs = (nf + 1.0) * (nf + 1.0) * 2.0 * r.mean * r.ci.mean;
    let ci_rhs = nf * (nf + 2.0) * r.ci.second_moment;
    Ok(RatioCheck {
        holds: lhs <= rhs + 4.0 * (ci_lhs + ci_rhs),
        lhs,
        rhs,
        margin: rhs - lhs,
        variance_floor: r.mean * r.mean / (nf * (nf + 2.0)),
    })
}

/// E exp(Lambda*/2) for a centered one-dimensional measure, split into
/// the two half-line integrals.
#[derive(Clone, Copy, Debug)]
pub struct ExpHalfMoment {
    pub value: f64,
    pub left: f64,
    pub right: f64,
    /// Upper bound on mass lost to the endpoint trim; the reported value
    /// is a certified lower bound and value + tail_allowance an upper one.
    pub tail_allowance: f64,
}

/// Quantile by bisection on the component cdf.
fn quantile(comp: &Custom1D, u: f64) -> f64 {
    let (mut lo, mut hi) = comp.window();
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if comp.cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The tilt bound exp(Lambda*(x)/2) <= tail(x)^{-1/2} makes
/// s = sqrt(tail) the natural variable: substituting ds = -f/(2s) dx turns
/// each half-integral into int 2 s exp(Lambda*(x(s))/2) ds with a bounded
/// integrand, which adaptive quadrature resolves quickly. Components that
/// need the iterative tilt solver at a compact support endpoint are
/// trimmed where the solver leaves its certified range; the trim is
/// reported and the value is a lower bound.
pub fn exp_half_moment_1d(comp: &Custom1D) -> Result<ExpHalfMoment> {
    let model = MeasureModel::custom_1d(comp.clone())?;
    let copts = CramerOpts::default();
    let rate = |x: f64| -> Result<f64> {
        let r = cramer(&model, &[x], &copts)?;
        if r.status == SolveStatus::Converged {
            Ok(r.value)
        } else {
            Err(Error::precision(
                format!("rate solve left its certified range at x = {x:.6e}"),
                0.0,
            ))
        }
    };
    let closed = matches!(
        comp.preset(),
        Some(Preset::Laplace | Preset::ShiftedExponential)
    );
    let (lo_support, hi_support) = comp.support();
    // compact endpoints without a closed rate would push the tilt solver
    // past its range as s -> 0
    let floor_right = if hi_support.is_finite() && !closed { 4e-4 } else { 0.0 };
    let floor_left = if lo_support.is_finite() && !closed { 4e-4 } else { 0.0 };
    let (wa, wb) = comp.window();
    let f0 = comp.cdf(0.0);
    let mut failed: Option<Error> = None;
    let mut half = |sign: f64, s_hi: f64, floor: f64, edge: f64| -> (f64, f64) {
        // s = sqrt of the outward tail mass from 0 toward the edge
        let s_lo = floor.max(if sign > 0.0 {
            (1.0 - comp.cdf(edge)).max(0.0).sqrt()
        } else {
            comp.cdf(edge).max(0.0).sqrt()
        });
        if s_lo >= s_hi {
            return (0.0, 2.0 * s_hi);
        }
        let q = integrate(
            |s: f64| {
                let u = if sign > 0.0 { 1.0 - s * s } else { s * s };
                let x = quantile(comp, u.clamp(0.0, 1.0));
                match rate(x) {
                    Ok(v) => 2.0 * s * (0.5 * v).exp(),
                    Err(e) => {
                        failed = Some(e);
                        0.0
                    }
                }
            },
            s_lo,
            s_hi,
            1e-10,
            1e-14,
            4096,
        );
        // the trimmed sliver integrand stays below 2 by the tilt bound
        (q.value, 2.0 * s_lo + q.abs_error)
    };
    let (right, allow_r) = half(1.0, (1.0 - f0).max(0.0).sqrt(), floor_right, wb);
    let (left, allow_l) = half(-1.0, f0.max(0.0).sqrt(), floor_left, wa);
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(ExpHalfMoment {
        value: left + right,
        left,
        right,
        tail_allowance: allow_l + allow_r,
    })
}

/// Monte Carlo estimate of E exp(Lambda* / (2n)) for a uniform body, with
/// the finiteness bound it is checked against.
#[derive(Clone, Copy, Debug)]
pub struct KappaExpEstimate {
    pub value: f64,
    pub ci: f64,
    pub bound: f64,
    pub censored: usize,
}

pub fn kappa_exp_moment(
    model: &MeasureModel,
    samples: usize,
    stream: RngStream,
    c: f64,
) -> Result<KappaExpEstimate> {
    if !matches!(
        model.kind(),
        Kind::UniformCube { .. } | Kind::UniformBallVol1 | Kind::UniformBallUnit
    ) {
        return Err(Error::domain(
            "the kappa-exponential moment is stated for uniform bodies",
        ));
    }
    let n = model.dimension();
    let nf = n as f64;
    let rate = Rate::new(model)?;
    let sums = par_chunked(
        samples as u64,
        4096,
        |ch, _start, len| {
            let pts = model.sample_flat(len as usize, stream.substream(ch));
            let mut s = Sums::default();
            for x in pts.chunks(n) {
                match rate.eval(model, x) {
                    Some(v) => {
                        s.kept += 1;
                        let e = (v / (2.0 * nf)).exp();
                        s.s1 += e;
                        s.s2 += e * e;
                    }
                    None => s.censored += 1,
                }
            }
            s
        },
        Sums::default(),
        merge,
    );
    if sums.kept < 2 {
        return Err(Error::EstimatorDegenerate("all draws censored".into()));
    }
    let k = sums.kept as f64;
    let m = sums.s1 / k;
    let var = (sums.s2 / k - m * m).max(0.0);
    let bound = (std::f64::consts::E * std::f64::consts::E * nf).powf(1.0 / (2.0 * nf))
        * c
        * nf.sqrt();
    Ok(KappaExpEstimate {
        value: m,
        ci: Z95 * (var / k).sqrt(),
        bound,
        censored: sums.censored as usize,
    })
}

/// Monte Carlo mass of the rate sublevel set {Lambda* <= t}; censored
/// draws count as outside, biasing the estimate low.
pub fn sublevel_measure_mc(
    model: &MeasureModel,
    t: f64,
    samples: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("sublevel threshold t = {t} must be positive")));
    }
    let n = model.dimension();
    let rate = Rate::new(model)?;
    let hits = par_chunked(
        samples as u64,
        4096,
        |c, _start, len| {
            let pts = model.sample_flat(len as usize, stream.substream(c));
            pts.chunks(n)
                .filter(|x| matches!(rate.eval(model, x), Some(v) if v <= t))
                .count() as u64
        },
        0u64,
        |a, b| a + b,
    );
    let p = proportion(hits, samples as u64);
    Ok((p.estimate, p.ci_half_width))
}
