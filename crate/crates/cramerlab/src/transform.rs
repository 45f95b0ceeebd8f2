//! The logarithmic Laplace transform Lambda(xi) = ln E exp(<xi, Z>), its
//! derivatives through exponential tilting (gradient = tilted barycenter,
//! Hessian = tilted covariance), and the Cramer transform
//! Lambda*(x) = sup_xi { <x, xi> - Lambda(xi) } by damped Newton ascent.
//! Sublevel-set membership for B_t = { x : Lambda*(x) <= t } comes with an
//! early exit: any iterate whose objective exceeds t already certifies
//! Outside, because every feasible xi yields a lower bound.
//!
//! Dispatch: Gaussian and preset products evaluate in closed form; custom
//! one-dimensional components integrate adaptively over their window (so
//! points beyond the truncated window of an unbounded support report
//! AtInfinity); balls reduce to a one-dimensional radial transform through
//! Lambda(xi) = lambda(R |xi|) with lambda the log-MGF of the marginal.

use crate::closedform::BallTail;
use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::measures::{Custom1D, Kind, MeasureModel, Preset};
use crate::parallel::{par_chunked, par_indexed};
use crate::quad::integrate;
use crate::rng::RngStream;
use crate::stats::merge_lse;

/// Iterate norm beyond which the supremum is declared infinite.
const XI_LIMIT: f64 = 1e8;
/// Objective value beyond which the supremum is declared infinite.
const VALUE_LIMIT: f64 = 1e6;
/// Hessian condition proxy beyond which Newton falls back to gradient steps.
const COND_LIMIT: f64 = 1e12;
/// Raw max of <xi, Z> beyond which exp() work is declared unsafe.
const EXP_OVERFLOW: f64 = 700.0;
/// Minimum effective sample size for self-normalized importance sampling.
const MIN_ESS: f64 = 100.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// How to evaluate Lambda and its tilted moments.
#[derive(Clone, Copy, Debug)]
pub enum LaplaceMethod {
    /// Closed form where capabilities allow, else tensor/radial quadrature.
    Auto,
    ClosedForm,
    /// Per-coordinate adaptive quadrature (products), radial for balls.
    Quadrature1DTensor,
    /// Log-sum-exp over a fixed sample bank drawn from the base measure.
    MonteCarlo { samples: usize, stream: RngStream },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// The supremum is infinite: x outside (or on the boundary of) the
    /// support, detected by iterate norm > 1e8 or value > 1e6.
    AtInfinity,
    /// Iteration budget exhausted; `value` is still a certified lower bound.
    MaxIter,
}

/// One Cramer transform evaluation.
#[derive(Clone, Debug)]
pub struct LegendreResult {
    /// Lambda*(x) in nats; +inf when status is AtInfinity.
    pub value: f64,
    pub argmax_xi: Vec<f64>,
    /// |grad Lambda(xi*) - x| at the final iterate.
    pub grad_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sublevel {
    Inside,
    Outside,
    Boundary,
}

/// Sampling budget for the Monte Carlo moment estimators.
#[derive(Clone, Copy, Debug)]
pub struct SampleBudget {
    pub samples: usize,
    pub stream: RngStream,
}

#[derive(Clone, Copy, Debug)]
pub struct CramerOpts {
    pub method: LaplaceMethod,
    pub max_iter: usize,
    /// Gradient tolerance scale; convergence at |grad| <= tol_grad * (1+|x|).
    pub tol_grad: f64,
    /// Early-exit threshold: certify Outside as soon as the objective
    /// exceeds this value. None disables the exit.
    pub stop_above: Option<f64>,
}

impl Default for CramerOpts {
    fn default() -> Self {
        CramerOpts {
            method: LaplaceMethod::Auto,
            max_iter: 200,
            tol_grad: 1e-9,
            stop_above: None,
        }
    }
}

/// The measure with density exp(-Lambda(xi) + <xi, z>) f(z).
#[derive(Clone, Debug)]
pub struct TiltedMeasure {
    pub base: MeasureModel,
    pub xi: Vec<f64>,
    pub log_laplace_at_xi: f64,
}

impl TiltedMeasure {
    pub fn new(base: MeasureModel, xi: Vec<f64>) -> Result<TiltedMeasure> {
        let l = log_laplace(&base, &xi, LaplaceMethod::Auto)?;
        if !l.is_finite() {
            return Err(Error::domain("tilt lies outside the finiteness domain of Lambda"));
        }
        Ok(TiltedMeasure {
            base,
            xi,
            log_laplace_at_xi: l,
        })
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        -self.log_laplace_at_xi + dot(&self.xi, z) + self.base.log_density(z)
    }

    /// Barycenter of the tilted measure, which equals grad Lambda(xi).
    pub fn barycenter(&self, budget: &SampleBudget) -> Result<Vec<f64>> {
        grad_log_laplace(&self.base, &self.xi, budget)
    }
}

// ---------------------------------------------------------------------------
// one-dimensional component transforms

/// Max shift for the tilted integrand exp(xi z + log f(z)) over the window,
/// from a coarse scan, so large tilts cannot overflow.
fn tilt_shift(c: &Custom1D, xi: f64) -> f64 {
    let (a, b) = c.window();
    let mut shift = f64::NEG_INFINITY;
    for i in 0..=128 {
        let z = a + (b - a) * i as f64 / 128.0;
        shift = shift.max(xi * z + c.log_density(z));
    }
    shift
}

fn tilt_integrand(c: &Custom1D, xi: f64, shift: f64) -> impl Fn(f64) -> f64 + '_ {
    move |z: f64| {
        let e = xi * z + c.log_density(z) - shift;
        if e.is_finite() {
            e.exp()
        } else {
            0.0
        }
    }
}

/// (lambda, lambda', lambda'') of a component by tilted adaptive quadrature
/// over its window.
fn quad_tilted_1d(c: &Custom1D, xi: f64) -> (f64, f64, f64) {
    let (a, b) = c.window();
    let shift = tilt_shift(c, xi);
    let h = tilt_integrand(c, xi, shift);
    let mass = integrate(&h, a, b, 1e-12, 1e-300, 8192).value;
    let lambda = shift + mass.ln();
    let mean = integrate(&|z| z * h(z), a, b, 1e-11, 1e-300, 8192).value / mass;
    let var = integrate(&|z| (z - mean) * (z - mean) * h(z), a, b, 1e-11, 1e-300, 8192)
        .value
        / mass;
    (lambda, mean, var.max(0.0))
}

/// lambda only; the line searches call this many times per step.
fn comp_log_mgf_quadrature(c: &Custom1D, xi: f64) -> f64 {
    let (a, b) = c.window();
    let shift = tilt_shift(c, xi);
    let h = tilt_integrand(c, xi, shift);
    shift + integrate(&h, a, b, 1e-12, 1e-300, 8192).value.ln()
}

fn comp_log_mgf_closed(c: &Custom1D, xi: f64) -> Option<f64> {
    c.preset().map(|p| p.log_mgf(xi))
}

/// (lambda, lambda', lambda'') closed-form for presets, quadrature otherwise.
fn comp_tilted(c: &Custom1D, xi: f64) -> Result<(f64, f64, f64)> {
    match c.preset() {
        Some(p) => {
            let (lo, hi) = p.mgf_domain();
            if xi <= lo || xi >= hi {
                return Err(Error::domain(format!(
                    "tilt {xi} outside the finiteness domain ({lo}, {hi})"
                )));
            }
            Ok((p.log_mgf(xi), p.dlog_mgf(xi), p.d2log_mgf(xi)))
        }
        None => Ok(quad_tilted_1d(c, xi)),
    }
}

// ---------------------------------------------------------------------------
// radial transform of the ball

/// Log-MGF of the one-dimensional marginal of the uniform unit ball,
/// lambda(u) = ln int_{-1}^{1} e^{ut} c_n (1-t^2)^{(n-1)/2} dt, with tilted
/// mean and variance. Model tilts reduce through Lambda(xi) = lambda(R|xi|).
///
/// Large tilts concentrate the mass in a layer of width 1/u at t = 1 that
/// direct quadrature cannot resolve, so past u = 50 the substitution
/// t = 1 - s/u rewrites everything over s in [0, min(2u, 750)], where the
/// integrand e^{-s} s^p (1 - s/(2u))^p is tame for arbitrarily large u.
struct BallMgf {
    dim: f64,
    c_n: f64,
}

/// Tilt magnitude where the boundary-layer substitution takes over.
const LAYER_SWITCH: f64 = 50.0;

impl BallMgf {
    fn new(n: usize) -> Result<BallMgf> {
        let tail = BallTail::new(n as u64)?;
        Ok(BallMgf {
            dim: n as f64,
            c_n: tail.c_n(),
        })
    }

    /// (lambda(u), lambda'(u), lambda''(u)); even in u.
    fn tilted(&self, u: f64) -> (f64, f64, f64) {
        let s = u.abs();
        let (lambda, mean, var) = if s <= LAYER_SWITCH {
            self.tilted_direct(s)
        } else {
            self.tilted_layer(s)
        };
        if u >= 0.0 {
            (lambda, mean, var)
        } else {
            (lambda, -mean, var)
        }
    }

    fn tilted_direct(&self, u: f64) -> (f64, f64, f64) {
        debug_assert!(u >= 0.0);
        let p = (self.dim - 1.0) / 2.0;
        // shift by the exponent max at t = 1 keeps the integrand in [0, 1]
        let h = |t: f64| (u * (t - 1.0)).exp() * (1.0 - t * t).max(0.0).powf(p) * self.c_n;
        let mass = integrate(&h, -1.0, 1.0, 1e-12, 1e-300, 8192).value;
        let lambda = u + mass.ln();
        let mean = integrate(&|t| t * h(t), -1.0, 1.0, 1e-11, 1e-300, 8192).value / mass;
        let var = integrate(&|t| (t - mean) * (t - mean) * h(t), -1.0, 1.0, 1e-11, 1e-300, 8192)
            .value
            / mass;
        (lambda, mean, var.max(0.0))
    }

    fn tilted_layer(&self, u: f64) -> (f64, f64, f64) {
        debug_assert!(u > 0.0);
        let p = (self.dim - 1.0) / 2.0;
        // truncation at s = 750 loses a e^{-750} s^p sliver of the gamma-type
        // integral, far below the quadrature tolerance for any p in reach
        let hi = (2.0 * u).min(750.0);
        let g = |s: f64| (-s).exp() * s.powf(p) * (1.0 - s / (2.0 * u)).max(0.0).powf(p);
        let j = integrate(&g, 0.0, hi, 1e-12, 1e-300, 8192).value;
        let es = integrate(&|s| s * g(s), 0.0, hi, 1e-11, 1e-300, 8192).value / j;
        let vs = integrate(&|s| (s - es) * (s - es) * g(s), 0.0, hi, 1e-11, 1e-300, 8192)
            .value
            / j;
        let lambda =
            u + self.c_n.ln() + p * std::f64::consts::LN_2 - (p + 1.0) * u.ln() + j.ln();
        (lambda, 1.0 - es / u, vs.max(0.0) / (u * u))
    }
}

// ---------------------------------------------------------------------------
// safeguarded one-dimensional Newton for sup_xi { x xi - lambda(xi) }

struct Solve1D {
    value: f64,
    xi: f64,
    grad_err: f64,
    iterations: usize,
    status: SolveStatus,
    exceeded: bool,
}

fn at_infinity_1d(xi: f64, iterations: usize) -> Solve1D {
    Solve1D {
        value: f64::INFINITY,
        xi,
        grad_err: f64::INFINITY,
        iterations,
        status: SolveStatus::AtInfinity,
        exceeded: true,
    }
}

/// Maximizes x*xi - lambda(xi) for a convex lambda with lambda'(0) = 0,
/// given (lambda, lambda', lambda'') evaluations. `stop_above` certifies an
/// early exit; `var0` scales the first iterate.
fn solve_1d(
    x: f64,
    var0: f64,
    mut tilted: impl FnMut(f64) -> (f64, f64, f64),
    tol: f64,
    max_iter: usize,
    stop_above: Option<f64>,
) -> Solve1D {
    if x == 0.0 {
        return Solve1D {
            value: 0.0,
            xi: 0.0,
            grad_err: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
            exceeded: false,
        };
    }
    let sign = x.signum();
    let xa = x.abs();
    // work on the positive axis: m(s) = sign * lambda'(sign*s) is increasing
    let mut eval = |s: f64| {
        let (l, m, v) = tilted(sign * s);
        (l, sign * m, v)
    };
    let mut iters = 0usize;
    let mut best_value = 0.0f64;
    // bracket [lo, hi] with m(lo) < xa and m(hi) >= xa
    let mut lo = 0.0f64;
    let mut s = (xa / var0.max(1e-300)).min(XI_LIMIT);
    let mut hi;
    loop {
        let (l, m, _v) = eval(s);
        iters += 1;
        let g = xa * s - l;
        best_value = best_value.max(g);
        if let Some(t) = stop_above {
            if g > t {
                return Solve1D {
                    value: g,
                    xi: sign * s,
                    grad_err: (m - xa).abs(),
                    iterations: iters,
                    status: SolveStatus::MaxIter,
                    exceeded: true,
                };
            }
        }
        if m >= xa {
            hi = s;
            break;
        }
        lo = s;
        if s >= XI_LIMIT || g > VALUE_LIMIT {
            return at_infinity_1d(sign * s, iters);
        }
        s *= 2.0;
        if iters > max_iter {
            return Solve1D {
                value: best_value,
                xi: sign * lo,
                grad_err: f64::INFINITY,
                iterations: iters,
                status: SolveStatus::MaxIter,
                exceeded: false,
            };
        }
    }
    // safeguarded Newton on m(s) = xa inside [lo, hi]
    let mut s = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        let (l, m, v) = eval(s);
        iters += 1;
        let g = xa * s - l;
        best_value = best_value.max(g);
        if let Some(t) = stop_above {
            if g > t {
                return Solve1D {
                    value: g,
                    xi: sign * s,
                    grad_err: (m - xa).abs(),
                    iterations: iters,
                    status: SolveStatus::MaxIter,
                    exceeded: true,
                };
            }
        }
        if (m - xa).abs() <= tol {
            return Solve1D {
                value: g,
                xi: sign * s,
                grad_err: (m - xa).abs(),
                iterations: iters,
                status: SolveStatus::Converged,
                exceeded: false,
            };
        }
        if m > xa {
            hi = s;
        } else {
            lo = s;
        }
        let step = if v > 0.0 { s + (xa - m) / v } else { f64::NAN };
        s = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if g > VALUE_LIMIT || s >= XI_LIMIT {
            return at_infinity_1d(sign * s, iters);
        }
    }
    Solve1D {
        value: best_value,
        xi: sign * s,
        grad_err: f64::INFINITY,
        iterations: iters,
        status: SolveStatus::MaxIter,
        exceeded: false,
    }
}

/// Component Cramer transform; `stop_above` is the remaining budget for the
/// early Outside exit.
fn cramer_component(
    c: &Custom1D,
    x: f64,
    tol: f64,
    max_iter: usize,
    stop_above: Option<f64>,
) -> Solve1D {
    let (lo, hi) = c.support();
    if x <= lo || x >= hi {
        return at_infinity_1d(0.0, 0);
    }
    if let Some((value, xi)) = c.preset().and_then(|p| p.cramer_closed(x)) {
        return Solve1D {
            value,
            xi,
            grad_err: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
            exceeded: stop_above.is_some_and(|t| value > t),
        };
    }
    // quadrature components only see their window
    if c.preset().is_none() {
        let (wa, wb) = c.window();
        if x <= wa || x >= wb {
            return at_infinity_1d(0.0, 0);
        }
    }
    solve_1d(
        x,
        c.variance(),
        |xi| comp_tilted(c, xi).expect("component tilt stays inside its domain"),
        tol,
        max_iter,
        stop_above,
    )
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle over a fixed sample bank

struct McOracle {
    z: Vec<f64>,
    n: usize,
    count: usize,
}

struct McMoments {
    log_laplace: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

impl McOracle {
    fn new(model: &MeasureModel, samples: usize, stream: RngStream) -> McOracle {
        McOracle {
            z: model.sample_flat(samples, stream),
            n: model.dimension(),
            count: samples,
        }
    }

    fn dots(&self, xi: &[f64]) -> Vec<f64> {
        self.z.chunks(self.n).map(|row| dot(row, xi)).collect()
    }

    fn value(&self, xi: &[f64]) -> Result<f64> {
        let d = self.dots(xi);
        let mx = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx > EXP_OVERFLOW {
            return Err(Error::precision(
                format!("Monte Carlo tilt too extreme: max <xi, Z> = {mx:.1} > {EXP_OVERFLOW}"),
                mx - (self.count as f64).ln(),
            ));
        }
        let s: f64 = d.iter().map(|v| (v - mx).exp()).sum();
        Ok(mx + s.ln() - (self.count as f64).ln())
    }

    fn moments(&self, xi: &[f64]) -> Result<McMoments> {
        let d = self.dots(xi);
        let mx = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx > EXP_OVERFLOW {
            return Err(Error::precision(
                format!("Monte Carlo tilt too extreme: max <xi, Z> = {mx:.1} > {EXP_OVERFLOW}"),
                mx - (self.count as f64).ln(),
            ));
        }
        let w: Vec<f64> = d.iter().map(|v| (v - mx).exp()).collect();
        let total: f64 = w.iter().sum();
        let ess = total * total / w.iter().map(|v| v * v).sum::<f64>();
        if ess < MIN_ESS {
            return Err(Error::EstimatorDegenerate(format!(
                "importance sampling collapsed: effective sample size {ess:.1} < {MIN_ESS}"
            )));
        }
        let n = self.n;
        let mut grad = vec![0.0; n];
        for (row, &wi) in self.z.chunks(n).zip(&w) {
            for j in 0..n {
                grad[j] += wi * row[j];
            }
        }
        for g in grad.iter_mut() {
            *g /= total;
        }
        let mut hess = vec![vec![0.0; n]; n];
        let mut diff = vec![0.0; n];
        for (row, &wi) in self.z.chunks(n).zip(&w) {
            for j in 0..n {
                diff[j] = row[j] - grad[j];
            }
            for j in 0..n {
                let hj = &mut hess[j];
                let s = wi * diff[j];
                for k in 0..n {
                    hj[k] += s * diff[k];
                }
            }
        }
        for row in hess.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(McMoments {
            log_laplace: mx + total.ln() - (self.count as f64).ln(),
            grad,
            hess,
        })
    }
}

// ---------------------------------------------------------------------------
// public Laplace-transform operations

/// Lambda(xi) = ln E exp(<xi, Z>). Infinite tilts return +inf rather than
/// an error; forced methods that a model cannot honor return Domain errors.
pub fn log_laplace(model: &MeasureModel, xi: &[f64], method: LaplaceMethod) -> Result<f64> {
    assert_eq!(xi.len(), model.dimension(), "tilt has wrong length");
    match method {
        LaplaceMethod::Auto => match model.kind() {
            Kind::StandardGaussian => Ok(0.5 * dot(xi, xi)),
            Kind::UniformCube { .. } | Kind::Product(_) | Kind::Custom1D(_)
                if model.capabilities().closed_form_laplace =>
            {
                log_laplace(model, xi, LaplaceMethod::ClosedForm)
            }
            _ => log_laplace(model, xi, LaplaceMethod::Quadrature1DTensor),
        },
        LaplaceMethod::ClosedForm => match model.kind() {
            Kind::StandardGaussian => Ok(0.5 * dot(xi, xi)),
            Kind::UniformCube { side } => {
                let w = 0.5 * side;
                let p = Preset::Uniform { half_width: w };
                Ok(xi.iter().map(|&v| p.log_mgf(v)).sum())
            }
            Kind::Product(cs) => {
                let mut total = 0.0;
                for (c, &v) in cs.iter().zip(xi) {
                    match comp_log_mgf_closed(c, v) {
                        Some(l) => total += l,
                        None => {
                            return Err(Error::domain(
                                "closed-form Laplace transform unavailable for this component",
                            ))
                        }
                    }
                }
                Ok(total)
            }
            Kind::Custom1D(c) => comp_log_mgf_closed(c, xi[0]).ok_or_else(|| {
                Error::domain("closed-form Laplace transform unavailable for this component")
            }),
            _ => Err(Error::domain("closed-form Laplace transform unavailable for this model")),
        },
        LaplaceMethod::Quadrature1DTensor => match model.kind() {
            Kind::StandardGaussian => {
                Err(Error::domain("the Gaussian evaluates in closed form only"))
            }
            Kind::UniformCube { side } => {
                // quadrature against the actual component densities
                let c = Custom1D::uniform(0.5 * side)?;
                Ok(xi.iter().map(|&v| comp_log_mgf_quadrature(&c, v)).sum())
            }
            Kind::Product(cs) => Ok(cs
                .iter()
                .zip(xi)
                .map(|(c, &v)| comp_log_mgf_quadrature(c, v))
                .sum()),
            Kind::Custom1D(c) => Ok(comp_log_mgf_quadrature(c, xi[0])),
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                let mgf = BallMgf::new(model.dimension())?;
                Ok(mgf.tilted(model.radius() * norm(xi)).0)
            }
        },
        LaplaceMethod::MonteCarlo { samples, stream } => {
            McOracle::new(model, samples, stream).value(xi)
        }
    }
}

/// Tilted full moments (Lambda, grad, Hessian) along the Auto dispatch.
fn tilted_full(model: &MeasureModel, xi: &[f64]) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let n = model.dimension();
    match model.kind() {
        Kind::StandardGaussian => {
            let mut hess = vec![vec![0.0; n]; n];
            for (j, row) in hess.iter_mut().enumerate() {
                row[j] = 1.0;
            }
            Ok((0.5 * dot(xi, xi), xi.to_vec(), hess))
        }
        Kind::UniformCube { side } => {
            let c = Custom1D::uniform(0.5 * side)?;
            diag_tilted(std::slice::from_ref(&c), xi, true)
        }
        Kind::Product(cs) => diag_tilted(cs, xi, false),
        Kind::Custom1D(c) => diag_tilted(std::slice::from_ref(c), xi, false),
        Kind::UniformBallVol1 | Kind::UniformBallUnit => {
            let mgf = BallMgf::new(n)?;
            let r = model.radius();
            let u = r * norm(xi);
            let (l, m, v) = mgf.tilted(u);
            if u == 0.0 {
                // isotropic at the origin: Hess = R^2 lambda''(0) I
                let (_, _, v0) = mgf.tilted(0.0);
                let mut hess = vec![vec![0.0; n]; n];
                for (j, row) in hess.iter_mut().enumerate() {
                    row[j] = r * r * v0;
                }
                return Ok((l, vec![0.0; n], hess));
            }
            // theta is the unit tilt direction
            let theta: Vec<f64> = xi.iter().map(|&t| t * r / u).collect();
            let grad: Vec<f64> = theta.iter().map(|&t| t * r * m).collect();
            // Hess = R^2 [ lambda''(u) theta theta^T + (lambda'(u)/u)(I - theta theta^T) ]
            let tangent = m / u * r * r;
            let mut hess = vec![vec![0.0; n]; n];
            for j in 0..n {
                for k in 0..n {
                    let outer = theta[j] * theta[k];
                    hess[j][k] =
                        r * r * v * outer + tangent * ((j == k) as usize as f64 - outer);
                }
            }
            Ok((l, grad, hess))
        }
    }
}

/// Separable tilted moments: diagonal Hessian, coordinate-wise gradient.
/// `repeat` reuses the single component for every coordinate (cubes).
fn diag_tilted(
    cs: &[Custom1D],
    xi: &[f64],
    repeat: bool,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let n = xi.len();
    let mut lambda = 0.0;
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for j in 0..n {
        let c = if repeat { &cs[0] } else { &cs[j] };
        let (l, m, v) = comp_tilted(c, xi[j])?;
        lambda += l;
        grad[j] = m;
        hess[j][j] = v;
    }
    Ok((lambda, grad, hess))
}

/// grad Lambda(xi): the barycenter of the tilted measure. Quadrature-backed
/// for every supported kind; `budget` is reserved for sampling-backed
/// estimators (see tilted_moments_mc).
pub fn grad_log_laplace(
    model: &MeasureModel,
    xi: &[f64],
    _budget: &SampleBudget,
) -> Result<Vec<f64>> {
    assert_eq!(xi.len(), model.dimension(), "tilt has wrong length");
    Ok(tilted_full(model, xi)?.1)
}

/// Hess Lambda(xi): the covariance of the tilted measure.
pub fn hess_log_laplace(
    model: &MeasureModel,
    xi: &[f64],
    _budget: &SampleBudget,
) -> Result<Vec<Vec<f64>>> {
    assert_eq!(xi.len(), model.dimension(), "tilt has wrong length");
    Ok(tilted_full(model, xi)?.2)
}

/// Self-normalized importance-sampling estimate of (Lambda, grad, Hess)
/// from a fresh sample bank. Errors when the effective sample size drops
/// below 100.
pub fn tilted_moments_mc(
    model: &MeasureModel,
    xi: &[f64],
    budget: &SampleBudget,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    assert_eq!(xi.len(), model.dimension(), "tilt has wrong length");
    let oracle = McOracle::new(model, budget.samples, budget.stream);
    let m = oracle.moments(xi)?;
    Ok((m.log_laplace, m.grad, m.hess))
}

// ---------------------------------------------------------------------------
// damped Newton engine

/// Lower-triangular Cholesky factor, or None when the matrix is not
/// numerically positive definite.
pub(crate) fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Squared ratio of extreme Cholesky diagonal entries; a cheap condition
/// number proxy for the factored matrix.
fn cond_proxy(l: &[Vec<f64>]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (i, row) in l.iter().enumerate() {
        lo = lo.min(row[i]);
        hi = hi.max(row[i]);
    }
    (hi / lo) * (hi / lo)
}

struct NewtonOutcome {
    result: LegendreResult,
    exceeded: bool,
}

/// Maximizes g(xi) = <x, xi> - Lambda(xi) given full-moment and value-only
/// oracles. Newton direction from the tilted covariance with Armijo
/// backtracking; gradient ascent when the Hessian is ill-conditioned.
fn damped_newton(
    x: &[f64],
    xi0: Vec<f64>,
    full: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)>,
    value_only: &mut dyn FnMut(&[f64]) -> Result<f64>,
    opts: &CramerOpts,
) -> Result<NewtonOutcome> {
    let tol = opts.tol_grad * (1.0 + norm(x));
    let mut xi = xi0;
    let mut best = 0.0f64;
    let mut iterations = 0usize;
    loop {
        let (lambda, grad_lambda, hess) = full(&xi)?;
        let g = dot(x, &xi) - lambda;
        best = best.max(g);
        let r: Vec<f64> = x.iter().zip(&grad_lambda).map(|(a, b)| a - b).collect();
        let rn = norm(&r);
        if let Some(t) = opts.stop_above {
            if g > t {
                return Ok(NewtonOutcome {
                    result: LegendreResult {
                        value: g,
                        argmax_xi: xi,
                        grad_norm: rn,
                        iterations,
                        status: SolveStatus::MaxIter,
                    },
                    exceeded: true,
                });
            }
        }
        if rn <= tol {
            return Ok(NewtonOutcome {
                result: LegendreResult {
                    value: g,
                    argmax_xi: xi,
                    grad_norm: rn,
                    iterations,
                    status: SolveStatus::Converged,
                },
                exceeded: false,
            });
        }
        if norm(&xi) > XI_LIMIT || g > VALUE_LIMIT {
            return Ok(NewtonOutcome {
                result: LegendreResult {
                    value: f64::INFINITY,
                    argmax_xi: xi,
                    grad_norm: rn,
                    iterations,
                    status: SolveStatus::AtInfinity,
                },
                exceeded: true,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(NewtonOutcome {
                result: LegendreResult {
                    value: best,
                    argmax_xi: xi,
                    grad_norm: rn,
                    iterations,
                    status: SolveStatus::MaxIter,
                },
                exceeded: false,
            });
        }
        let newton_dir = cholesky(&hess)
            .filter(|l| cond_proxy(l) <= COND_LIMIT)
            .map(|l| chol_solve(&l, &r));
        let mut advanced = false;
        for dir in [newton_dir, Some(r.clone())].into_iter().flatten() {
            let slope = dot(&r, &dir);
            if !(slope > 0.0) {
                continue;
            }
            let mut alpha = 1.0f64;
            for _ in 0..60 {
                let cand: Vec<f64> = xi.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                let ok = match value_only(&cand) {
                    Ok(l) => {
                        let gc = dot(x, &cand) - l;
                        gc.is_finite() && gc >= g + 1e-4 * alpha * slope
                    }
                    // a step outside the usable domain is just too long
                    Err(_) => false,
                };
                if ok {
                    xi = cand;
                    advanced = true;
                    break;
                }
                alpha *= 0.5;
            }
            if advanced {
                break;
            }
        }
        iterations += 1;
        if !advanced {
            return Ok(NewtonOutcome {
                result: LegendreResult {
                    value: best,
                    argmax_xi: xi,
                    grad_norm: rn,
                    iterations,
                    status: SolveStatus::MaxIter,
                },
                exceeded: false,
            });
        }
    }
}

// ---------------------------------------------------------------------------
// the Cramer transform

fn converged(value: f64, argmax_xi: Vec<f64>) -> LegendreResult {
    LegendreResult {
        value,
        argmax_xi,
        grad_norm: 0.0,
        iterations: 0,
        status: SolveStatus::Converged,
    }
}

/// Per-coordinate Cramer transform of a separable model; the value is the
/// sum of the component values, and partial sums feed the early exit.
fn cramer_separable(
    comps: &[&Custom1D],
    x: &[f64],
    opts: &CramerOpts,
) -> (LegendreResult, bool) {
    let n = x.len();
    let tol_vec = opts.tol_grad * (1.0 + norm(x));
    let tol_comp = 0.5 * tol_vec / (n as f64).sqrt();
    let mut value = 0.0f64;
    let mut argmax = vec![0.0; n];
    let mut grad_sq = 0.0f64;
    let mut iterations = 0usize;
    let mut status = SolveStatus::Converged;
    for j in 0..n {
        let remaining = opts.stop_above.map(|t| t - value);
        let s = cramer_component(comps[j], x[j], tol_comp, opts.max_iter, remaining);
        iterations += s.iterations;
        argmax[j] = s.xi;
        if s.status == SolveStatus::AtInfinity {
            return (
                LegendreResult {
                    value: f64::INFINITY,
                    argmax_xi: argmax,
                    grad_norm: f64::INFINITY,
                    iterations,
                    status: SolveStatus::AtInfinity,
                },
                true,
            );
        }
        value += s.value;
        grad_sq += s.grad_err * s.grad_err;
        if s.status == SolveStatus::MaxIter {
            status = SolveStatus::MaxIter;
        }
        if s.exceeded || opts.stop_above.is_some_and(|t| value > t) {
            return (
                LegendreResult {
                    value,
                    argmax_xi: argmax,
                    grad_norm: grad_sq.sqrt(),
                    iterations,
                    status: SolveStatus::MaxIter,
                },
                true,
            );
        }
    }
    (
        LegendreResult {
            value,
            argmax_xi: argmax,
            grad_norm: grad_sq.sqrt(),
            iterations,
            status,
        },
        false,
    )
}

fn cramer_ball(model: &MeasureModel, x: &[f64], opts: &CramerOpts) -> Result<(LegendreResult, bool)> {
    let n = model.dimension();
    let radius = model.radius();
    let xn = norm(x);
    let r = xn / radius;
    if r >= 1.0 {
        return Ok((
            LegendreResult {
                value: f64::INFINITY,
                argmax_xi: vec![0.0; n],
                grad_norm: f64::INFINITY,
                iterations: 0,
                status: SolveStatus::AtInfinity,
            },
            true,
        ));
    }
    if r == 0.0 {
        return Ok((converged(0.0, vec![0.0; n]), false));
    }
    let mgf = BallMgf::new(n)?;
    let tol = 0.5 * opts.tol_grad * (1.0 + norm(x));
    // radial problem: sup_u { r u - lambda(u) }; the initial variance blends
    // lambda''(0) = 1/(n+2) with the boundary scaling u* ~ (n+1)/(2(1-r))
    let s = solve_1d(
        r,
        (1.0 - r * r) / (n as f64 + 2.0),
        |u| mgf.tilted(u),
        tol / radius,
        opts.max_iter,
        opts.stop_above,
    );
    let xi: Vec<f64> = x.iter().map(|&v| v / xn * s.xi / radius).collect();
    Ok((
        LegendreResult {
            value: s.value,
            argmax_xi: xi,
            grad_norm: s.grad_err * radius,
            iterations: s.iterations,
            status: s.status,
        },
        s.exceeded,
    ))
}

fn cramer_impl(
    model: &MeasureModel,
    x: &[f64],
    opts: &CramerOpts,
) -> Result<(LegendreResult, bool)> {
    assert_eq!(x.len(), model.dimension(), "point has wrong length");
    match opts.method {
        LaplaceMethod::Auto | LaplaceMethod::ClosedForm => match model.kind() {
            Kind::StandardGaussian => {
                let v = 0.5 * dot(x, x);
                let exceeded = opts.stop_above.is_some_and(|t| v > t);
                Ok((converged(v, x.to_vec()), exceeded))
            }
            Kind::UniformCube { side } => {
                let c = Custom1D::uniform(0.5 * side)?;
                let comps: Vec<&Custom1D> = std::iter::repeat(&c).take(x.len()).collect();
                Ok(cramer_separable(&comps, x, opts))
            }
            Kind::Product(cs) => {
                let comps: Vec<&Custom1D> = cs.iter().collect();
                Ok(cramer_separable(&comps, x, opts))
            }
            Kind::Custom1D(c) => Ok(cramer_separable(&[c], x, opts)),
            Kind::UniformBallVol1 | Kind::UniformBallUnit => cramer_ball(model, x, opts),
        },
        LaplaceMethod::Quadrature1DTensor => match model.kind() {
            Kind::StandardGaussian => {
                Err(Error::domain("the Gaussian evaluates in closed form only"))
            }
            Kind::UniformBallVol1 | Kind::UniformBallUnit => cramer_ball(model, x, opts),
            _ => {
                // n-dimensional Newton against the tensor-quadrature oracle,
                // with the components built once up front
                let cube_comp = match model.kind() {
                    Kind::UniformCube { side } => Some(Custom1D::uniform(0.5 * side)?),
                    _ => None,
                };
                let comps: Vec<&Custom1D> = match model.kind() {
                    Kind::UniformCube { .. } => {
                        let c = cube_comp.as_ref().expect("built above");
                        std::iter::repeat(c).take(x.len()).collect()
                    }
                    Kind::Product(cs) => cs.iter().collect(),
                    Kind::Custom1D(c) => vec![c],
                    _ => unreachable!("handled above"),
                };
                let xi0: Vec<f64> = x
                    .iter()
                    .map(|&v| v / model.max_marginal_variance())
                    .collect();
                let mut full = |xi: &[f64]| -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
                    let n = xi.len();
                    let mut lambda = 0.0;
                    let mut grad = vec![0.0; n];
                    let mut hess = vec![vec![0.0; n]; n];
                    for j in 0..n {
                        let (l, m, v) = quad_tilted_1d(comps[j], xi[j]);
                        lambda += l;
                        grad[j] = m;
                        hess[j][j] = v;
                    }
                    Ok((lambda, grad, hess))
                };
                let mut value_only = |xi: &[f64]| -> Result<f64> {
                    Ok(xi
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| comp_log_mgf_quadrature(comps[j], v))
                        .sum())
                };
                let out = damped_newton(x, xi0, &mut full, &mut value_only, opts)?;
                Ok((out.result, out.exceeded))
            }
        },
        LaplaceMethod::MonteCarlo { samples, stream } => {
            let oracle = McOracle::new(model, samples, stream);
            let xi0: Vec<f64> = x
                .iter()
                .map(|&v| v / model.max_marginal_variance())
                .collect();
            let mut full = |xi: &[f64]| -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
                let m = oracle.moments(xi)?;
                Ok((m.log_laplace, m.grad, m.hess))
            };
            let mut value_only = |xi: &[f64]| oracle.value(xi);
            let out = damped_newton(x, xi0, &mut full, &mut value_only, opts)?;
            Ok((out.result, out.exceeded))
        }
    }
}

/// Cramer transform Lambda*(x) = sup_xi { <x, xi> - Lambda(xi) }.
pub fn cramer(model: &MeasureModel, x: &[f64], opts: &CramerOpts) -> Result<LegendreResult> {
    cramer_impl(model, x, opts).map(|(r, _)| r)
}

/// Membership of x in the sublevel set B_t = { Lambda* <= t }, with a
/// Boundary verdict inside |Lambda*(x) - t| <= 1e-9 (1 + t).
pub fn in_sublevel(
    model: &MeasureModel,
    x: &[f64],
    t: f64,
    opts: &CramerOpts,
) -> Result<Sublevel> {
    if !(t > 0.0) {
        return Err(Error::domain("sublevel threshold must be positive"));
    }
    let btol = 1e-9 * (1.0 + t);
    let mut local = *opts;
    // exit only once the lower bound clears the boundary band
    local.stop_above = Some(t + 2.0 * btol);
    let (res, exceeded) = cramer_impl(model, x, &local)?;
    if exceeded {
        return Ok(Sublevel::Outside);
    }
    if (res.value - t).abs() <= btol {
        Ok(Sublevel::Boundary)
    } else if res.value < t {
        Ok(Sublevel::Inside)
    } else {
        Ok(Sublevel::Outside)
    }
}

// ---------------------------------------------------------------------------
// cached radial Cramer transform for balls

/// Precomputed Lambda* for ball models as a one-dimensional spline, with
/// the exact tilt norm as the envelope derivative. Bulk estimators evaluate
/// millions of points; the spline amortizes the radial quadrature solves to
/// O(1) per point.
///
/// Near the boundary Lambda* grows like (n+1)/2 ln(1/(1-r)), so the nodes
/// are uniform in v = -ln(1-r), where the profile is asymptotically linear
/// and a cubic stays uniformly accurate. The grid stops at 1 - r = 1e-6;
/// the sliver beyond falls back to the direct radial solve, which like
/// every solver path reports AtInfinity once the maximizing tilt
/// u* ~ (n+1)/(2(1-r)) would pass the global tilt ceiling.
pub struct RadialCramer {
    radius: f64,
    v_cap: f64,
    spline: CubicHermite,
    mgf: BallMgf,
    dim: usize,
}

/// Node count of the radial cache.
const RADIAL_NODES: usize = 2049;
/// Closest cached approach to the boundary, as 1 - r. Edge tilts reach
/// u ~ (n+1)/2 * 1e6, under the 1e8 tilt ceiling for every n below ~200.
const RADIAL_EDGE: f64 = 1e-6;

impl RadialCramer {
    pub fn new(model: &MeasureModel) -> Result<RadialCramer> {
        let n = model.dimension();
        if !matches!(model.kind(), Kind::UniformBallVol1 | Kind::UniformBallUnit) {
            return Err(Error::domain("radial Cramer cache applies to ball models only"));
        }
        let mgf = BallMgf::new(n)?;
        let v_cap = -RADIAL_EDGE.ln();
        let mut xs = Vec::with_capacity(RADIAL_NODES);
        let mut ys = Vec::with_capacity(RADIAL_NODES);
        let mut ds = Vec::with_capacity(RADIAL_NODES);
        let mut warm = 0.0f64;
        for i in 0..RADIAL_NODES {
            let v = v_cap * i as f64 / (RADIAL_NODES - 1) as f64;
            let r = -(-v).exp_m1();
            if i == 0 {
                xs.push(0.0);
                ys.push(0.0);
                ds.push(0.0);
                continue;
            }
            let init_var = if warm > 0.0 {
                // warm start: aim the first iterate at the previous solution
                r / warm
            } else {
                1.0 / (n as f64 + 2.0)
            };
            let s = solve_1d(r, init_var, |u| mgf.tilted(u), 1e-9, 400, None);
            if s.status != SolveStatus::Converged {
                return Err(Error::Solver(format!(
                    "radial cache node at r = {r} did not converge"
                )));
            }
            warm = s.xi;
            xs.push(v);
            ys.push(s.value);
            // d(lambda*)/dv = u*(r) (1 - r) by the envelope theorem
            ds.push(s.xi * (1.0 - r));
        }
        Ok(RadialCramer {
            radius: model.radius(),
            v_cap,
            spline: CubicHermite::with_derivatives(xs, ys, ds)?,
            mgf,
            dim: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn solve_direct(&self, r: f64) -> Solve1D {
        let var0 = (1.0 - r * r) / (self.dim as f64 + 2.0);
        solve_1d(r, var0, |u| self.mgf.tilted(u), 1e-9, 400, None)
    }

    /// Lambda*(x) for any |x| = x_norm; +inf outside the ball.
    pub fn value(&self, x_norm: f64) -> f64 {
        let r = x_norm / self.radius;
        if r >= 1.0 {
            return f64::INFINITY;
        }
        let v = -(-r).ln_1p();
        if v <= self.v_cap {
            return self.spline.eval(v).max(0.0);
        }
        self.solve_direct(r).value
    }

    /// |xi*| at the maximizer for |x| = x_norm (the envelope derivative).
    pub fn tilt_norm(&self, x_norm: f64) -> f64 {
        let r = x_norm / self.radius;
        if r >= 1.0 {
            return f64::INFINITY;
        }
        let v = -(-r).ln_1p();
        if v <= self.v_cap {
            return self.spline.eval_derivative(v).max(0.0) / ((1.0 - r) * self.radius);
        }
        self.solve_direct(r).xi / self.radius
    }
}

// ---------------------------------------------------------------------------
// batched Monte Carlo Legendre solver

#[derive(Clone, Copy, Debug)]
pub struct McBatchOpts {
    /// Common-random-number bank size for the per-point Newton solves.
    pub solve_samples: usize,
    /// Fresh streamed sample count for the shared value pass.
    pub value_samples: u64,
    /// Rows generated per streamed chunk.
    pub chunk: u64,
    pub max_iter: usize,
    pub tol_grad: f64,
}

impl Default for McBatchOpts {
    fn default() -> Self {
        McBatchOpts {
            solve_samples: 1 << 18,
            value_samples: 1 << 24,
            chunk: 1 << 16,
            max_iter: 200,
            tol_grad: 1e-9,
        }
    }
}

/// Monte Carlo Cramer transform at many points with two phases: per-point
/// Newton on one shared fixed bank, then a single streamed high-count pass
/// that re-estimates Lambda at every argmax. Sharing the stream across
/// points makes the pass O(value_samples * points) instead of quadratic.
pub fn mc_cramer_batch(
    model: &MeasureModel,
    points: &[Vec<f64>],
    stream: RngStream,
    opts: &McBatchOpts,
) -> Result<Vec<LegendreResult>> {
    let oracle = McOracle::new(model, opts.solve_samples, stream.substream(0));
    let solve_opts = CramerOpts {
        method: LaplaceMethod::Auto,
        max_iter: opts.max_iter,
        tol_grad: opts.tol_grad,
        stop_above: None,
    };
    let solved: Vec<Result<LegendreResult>> = par_indexed(points.len() as u64, |i| {
        let x = &points[i as usize];
        let xi0: Vec<f64> = x
            .iter()
            .map(|&v| v / model.max_marginal_variance())
            .collect();
        let mut full = |xi: &[f64]| -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
            let m = oracle.moments(xi)?;
            Ok((m.log_laplace, m.grad, m.hess))
        };
        let mut value_only = |xi: &[f64]| oracle.value(xi);
        Ok(damped_newton(x, xi0, &mut full, &mut value_only, &solve_opts)?.result)
    });
    let mut results = Vec::with_capacity(points.len());
    for r in solved {
        results.push(r?);
    }

    // shared value pass over fresh substreams, folded in chunk order
    let n = model.dimension();
    let tilts: Vec<&[f64]> = results.iter().map(|r| r.argmax_xi.as_slice()).collect();
    let empty = vec![(f64::NEG_INFINITY, 0.0f64); points.len()];
    let merged: Vec<(f64, f64)> = par_chunked(
        opts.value_samples,
        opts.chunk,
        |c, _start, len| {
            let bank = model.sample_flat(len as usize, stream.substream(1 + c));
            let mut part = vec![(f64::NEG_INFINITY, 0.0f64); tilts.len()];
            let mut dots = vec![0.0f64; len as usize];
            for (p, xi) in tilts.iter().enumerate() {
                for (d, row) in dots.iter_mut().zip(bank.chunks(n)) {
                    *d = dot(row, xi);
                }
                let mx = dots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = dots.iter().map(|v| (v - mx).exp()).sum();
                part[p] = (mx, s);
            }
            part
        },
        empty,
        |acc, part| {
            acc.iter()
                .zip(&part)
                .map(|(&a, &b)| merge_lse(&[a, b]))
                .collect()
        },
    );

    let ln_m = (opts.value_samples as f64).ln();
    for (i, res) in results.iter_mut().enumerate() {
        let (mx, s) = merged[i];
        if mx > EXP_OVERFLOW {
            return Err(Error::precision(
                format!("Monte Carlo tilt too extreme: max <xi, Z> = {mx:.1} > {EXP_OVERFLOW}"),
                mx - ln_m,
            ));
        }
        let lambda = mx + s.ln() - ln_m;
        res.value = (dot(&points[i], &res.argmax_xi) - lambda).max(0.0);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::TailBudget;
    use crate::rng::sphere_direction;

    fn stream(i: u64) -> RngStream {
        RngStream::new(0xACCE55).substream(i)
    }

    fn budget(i: u64) -> SampleBudget {
        SampleBudget {
            samples: 1 << 14,
            stream: stream(i),
        }
    }

    #[test]
    fn gaussian_closed_forms() {
        let m = MeasureModel::standard_gaussian(3).unwrap();
        let xi = vec![0.3, -1.1, 0.7];
        let expect = 0.5 * dot(&xi, &xi);
        assert_eq!(log_laplace(&m, &xi, LaplaceMethod::Auto).unwrap(), expect);
        let g = grad_log_laplace(&m, &xi, &budget(0)).unwrap();
        assert_eq!(g, xi);
        let h = hess_log_laplace(&m, &xi, &budget(0)).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(h[j][k], if j == k { 1.0 } else { 0.0 });
            }
        }
        let x = vec![0.5, -0.25, 1.0];
        let r = cramer(&m, &x, &CramerOpts::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.value - 0.5 * dot(&x, &x)).abs() < 1e-15);
        assert_eq!(r.argmax_xi, x);
    }

    #[test]
    fn zero_tilt_and_zero_point_vanish() {
        let models = [
            MeasureModel::uniform_cube(3, 1.0).unwrap(),
            MeasureModel::uniform_ball_unit(4).unwrap(),
            MeasureModel::standard_gaussian(2).unwrap(),
            MeasureModel::product(vec![
                Custom1D::laplace().unwrap(),
                Custom1D::shifted_exponential().unwrap(),
            ])
            .unwrap(),
        ];
        for m in &models {
            let zero = vec![0.0; m.dimension()];
            let l = log_laplace(m, &zero, LaplaceMethod::Auto).unwrap();
            assert!(l.abs() < 1e-12, "Lambda(0) = {l}");
            let r = cramer(m, &zero, &CramerOpts::default()).unwrap();
            assert!(r.value.abs() < 1e-12);
            let g = grad_log_laplace(m, &zero, &budget(1)).unwrap();
            assert!(norm(&g) < 1e-9, "grad at 0 is {:?}", g);
        }
    }

    #[test]
    fn cube_1d_reference_values() {
        // side-one cube at xi = 2: Lambda = ln(sinh 1), Lambda' = the
        // stationarity mean coth(1)/2 - 1/2
        let m = MeasureModel::uniform_cube(1, 1.0).unwrap();
        let expect = 1.0f64.sinh().ln();
        for method in [
            LaplaceMethod::Auto,
            LaplaceMethod::ClosedForm,
            LaplaceMethod::Quadrature1DTensor,
        ] {
            let l = log_laplace(&m, &[2.0], method).unwrap();
            assert!((l - expect).abs() < 1e-11, "{method:?}: {l} vs {expect}");
        }
        let g = grad_log_laplace(&m, &[2.0], &budget(2)).unwrap();
        let tilted_mean = 0.1565176427496657;
        assert!((g[0] - tilted_mean).abs() < 1e-12, "grad {} vs {tilted_mean}", g[0]);
        // quadrature agrees with the closed form
        let c = Custom1D::uniform(0.5).unwrap();
        let (_, qm, qv) = quad_tilted_1d(&c, 2.0);
        assert!((qm - tilted_mean).abs() < 1e-10);
        let p = Preset::Uniform { half_width: 0.5 };
        assert!((qv - p.d2log_mgf(2.0)).abs() < 1e-10);
    }

    #[test]
    fn convexity_and_nonnegativity_of_lambda() {
        let m = MeasureModel::uniform_cube(3, 1.0).unwrap();
        let mut rng = stream(3).rng();
        use rand::Rng;
        for _ in 0..1000 {
            let xi1: Vec<f64> = (0..3).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let xi2: Vec<f64> = (0..3).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let lam: f64 = rng.gen_range(0.0..1.0);
            let mix: Vec<f64> = xi1
                .iter()
                .zip(&xi2)
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            let l1 = log_laplace(&m, &xi1, LaplaceMethod::Auto).unwrap();
            let l2 = log_laplace(&m, &xi2, LaplaceMethod::Auto).unwrap();
            let lm = log_laplace(&m, &mix, LaplaceMethod::Auto).unwrap();
            assert!(lm <= lam * l1 + (1.0 - lam) * l2 + 1e-9);
            assert!(l1 >= -1e-10 && l2 >= -1e-10);
        }
    }

    #[test]
    fn duality_holds_along_the_gradient_map() {
        // Lambda*(grad Lambda(xi)) + Lambda(xi) = <grad Lambda(xi), xi>
        let models = [
            MeasureModel::uniform_cube(2, 1.0).unwrap(),
            MeasureModel::product(vec![
                Custom1D::laplace().unwrap(),
                Custom1D::uniform(0.5).unwrap(),
            ])
            .unwrap(),
        ];
        let mut rng = stream(4).rng();
        use rand::Rng;
        for m in &models {
            for _ in 0..20 {
                let xi: Vec<f64> = (0..m.dimension()).map(|_| rng.gen_range(-0.9..0.9)).collect();
                let l = log_laplace(m, &xi, LaplaceMethod::Auto).unwrap();
                let g = grad_log_laplace(m, &xi, &budget(5)).unwrap();
                let r = cramer(m, &g, &CramerOpts::default()).unwrap();
                assert_eq!(r.status, SolveStatus::Converged);
                let lhs = r.value + l;
                let rhs = dot(&g, &xi);
                assert!((lhs - rhs).abs() < 1e-7, "duality gap {}", lhs - rhs);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = MeasureModel::product(vec![
            Custom1D::from_log_density(
                |x| -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
                f64::NEG_INFINITY,
                f64::INFINITY,
            )
            .unwrap(),
            Custom1D::uniform(0.5).unwrap(),
        ])
        .unwrap();
        let xi = vec![0.8, -1.3];
        let g = grad_log_laplace(&m, &xi, &budget(6)).unwrap();
        let h = 1e-5;
        for j in 0..2 {
            let mut hi = xi.clone();
            let mut lo = xi.clone();
            hi[j] += h;
            lo[j] -= h;
            let fd = (log_laplace(&m, &hi, LaplaceMethod::Quadrature1DTensor).unwrap()
                - log_laplace(&m, &lo, LaplaceMethod::Quadrature1DTensor).unwrap())
                / (2.0 * h);
            assert!(
                (g[j] - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                "coordinate {j}: {} vs {}",
                g[j],
                fd
            );
        }
    }

    #[test]
    fn tilted_variance_is_dimension_bounded() {
        // Var_tilted(<xi, z>) = xi' Hess xi <= n for cubes and balls
        for (m, label) in [
            (MeasureModel::uniform_cube(4, 1.0).unwrap(), "cube"),
            (MeasureModel::uniform_ball_vol1(4).unwrap(), "ball"),
        ] {
            let n = m.dimension();
            let mut rng = stream(7).rng();
            use rand::Rng;
            for _ in 0..100 {
                let dir = sphere_direction(&mut rng, n);
                let scale: f64 = rng.gen_range(0.0..5.0);
                let xi: Vec<f64> = dir.iter().map(|&d| d * scale).collect();
                let h = hess_log_laplace(&m, &xi, &budget(8)).unwrap();
                let mut q = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        q += xi[j] * h[j][k] * xi[k];
                    }
                }
                assert!(q <= n as f64 + 1e-8, "{label}: xi'Hxi = {q}");
            }
        }
    }

    #[test]
    fn product_cramer_adds_coordinatewise() {
        let comps = vec![Custom1D::uniform(0.5).unwrap(), Custom1D::uniform(1.5).unwrap()];
        let singles: Vec<MeasureModel> = comps
            .iter()
            .map(|c| MeasureModel::custom_1d(c.clone()).unwrap())
            .collect();
        let m = MeasureModel::product(comps).unwrap();
        let x = vec![0.31, -0.9];
        let r = cramer(&m, &x, &CramerOpts::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        let sum: f64 = singles
            .iter()
            .zip(&x)
            .map(|(s, &v)| cramer(s, &[v], &CramerOpts::default()).unwrap().value)
            .sum();
        assert!((r.value - sum).abs() < 1e-9, "{} vs {}", r.value, sum);

        // the n-dimensional Newton path against the same quadrature oracle
        let forced = CramerOpts {
            method: LaplaceMethod::Quadrature1DTensor,
            ..CramerOpts::default()
        };
        let rf = cramer(&m, &x, &forced).unwrap();
        assert_eq!(rf.status, SolveStatus::Converged);
        assert!((rf.value - sum).abs() < 1e-7, "{} vs {}", rf.value, sum);
    }

    #[test]
    fn uniform_cramer_beats_any_grid_point() {
        let m = MeasureModel::uniform_cube(1, 1.0).unwrap();
        let p = Preset::Uniform { half_width: 0.5 };
        for x in [0.05, 0.2, 0.35, 0.45, -0.3] {
            let r = cramer(&m, &[x], &CramerOpts::default()).unwrap();
            assert_eq!(r.status, SolveStatus::Converged);
            let mut grid_best = f64::NEG_INFINITY;
            for i in -40_000..=40_000 {
                let xi = i as f64 / 200.0;
                grid_best = grid_best.max(x * xi - p.log_mgf(xi));
            }
            assert!(r.value >= grid_best - 1e-9, "below grid bound at {x}");
            assert!(r.value <= grid_best + 1e-3, "should equal the sup at {x}");
            // stationarity of the reported argmax
            assert!((p.dlog_mgf(r.argmax_xi[0]) - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn closed_component_transforms_match_quadrature_solver() {
        for (c, xs) in [
            (Custom1D::laplace().unwrap(), [-1.8, 0.4, 2.5]),
            (Custom1D::shifted_exponential().unwrap(), [-0.6, 0.4, 3.0]),
        ] {
            let m = MeasureModel::custom_1d(c.clone()).unwrap();
            for x in xs {
                let auto = cramer(&m, &[x], &CramerOpts::default()).unwrap();
                let forced = cramer(
                    &m,
                    &[x],
                    &CramerOpts {
                        method: LaplaceMethod::Quadrature1DTensor,
                        ..CramerOpts::default()
                    },
                )
                .unwrap();
                assert!(
                    (auto.value - forced.value).abs() < 1e-7,
                    "{:?} at {x}: {} vs {}",
                    c.preset(),
                    auto.value,
                    forced.value
                );
            }
        }
    }

    #[test]
    fn ball_marginal_mgf_layer_form_matches_direct() {
        // both branches integrate the same function; they must agree where
        // both are resolvable
        for n in [1usize, 3, 8] {
            let mgf = BallMgf::new(n).unwrap();
            for u in [5.0, 30.0, 50.0, 60.0] {
                let (la, ma, va) = mgf.tilted_direct(u);
                let (lb, mb, vb) = mgf.tilted_layer(u);
                assert!((la - lb).abs() < 1e-9 * (1.0 + la.abs()), "n={n} u={u}: {la} vs {lb}");
                assert!((ma - mb).abs() < 1e-9, "n={n} u={u} mean");
                assert!((va - vb).abs() < 1e-9 * (1.0 + va), "n={n} u={u} var");
            }
        }
    }

    #[test]
    fn ball_dimension_one_matches_uniform_interval() {
        let ball = MeasureModel::uniform_ball_unit(1).unwrap();
        let seg = MeasureModel::custom_1d(Custom1D::uniform(1.0).unwrap()).unwrap();
        for x in [0.1, 0.45, 0.8, -0.6] {
            let a = cramer(&ball, &[x], &CramerOpts::default()).unwrap();
            let b = cramer(&seg, &[x], &CramerOpts::default()).unwrap();
            assert!((a.value - b.value).abs() < 1e-8, "at {x}: {} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn ball_stationarity_and_radial_cache_agree() {
        let m = MeasureModel::uniform_ball_unit(5).unwrap();
        let cache = RadialCramer::new(&m).unwrap();
        let mut rng = stream(9).rng();
        use rand::Rng;
        for _ in 0..12 {
            let dir = sphere_direction(&mut rng, 5);
            let r: f64 = rng.gen_range(0.05..0.95);
            let x: Vec<f64> = dir.iter().map(|&d| d * r).collect();
            let res = cramer(&m, &x, &CramerOpts::default()).unwrap();
            assert_eq!(res.status, SolveStatus::Converged);
            // argmax satisfies grad Lambda(xi*) = x
            let g = grad_log_laplace(&m, &res.argmax_xi, &budget(10)).unwrap();
            let err: f64 = g.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(err < 1e-8 * (1.0 + r), "stationarity error {err}");
            let cached = cache.value(r);
            assert!(
                (cached - res.value).abs() < 1e-8 * (1.0 + res.value),
                "cache {} vs solve {}",
                cached,
                res.value
            );
            let tn = cache.tilt_norm(r);
            assert!((tn - norm(&res.argmax_xi)).abs() < 1e-6 * (1.0 + tn));
        }
        // outside the support
        assert_eq!(cache.value(1.0), f64::INFINITY);
    }

    #[test]
    fn points_outside_support_are_at_infinity() {
        let cube = MeasureModel::uniform_cube(2, 1.0).unwrap();
        let r = cramer(&cube, &[0.6, 0.0], &CramerOpts::default()).unwrap();
        assert_eq!(r.status, SolveStatus::AtInfinity);
        assert_eq!(r.value, f64::INFINITY);

        let shifted = MeasureModel::custom_1d(Custom1D::shifted_exponential().unwrap()).unwrap();
        let r = cramer(&shifted, &[-1.0], &CramerOpts::default()).unwrap();
        assert_eq!(r.status, SolveStatus::AtInfinity);

        let ball = MeasureModel::uniform_ball_unit(3).unwrap();
        let r = cramer(&ball, &[1.0, 0.0, 0.0], &CramerOpts::default()).unwrap();
        assert_eq!(r.status, SolveStatus::AtInfinity);
    }

    #[test]
    fn near_boundary_point_stays_finite_and_large() {
        let cube = MeasureModel::uniform_cube(1, 1.0).unwrap();
        let x = 0.5 - 1e-9;
        let r = cramer(&cube, &[x], &CramerOpts::default()).unwrap();
        assert!(r.value > 15.0, "Lambda*({x}) = {}", r.value);
        assert!(r.value.is_finite() || r.status == SolveStatus::AtInfinity);
    }

    #[test]
    fn sublevel_examples_and_monotonicity() {
        let g = MeasureModel::standard_gaussian(2).unwrap();
        let t = 0.4f64;
        let rad = (2.0 * t).sqrt();
        let opts = CramerOpts::default();
        assert_eq!(in_sublevel(&g, &[rad, 0.0], t, &opts).unwrap(), Sublevel::Boundary);
        assert_eq!(in_sublevel(&g, &[0.0, 0.0], t, &opts).unwrap(), Sublevel::Inside);
        assert_eq!(in_sublevel(&g, &[2.0, 1.0], t, &opts).unwrap(), Sublevel::Outside);

        let cube = MeasureModel::uniform_cube(1, 1.0).unwrap();
        assert_eq!(in_sublevel(&cube, &[0.49], 0.1, &opts).unwrap(), Sublevel::Outside);

        // nested sublevels
        let x = [0.3, -0.2];
        let mut prev_inside = false;
        for t in [0.02, 0.05, 0.1, 0.2, 0.5] {
            let v = in_sublevel(&g, &x, t, &opts).unwrap();
            let inside = v == Sublevel::Inside;
            assert!(!prev_inside || inside, "monotonicity broke at t = {t}");
            prev_inside = inside;
        }
        assert!(prev_inside);

        assert!(in_sublevel(&g, &[0.0, 0.0], 0.0, &opts).is_err());
    }

    #[test]
    fn tilted_measure_normalizes_and_centers_at_the_gradient() {
        let base = MeasureModel::custom_1d(Custom1D::uniform(0.5).unwrap()).unwrap();
        let tilt = TiltedMeasure::new(base.clone(), vec![2.0]).unwrap();
        // density integrates to one
        let mass = integrate(
            |z: f64| tilt.log_density(&[z]).exp(),
            -0.5,
            0.5,
            1e-12,
            1e-300,
            4096,
        )
        .value;
        assert!((mass - 1.0).abs() < 1e-10, "tilted mass {mass}");
        let bary = tilt.barycenter(&budget(11)).unwrap();
        let mean = integrate(
            |z: f64| z * tilt.log_density(&[z]).exp(),
            -0.5,
            0.5,
            1e-12,
            1e-300,
            4096,
        )
        .value;
        assert!((bary[0] - mean).abs() < 1e-10);
        assert!((bary[0] - 0.1565176427496657).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_laplace_is_consistent() {
        let m = MeasureModel::standard_gaussian(3).unwrap();
        let xi = vec![0.5, -0.5, 0.5];
        let l = log_laplace(
            &m,
            &xi,
            LaplaceMethod::MonteCarlo {
                samples: 1 << 17,
                stream: stream(12),
            },
        )
        .unwrap();
        let expect = 0.5 * dot(&xi, &xi);
        assert!((l - expect).abs() < 0.01, "MC Lambda {l} vs {expect}");
    }

    #[test]
    fn monte_carlo_overflow_is_a_precision_error() {
        let m = MeasureModel::uniform_cube(1, 1.0).unwrap();
        let r = log_laplace(
            &m,
            &[2000.0],
            LaplaceMethod::MonteCarlo {
                samples: 1000,
                stream: stream(13),
            },
        );
        assert!(matches!(r, Err(Error::Precision { .. })), "{r:?}");
    }

    #[test]
    fn importance_sampling_collapse_is_detected() {
        let m = MeasureModel::standard_gaussian(2).unwrap();
        let r = tilted_moments_mc(
            &m,
            &[12.0, 0.0],
            &SampleBudget {
                samples: 500,
                stream: stream(14),
            },
        );
        assert!(matches!(r, Err(Error::EstimatorDegenerate(_))), "{r:?}");
    }

    #[test]
    fn mc_cramer_batch_recovers_gaussian_rate() {
        let m = MeasureModel::standard_gaussian(2).unwrap();
        let mut rng = stream(15).rng();
        use rand::Rng;
        let points: Vec<Vec<f64>> = (0..6)
            .map(|_| {
                let d = sphere_direction(&mut rng, 2);
                let r: f64 = rng.gen_range(1.0..1.4);
                d.into_iter().map(|v| v * r).collect()
            })
            .collect();
        let opts = McBatchOpts {
            solve_samples: 1 << 15,
            value_samples: 1 << 20,
            chunk: 1 << 14,
            ..McBatchOpts::default()
        };
        let res = mc_cramer_batch(&m, &points, stream(16), &opts).unwrap();
        for (x, r) in points.iter().zip(&res) {
            let expect = 0.5 * dot(x, x);
            assert!(
                (r.value - expect).abs() < 0.02 * expect.max(0.5),
                "{} vs {expect}",
                r.value
            );
        }
    }

    #[test]
    fn forced_methods_respect_capability_limits() {
        let g = MeasureModel::standard_gaussian(2).unwrap();
        assert!(log_laplace(&g, &[0.1, 0.1], LaplaceMethod::Quadrature1DTensor).is_err());
        let ball = MeasureModel::uniform_ball_unit(3).unwrap();
        assert!(log_laplace(&ball, &[0.1, 0.0, 0.0], LaplaceMethod::ClosedForm).is_err());
        // laplace component at |xi| >= 1 has an infinite transform
        let lap = MeasureModel::custom_1d(Custom1D::laplace().unwrap()).unwrap();
        let l = log_laplace(&lap, &[1.5], LaplaceMethod::ClosedForm).unwrap();
        assert_eq!(l, f64::INFINITY);
        assert!(grad_log_laplace(&lap, &[1.5], &budget(17)).is_err());
    }

    #[test]
    fn early_exit_certifies_outside_quickly() {
        // Lambda* at 0.499 is large; the sweep to bracket it would cost many
        // iterations, but the early exit stops as soon as the lower bound
        // clears t.
        let cube = MeasureModel::uniform_cube(1, 1.0).unwrap();
        let v = in_sublevel(&cube, &[0.499], 0.25, &CramerOpts::default()).unwrap();
        assert_eq!(v, Sublevel::Outside);
    }

    #[test]
    fn tail_budget_type_is_shared_with_measures() {
        // both budget types carry (samples, stream); keep them separate on
        // purpose, but make sure they interconvert trivially
        let b = TailBudget {
            samples: 10,
            stream: stream(18),
        };
        let s = SampleBudget {
            samples: b.samples,
            stream: b.stream,
        };
        assert_eq!(s.samples, 10);
    }
}
