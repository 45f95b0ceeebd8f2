//! The supported family of centered log-concave probability measures:
//! cubes, Euclidean balls (unit radius or unit volume), the standard
//! Gaussian, general centered one-dimensional densities, and products of
//! those. A model knows how to sample, evaluate its log-density, and
//! compute directional tail probabilities, with exact paths wherever the
//! geometry allows and Monte Carlo otherwise.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::closedform::{gaussian_upper_tail, ln_gamma, BallTail};
use crate::error::{Error, Result};
use crate::interp::CubicHermite;
use crate::quad::integrate;
use crate::rng::{ball_point, normal_point, RngStream};
use crate::stats::proportion;

/// Unit vectors are accepted when their norm is within this of 1.
pub const UNIT_TOL: f64 = 1e-12;
/// Normalization and centering of user densities must hold to this.
pub const DENSITY_TOL: f64 = 1e-8;
const CDF_NODES: usize = 4096;
const CONCAVITY_NODES: usize = 1000;
// Unbounded supports are truncated where the log-density falls this far
// below its maximum. The margin serves the transform module: a tilt xi
// weighs the tail by e^{xi z}, and -80 keeps the lost tilted mass below
// 1e-8 for any tilt whose decay rate stays under half the density's.
const TRUNC_LOG: f64 = -80.0;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ln of the Lebesgue volume of the unit ball in dimension n.
pub fn unit_ball_log_volume(n: usize) -> f64 {
    let nf = n as f64;
    0.5 * nf * std::f64::consts::PI.ln() - ln_gamma(0.5 * nf + 1.0)
}

#[derive(Clone, Debug)]
pub enum Support {
    /// Per-axis closed bounds; infinities allowed.
    Box(Vec<(f64, f64)>),
    /// Centered Euclidean ball of the given radius.
    Ball(f64),
    All,
}

impl Support {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Support::Box(b) => b.iter().zip(x).all(|(&(lo, hi), &v)| v >= lo && v <= hi),
            Support::Ball(r) => dot(x, x) <= r * r,
            Support::All => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    /// Lambda evaluable from analytic formulas alone.
    pub closed_form_laplace: bool,
    /// Lambda* evaluable without running an optimizer.
    pub closed_form_cramer: bool,
    pub exact_depth: bool,
    pub exact_tail: bool,
}

/// Named one-dimensional components with fully analytic transforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    /// Uniform on [-w, w].
    Uniform { half_width: f64 },
    /// Density e^{-|x|}/2.
    Laplace,
    /// Density e^{-(x+1)} on [-1, inf); centered.
    ShiftedExponential,
}

/// ln(sinh u / u), stable for small u.
fn ln_sinhc(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-2 {
        let u2 = u * u;
        u2 / 6.0 - u2 * u2 / 180.0 + u2 * u2 * u2 / 2835.0
    } else {
        // sinh u / u = (1 - e^{-2|u|}) e^{|u|} / (2|u|), overflow-free in logs
        (-(-2.0 * a).exp_m1()).ln() + a - (2.0 * a).ln()
    }
}

/// coth u - 1/u, stable for small u.
fn langevin(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-2 {
        let u2 = u * u;
        u / 3.0 - u * u2 / 45.0 + 2.0 * u2 * u2 * u / 945.0
    } else {
        1.0 / u.tanh() - 1.0 / u
    }
}

/// d/du (coth u - 1/u), stable for small u.
fn langevin_derivative(u: f64) -> f64 {
    let a = u.abs();
    if a < 1e-2 {
        let u2 = u * u;
        1.0 / 3.0 - u2 / 15.0 + 2.0 * u2 * u2 / 189.0
    } else {
        let s = u.sinh();
        1.0 / (u * u) - 1.0 / (s * s)
    }
}

impl Preset {
    /// Open support interval.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Preset::Uniform { half_width } => (-half_width, half_width),
            Preset::Laplace => (f64::NEG_INFINITY, f64::INFINITY),
            Preset::ShiftedExponential => (-1.0, f64::INFINITY),
        }
    }

    /// Open interval of xi where the log-Laplace transform is finite.
    pub fn mgf_domain(&self) -> (f64, f64) {
        match *self {
            Preset::Uniform { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Preset::Laplace => (-1.0, 1.0),
            Preset::ShiftedExponential => (f64::NEG_INFINITY, 1.0),
        }
    }

    /// ln E e^{xi X}; +inf outside the finiteness domain.
    pub fn log_mgf(&self, xi: f64) -> f64 {
        match *self {
            Preset::Uniform { half_width } => ln_sinhc(half_width * xi),
            Preset::Laplace => {
                if xi.abs() < 1.0 {
                    -(-xi * xi).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
            Preset::ShiftedExponential => {
                if xi < 1.0 {
                    -xi - (-xi).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn dlog_mgf(&self, xi: f64) -> f64 {
        match *self {
            Preset::Uniform { half_width } => half_width * langevin(half_width * xi),
            Preset::Laplace => 2.0 * xi / (1.0 - xi * xi),
            Preset::ShiftedExponential => xi / (1.0 - xi),
        }
    }

    pub fn d2log_mgf(&self, xi: f64) -> f64 {
        match *self {
            Preset::Uniform { half_width } => {
                half_width * half_width * langevin_derivative(half_width * xi)
            }
            Preset::Laplace => {
                let d = 1.0 - xi * xi;
                2.0 * (1.0 + xi * xi) / (d * d)
            }
            Preset::ShiftedExponential => {
                let d = 1.0 - xi;
                1.0 / (d * d)
            }
        }
    }

    /// Analytic Legendre transform (value, argmax) where one exists, for x
    /// strictly inside the support.
    pub fn cramer_closed(&self, x: f64) -> Option<(f64, f64)> {
        match *self {
            Preset::Uniform { .. } => None,
            Preset::Laplace => {
                let s = (1.0 + x * x).sqrt();
                let xi = if x == 0.0 { 0.0 } else { (s - 1.0) / x };
                Some((s - 1.0 - (0.5 * (1.0 + s)).ln(), xi))
            }
            Preset::ShiftedExponential => Some((x - x.ln_1p(), x / (1.0 + x))),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Preset::Uniform { half_width } => {
                if x.abs() <= half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Preset::Laplace => -x.abs() - std::f64::consts::LN_2,
            Preset::ShiftedExponential => {
                if x >= -1.0 {
                    -(x + 1.0)
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Preset::Uniform { half_width } => ((x + half_width) / (2.0 * half_width)).clamp(0.0, 1.0),
            Preset::Laplace => {
                if x < 0.0 {
                    0.5 * x.exp()
                } else {
                    1.0 - 0.5 * (-x).exp()
                }
            }
            Preset::ShiftedExponential => {
                if x < -1.0 {
                    0.0
                } else {
                    -(-(x + 1.0)).exp_m1()
                }
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Preset::Uniform { half_width } => half_width * half_width / 3.0,
            Preset::Laplace => 2.0,
            Preset::ShiftedExponential => 1.0,
        }
    }
}

struct CdfCache {
    x: Vec<f64>,
    c: Vec<f64>,
    spline: CubicHermite,
}

impl CdfCache {
    fn cdf(&self, t: f64) -> f64 {
        if t <= self.x[0] {
            return 0.0;
        }
        if t >= *self.x.last().unwrap() {
            return 1.0;
        }
        self.spline.eval(t).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.x[0];
        }
        if u >= 1.0 {
            return *self.x.last().unwrap();
        }
        let k = self.c.partition_point(|&v| v <= u).saturating_sub(1).min(self.x.len() - 2);
        let (mut lo, mut hi) = (self.x[k], self.x[k + 1]);
        let (clo, chi) = (self.c[k], self.c[k + 1]);
        let mut t = if chi > clo {
            lo + (hi - lo) * (u - clo) / (chi - clo)
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..60 {
            let f = self.spline.eval(t) - u;
            if f.abs() <= 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.spline.eval_derivative(t);
            let step = if d > 0.0 { t - f / d } else { f64::NAN };
            t = if step.is_finite() && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }
}

/// A centered log-concave measure on an interval of the real line,
/// validated at construction and carrying an inverse-CDF sampling cache.
#[derive(Clone)]
pub struct Custom1D {
    log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lower: f64,
    upper: f64,
    window: (f64, f64),
    log_norm: f64,
    variance: f64,
    max_log_density: f64,
    cache: Arc<CdfCache>,
    preset: Option<Preset>,
}

impl fmt::Debug for Custom1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Custom1D")
            .field("preset", &self.preset)
            .field("support", &(self.lower, self.upper))
            .field("window", &self.window)
            .field("variance", &self.variance)
            .finish()
    }
}

impl Custom1D {
    pub fn uniform(half_width: f64) -> Result<Custom1D> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid_measure("uniform half-width must be positive and finite"));
        }
        let p = Preset::Uniform { half_width };
        Self::build(
            Arc::new(move |x| p.log_density(x)),
            -half_width,
            half_width,
            Some(p),
        )
    }

    pub fn laplace() -> Result<Custom1D> {
        let p = Preset::Laplace;
        Self::build(
            Arc::new(move |x| p.log_density(x)),
            f64::NEG_INFINITY,
            f64::INFINITY,
            Some(p),
        )
    }

    pub fn shifted_exponential() -> Result<Custom1D> {
        let p = Preset::ShiftedExponential;
        Self::build(
            Arc::new(move |x| p.log_density(x)),
            -1.0,
            f64::INFINITY,
            Some(p),
        )
    }

    /// General centered log-concave density on (lower, upper), already
    /// normalized. Concavity, unit mass, and zero mean are verified.
    pub fn from_log_density(
        log_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower: f64,
        upper: f64,
    ) -> Result<Custom1D> {
        Self::build(Arc::new(log_density), lower, upper, None)
    }

    fn build(
        ld: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lower: f64,
        upper: f64,
        preset: Option<Preset>,
    ) -> Result<Custom1D> {
        if !(upper > lower) {
            return Err(Error::invalid_measure("support interval is empty"));
        }
        // Coarse mode scan over the visible part of the support.
        let scan_lo = lower.max(-8.0);
        let scan_hi = upper.min(8.0);
        let mut mode_x = 0.5 * (scan_lo + scan_hi);
        let mut mode_ld = f64::NEG_INFINITY;
        for i in 0..=128 {
            let t = scan_lo + (scan_hi - scan_lo) * i as f64 / 128.0;
            let v = ld(t);
            if v > mode_ld {
                mode_ld = v;
                mode_x = t;
            }
        }
        if !mode_ld.is_finite() {
            return Err(Error::invalid_measure("density vanishes on the scanned support"));
        }
        let expand = |dir: f64, bound: f64| -> Result<f64> {
            if bound.is_finite() {
                return Ok(bound);
            }
            let mut step = 1.0;
            for _ in 0..200 {
                let t = mode_x + dir * step;
                if ld(t) < mode_ld + TRUNC_LOG {
                    return Ok(t);
                }
                step *= 2.0;
            }
            Err(Error::invalid_measure("density tail does not decay on the unbounded side"))
        };
        let window = (expand(-1.0, lower)?, expand(1.0, upper)?);

        // Midpoint concavity of the log-density on an even grid.
        let m = CONCAVITY_NODES;
        let node = |i: usize| window.0 + (window.1 - window.0) * i as f64 / (m - 1) as f64;
        let lds: Vec<f64> = (0..m).map(|i| ld(node(i))).collect();
        for i in 1..m - 1 {
            let lmid = 0.5 * (lds[i - 1] + lds[i + 1]);
            if lds[i] < lmid - 1e-12 {
                return Err(Error::invalid_measure(format!(
                    "log-density is not concave near x = {:.6}",
                    node(i)
                )));
            }
        }

        let shifted = |x: f64| {
            let v = ld(x) - mode_ld;
            if v.is_finite() {
                v.exp()
            } else {
                0.0
            }
        };
        let q_mass = integrate(&shifted, window.0, window.1, 1e-12, 1e-300, 20_000);
        let mass = q_mass.value * mode_ld.exp();
        if (mass - 1.0).abs() > DENSITY_TOL {
            return Err(Error::invalid_measure(format!(
                "density integrates to {mass:.10}, not 1"
            )));
        }
        let log_norm = mode_ld + q_mass.value.ln();
        let density = |x: f64| {
            let v = ld(x) - log_norm;
            if v.is_finite() {
                v.exp()
            } else {
                0.0
            }
        };
        let mean = integrate(&|x| x * density(x), window.0, window.1, 1e-11, 1e-12, 20_000).value;
        if mean.abs() > DENSITY_TOL {
            return Err(Error::invalid_measure(format!("density mean is {mean:.3e}, not 0")));
        }
        let second = integrate(&|x| x * x * density(x), window.0, window.1, 1e-11, 1e-12, 20_000).value;
        let variance = second - mean * mean;
        if !(variance > 0.0) {
            return Err(Error::invalid_measure("density has no positive variance"));
        }

        // Cumulative masses per grid interval. Panels refine adaptively so a
        // density kink inside one interval cannot bias the normalizing total;
        // node slopes are the exact density so the spline is C^1-consistent.
        let nodes: Vec<f64> = (0..CDF_NODES)
            .map(|i| window.0 + (window.1 - window.0) * i as f64 / (CDF_NODES - 1) as f64)
            .collect();
        let mut cdf = Vec::with_capacity(CDF_NODES);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += integrate(&density, w[0], w[1], 1e-13, 1e-18, 256).value;
            cdf.push(acc);
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::invalid_measure("density mass vanishes on its window"));
        }
        for v in cdf.iter_mut() {
            *v /= total;
        }
        let slopes: Vec<f64> = nodes.iter().map(|&t| density(t) / total).collect();
        let spline = CubicHermite::monotone(nodes.clone(), cdf.clone(), slopes)?;
        let max_log_density = lds
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - log_norm;

        Ok(Custom1D {
            log_density: ld,
            lower,
            upper,
            window,
            log_norm,
            variance,
            max_log_density,
            cache: Arc::new(CdfCache { x: nodes, c: cdf, spline }),
            preset,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Finite window the quadrature caches cover; equals the support except
    /// on truncated unbounded sides.
    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn preset(&self) -> Option<Preset> {
        self.preset
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn max_density(&self) -> f64 {
        self.max_log_density.exp()
    }

    /// Normalized log-density; -inf outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            return f64::NEG_INFINITY;
        }
        let v = (self.log_density)(x);
        if v.is_finite() {
            v - self.log_norm
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.preset {
            Some(p) => p.cdf(x),
            None => self.cache.cdf(x),
        }
    }

    /// Upper tail P(X >= c).
    pub fn tail(&self, c: f64) -> f64 {
        (1.0 - self.cdf(c)).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.cache.quantile(u)
    }

    /// Inverse-CDF draw through the cached spline.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.quantile(rng.gen::<f64>())
    }
}

#[derive(Clone, Debug)]
pub enum Kind {
    UniformCube { side: f64 },
    UniformBallVol1,
    UniformBallUnit,
    StandardGaussian,
    Product(Vec<Custom1D>),
    Custom1D(Custom1D),
}

/// One of the supported measures, with geometry and capability metadata
/// fixed at construction. Immutable and cheap to clone.
#[derive(Clone, Debug)]
pub struct MeasureModel {
    kind: Kind,
    dimension: usize,
    support: Support,
    capabilities: Capabilities,
    /// Ball radius for ball kinds, 0 otherwise.
    radius: f64,
    ball: Option<Arc<BallTail>>,
}

/// Sampling budget for Monte Carlo tail estimation.
#[derive(Clone, Copy, Debug)]
pub struct TailBudget {
    pub samples: usize,
    pub stream: RngStream,
}

#[derive(Clone, Copy, Debug)]
pub struct TailEstimate {
    pub value: f64,
    pub ci: f64,
    pub exact: bool,
}

impl MeasureModel {
    pub fn uniform_cube(dimension: usize, side: f64) -> Result<MeasureModel> {
        if dimension == 0 {
            return Err(Error::invalid_measure("dimension must be positive"));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::invalid_measure("cube side must be positive and finite"));
        }
        let h = 0.5 * side;
        Ok(MeasureModel {
            kind: Kind::UniformCube { side },
            dimension,
            support: Support::Box(vec![(-h, h); dimension]),
            capabilities: Capabilities {
                closed_form_laplace: true,
                closed_form_cramer: false,
                exact_depth: dimension == 1,
                exact_tail: true,
            },
            radius: 0.0,
            ball: None,
        })
    }

    fn ball(dimension: usize, radius: f64, kind: Kind) -> Result<MeasureModel> {
        if dimension == 0 {
            return Err(Error::invalid_measure("dimension must be positive"));
        }
        Ok(MeasureModel {
            kind,
            dimension,
            support: Support::Ball(radius),
            capabilities: Capabilities {
                closed_form_laplace: false,
                closed_form_cramer: false,
                exact_depth: true,
                exact_tail: true,
            },
            radius,
            ball: Some(Arc::new(BallTail::new(dimension as u64)?)),
        })
    }

    pub fn uniform_ball_unit(dimension: usize) -> Result<MeasureModel> {
        Self::ball(dimension, 1.0, Kind::UniformBallUnit)
    }

    /// Ball scaled so its Lebesgue volume is 1.
    pub fn uniform_ball_vol1(dimension: usize) -> Result<MeasureModel> {
        let radius = (-unit_ball_log_volume(dimension) / dimension as f64).exp();
        Self::ball(dimension, radius, Kind::UniformBallVol1)
    }

    pub fn standard_gaussian(dimension: usize) -> Result<MeasureModel> {
        if dimension == 0 {
            return Err(Error::invalid_measure("dimension must be positive"));
        }
        Ok(MeasureModel {
            kind: Kind::StandardGaussian,
            dimension,
            support: Support::All,
            capabilities: Capabilities {
                closed_form_laplace: true,
                closed_form_cramer: true,
                exact_depth: true,
                exact_tail: true,
            },
            radius: 0.0,
            ball: None,
        })
    }

    pub fn product(components: Vec<Custom1D>) -> Result<MeasureModel> {
        if components.is_empty() {
            return Err(Error::invalid_measure("product needs at least one component"));
        }
        let dimension = components.len();
        let bounds = components.iter().map(|c| c.support()).collect();
        let all_preset = components.iter().all(|c| c.preset().is_some());
        let all_closed_cramer = components.iter().all(|c| {
            matches!(c.preset(), Some(Preset::Laplace | Preset::ShiftedExponential))
        });
        Ok(MeasureModel {
            kind: Kind::Product(components),
            dimension,
            support: Support::Box(bounds),
            capabilities: Capabilities {
                closed_form_laplace: all_preset,
                closed_form_cramer: all_closed_cramer,
                exact_depth: dimension == 1,
                exact_tail: true,
            },
            radius: 0.0,
            ball: None,
        })
    }

    pub fn custom_1d(component: Custom1D) -> Result<MeasureModel> {
        let closed_laplace = component.preset().is_some();
        let closed_cramer = matches!(
            component.preset(),
            Some(Preset::Laplace | Preset::ShiftedExponential)
        );
        let bounds = vec![component.support()];
        Ok(MeasureModel {
            kind: Kind::Custom1D(component),
            dimension: 1,
            support: Support::Box(bounds),
            capabilities: Capabilities {
                closed_form_laplace: closed_laplace,
                closed_form_cramer: closed_cramer,
                exact_depth: true,
                exact_tail: true,
            },
            radius: 0.0,
            ball: None,
        })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn capabilities(&self) -> Capabilities {
        self.capabilities
    }

    /// Ball radius for ball kinds.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Radial tail table for ball kinds.
    pub fn ball_tail(&self) -> Option<&BallTail> {
        self.ball.as_deref()
    }

    /// The one-dimensional components of separable kinds.
    pub fn components(&self) -> Option<&[Custom1D]> {
        match &self.kind {
            Kind::Product(c) => Some(c),
            Kind::Custom1D(c) => Some(std::slice::from_ref(c)),
            _ => None,
        }
    }

    pub fn marginal_variances(&self) -> Vec<f64> {
        match &self.kind {
            Kind::UniformCube { side } => vec![side * side / 12.0; self.dimension],
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                let r2 = self.radius * self.radius;
                vec![r2 / (self.dimension as f64 + 2.0); self.dimension]
            }
            Kind::StandardGaussian => vec![1.0; self.dimension],
            Kind::Product(cs) => cs.iter().map(|c| c.variance()).collect(),
            Kind::Custom1D(c) => vec![c.variance()],
        }
    }

    pub fn max_marginal_variance(&self) -> f64 {
        self.marginal_variances()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Essential supremum of the density.
    pub fn density_sup(&self) -> f64 {
        match &self.kind {
            Kind::UniformCube { side } => side.powi(-(self.dimension as i32)),
            Kind::UniformBallVol1 => 1.0,
            Kind::UniformBallUnit => (-unit_ball_log_volume(self.dimension)).exp(),
            Kind::StandardGaussian => {
                (-(self.dimension as f64) * 0.5 * (2.0 * std::f64::consts::PI).ln()).exp()
            }
            Kind::Product(cs) => cs.iter().map(|c| c.max_density()).product(),
            Kind::Custom1D(c) => c.max_density(),
        }
    }

    pub fn draw_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.draw_into(rng, &mut out);
        out
    }

    pub fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        assert_eq!(out.len(), self.dimension, "output buffer has wrong length");
        match &self.kind {
            Kind::UniformCube { side } => {
                for v in out.iter_mut() {
                    *v = (rng.gen::<f64>() - 0.5) * side;
                }
            }
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                let p = ball_point(rng, self.dimension, self.radius);
                out.copy_from_slice(&p);
            }
            Kind::StandardGaussian => {
                let p = normal_point(rng, self.dimension);
                out.copy_from_slice(&p);
            }
            Kind::Product(cs) => {
                for (v, c) in out.iter_mut().zip(cs) {
                    *v = c.draw(rng);
                }
            }
            Kind::Custom1D(c) => out[0] = c.draw(rng),
        }
    }

    /// count i.i.d. points, row-major count x n. Deterministic in
    /// (model, count, stream).
    pub fn sample_flat(&self, count: usize, stream: RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let n = self.dimension;
        let mut out = vec![0.0; count * n];
        for i in 0..count {
            self.draw_into(&mut rng, &mut out[i * n..(i + 1) * n]);
        }
        out
    }

    pub fn sample(&self, count: usize, stream: RngStream) -> Vec<Vec<f64>> {
        let flat = self.sample_flat(count, stream);
        flat.chunks(self.dimension).map(|c| c.to_vec()).collect()
    }

    /// ln f(x); -inf outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dimension, "point has wrong length");
        match &self.kind {
            Kind::UniformCube { side } => {
                if self.support.contains(x) {
                    -(self.dimension as f64) * side.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                if self.support.contains(x) {
                    -(unit_ball_log_volume(self.dimension)
                        + self.dimension as f64 * self.radius.ln())
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::StandardGaussian => {
                -0.5 * dot(x, x)
                    - 0.5 * self.dimension as f64 * (2.0 * std::f64::consts::PI).ln()
            }
            Kind::Product(cs) => cs.iter().zip(x).map(|(c, &v)| c.log_density(v)).sum(),
            Kind::Custom1D(c) => c.log_density(x[0]),
        }
    }

    /// Density of the first coordinate's marginal, for low-dimensional
    /// sampler cross-checks.
    pub fn first_marginal_density(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::UniformCube { side } => {
                if t.abs() <= 0.5 * side {
                    1.0 / side
                } else {
                    0.0
                }
            }
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                let r = t / self.radius;
                if r.abs() >= 1.0 {
                    0.0
                } else {
                    let bt = self.ball.as_ref().unwrap();
                    bt.c_n() * (1.0 - r * r).powf((self.dimension as f64 - 1.0) / 2.0)
                        / self.radius
                }
            }
            Kind::StandardGaussian => {
                (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
            }
            Kind::Product(cs) => cs[0].log_density(t).exp(),
            Kind::Custom1D(c) => c.log_density(t).exp(),
        }
    }

    /// mu({z : <z - x, theta> >= 0}) for a unit direction theta.
    pub fn directional_tail(
        &self,
        x: &[f64],
        theta: &[f64],
        budget: &TailBudget,
    ) -> Result<TailEstimate> {
        assert_eq!(x.len(), self.dimension, "point has wrong length");
        assert_eq!(theta.len(), self.dimension, "direction has wrong length");
        let norm = dot(theta, theta).sqrt();
        if norm == 0.0 {
            return Err(Error::domain("direction has zero norm"));
        }
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::domain(format!(
                "direction norm {norm:.3e} is not 1 within {UNIT_TOL:.0e}"
            )));
        }
        let c = dot(x, theta);
        let exact = |value: f64| {
            Ok(TailEstimate {
                value: value.clamp(0.0, 1.0),
                ci: 0.0,
                exact: true,
            })
        };
        match &self.kind {
            Kind::StandardGaussian => exact(gaussian_upper_tail(c)),
            Kind::UniformBallVol1 | Kind::UniformBallUnit => {
                let r = (c / self.radius).clamp(-1.0, 1.0);
                exact(self.ball.as_ref().unwrap().tail(r))
            }
            Kind::UniformCube { side } => match axis_of(theta) {
                Some((j, sign)) => {
                    let p = Preset::Uniform { half_width: 0.5 * side };
                    let _ = j;
                    exact(if sign > 0.0 { 1.0 - p.cdf(c) } else { p.cdf(-c) })
                }
                None => self.tail_monte_carlo(x, theta, c, budget),
            },
            Kind::Product(cs) => match axis_of(theta) {
                Some((j, sign)) => exact(if sign > 0.0 {
                    cs[j].tail(c)
                } else {
                    cs[j].cdf(-c)
                }),
                None => self.tail_monte_carlo(x, theta, c, budget),
            },
            Kind::Custom1D(comp) => {
                // theta is +-1 in one dimension
                if theta[0] > 0.0 {
                    exact(comp.tail(c))
                } else {
                    exact(comp.cdf(-c))
                }
            }
        }
    }

    fn tail_monte_carlo(
        &self,
        _x: &[f64],
        theta: &[f64],
        c: f64,
        budget: &TailBudget,
    ) -> Result<TailEstimate> {
        let mut rng = budget.stream.rng();
        let mut buf = vec![0.0; self.dimension];
        let mut hits = 0u64;
        for _ in 0..budget.samples {
            self.draw_into(&mut rng, &mut buf);
            if dot(&buf, theta) >= c {
                hits += 1;
            }
        }
        let p = proportion(hits, budget.samples as u64);
        Ok(TailEstimate {
            value: p.estimate,
            ci: p.ci_half_width,
            exact: false,
        })
    }
}

/// Detects +-axis directions: returns (axis, sign) when theta is a signed
/// standard basis vector within the unit tolerance.
fn axis_of(theta: &[f64]) -> Option<(usize, f64)> {
    let mut axis = None;
    for (j, &v) in theta.iter().enumerate() {
        if v.abs() > UNIT_TOL {
            if axis.is_some() {
                return None;
            }
            if (v.abs() - 1.0).abs() > UNIT_TOL {
                return None;
            }
            axis = Some((j, v.signum()));
        }
    }
    axis
}
