//! Threshold sweeps: how the expected measure of a random polytope with
//! N = exp(rho n) generators climbs from 0 to 1 as rho crosses
//! E(Lambda*)/n, together with per-row upper and lower envelope bounds.
//!
//! The upper envelope minimizes mu(B_t) + N exp(-t) over a grid of rate
//! sublevel sets B_t; the lower envelope maximizes
//! mu(B_t) (1 - 2 C(N,n) (1 - phi_min)^{N-n}) with phi_min the smallest
//! depth on B_t. Both reuse one sublevel grid per sweep. All rows of a
//! sweep share one random stream, so estimates at growing N are coupled
//! through nested generator prefixes and identical test points.

use crate::analysis::{cramer_moments, MomentOpts, Rate};
use crate::closedform::{gaussian_upper_tail, ln_gamma};
use crate::depth::{depth, DepthOpts};
use crate::error::{Error, Result};
use crate::measures::{Custom1D, Kind, MeasureModel};
use crate::parallel::par_chunked;
use crate::polytope::estimate_measure;
use crate::quad::integrate;
use crate::rng::RngStream;
use crate::transform::{cramer, CramerOpts, RadialCramer, SolveStatus};

/// One resolved sweep row; the CSV columns are these fields in order.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub n: usize,
    pub rho: f64,
    /// Generator count round(exp(rho n)), clamped up to n + 1.
    pub count: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
}

pub const CSV_HEADER: &str = "n,rho,count,estimate,stderr,upper_bound,lower_bound";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            self.rho,
            self.count,
            self.estimate,
            self.stderr,
            self.upper_bound,
            self.lower_bound
        )
    }
}

/// A grid value whose generator count exceeded the cap.
#[derive(Clone, Debug)]
pub struct SkippedRho {
    pub rho: f64,
    pub count_required: f64,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedRho>,
}

impl Sweep {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOpts {
    pub trials: usize,
    pub test_points: usize,
    /// Draws behind each Monte Carlo sublevel mass on the bound grid.
    pub mc_samples: usize,
    /// Rows whose generator count would exceed this are skipped.
    pub n_max: u64,
    pub stream: RngStream,
    /// Direction-search effort for plug-in minimum depth values.
    pub depth_starts: usize,
    pub depth_samples: usize,
    pub depth_steps: usize,
}

impl SweepOpts {
    pub fn new(stream: RngStream) -> SweepOpts {
        SweepOpts {
            trials: 32,
            test_points: 1024,
            mc_samples: 1 << 14,
            n_max: 1_000_000,
            stream,
            depth_starts: 8,
            depth_samples: 1 << 13,
            depth_steps: 12,
        }
    }
}

/// One sublevel set B_t = { Lambda* <= t } with its mass and the
/// smallest depth it contains.
#[derive(Clone, Copy, Debug)]
struct GridPoint {
    t: f64,
    mu_bt: f64,
    phi_min: f64,
}

fn ln_choose(count: u64, n: usize) -> f64 {
    let m = count as f64;
    let k = n as f64;
    ln_gamma(m + 1.0) - ln_gamma(k + 1.0) - ln_gamma(m - k + 1.0)
}

/// Gaussian sublevel mass: B_t is the ball of radius sqrt(2t), so the
/// mass is the radial chi integral and the minimum depth sits on its
/// boundary sphere.
fn gaussian_grid_point(n: usize, t: f64) -> GridPoint {
    let nf = n as f64;
    let r = (2.0 * t).sqrt();
    let log_norm = (0.5 * nf - 1.0) * std::f64::consts::LN_2 + ln_gamma(0.5 * nf);
    let q = integrate(
        |s: f64| ((nf - 1.0) * s.ln() - 0.5 * s * s - log_norm).exp(),
        0.0,
        r,
        1e-12,
        1e-15,
        4096,
    );
    GridPoint {
        t,
        mu_bt: q.value.clamp(0.0, 1.0),
        phi_min: gaussian_upper_tail(r),
    }
}

/// Ball sublevel mass: invert the radial rate profile, then the mass is
/// (r/R)^n and the minimum depth is the radial tail at the boundary.
fn ball_grid_point(model: &MeasureModel, rc: &RadialCramer, t: f64) -> Result<GridPoint> {
    let radius = model.radius();
    let tail = model
        .ball_tail()
        .ok_or_else(|| Error::domain("ball sublevel grid needs the radial tail"))?;
    let mut lo = 0.0;
    let mut hi = radius * (1.0 - 1e-12);
    if rc.value(hi) <= t {
        lo = hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rc.value(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi) / radius;
    Ok(GridPoint {
        t,
        mu_bt: r.powi(model.dimension() as i32).clamp(0.0, 1.0),
        phi_min: tail.tail(r.clamp(0.0, 1.0)),
    })
}

/// Inverse of a one-dimensional rate on the right branch by bisection;
/// None when the target exceeds the rate at the trimmed window edge.
fn invert_component_rate(comp: &Custom1D, target: f64) -> Result<Option<f64>> {
    if target <= 0.0 {
        return Ok(Some(0.0));
    }
    let model = MeasureModel::custom_1d(comp.clone())?;
    let copts = CramerOpts::default();
    let rate = |x: f64| -> Result<Option<f64>> {
        let r = cramer(&model, &[x], &copts)?;
        Ok((r.status == SolveStatus::Converged).then_some(r.value))
    };
    let (_, wb) = comp.window();
    let mut hi = wb - 1e-7 * wb.abs().max(1.0);
    let mut hi_val = rate(hi)?;
    // retreat from the edge until the solver certifies a value there
    for _ in 0..24 {
        if hi_val.is_some() {
            break;
        }
        hi = 0.5 * hi;
        hi_val = rate(hi)?;
    }
    match hi_val {
        Some(v) if v >= target => {}
        _ => return Ok(None),
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match rate(mid)? {
            Some(v) if v < target => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Separable sublevel grid: one Monte Carlo pass scores every t at once,
/// and the minimum depth is a plug-in direction-search value at boundary
/// candidates (equal rate split across coordinates, and all rate in one
/// coordinate), deflated by its interval and clamped at zero.
fn separable_grid(
    model: &MeasureModel,
    ts: &[f64],
    opts: &SweepOpts,
) -> Result<Vec<GridPoint>> {
    let n = model.dimension();
    let rate = Rate::new(model)?;
    let counts = par_chunked(
        opts.mc_samples as u64,
        2048,
        |c, _start, len| {
            let pts = model.sample_flat(len as usize, opts.stream.substream(1_000_000 + c));
            let mut hits = vec![0u64; ts.len()];
            for x in pts.chunks(n) {
                if let Some(v) = rate.eval(model, x) {
                    for (h, &t) in hits.iter_mut().zip(ts) {
                        if v <= t {
                            *h += 1;
                        }
                    }
                }
            }
            hits
        },
        vec![0u64; ts.len()],
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            a
        },
    );
    let comps: Vec<Custom1D> = match model.kind() {
        Kind::UniformCube { side } => vec![Custom1D::uniform(0.5 * side)?; n],
        Kind::Product(cs) => cs.to_vec(),
        Kind::Custom1D(c) => vec![c.clone()],
        _ => unreachable!("separable kinds only"),
    };
    let mut grid = Vec::with_capacity(ts.len());
    for (i, &t) in ts.iter().enumerate() {
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        let mut diag = Vec::with_capacity(n);
        for comp in &comps {
            match invert_component_rate(comp, t / n as f64)? {
                Some(a) => diag.push(a),
                None => {
                    diag.clear();
                    break;
                }
            }
        }
        if diag.len() == n {
            candidates.push(diag);
        }
        if let Some(a) = invert_component_rate(&comps[0], t)? {
            let mut axis = vec![0.0; n];
            axis[0] = a;
            candidates.push(axis);
        }
        if candidates.is_empty() {
            return Err(Error::precision(
                format!("no boundary candidate for sublevel t = {t:.6e}"),
                0.0,
            ));
        }
        let mut phi_min = f64::INFINITY;
        for (j, x) in candidates.iter().enumerate() {
            let mut dopts =
                DepthOpts::new(opts.stream.substream(2_000_000 + (i * 4 + j) as u64));
            dopts.starts = opts.depth_starts;
            dopts.tail_samples = opts.depth_samples;
            dopts.descent_steps = opts.depth_steps;
            let d = depth(model, x, &dopts)?;
            phi_min = phi_min.min((d.phi - d.ci).max(0.0));
        }
        grid.push(GridPoint {
            t,
            mu_bt: counts[i] as f64 / opts.mc_samples as f64,
            phi_min,
        });
    }
    Ok(grid)
}

fn bound_grid(model: &MeasureModel, mean: f64, opts: &SweepOpts) -> Result<Vec<GridPoint>> {
    let ts: Vec<f64> = (5..=15).map(|k| mean * (k as f64 / 10.0)).collect();
    match model.kind() {
        Kind::StandardGaussian => Ok(ts
            .iter()
            .map(|&t| gaussian_grid_point(model.dimension(), t))
            .collect()),
        Kind::UniformBallVol1 | Kind::UniformBallUnit => {
            let rc = RadialCramer::new(model)?;
            ts.iter().map(|&t| ball_grid_point(model, &rc, t)).collect()
        }
        _ => separable_grid(model, &ts, opts),
    }
}

/// (upper, lower) envelope values for a row with the given generator
/// count, evaluated on the shared sublevel grid.
fn row_bounds(grid: &[GridPoint], n: usize, count: u64) -> (f64, f64) {
    let mut upper = f64::INFINITY;
    let mut lower = 0.0f64;
    let excess = (count - n as u64) as f64;
    let ln_c = ln_choose(count, n);
    for g in grid {
        upper = upper.min(g.mu_bt + count as f64 * (-g.t).exp());
        let ex = std::f64::consts::LN_2 + ln_c + excess * (-g.phi_min).ln_1p();
        if ex < 0.0 {
            lower = lower.max(g.mu_bt * (1.0 - ex.exp()));
        }
    }
    (upper.clamp(0.0, 1.0), lower.clamp(0.0, 1.0))
}

/// Measure-vs-rho sweep. Rows share the options' stream, so growing
/// generator counts reuse nested sample prefixes and identical test
/// points; grid values whose count exceeds the cap are skipped with the
/// reason recorded.
pub fn sweep(model: &MeasureModel, rho_grid: &[f64], opts: &SweepOpts) -> Result<Sweep> {
    if rho_grid.is_empty() {
        return Err(Error::domain("empty rho grid"));
    }
    let n = model.dimension();
    let mean = cramer_moments(model, &MomentOpts::new(opts.stream.substream(3_000_000)))?.mean;
    let grid = bound_grid(model, mean, opts)?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &rho in rho_grid {
        let raw = (rho * n as f64).exp();
        if !raw.is_finite() || raw.round() > opts.n_max as f64 {
            skipped.push(SkippedRho {
                rho,
                count_required: raw,
                reason: format!(
                    "generator count {:.3e} exceeds the cap {}",
                    raw, opts.n_max
                ),
            });
            continue;
        }
        let count = (raw.round() as u64).max(n as u64 + 1);
        let m = estimate_measure(
            model,
            count as usize,
            opts.trials,
            opts.test_points,
            opts.stream,
        )?;
        let (upper_bound, lower_bound) = row_bounds(&grid, n, count);
        rows.push(SweepRow {
            n,
            rho,
            count,
            estimate: m.estimate,
            stderr: m.stderr,
            upper_bound,
            lower_bound,
        });
    }
    Ok(Sweep { rows, skipped })
}

/// First straddle of the level along the sweep, linearly interpolated;
/// an exact hit resolves to the smallest such rho.
pub fn locate_threshold(rows: &[SweepRow], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level {level} must lie in (0, 1)")));
    }
    if rows.len() < 2 {
        return Err(Error::domain("need at least two sweep rows"));
    }
    for w in rows.windows(2) {
        if w[1].rho <= w[0].rho {
            return Err(Error::domain("sweep rows must be sorted by increasing rho"));
        }
    }
    for w in rows.windows(2) {
        let (a, b) = (w[0].estimate - level, w[1].estimate - level);
        if a == 0.0 {
            return Ok(w[0].rho);
        }
        if a * b < 0.0 {
            return Ok(w[0].rho + (level - w[0].estimate) * (w[1].rho - w[0].rho)
                / (w[1].estimate - w[0].estimate));
        }
    }
    if rows.last().map(|r| r.estimate == level) == Some(true) {
        return Ok(rows.last().unwrap().rho);
    }
    let lo = rows.iter().map(|r| r.estimate).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
    Err(Error::domain(format!(
        "no straddle of level {level}: estimates span [{lo:.4}, {hi:.4}] over rho in \
         [{:.4}, {:.4}]; widen the grid",
        rows[0].rho,
        rows.last().unwrap().rho
    )))
}

/// Default grid centered on E(Lambda*)/n with the dispersion-scaled
/// half-width 3 sqrt(8 beta / delta) E(Lambda*)/n at delta = 1/2.
pub fn default_rho_grid(model: &MeasureModel, points: usize, stream: RngStream) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::domain("a rho grid needs at least two points"));
    }
    let b = crate::analysis::beta_parameter(model, &MomentOpts::new(stream))?;
    let center = b.report.mean / model.dimension() as f64;
    let half = 3.0 * (8.0 * b.value / 0.5).sqrt() * center;
    let lo = (center - half).max(0.05 * center);
    let hi = center + half;
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}
