//! Subcommand bodies. Each returns optional CSV content plus a JSON
//! payload; artifact writing and exit-code mapping live in main.

use serde_json::{json, Value};

use cramerlab::analysis::{
    beta_parameter, cramer_moments, isotropic_constant, rho_bounds, MomentMethod, MomentOpts,
    MomentReport, DEFAULT_C2,
};
use cramerlab::depth::{depth, DepthOpts};
use cramerlab::polytope::estimate_measure_opts;
use cramerlab::stats::Z95;
use cramerlab::threshold::{default_rho_grid, locate_threshold, sweep, SweepOpts, CSV_HEADER};
use cramerlab::transform::{cramer, CramerOpts, SolveStatus};
use cramerlab::{MeasureModel, RngStream};

use crate::config::ExperimentConfig;

pub struct CmdOut {
    pub csv: Option<(String, Vec<String>)>,
    pub payload: Value,
    /// false marks a completed run whose verification checks failed.
    pub ok: bool,
}

fn join_fields(fields: &[f64]) -> String {
    fields
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn transform_cmd(
    model: &MeasureModel,
    points: &[Vec<f64>],
) -> cramerlab::Result<CmdOut> {
    let opts = CramerOpts::default();
    let mut lines = Vec::with_capacity(points.len());
    let (mut converged, mut at_infinity, mut max_iter) = (0usize, 0usize, 0usize);
    for (i, x) in points.iter().enumerate() {
        let r = cramer(model, x, &opts)?;
        match r.status {
            SolveStatus::Converged => converged += 1,
            SolveStatus::AtInfinity => at_infinity += 1,
            SolveStatus::MaxIter => max_iter += 1,
        }
        let xi_norm = r.argmax_xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        lines.push(format!(
            "{i},{},{:?},{},{}",
            r.value, r.status, xi_norm, r.iterations
        ));
    }
    Ok(CmdOut {
        csv: Some((
            "index,value,status,xi_norm,iterations".into(),
            lines,
        )),
        payload: json!({
            "points": points.len(),
            "converged": converged,
            "at_infinity": at_infinity,
            "max_iter": max_iter,
        }),
        ok: true,
    })
}

pub fn depth_cmd(
    model: &MeasureModel,
    points: &[Vec<f64>],
    seed: u64,
) -> cramerlab::Result<CmdOut> {
    let stream = RngStream::new(seed);
    let mut lines = Vec::with_capacity(points.len());
    let (mut exact, mut searched) = (0usize, 0usize);
    for (i, x) in points.iter().enumerate() {
        let opts = DepthOpts::new(stream.substream(i as u64));
        let d = depth(model, x, &opts)?;
        match d.method {
            cramerlab::depth::DepthMethod::Exact => exact += 1,
            cramerlab::depth::DepthMethod::DirectionSearch => searched += 1,
        }
        lines.push(format!(
            "{i},{},{},{},{:?},{}",
            d.phi,
            d.log_depth_omega,
            d.ci,
            d.method,
            join_fields(&d.direction)
        ));
    }
    Ok(CmdOut {
        csv: Some((
            "index,phi,omega,ci,method,direction".into(),
            lines,
        )),
        payload: json!({
            "points": points.len(),
            "exact": exact,
            "direction_search": searched,
        }),
        ok: true,
    })
}

pub fn simulate_cmd(
    model: &MeasureModel,
    count: usize,
    cfg: &ExperimentConfig,
) -> cramerlab::Result<CmdOut> {
    let m = estimate_measure_opts(
        model,
        count,
        cfg.budgets.trials,
        cfg.budgets.test_points,
        cfg.tolerances.membership,
        RngStream::new(cfg.seed),
    )?;
    let mut lines = Vec::with_capacity(m.per_trial.len() + 1);
    for (t, &p) in m.per_trial.iter().enumerate() {
        let ci = Z95 * (p * (1.0 - p) / cfg.budgets.test_points as f64).sqrt();
        lines.push(format!("{t},{p},{ci}"));
    }
    lines.push(format!("aggregate,{},{}", m.estimate, Z95 * m.stderr));
    Ok(CmdOut {
        csv: Some(("row,estimate,ci".into(), lines)),
        payload: json!({
            "n": model.dimension(),
            "count": count,
            "trials": cfg.budgets.trials,
            "test_points": cfg.budgets.test_points,
            "estimate": m.estimate,
            "stderr": m.stderr,
            "ci": Z95 * m.stderr,
        }),
        ok: true,
    })
}

fn report_json(r: &MomentReport) -> Value {
    json!({
        "mean": r.mean,
        "second_moment": r.second_moment,
        "variance": r.variance,
        "exp_half_moment": r.exp_half_moment,
        "sample_count": r.sample_count,
        "censored": r.censored,
        "right_censored": r.right_censored,
        "ci": {
            "mean": r.ci.mean,
            "second_moment": r.ci.second_moment,
            "variance": r.ci.variance,
            "exp_half": r.ci.exp_half,
        },
    })
}

pub fn moment_opts(cfg: &ExperimentConfig) -> Result<MomentOpts, String> {
    let mut opts = MomentOpts::new(RngStream::new(cfg.seed));
    opts.samples = cfg.budgets.mc_samples;
    opts.exp_half = cfg.exp_half;
    opts.method = match cfg.method.as_deref() {
        None | Some("auto") => MomentMethod::Auto,
        Some("mc") => MomentMethod::MonteCarlo,
        Some(other) => return Err(format!("unknown method '{other}' (expected auto or mc)")),
    };
    Ok(opts)
}

pub fn moments_cmd(model: &MeasureModel, opts: &MomentOpts) -> cramerlab::Result<CmdOut> {
    let r = cramer_moments(model, opts)?;
    Ok(CmdOut {
        csv: None,
        payload: json!({
            "n": model.dimension(),
            "report": report_json(&r),
        }),
        ok: true,
    })
}

pub fn beta_cmd(model: &MeasureModel, opts: &MomentOpts) -> cramerlab::Result<CmdOut> {
    let b = beta_parameter(model, opts)?;
    Ok(CmdOut {
        csv: None,
        payload: json!({
            "n": model.dimension(),
            "beta": {"value": b.value, "ci": b.ci},
            "report": report_json(&b.report),
        }),
        ok: true,
    })
}

pub fn threshold_cmd(cfg: &ExperimentConfig) -> cramerlab::Result<CmdOut> {
    let mut lines = Vec::new();
    let mut per_n = Vec::new();
    for &n in &cfg.dimensions {
        let model = crate::config::resolve_model(&cfg.model, n)
            .map_err(cramerlab::Error::domain)?;
        let stream = RngStream::new(cfg.seed).substream(n as u64);
        let mut opts = SweepOpts::new(stream);
        opts.trials = cfg.budgets.trials;
        opts.test_points = cfg.budgets.test_points;
        opts.mc_samples = cfg.budgets.mc_samples;
        let grid: Vec<f64> = match &cfg.rho_grid {
            Some(g) => g.clone(),
            None => default_rho_grid(&model, 7, stream.substream(4_000_000))?,
        };
        let s = sweep(&model, &grid, &opts)?;
        for row in &s.rows {
            lines.push(row.csv_line());
        }
        let (located, locate_note) = match locate_threshold(&s.rows, cfg.level) {
            Ok(v) => (Some(v), String::new()),
            Err(e) => (None, e.to_string()),
        };
        let b = beta_parameter(&model, &MomentOpts::new(stream.substream(4_000_001)))?;
        let l_mu = isotropic_constant(&model, cfg.budgets.mc_samples, stream.substream(4_000_002))?;
        let report = rho_bounds(
            b.value,
            cfg.delta,
            b.report.mean / n as f64,
            n,
            l_mu,
            DEFAULT_C2,
        )?;
        per_n.push(json!({
            "n": n,
            "level": cfg.level,
            "located": located,
            "locate_note": locate_note,
            "beta": {"value": b.value, "ci": b.ci},
            "isotropic_constant": l_mu,
            "threshold_report": {
                "beta": report.beta,
                "delta": report.delta,
                "mean_over_n": report.mean_over_n,
                "rho1_bound": report.rho1_bound,
                "rho2_bound": report.rho2_bound,
                "regime": format!("{:?}", report.regime),
                "conditions": {
                    "n_over_l2": report.conditions.n_over_l2,
                    "small_beta_split": report.conditions.small_beta_split,
                },
            },
            "skipped": s.skipped.iter().map(|k| json!({
                "rho": k.rho,
                "count_required": k.count_required,
                "reason": k.reason,
            })).collect::<Vec<_>>(),
        }));
    }
    Ok(CmdOut {
        csv: Some((CSV_HEADER.into(), lines)),
        payload: json!(per_n),
        ok: true,
    })
}
