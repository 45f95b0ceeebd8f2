//! cramerlab: batch front-end for the rate-function laboratory.
//!
//! Every run writes three artifacts into the output directory:
//! data.csv (when the subcommand produces rows), summary.json, and
//! run.json (resolved config echo plus wall-clock). Exit codes:
//! 0 success, 1 failed verification or runtime error, 2 config error.

mod artifacts;
mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use cramerlab::parallel::with_workers;

use artifacts::{read_points, RunWriter};
use commands::CmdOut;
use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "cramerlab", version, about = "Cramer-transform experiment harness")]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 = available parallelism. Env fallback: CRAMERLAB_WORKERS.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for data.csv / summary.json / run.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate the rate function at points read from a CSV file.
    Transform {
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Half-space depth (phi, omega, direction) at points from a CSV file.
    Depth {
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Estimate the measure of a random polytope K_N.
    Simulate {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Generator count N; exclusive with --rho.
        #[arg(long)]
        count: Option<usize>,
        /// Exponential scale: N = round(exp(rho * n)).
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        test_points: Option<usize>,
    },
    /// Dispersion coefficient beta = Var/Mean^2 of the rate function.
    Beta {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Moments of the rate function under mu.
    Moments {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        /// Also estimate E exp(rate/2) where it is finite.
        #[arg(long)]
        exp_half: bool,
        /// auto | mc
        #[arg(long)]
        method: Option<String>,
    },
    /// Sweep rho, bracket each row, and locate the crossing.
    Threshold {
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated rho grid, e.g. 0.4,0.5,0.6.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        test_points: Option<usize>,
    },
    /// Run a named invariant suite against independent oracles.
    Verify {
        #[arg(long)]
        suite: String,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Run(m) => m,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Config(msg.into()))
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

/// Merge CLI flags over the loaded config; flags win.
fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    } else if cfg.workers == 0 {
        if let Ok(v) = std::env::var("CRAMERLAB_WORKERS") {
            cfg.workers = v
                .parse::<usize>()
                .map_err(|_| Failure::Config(format!("CRAMERLAB_WORKERS: bad value '{v}'")))?;
        }
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.display().to_string());
    }
    match &cli.cmd {
        Cmd::Transform { points, model, n } | Cmd::Depth { points, model, n } => {
            if let Some(p) = points {
                cfg.points_file = Some(p.display().to_string());
            }
            merge_model(&mut cfg, model, n);
        }
        Cmd::Simulate {
            model,
            n,
            count,
            rho,
            trials,
            test_points,
        } => {
            merge_model(&mut cfg, model, n);
            if let Some(c) = count {
                cfg.count = Some(*c);
            }
            if let Some(r) = rho {
                cfg.rho = Some(*r);
            }
            if let Some(t) = trials {
                cfg.budgets.trials = *t;
            }
            if let Some(t) = test_points {
                cfg.budgets.test_points = *t;
            }
        }
        Cmd::Beta { model, n, samples } => {
            merge_model(&mut cfg, model, n);
            if let Some(s) = samples {
                cfg.budgets.mc_samples = *s;
            }
        }
        Cmd::Moments {
            model,
            n,
            samples,
            exp_half,
            method,
        } => {
            merge_model(&mut cfg, model, n);
            if let Some(s) = samples {
                cfg.budgets.mc_samples = *s;
            }
            if *exp_half {
                cfg.exp_half = true;
            }
            if method.is_some() {
                cfg.method = method.clone();
            }
        }
        Cmd::Threshold {
            model,
            n,
            grid,
            trials,
            test_points,
        } => {
            merge_model(&mut cfg, model, n);
            if let Some(g) = grid {
                let parsed: Result<Vec<f64>, _> =
                    g.split(',').map(|s| s.trim().parse::<f64>()).collect();
                cfg.rho_grid =
                    Some(parsed.map_err(|e| Failure::Config(format!("--grid: {e}")))?);
            }
            if let Some(t) = trials {
                cfg.budgets.trials = *t;
            }
            if let Some(t) = test_points {
                cfg.budgets.test_points = *t;
            }
        }
        Cmd::Verify { suite } => {
            if !verify::SUITES.contains(&suite.as_str()) {
                return config_err(format!(
                    "unknown suite '{suite}' (expected one of {})",
                    verify::SUITES.join(", ")
                ));
            }
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn merge_model(cfg: &mut ExperimentConfig, model: &Option<String>, n: &Option<usize>) {
    if let Some(family) = model {
        cfg.model.family = family.clone();
    }
    if let Some(n) = n {
        cfg.dimensions = vec![*n];
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cfg.dimensions.is_empty() {
        return config_err("dimensions list is empty");
    }
    if cfg.dimensions.iter().any(|&n| n == 0) {
        return config_err("dimensions must be positive");
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return config_err(format!("delta {} must lie in (0, 1)", cfg.delta));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return config_err(format!("level {} must lie in (0, 1)", cfg.level));
    }
    if cfg.budgets.trials == 0 || cfg.budgets.test_points == 0 || cfg.budgets.mc_samples == 0 {
        return config_err("budgets must be positive");
    }
    if !(cfg.tolerances.membership > 0.0) {
        return config_err("membership tolerance must be positive");
    }
    if let Some(g) = &cfg.rho_grid {
        if g.len() < 2 || g.windows(2).any(|w| w[1] <= w[0]) {
            return config_err("rho_grid must be at least two strictly increasing values");
        }
        if g.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return config_err("rho_grid values must be positive and finite");
        }
    }
    Ok(())
}

/// Single model for subcommands that work at one dimension.
fn single_model(cfg: &ExperimentConfig) -> Result<cramerlab::MeasureModel, Failure> {
    config::resolve_model(&cfg.model, cfg.dimensions[0]).map_err(Failure::Config)
}

fn load_points(
    cfg: &ExperimentConfig,
    model: &cramerlab::MeasureModel,
) -> Result<Vec<Vec<f64>>, Failure> {
    let path = cfg
        .points_file
        .as_ref()
        .ok_or_else(|| Failure::Config("no points file (--points or points_file)".into()))?;
    let (rows, width) = read_points(std::path::Path::new(path)).map_err(Failure::Config)?;
    if width != model.dimension() {
        return config_err(format!(
            "points have {width} coordinates but the model dimension is {}",
            model.dimension()
        ));
    }
    Ok(rows)
}

fn simulate_count(cfg: &ExperimentConfig, n: usize) -> Result<usize, Failure> {
    match (cfg.count, cfg.rho) {
        (Some(_), Some(_)) => config_err("give either count or rho, not both"),
        (Some(c), None) => Ok(c),
        (None, Some(rho)) => {
            if !(rho > 0.0) || !rho.is_finite() {
                return config_err(format!("rho {rho} must be positive and finite"));
            }
            let count = (rho * n as f64).exp().round();
            if count > 1e9 {
                return config_err(format!("rho {rho} asks for {count:.3e} generators"));
            }
            Ok((count as usize).max(n + 1))
        }
        (None, None) => config_err("simulate needs a generator count (count or rho)"),
    }
}

fn dispatch(cli: &Cli, cfg: &ExperimentConfig) -> Result<CmdOut, Failure> {
    match &cli.cmd {
        Cmd::Transform { .. } => {
            let model = single_model(cfg)?;
            let points = load_points(cfg, &model)?;
            commands::transform_cmd(&model, &points).map_err(run_err)
        }
        Cmd::Depth { .. } => {
            let model = single_model(cfg)?;
            let points = load_points(cfg, &model)?;
            commands::depth_cmd(&model, &points, cfg.seed).map_err(run_err)
        }
        Cmd::Simulate { .. } => {
            let model = single_model(cfg)?;
            let count = simulate_count(cfg, model.dimension())?;
            commands::simulate_cmd(&model, count, cfg).map_err(run_err)
        }
        Cmd::Beta { .. } => {
            let model = single_model(cfg)?;
            let opts = commands::moment_opts(cfg).map_err(Failure::Config)?;
            commands::beta_cmd(&model, &opts).map_err(run_err)
        }
        Cmd::Moments { .. } => {
            let model = single_model(cfg)?;
            let opts = commands::moment_opts(cfg).map_err(Failure::Config)?;
            commands::moments_cmd(&model, &opts).map_err(run_err)
        }
        Cmd::Threshold { .. } => commands::threshold_cmd(cfg).map_err(run_err),
        Cmd::Verify { suite } => {
            let checks = verify::run_suite(suite, cfg.seed).map_err(Failure::Config)?;
            let passed = checks.iter().filter(|c| c.passed).count();
            let lines = checks
                .iter()
                .map(|c| format!("{},{},{}", c.name, c.passed, c.detail))
                .collect();
            Ok(CmdOut {
                csv: Some(("name,passed,detail".into(), lines)),
                payload: json!({
                    "suite": suite,
                    "checks": checks.len(),
                    "passed": passed,
                    "failed": checks.len() - passed,
                    "detail": verify::checks_json(&checks),
                }),
                ok: passed == checks.len(),
            })
        }
    }
}

fn subcommand_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Transform { .. } => "transform",
        Cmd::Depth { .. } => "depth",
        Cmd::Simulate { .. } => "simulate",
        Cmd::Beta { .. } => "beta",
        Cmd::Moments { .. } => "moments",
        Cmd::Threshold { .. } => "threshold",
        Cmd::Verify { .. } => "verify",
    }
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let cfg = resolve_config(cli)?;
    let out_dir = PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()));
    let writer = RunWriter::new(&out_dir, &cfg).map_err(Failure::Config)?;
    let started = Instant::now();
    let result = with_workers(cfg.workers, || dispatch(cli, &cfg))?;
    let name = subcommand_name(&cli.cmd);
    if let Some((header, lines)) = &result.csv {
        writer.write_csv(header, lines).map_err(Failure::Run)?;
    }
    writer
        .write_summary(name, result.payload)
        .map_err(Failure::Run)?;
    writer
        .write_run(name, &cfg, started.elapsed().as_secs_f64())
        .map_err(Failure::Run)?;
    println!(
        "{name}: artifacts in {} (config {}, seed {})",
        out_dir.display(),
        &writer.config_hash[..12],
        cfg.seed
    );
    Ok(result.ok)
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("verification failed");
            std::process::exit(1);
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            std::process::exit(f.code());
        }
    }
}
