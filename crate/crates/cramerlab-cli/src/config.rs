//! JSON experiment configuration: schema-validated, unknown keys
//! rejected, defaults materialized so the echoed config is complete.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cramerlab::{Custom1D, MeasureModel};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub dimensions: Vec<usize>,
    pub budgets: Budgets,
    pub seed: u64,
    /// 0 means use the available parallelism.
    pub workers: usize,
    pub tolerances: Tolerances,
    pub output_dir: Option<String>,
    /// Points CSV for the transform and depth subcommands.
    pub points_file: Option<String>,
    pub rho_grid: Option<Vec<f64>>,
    /// Generator count for simulate; rho is the alternative.
    pub count: Option<usize>,
    pub rho: Option<f64>,
    pub delta: f64,
    pub level: f64,
    pub exp_half: bool,
    /// Moment method: "auto" or "mc".
    pub method: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSpec::default(),
            dimensions: vec![4],
            budgets: Budgets::default(),
            seed: 0x5EED,
            workers: 0,
            tolerances: Tolerances::default(),
            output_dir: None,
            points_file: None,
            rho_grid: None,
            count: None,
            rho: None,
            delta: 0.5,
            level: 0.5,
            exp_half: false,
            method: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub trials: usize,
    pub test_points: usize,
    pub mc_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            trials: 32,
            test_points: 1024,
            mc_samples: 1 << 17,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub membership: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { membership: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    /// gaussian | cube | ball | ball_unit | product | custom
    pub family: String,
    pub side: f64,
    pub components: Vec<ComponentSpec>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            family: "gaussian".into(),
            side: 1.0,
            components: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentSpec {
    Named(String),
    Uniform { uniform: f64 },
}

pub fn load(path: &std::path::Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

fn component(spec: &ComponentSpec) -> Result<Custom1D, String> {
    match spec {
        ComponentSpec::Named(name) => match name.as_str() {
            "laplace" => Custom1D::laplace().map_err(|e| e.to_string()),
            "shifted_exponential" => Custom1D::shifted_exponential().map_err(|e| e.to_string()),
            other => Err(format!(
                "unknown component '{other}' (expected laplace, shifted_exponential, or {{\"uniform\": w}})"
            )),
        },
        ComponentSpec::Uniform { uniform } => {
            Custom1D::uniform(*uniform).map_err(|e| e.to_string())
        }
    }
}

/// Build the measure for one dimension of the config.
pub fn resolve_model(spec: &ModelSpec, n: usize) -> Result<MeasureModel, String> {
    let build = |r: cramerlab::Result<MeasureModel>| r.map_err(|e| e.to_string());
    match spec.family.as_str() {
        "gaussian" => build(MeasureModel::standard_gaussian(n)),
        "cube" => build(MeasureModel::uniform_cube(n, spec.side)),
        "ball" => build(MeasureModel::uniform_ball_vol1(n)),
        "ball_unit" => build(MeasureModel::uniform_ball_unit(n)),
        "product" => {
            let comps: Vec<Custom1D> = match spec.components.len() {
                0 => return Err("product model needs a components list".into()),
                1 => {
                    let c = component(&spec.components[0])?;
                    vec![c; n]
                }
                k if k == n => spec
                    .components
                    .iter()
                    .map(component)
                    .collect::<Result<_, _>>()?,
                k => {
                    return Err(format!(
                        "components list has {k} entries but the dimension is {n}"
                    ))
                }
            };
            build(MeasureModel::product(comps))
        }
        "custom" => {
            if n != 1 {
                return Err(format!("custom family is one-dimensional, got n = {n}"));
            }
            if spec.components.len() != 1 {
                return Err("custom family needs exactly one component".into());
            }
            build(MeasureModel::custom_1d(component(&spec.components[0])?))
        }
        other => Err(format!(
            "unknown model family '{other}' (expected gaussian, cube, ball, ball_unit, product, custom)"
        )),
    }
}

/// Hash of the resolved config with the worker count and output
/// directory normalized away: neither determines results, and the hash
/// ties artifacts to what did determine them.
pub fn config_sha256(cfg: &ExperimentConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.workers = 0;
    canonical.output_dir = None;
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    let mut h = Sha256::new();
    h.update(&bytes);
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
