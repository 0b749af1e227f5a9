//! Run configuration: JSON file, dotted `--set` overrides, strict parsing.

use std::f64::consts::PI;

use coexist_core::asymptotics::LimitRegime;
use coexist_core::thresholds::SweepKind;
use coexist_core::{build_grid, Dispersal, Grid, ModelParams, ResourceSpec, Response};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub domain: Domain,
    pub model: ModelParams,
    pub solver: Solver,
    pub seed: u64,
    pub eig: EigConfig,
    pub sweep: SweepConfig,
    pub evolve: EvolveConfig,
    pub asympt: AsymptConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    #[serde(rename = "L")]
    pub length: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub tol: f64,
}

/// Which weight the `eig` command uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigWeight {
    /// `m` with diffusion `ε`.
    Resource,
    /// `(αF(ũ) − θ)/d(ũ)` with diffusion `μ`.
    Predator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigConfig {
    pub weight: EigWeight,
    /// Overrides the diffusion rate implied by `weight`.
    pub ell: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        if self.count == 0 {
            return Err("axis count must be positive".into());
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return Err("log-spaced axis needs positive end points".into());
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let last = (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                if i == self.count - 1 {
                    return self.stop;
                }
                match self.spacing {
                    Spacing::Linear => self.start + s * (self.stop - self.start),
                    Spacing::Log => self.start * (self.stop / self.start).powf(s),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub axis1: Axis,
    pub axis2: Axis,
}

/// Initial state of the `evolve` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveInit {
    /// Smooth random positive fields drawn from `seed`.
    Random,
    /// `(ũ, 0.1)`.
    SemiTrivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_max: f64,
    pub snapshots: Vec<f64>,
    pub init: EvolveInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptConfig {
    pub regime: LimitRegime,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Domain::default(),
            model: ModelParams {
                eps: 0.1,
                mu: 10.0,
                alpha: 1.0,
                theta: 0.8,
                k: 8.0,
                response: Response::Linear,
                dispersal: Dispersal::Exponential,
                resource: ResourceSpec::SineOffset { a: 0.5, b: 0.5 },
            },
            solver: Solver::default(),
            seed: 42,
            eig: EigConfig::default(),
            sweep: SweepConfig::default(),
            evolve: EvolveConfig::default(),
            asympt: AsymptConfig::default(),
        }
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self { length: 2.0 * PI, n: 401 }
    }
}

impl Default for Solver {
    fn default() -> Self {
        Self { tol: 1e-8 }
    }
}

impl Default for EigConfig {
    fn default() -> Self {
        Self { weight: EigWeight::Resource, ell: None }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: SweepKind::ThetaMu,
            axis1: Axis { start: 0.05, stop: 1.0, count: 20, spacing: Spacing::Linear },
            axis2: Axis { start: 0.01, stop: 100.0, count: 20, spacing: Spacing::Log },
        }
    }
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_max: 100.0, snapshots: Vec::new(), init: EvolveInit::Random }
    }
}

impl Default for AsymptConfig {
    fn default() -> Self {
        Self { regime: LimitRegime::LargeEps }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid, String> {
        build_grid(self.domain.length, self.domain.n).map_err(|e| e.to_string())
    }
}

/// Objects merge key by key, except tagged objects (with a `kind` key),
/// which replace the target whole.
fn merge(target: &mut Value, patch: Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) if !p.contains_key("kind") => {
            for (k, v) in p {
                match t.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        t.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Applies `key.path=value`; `value` is read as JSON, else taken as a string.
fn apply_override(root: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| format!("override `{assignment}` is not of the form key=value"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(format!("override `{assignment}` has an empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in path.split('.') {
        if !node.is_object() {
            return Err(format!("override `{path}`: `{key}` is below a non-object value"));
        }
        node = node.as_object_mut().unwrap().entry(key).or_insert_with(|| Value::Object(Map::new()));
    }
    if let (Value::Object(_), Value::Object(_)) = (&*node, &value) {
        merge(node, value);
    } else {
        *node = value;
    }
    Ok(())
}

/// Resolves defaults, then the config text, then the overrides in order.
pub fn resolve(source: Option<(&str, &str)>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, String> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some((name, text)) = source {
        let patch: Value = serde_json::from_str(text)
            .map_err(|e| {
                let msg = e.to_string();
                let msg = msg.split(" at line ").next().unwrap_or_default().to_string();
                format!("{name}:{}:{}: {msg}", e.line(), e.column())
            })?;
        if !patch.is_object() {
            return Err(format!("{name}: top level must be a JSON object"));
        }
        merge(&mut root, patch);
    }
    for assignment in overrides {
        apply_override(&mut root, assignment)?;
    }
    if let Some(seed) = seed {
        root["seed"] = Value::from(seed);
    }
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| format!("invalid config: {e}"))?;
    cfg.model.validate().map_err(|e| format!("invalid config: {e}"))?;
    cfg.grid()?;
    if !(cfg.solver.tol > 0.0) {
        return Err(format!("invalid config: solver.tol must be positive, got {}", cfg.solver.tol));
    }
    Ok(cfg)
}
