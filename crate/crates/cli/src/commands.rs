//! One function per subcommand. The first artifact is the primary output.

use coexist_core::asymptotics::{large_eps_profile, large_mu_profile, small_mu_profile, LimitRegime};
use coexist_core::eigen::{eigen_residual, principal_eig};
use coexist_core::evolve::{run_to_steady_with, RunOptions};
use coexist_core::logistic::solve_logistic;
use coexist_core::model::check_assumptions;
use coexist_core::steady::{mass_identity, solve_coexistence, Init, SteadyOutcome};
use coexist_core::thresholds::{
    classify_regime, classify_semitrivial, k_star, k_tilde, mu_star, sweep_regime, theta_0, theta_k, theta_tilde,
};
use coexist_core::verify::run_suites;
use coexist_core::{Error, Grid, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{EigWeight, EvolveInit, RunConfig};
use crate::output::{num, numeric_rows, Artifact};

/// Process exit status and message of a failed command.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn assumption(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidGrid(_)
            | Error::OutOfRange(_)
            | Error::InvalidWeight(_)
            | Error::InvalidInput(_)
            | Error::Unsupported(_) => 1,
            Error::AssumptionViolated(_) | Error::NoLimitProfile(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

/// Artifacts of a command that ran; `failure` is set when the artifacts
/// report a negative finding that should still be written out.
pub struct Output {
    pub artifacts: Vec<Artifact>,
    pub failure: Option<Failure>,
}

impl From<Vec<Artifact>> for Output {
    fn from(artifacts: Vec<Artifact>) -> Self {
        Self { artifacts, failure: None }
    }
}

pub type Outcome = Result<Output, Failure>;

pub struct Context {
    pub command: &'static str,
    pub config: RunConfig,
    pub grid: Grid,
}

impl Context {
    fn comments(&self) -> Vec<String> {
        let cfg = serde_json::to_string(&self.config).expect("config serializes");
        vec![format!("coexist {}", self.command), format!("config: {cfg}")]
    }

    fn csv(&self, suffix: &str, extra: Vec<String>, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Artifact {
        let mut comments = self.comments();
        comments.extend(extra);
        Artifact::Csv { name: format!("{}{suffix}.csv", self.command), comments, header, rows }
    }

    fn json(&self, result: Value) -> Artifact {
        Artifact::Json {
            name: format!("{}.json", self.command),
            value: json!({ "command": self.command, "config": self.config, "result": result }),
        }
    }

    fn require_core(&self) -> Result<(), Failure> {
        let report = check_assumptions(&self.config.model, &self.grid);
        match report.first_core_failure() {
            Some((name, c)) => Err(Failure::assumption(format!("{name} fails: {}", c.detail))),
            None => Ok(()),
        }
    }

    fn prey(&self) -> Result<ScalarField, Failure> {
        let p = &self.config.model;
        Ok(solve_logistic(p.eps, &p.resource_field(self.grid))?.utilde)
    }
}

fn profile_rows(g: &Grid, cols: &[&ScalarField]) -> Vec<Vec<String>> {
    numeric_rows(
        (0..g.len()).map(|i| std::iter::once(g.x(i)).chain(cols.iter().map(|c| c.values()[i])).collect()).collect(),
    )
}

pub fn check(ctx: &Context) -> Outcome {
    let report = check_assumptions(&ctx.config.model, &ctx.grid);
    let failure = report.first_core_failure().map(|(name, c)| Failure::assumption(format!("{name} fails: {}", c.detail)));
    Ok(Output { artifacts: vec![ctx.json(json!(report))], failure })
}

pub fn eig(ctx: &Context) -> Outcome {
    let p = &ctx.config.model;
    let (r, ell) = match ctx.config.eig.weight {
        EigWeight::Resource => (p.resource_field(ctx.grid), ctx.config.eig.ell.unwrap_or(p.eps)),
        EigWeight::Predator => (p.predator_weight(&ctx.prey()?), ctx.config.eig.ell.unwrap_or(p.mu)),
    };
    let pair = principal_eig(ell, &r)?;
    let extra = vec![
        format!("lambda1 = {}", num(pair.lambda)),
        format!("ell = {}", num(ell)),
        format!("residual = {}", num(eigen_residual(ell, &r, &pair))),
        format!("clamped = {}", pair.clamped),
    ];
    Ok(vec![ctx.csv("", extra, vec!["x", "r", "phi"], profile_rows(&ctx.grid, &[&r, &pair.phi]))].into())
}

pub fn logistic(ctx: &Context) -> Outcome {
    let p = &ctx.config.model;
    let m = p.resource_field(ctx.grid);
    let sol = solve_logistic(p.eps, &m)?;
    let extra = vec![
        format!("u_min = {}", num(sol.u_min)),
        format!("u_max = {}", num(sol.u_max)),
        format!("residual = {}", num(sol.residual)),
    ];
    Ok(vec![ctx.csv("", extra, vec!["x", "m", "utilde"], profile_rows(&ctx.grid, &[&m, &sol.utilde]))].into())
}

/// Value or `null` plus a note for threshold queries with no finite answer.
fn optional(r: coexist_core::Result<f64>) -> Result<(Value, Option<String>), Failure> {
    match r {
        Ok(v) => Ok((json!(v), None)),
        Err(e @ (Error::OutOfRange(_) | Error::Unbounded(_) | Error::NoInstabilityWindow(_))) => {
            Ok((Value::Null, Some(e.to_string())))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn thresholds(ctx: &Context) -> Outcome {
    ctx.require_core()?;
    let p = &ctx.config.model;
    let ut = ctx.prey()?;
    let (lo, hi) = (p.alpha * p.f(ut.min()), p.alpha * p.f(ut.max()));
    let (ks, ks_note) = optional(k_star(p.theta, p, &ut))?;
    let (ms, ms_note) = match mu_star(p.k, p.theta, p, &ut) {
        Ok(m) => (json!(m), None),
        Err(e) => optional(Err(e))?,
    };
    let st = classify_semitrivial(p, &ut)?;
    let kt = k_tilde(p.theta, p, ut.max());
    let result = json!({
        "alpha_f_min": lo,
        "alpha_f_max": hi,
        "theta_0": theta_0(p, &ut),
        "theta_k": theta_k(p.k, p, &ut),
        "theta_tilde": theta_tilde(p.mu, p, &ut)?,
        "k_star": ks,
        "k_star_note": ks_note,
        "mu_star": ms,
        "mu_star_note": ms_note,
        "k_tilde": if kt.is_finite() { json!(kt) } else { Value::Null },
        "semitrivial": st,
    });
    Ok(vec![ctx.json(result)].into())
}

pub fn regime(ctx: &Context) -> Outcome {
    let v = classify_regime(&ctx.config.model, &ctx.grid)?;
    Ok(vec![ctx.json(json!(v))].into())
}

pub fn sweep(ctx: &Context) -> Outcome {
    ctx.require_core()?;
    let s = &ctx.config.sweep;
    let a1 = s.axis1.values().map_err(Failure::usage)?;
    let a2 = s.axis2.values().map_err(Failure::usage)?;
    let res = sweep_regime(s.kind, &a1, &a2, &ctx.config.model, &ctx.grid)?;
    let kind = serde_json::to_value(s.kind).expect("kind serializes");
    let extra = vec![format!("kind = {}", kind.as_str().unwrap_or_default())];
    let rows = res
        .cells
        .iter()
        .map(|c| vec![num(c.axis1), num(c.axis2), c.tag.as_str().to_string(), c.lambda1.map(num).unwrap_or_default()])
        .collect();
    let level = numeric_rows(res.level_set.iter().map(|l| vec![l.k, l.theta, l.mu_star]).collect());
    Ok(vec![
        ctx.csv("", extra.clone(), vec!["axis1", "axis2", "verdict", "lambda1"], rows),
        ctx.csv("_level_set", extra, vec!["k", "theta", "mu_star"], level),
    ]
    .into())
}

pub fn steady(ctx: &Context) -> Outcome {
    ctx.require_core()?;
    let p = &ctx.config.model;
    let s = match solve_coexistence(p, &ctx.grid, Init::Bifurcation)? {
        SteadyOutcome::Found(s) => s,
        SteadyOutcome::NotFound { reason } => return Err(Failure::numeric(format!("no coexistence state found: {reason}"))),
    };
    let mi = mass_identity(&s)?;
    let extra = vec![
        format!("residual_u = {}", num(s.residual_u)),
        format!("residual_w = {}", num(s.residual_w)),
        format!("tolerance = {}", num(s.tolerance)),
        format!("below_prey_profile = {}", s.below_prey_profile),
        format!("mass_gap = {}", num(mi.gap)),
    ];
    Ok(vec![ctx.csv("", extra, vec!["x", "u", "v", "w"], profile_rows(&ctx.grid, &[&s.u, &s.v, &s.w]))].into())
}

/// `base (1 + Σ a_j cos(jπx/L)/3.3)` with `|a_j| ≤ 1/j²`, always positive.
fn random_field(g: Grid, base: f64, rng: &mut ChaCha8Rng) -> ScalarField {
    let coeffs: Vec<f64> = (1..=4).map(|j| rng.random_range(-1.0..1.0) / (j * j) as f64).collect();
    let len = g.length();
    ScalarField::from_fn(g, |x| {
        let s: f64 = coeffs.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * std::f64::consts::PI * x / len).cos()).sum();
        base * (1.0 + s / 3.3)
    })
}

pub fn evolve(ctx: &Context) -> Outcome {
    let p = &ctx.config.model;
    let e = &ctx.config.evolve;
    let g = ctx.grid;
    let init = match e.init {
        EvolveInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.seed);
            let top = p.resource_field(g).max().max(0.1);
            (random_field(g, 0.5 * top, &mut rng), random_field(g, 0.3 * top, &mut rng))
        }
        EvolveInit::SemiTrivial => (ctx.prey()?, ScalarField::constant(g, 0.1)),
    };
    let mut times = e.snapshots.clone();
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Failure::usage("evolve.snapshots must be nonnegative and strictly increasing"));
    }
    times.retain(|&t| t <= e.t_max);
    let opts = RunOptions { dt: e.dt, tol: ctx.config.solver.tol, t_max: e.t_max, snapshot_times: times };
    let traj = run_to_steady_with(p, &g, init, &opts)?;
    let mut rows = Vec::new();
    let mut push = |t: f64, u: &ScalarField, v: &ScalarField| {
        for i in 0..g.len() {
            let (ui, vi) = (u.values()[i], v.values()[i]);
            rows.push(vec![t, g.x(i), ui, vi, p.d(ui) * vi]);
        }
    };
    for s in &traj.snapshots {
        push(s.t, &s.u, &s.v);
    }
    let t_end = *traj.times.last().expect("trajectory has a final time");
    if traj.snapshots.last().is_none_or(|s| s.t < t_end) {
        push(t_end, &traj.final_u, &traj.final_v);
    }
    let extra = vec![
        format!("converged = {}", traj.converged),
        format!("steady_gap = {}", num(traj.steady_gap)),
        format!("steps = {}", traj.steps),
        format!("clipped_fraction = {}", num(traj.clipped_fraction())),
    ];
    Ok(vec![ctx.csv("", extra, vec!["t", "x", "u", "v", "w"], numeric_rows(rows))].into())
}

pub fn asympt(ctx: &Context) -> Outcome {
    ctx.require_core()?;
    let p = &ctx.config.model;
    let prof = match ctx.config.asympt.regime {
        LimitRegime::LargeEps => large_eps_profile(p, &ctx.grid)?,
        LimitRegime::LargeMu => large_mu_profile(p, &ctx.grid)?,
        LimitRegime::SmallMu => small_mu_profile(p, &ctx.grid)?,
    };
    let scalars = serde_json::to_string(&prof.scalars).expect("scalars serialize");
    let regime = serde_json::to_value(prof.regime).expect("regime serializes");
    let extra = vec![format!("regime = {}", regime.as_str().unwrap_or_default()), format!("scalars: {scalars}")];
    let rows = profile_rows(&ctx.grid, &[&prof.u_limit, &prof.w_limit]);
    Ok(vec![ctx.csv("", extra, vec!["x", "u_limit", "w_limit"], rows)].into())
}

pub fn verify(ctx: &Context) -> Outcome {
    let results = run_suites(&ctx.config.model, &ctx.grid, ctx.config.seed);
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut body = String::new();
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        body.push_str(&format!("{mark}  {:width$}  {}\n", r.name, r.detail));
    }
    let passed = results.iter().filter(|r| r.passed).count();
    body.push_str(&format!("{passed} of {} suites passed\n", results.len()));
    let failure = results.iter().find(|r| !r.passed).map(|r| Failure {
        code: if r.name == "assumptions" { 3 } else { 2 },
        message: format!("suite {} failed", r.name),
    });
    Ok(Output { artifacts: vec![Artifact::Text { name: "verify.txt".into(), body }, ctx.json(json!(results))], failure })
}
