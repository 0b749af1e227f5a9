//! Invariant suites evaluated for one parameter set. Each suite is a cheap
//! self-consistency check that needs no reference data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigen::{dlambda_dk, principal_eig, principal_eigenvalue};
use crate::error::Result;
use crate::grid::{Grid, ScalarField};
use crate::logistic::solve_logistic;
use crate::model::{check_assumptions, ModelParams};
use crate::steady::{mass_identity, solve_coexistence, Init, SteadyOutcome};
use crate::thresholds::{chebyshev_sum_check, classify_semitrivial, theta_k, Stability};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, outcome: Result<(bool, String)>) -> SuiteResult {
    match outcome {
        Ok((passed, detail)) => SuiteResult { name, passed, detail },
        Err(e) => SuiteResult { name, passed: false, detail: e.to_string() },
    }
}

fn eigen_constant(g: &Grid) -> Result<(bool, String)> {
    let r = ScalarField::constant(*g, 0.37);
    let lam = principal_eigenvalue(1.0, &r)?;
    Ok(((lam - 0.37).abs() < 1e-12, format!("λ₁(1, 0.37) = {lam:.15}")))
}

fn eigen_monotone(p: &ModelParams, g: &Grid) -> Result<(bool, String)> {
    let r = p.resource_field(*g);
    let mut prev = f64::INFINITY;
    let mut ok = true;
    for ell in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let lam = principal_eigenvalue(ell, &r)?;
        ok &= lam < prev;
        prev = lam;
    }
    Ok((ok, "λ₁(ℓ, m) strictly decreasing over ℓ ∈ {0.01, 0.1, 1, 10, 100}".into()))
}

fn hellmann_feynman(p: &ModelParams, ut: &ScalarField) -> Result<(bool, String)> {
    let h = 1e-4 * (1.0 + p.k);
    let lam = |k: f64| principal_eigenvalue(p.mu, &p.with_k(k).predator_weight(ut));
    let fd = (lam(p.k + h)? - lam((p.k - h).max(0.0))?) / (p.k + h - (p.k - h).max(0.0));
    let an = dlambda_dk(p, ut, p.mu)?;
    let rel = (an - fd).abs() / an.abs().max(1e-12);
    Ok((rel < 1e-4, format!("dλ/dk = {an:.10e}, finite difference {fd:.10e}, relative gap {rel:.2e}")))
}

fn theta_k_increasing(p: &ModelParams, ut: &ScalarField) -> Result<(bool, String)> {
    let values: Vec<f64> = (0..=20).map(|i| theta_k(0.5 * i as f64, p, ut)).collect();
    let ok = values.windows(2).all(|w| w[1] > w[0]);
    Ok((ok, format!("θ_k from {:.6} at k = 0 to {:.6} at k = 10", values[0], values[20])))
}

fn chebyshev(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    for _ in 0..1000 {
        let len = rng.random_range(1..20);
        let mut draw = || {
            let mut v: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (a, b, c) = (draw(), draw(), draw());
        ok &= chebyshev_sum_check(&a, &b, &c)?;
    }
    Ok((ok, format!("1000 random sorted triples, seed {seed}")))
}

fn steady_invariants(p: &ModelParams, g: &Grid, ut: &ScalarField) -> Result<(bool, String)> {
    if classify_semitrivial(p, ut)?.stability != Stability::Unstable {
        return Ok((true, "semi-trivial state not unstable; no coexistence state required".into()));
    }
    let s = match solve_coexistence(p, g, Init::Bifurcation)? {
        SteadyOutcome::Found(s) => s,
        SteadyOutcome::NotFound { reason } => return Ok((false, format!("no coexistence state found: {reason}"))),
    };
    let mi = mass_identity(&s)?;
    let lam = principal_eig(p.mu, &p.predator_weight(&s.u))?.lambda;
    let resid = s.residual_u.max(s.residual_w);
    let ok = resid <= s.tolerance && s.below_prey_profile && mi.gap <= 1e-6 * mi.scale && lam.abs() < 1e-6;
    Ok((
        ok,
        format!(
            "residual {resid:.2e} (tolerance {:.2e}), u < ũ: {}, mass gap {:.2e}, λ₁ at u = {lam:.2e}",
            s.tolerance, s.below_prey_profile, mi.gap
        ),
    ))
}

/// Runs every suite; the order of the result is fixed.
pub fn run_suites(p: &ModelParams, g: &Grid, seed: u64) -> Vec<SuiteResult> {
    let report = check_assumptions(p, g);
    let mut out = vec![SuiteResult {
        name: "assumptions",
        passed: report.core_ok(),
        detail: match report.first_core_failure() {
            Some((name, c)) => format!("{name} fails: {}", c.detail),
            None => "H1 to H3 hold".into(),
        },
    }];
    out.push(suite("eigen_constant_weight", eigen_constant(g)));
    out.push(suite("eigen_diffusion_monotone", eigen_monotone(p, g)));
    out.push(suite("chebyshev_sum", chebyshev(seed)));
    match solve_logistic(p.eps, &p.resource_field(*g)) {
        Ok(prey) if report.core_ok() => {
            let ut = &prey.utilde;
            out.push(suite("hellmann_feynman", hellmann_feynman(p, ut)));
            out.push(suite("theta_k_increasing", theta_k_increasing(p, ut)));
            out.push(suite("steady_invariants", steady_invariants(p, g, ut)));
        }
        Ok(_) => {}
        Err(e) => out.push(SuiteResult { name: "prey_profile", passed: false, detail: e.to_string() }),
    }
    out
}
