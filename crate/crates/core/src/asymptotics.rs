//! Limiting profiles of the coexistence state as `ε → ∞`, `μ → ∞` and
//! `μ → 0`.

use serde::Serialize;

use crate::eigen::principal_eigenvalue;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::logistic::{endpoint_trace, solve_logistic, solve_logistic_on, solve_semilinear, Side};
use crate::model::{check_assumptions, eval_response_inverse, response_sup, ModelParams, Response};
use crate::thresholds::theta_k;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRegime {
    LargeEps,
    LargeMu,
    SmallMu,
}

/// Which construction produced a small-`μ` profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallMuCase {
    /// `m ≥ F⁻¹(θ/α)` everywhere; no free boundary.
    ResourceAboveLevel,
    /// `m` nondecreasing; predators absent on `(0, y*)`.
    Increasing,
    /// `m` nonincreasing; predators absent on `(y*, L)`.
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LimitScalars {
    /// `F⁻¹(θ/α)`.
    pub c: Option<f64>,
    pub w_c: Option<f64>,
    pub c_star: Option<f64>,
    /// Free boundary, interpolated between the bracketing nodes.
    pub y_star: Option<f64>,
    /// Last node on the predator-free side.
    pub y_star_index: Option<usize>,
    pub case: Option<SmallMuCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitProfile {
    pub regime: LimitRegime,
    pub u_limit: ScalarField,
    pub w_limit: ScalarField,
    pub scalars: LimitScalars,
}

/// `F⁻¹(θ/α)`, the prey level at which predators break even.
fn break_even(p: &ModelParams) -> Result<f64> {
    let s = p.theta / p.alpha;
    if s >= response_sup(p.response) {
        return Err(Error::NoLimitProfile(format!(
            "θ/α = {s} is not below sup F = {}",
            response_sup(p.response)
        )));
    }
    eval_response_inverse(p.response, s)
}

fn positive_theta(p: &ModelParams) -> Result<()> {
    p.validate()?;
    if p.theta > 0.0 {
        Ok(())
    } else {
        Err(Error::NoLimitProfile("the limiting profiles need θ > 0".into()))
    }
}

/// Constant limit `(c, w_c)` for large prey diffusion.
pub fn large_eps_profile(p: &ModelParams, g: &Grid) -> Result<LimitProfile> {
    positive_theta(p)?;
    let m = p.resource_field(*g);
    let mbar = m.mean();
    if p.theta >= p.alpha * p.f(mbar.max(0.0)) {
        return Err(Error::NoLimitProfile(format!(
            "θ = {} is not below αF(mean m) = {}",
            p.theta,
            p.alpha * p.f(mbar.max(0.0))
        )));
    }
    let c = break_even(p)?;
    let w_c = c * p.alpha * p.d(c) / p.theta * (mbar - c);
    Ok(LimitProfile {
        regime: LimitRegime::LargeEps,
        u_limit: ScalarField::constant(*g, c),
        w_limit: ScalarField::constant(*g, w_c),
        scalars: LimitScalars { c: Some(c), w_c: Some(w_c), ..Default::default() },
    })
}

/// `∫F(u)/d(u) / ∫1/d(u)`.
pub fn g_of(u: &ScalarField, p: &ModelParams) -> f64 {
    theta_k(p.k, &ModelParams { alpha: 1.0, ..*p }, u)
}

/// `(F(u)/u)'`.
fn f_over_u_prime(kind: Response, u: f64) -> f64 {
    match kind {
        Response::Linear => 0.0,
        Response::HollingIi => -1.0 / ((1.0 + u) * (1.0 + u)),
        Response::HollingIii => {
            let q = 1.0 + u * u;
            (1.0 - u * u) / (q * q)
        }
    }
}

/// Solution `z_c` of `εΔz + z(m − z) − c F(z)/d(z) = 0`, or `None` when only
/// the zero solution exists.
fn z_of_c(p: &ModelParams, m: &ScalarField, c: f64, init: &[f64]) -> Result<Option<Vec<f64>>> {
    let g = *m.grid();
    let mv = m.values();
    let rate_at_zero = m.map(|x| x - c * p.f_over_u(0.0) / p.d(0.0));
    if principal_eigenvalue(p.eps, &rate_at_zero)? <= 0.0 {
        return Ok(None);
    }
    let growth = |i: usize, z: f64| {
        let q = p.f_over_u(z) / p.d(z);
        let dq = f_over_u_prime(p.response, z) / p.d(z) - q * p.d_prime(z) / p.d(z);
        (mv[i] - z - c * q, -1.0 - c * dq)
    };
    let scale = m.norm_inf() + c * p.f_over_u(0.0) / p.d(m.max().max(0.0));
    let (z, _) = solve_semilinear(&g, p.eps, &growth, init.to_vec(), scale)?;
    Ok(Some(z))
}

/// Limit `(u*, c*)` for large predator diffusion: `w → c*` constant and
/// `u* = z_{c*}` with `αg(u*) = θ`.
pub fn large_mu_profile(p: &ModelParams, g: &Grid) -> Result<LimitProfile> {
    positive_theta(p)?;
    let report = check_assumptions(p, g);
    if let Some((name, c)) = report.first_core_failure() {
        return Err(Error::AssumptionViolated(format!("{name}: {}", c.detail)));
    }
    for (name, c) in [("H4", &report.h4), ("H5", &report.h5)] {
        if !c.passed {
            return Err(Error::AssumptionViolated(format!("{name}: {}", c.detail)));
        }
    }
    let m = p.resource_field(*g);
    let ut = solve_logistic(p.eps, &m)?.utilde;
    let top = p.alpha * g_of(&ut, p);
    if p.theta >= top {
        return Err(Error::NoLimitProfile(format!("θ = {} is not below αg(ũ) = {top}", p.theta)));
    }
    // G(c) = αg(z_c) − θ is decreasing; G = −θ once z_c vanishes.
    let excess = |z: &Option<Vec<f64>>| match z {
        Some(z) => p.alpha * g_of(&ScalarField::from_vec(*g, z.clone()), p) - p.theta,
        None => -p.theta,
    };
    let (mut lo, mut z_lo) = (0.0, ut.values().to_vec());
    let mut hi = m.norm_inf().max(1e-3);
    let mut z_hi;
    loop {
        z_hi = z_of_c(p, &m, hi, &z_lo)?;
        if excess(&z_hi) < 0.0 {
            break;
        }
        lo = hi;
        z_lo = z_hi.expect("positive excess implies a positive solution");
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::SolveFailure("no upper bracket for c*".into()));
        }
    }
    while hi - lo > 1e-13 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        let z = z_of_c(p, &m, mid, &z_lo)?;
        if excess(&z) >= 0.0 {
            lo = mid;
            z_lo = z.expect("positive excess implies a positive solution");
        } else {
            hi = mid;
        }
    }
    let c_star = lo;
    let u = z_of_c(p, &m, c_star, &z_lo)?.unwrap_or(z_lo);
    Ok(LimitProfile {
        regime: LimitRegime::LargeMu,
        u_limit: ScalarField::new(*g, u)?,
        w_limit: ScalarField::constant(*g, c_star),
        scalars: LimitScalars { c_star: Some(c_star), ..Default::default() },
    })
}

/// `(α/θ) d(c) c (m − c)`, clipped at zero.
fn saturated_predator(p: &ModelParams, c: f64, m: f64) -> f64 {
    (p.alpha / p.theta * p.d(c) * c * (m - c)).max(0.0)
}

/// Limit for small predator diffusion. Supports `m ≥ F⁻¹(θ/α)` and monotone
/// `m`; the free boundary is located by shooting on the trace of the
/// logistic solution on `(0, y)`.
pub fn small_mu_profile(p: &ModelParams, g: &Grid) -> Result<LimitProfile> {
    positive_theta(p)?;
    let m = p.resource_field(*g);
    let ut = solve_logistic(p.eps, &m)?;
    if p.theta >= p.alpha * p.f(ut.u_max) {
        return Err(Error::NoLimitProfile(format!(
            "θ = {} is not below αF(ũ_max) = {}",
            p.theta,
            p.alpha * p.f(ut.u_max)
        )));
    }
    let c = break_even(p)?;
    if m.min() >= c {
        let w = m.map(|x| saturated_predator(p, c, x));
        return Ok(LimitProfile {
            regime: LimitRegime::SmallMu,
            u_limit: ScalarField::constant(*g, c),
            w_limit: w,
            scalars: LimitScalars { c: Some(c), case: Some(SmallMuCase::ResourceAboveLevel), ..Default::default() },
        });
    }
    let mv = m.values();
    let increasing = mv.windows(2).all(|s| s[1] >= s[0]);
    let decreasing = mv.windows(2).all(|s| s[1] <= s[0]);
    if increasing {
        let (u, w, y, j) = shoot_increasing(p, &m, c)?;
        Ok(LimitProfile {
            regime: LimitRegime::SmallMu,
            u_limit: u,
            w_limit: w,
            scalars: LimitScalars {
                c: Some(c),
                y_star: Some(y),
                y_star_index: Some(j),
                case: Some(SmallMuCase::Increasing),
                ..Default::default()
            },
        })
    } else if decreasing {
        let n = g.len();
        let mirrored = ScalarField::new(*g, mv.iter().rev().cloned().collect())?;
        let (u, w, y, j) = shoot_increasing(p, &mirrored, c)?;
        let flip = |f: ScalarField| ScalarField::new(*g, f.into_values().into_iter().rev().collect());
        Ok(LimitProfile {
            regime: LimitRegime::SmallMu,
            u_limit: flip(u)?,
            w_limit: flip(w)?,
            scalars: LimitScalars {
                c: Some(c),
                y_star: Some(g.length() - y),
                y_star_index: Some(n - 1 - j),
                case: Some(SmallMuCase::Decreasing),
                ..Default::default()
            },
        })
    } else {
        Err(Error::Unsupported("m is neither monotone nor bounded below by F⁻¹(θ/α)".into()))
    }
}

/// Shooting for nondecreasing `m`. Returns `(u₀, w₀, y*, j*)` with
/// `j* = max{j : trace(x_j) ≤ c}`.
fn shoot_increasing(p: &ModelParams, m: &ScalarField, c: f64) -> Result<(ScalarField, ScalarField, f64, usize)> {
    let g = *m.grid();
    let n = g.len();
    let trace = |j: usize| endpoint_trace(p.eps, m, g.x(j), Side::Left);
    let (mut lo, mut hi) = (2usize, n - 1);
    let (t_lo, t_hi) = (trace(lo)?, trace(hi)?);
    if t_lo > c || t_hi <= c {
        return Err(Error::SolveFailure(format!(
            "shooting bracket has no sign change: trace {t_lo:.6e} at y = {}, {t_hi:.6e} at y = L, level {c:.6e}",
            g.x(lo)
        )));
    }
    let (mut f_lo, mut f_hi) = (t_lo, t_hi);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let t = trace(mid)?;
        if t <= c {
            lo = mid;
            f_lo = t;
        } else {
            hi = mid;
            f_hi = t;
        }
    }
    let j = lo;
    let y = g.x(j) + (c - f_lo) / (f_hi - f_lo) * (g.x(hi) - g.x(j));
    let left = solve_logistic_on(p.eps, m, g.x(j), Side::Left)?.utilde;
    let mv = m.values();
    let mut u = vec![c; n];
    let mut w = vec![0.0; n];
    u[..=j].copy_from_slice(left.values());
    for i in j + 1..n {
        w[i] = saturated_predator(p, c, mv[i]);
    }
    Ok((ScalarField::new(g, u)?, ScalarField::new(g, w)?, y, j))
}
