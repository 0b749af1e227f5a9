//! Coexistence steady states of the transformed system
//!
//! ```text
//! εΔu + u(m − u) − F(u) w / d(u) = 0,
//! μΔw + (αF(u) − θ) w / d(u)   = 0,
//! ```
//!
//! with Neumann ends, and their back-transform `v = w / d(u)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{jacobian, principal_eig};
use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid, ScalarField};
use crate::linalg::{solve_tridiagonal, BandMatrix};
use crate::logistic::solve_logistic;
use crate::model::ModelParams;

/// Below this sup norm the predator is treated as extinct.
const COLLAPSE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub u: ScalarField,
    pub w: ScalarField,
    /// `w / d(u)`.
    pub v: ScalarField,
    pub residual_u: f64,
    pub residual_w: f64,
    /// Residual target used for convergence.
    pub tolerance: f64,
    /// Whether `u < ũ + 1e-8` at every node.
    pub below_prey_profile: bool,
    /// Reporting proxy for the sup bound on `w`.
    pub c0_proxy: f64,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Small-amplitude guess along the bifurcating direction from `(ũ, 0)`.
    Bifurcation,
    /// Relax the given fields in pseudo-time before Newton.
    WarmStart(ScalarField, ScalarField),
    /// Start Newton directly from the given fields.
    Given(ScalarField, ScalarField),
}

/// Result of a steady-state search. `NotFound` is not a proof that no
/// positive solution exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SteadyOutcome {
    Found(Box<SteadyState>),
    NotFound { reason: String },
}

impl SteadyOutcome {
    pub fn state(&self) -> Option<&SteadyState> {
        match self {
            SteadyOutcome::Found(s) => Some(s),
            SteadyOutcome::NotFound { .. } => None,
        }
    }

    pub fn into_state(self) -> Option<SteadyState> {
        match self {
            SteadyOutcome::Found(s) => Some(*s),
            SteadyOutcome::NotFound { .. } => None,
        }
    }
}

/// Interleaved residual `(R_u0, R_w0, R_u1, R_w1, ...)`.
pub(crate) fn residual(p: &ModelParams, m: &[f64], u: &[f64], w: &[f64], grid: &Grid) -> Vec<f64> {
    let n = u.len();
    let mut lu = vec![0.0; n];
    let mut lw = vec![0.0; n];
    laplacian_into(grid, p.eps, u, &mut lu);
    laplacian_into(grid, p.mu, w, &mut lw);
    let mut r = vec![0.0; 2 * n];
    for i in 0..n {
        let (f, d) = (p.f(u[i]), p.d(u[i]));
        r[2 * i] = lu[i] + u[i] * (m[i] - u[i]) - f / d * w[i];
        r[2 * i + 1] = lw[i] + (p.alpha * f - p.theta) / d * w[i];
    }
    r
}

fn split_norms(r: &[f64]) -> (f64, f64) {
    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    for pair in r.chunks(2) {
        a = a.max(pair[0].abs());
        b = b.max(pair[1].abs());
    }
    (a, b)
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Residual target `1e-8 (1 + ‖m‖∞²)` plus the rounding floor of the stencils.
pub fn steady_tolerance(p: &ModelParams, grid: &Grid, m_max: f64, state_max: f64) -> f64 {
    let h = grid.spacing();
    let stiff = 4.0 * p.eps.max(p.mu) / (h * h);
    1e-8 * (1.0 + m_max * m_max) + 16.0 * f64::EPSILON * stiff * state_max
}

/// `α d(0) m_max² |Ω| / (4 θ min d)`, the L¹ bound on `w` scaled by the
/// spread of `d` over `[0, m_max]`.
pub fn c0_proxy(p: &ModelParams, grid: &Grid, m_max: f64) -> f64 {
    if p.theta <= 0.0 {
        return f64::INFINITY;
    }
    let m_max = m_max.max(0.0);
    p.alpha * p.d(0.0) * m_max * m_max * grid.length() / (4.0 * p.theta * p.d(m_max))
}

struct Problem<'a> {
    p: &'a ModelParams,
    grid: Grid,
    m: Vec<f64>,
    m_max: f64,
}

impl Problem<'_> {
    fn tol(&self, u: &[f64], w: &[f64]) -> f64 {
        let s = u.iter().chain(w).fold(0.0f64, |a, v| a.max(v.abs()));
        steady_tolerance(self.p, &self.grid, self.m_max, s)
    }

    /// Whether `(ru, rw)` is within `factor` tolerances. The predator
    /// equation is linear in `w`, so its residual is measured relative to
    /// `min(‖w‖∞, 1)`; otherwise iterates sliding towards `(ũ, 0)` would
    /// pass.
    fn converged(&self, u: &[f64], w: &[f64], ru: f64, rw: f64, factor: f64) -> bool {
        let t = factor * self.tol(u, w);
        let w_max = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        ru <= t && rw <= t * w_max.min(1.0)
    }

    fn residual(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        residual(self.p, &self.m, u, w, &self.grid)
    }

    /// Damped Newton with a fraction-to-boundary rule that keeps `u, w > 0`.
    /// `pseudo_dt` adds `I/dt` to the Jacobian (pseudo-transient continuation).
    fn newton(&self, mut u: Vec<f64>, mut w: Vec<f64>, max_iter: usize, mut pseudo_dt: Option<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = u.len();
        let mut r = self.residual(&u, &w);
        let mut norm = norm2(&r);
        for _ in 0..max_iter {
            let (ru, rw) = split_norms(&r);
            if self.converged(&u, &w, ru, rw, 1.0) {
                return Ok((u, w));
            }
            if w.iter().cloned().fold(0.0, f64::max) < COLLAPSE {
                return Err(Error::SolveFailure("predator density collapsed".into()));
            }
            let mut j = jacobian(self.p, &self.m, &u, &w, &self.grid);
            // J dz = −R, or (I/dt − J) dz = R when continuing in pseudo-time.
            let rhs: Vec<f64> = match pseudo_dt {
                Some(dt) => {
                    let mut neg = BandMatrix::zeros(2 * n, 2, 2);
                    for i in 0..2 * n {
                        for c in i.saturating_sub(2)..=(i + 2).min(2 * n - 1) {
                            neg.add(i, c, -j.get(i, c));
                        }
                        neg.add(i, i, 1.0 / dt);
                    }
                    j = neg;
                    r.clone()
                }
                None => r.iter().map(|v| -v).collect(),
            };
            let dz = j.solve(&rhs)?;
            let mut step: f64 = 1.0;
            for i in 0..n {
                for (val, d) in [(u[i], dz[2 * i]), (w[i], dz[2 * i + 1])] {
                    if d < 0.0 {
                        step = step.min(-0.9 * val / d);
                    }
                }
            }
            let mut accepted = false;
            for _ in 0..30 {
                let tu: Vec<f64> = (0..n).map(|i| u[i] + step * dz[2 * i]).collect();
                let tw: Vec<f64> = (0..n).map(|i| w[i] + step * dz[2 * i + 1]).collect();
                let tr = self.residual(&tu, &tw);
                let tn = norm2(&tr);
                if tn < norm || pseudo_dt.is_some() && tn.is_finite() && tn < 10.0 * norm {
                    if let Some(dt) = pseudo_dt.as_mut() {
                        *dt = (*dt * (norm / tn).clamp(0.5, 4.0)).min(1e12);
                    }
                    u = tu;
                    w = tw;
                    r = tr;
                    norm = tn;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                match pseudo_dt.as_mut() {
                    Some(dt) if *dt > 1e-8 => *dt *= 0.1,
                    _ => {
                        let (ru, rw) = split_norms(&r);
                        if self.converged(&u, &w, ru, rw, 16.0) {
                            return Ok((u, w));
                        }
                        return Err(Error::SolveFailure(format!("line search stalled at residual {norm:.3e}")));
                    }
                }
            }
        }
        Err(Error::SolveFailure(format!("no convergence, residual {norm:.3e}")))
    }
}

/// Bifurcation guess `(ũ + δh, δφ₁)` where `(εΔ + m − 2ũ)h = F(ũ)φ₁/d(ũ)`.
fn bifurcation_guess(p: &ModelParams, grid: &Grid, m: &[f64], ut: &ScalarField) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let phi = principal_eig(p.mu, &p.predator_weight(ut))?.phi;
    let c = p.eps / (grid.spacing() * grid.spacing());
    let uv = ut.values();
    let diag: Vec<f64> = (0..n).map(|i| -2.0 * c + m[i] - 2.0 * uv[i]).collect();
    let mut sub = vec![c; n - 1];
    let mut sup = vec![c; n - 1];
    sup[0] = 2.0 * c;
    sub[n - 2] = 2.0 * c;
    let rhs: Vec<f64> = (0..n).map(|i| p.f(uv[i]) / p.d(uv[i]) * phi.values()[i]).collect();
    let h = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    let delta = 0.05 * ut.norm_inf();
    let u = (0..n).map(|i| (uv[i] + delta * h[i]).max(0.01 * uv[i])).collect();
    let w = phi.values().iter().map(|f| delta * f).collect();
    Ok((u, w))
}

/// Step for which the explicitly treated growth rates of the relaxation
/// stay below one half per step on `0 ≤ u ≤ m_max`.
fn relaxation_dt(p: &ModelParams, m_max: f64) -> f64 {
    let top = m_max.max(0.0);
    let predator = ((p.alpha * p.f(top) - p.theta) / p.d(top)).max(0.0);
    0.5 / (1.0 + top + predator)
}

/// Searches for a positive solution. Newton is tried first, then from the
/// end points of the transformed relaxation, of time marching the original
/// system, and of pseudo-transient continuation.
pub fn solve_coexistence(p: &ModelParams, g: &Grid, init: Init) -> Result<SteadyOutcome> {
    p.validate()?;
    if let Some(v) = crate::model::core_violation(p, g) {
        return Err(Error::AssumptionViolated(v));
    }
    let mf = p.resource_field(*g);
    let prey = solve_logistic(p.eps, &mf)?;
    let prob = Problem { p, grid: *g, m: mf.values().to_vec(), m_max: mf.max() };
    let (u0, w0, relax_first) = match init {
        Init::Bifurcation => {
            let (u, w) = bifurcation_guess(p, g, &prob.m, &prey.utilde)?;
            (u, w, false)
        }
        Init::WarmStart(u, w) => (u.into_values(), w.into_values(), true),
        Init::Given(u, w) => (u.into_values(), w.into_values(), false),
    };
    if u0.len() != g.len() || w0.len() != g.len() {
        return Err(Error::InvalidInput("initial fields do not match the grid".into()));
    }
    let positive = |v: &[f64]| v.iter().map(|x| x.max(1e-12)).collect::<Vec<_>>();
    let (u0, w0) = (positive(&u0), positive(&w0));

    let mut attempts: Vec<String> = Vec::new();
    let mut found = None;
    if !relax_first {
        match prob.newton(u0.clone(), w0.clone(), 60, None) {
            Ok(s) => found = Some(s),
            Err(e) => attempts.push(format!("Newton: {e}")),
        }
    }
    if found.is_none() {
        let start = crate::evolve::pseudo_time_transformed(
            p,
            g,
            (ScalarField::from_vec(*g, u0.clone()), ScalarField::from_vec(*g, w0.clone())),
            relaxation_dt(p, prob.m_max),
            20_000,
        );
        match start {
            Ok((u, w)) => match prob.newton(positive(u.values()), positive(w.values()), 60, None) {
                Ok(s) => found = Some(s),
                Err(e) => attempts.push(format!("relaxation then Newton: {e}")),
            },
            Err(e) => attempts.push(format!("relaxation: {e}")),
        }
    }
    if found.is_none() {
        let v0: Vec<f64> = u0.iter().zip(&w0).map(|(&u, &w)| w / p.d(u)).collect();
        let init = (ScalarField::from_vec(*g, u0.clone()), ScalarField::from_vec(*g, v0));
        match crate::evolve::run_to_steady(p, g, init, 1e-3, 1e-6, 1e4) {
            Ok(tr) => {
                let w: Vec<f64> = tr.final_u.values().iter().zip(tr.final_v.values()).map(|(&u, &v)| p.d(u) * v).collect();
                match prob.newton(positive(tr.final_u.values()), positive(&w), 60, None) {
                    Ok(s) => found = Some(s),
                    Err(e) => attempts.push(format!("time marching then Newton: {e}")),
                }
            }
            Err(e) => attempts.push(format!("time marching: {e}")),
        }
    }
    if found.is_none() {
        match prob.newton(u0, w0, 2000, Some(0.1)) {
            Ok((u, w)) => match prob.newton(u.clone(), w.clone(), 60, None) {
                Ok(s) => found = Some(s),
                Err(e) => attempts.push(format!("continuation then Newton: {e}")),
            },
            Err(e) => attempts.push(format!("continuation: {e}")),
        }
    }
    let Some((u, w)) = found else {
        return Ok(SteadyOutcome::NotFound { reason: attempts.join("; ") });
    };
    if w.iter().cloned().fold(0.0, f64::max) < COLLAPSE || u.iter().chain(&w).any(|&x| !(x > 0.0)) {
        return Ok(SteadyOutcome::NotFound { reason: "converged to a state that is not strictly positive".into() });
    }
    Ok(SteadyOutcome::Found(Box::new(assemble(p, g, &prob, &prey.utilde, u, w))))
}

fn assemble(p: &ModelParams, g: &Grid, prob: &Problem, ut: &ScalarField, u: Vec<f64>, w: Vec<f64>) -> SteadyState {
    let r = prob.residual(&u, &w);
    let (ru, rw) = split_norms(&r);
    let tolerance = 16.0 * prob.tol(&u, &w);
    let below = u.iter().zip(ut.values()).all(|(a, b)| *a < b + 1e-8);
    let v: Vec<f64> = u.iter().zip(&w).map(|(&a, &b)| b / p.d(a)).collect();
    SteadyState {
        u: ScalarField::from_vec(*g, u),
        w: ScalarField::from_vec(*g, w),
        v: ScalarField::from_vec(*g, v),
        residual_u: ru,
        residual_w: rw,
        tolerance,
        below_prey_profile: below,
        c0_proxy: c0_proxy(p, g, prob.m_max),
        params: *p,
    }
}

/// `(u, v)` with `v = w / d(u)`.
pub fn back_transform(s: &SteadyState) -> (ScalarField, ScalarField) {
    let p = s.params;
    (s.u.clone(), s.u.zip_map(&s.w, |u, w| w / p.d(u)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassIdentity {
    /// `∫ θ w / d(u)`.
    pub predator_loss: f64,
    /// `α ∫ u (m − u)`.
    pub prey_gain: f64,
    pub gap: f64,
    /// `1 + max` of the two sides' absolute integrands.
    pub scale: f64,
}

/// Balance `∫θw/d(u) = α∫u(m − u)` satisfied by every positive solution.
pub fn mass_identity(s: &SteadyState) -> Result<MassIdentity> {
    mass_identity_of(&s.params, &s.u, &s.w)
}

pub fn mass_identity_of(p: &ModelParams, u: &ScalarField, w: &ScalarField) -> Result<MassIdentity> {
    if w.max() <= 0.0 {
        return Err(Error::NotCoexistence("predator density vanishes identically".into()));
    }
    let g = u.grid();
    let m = p.resource_field(*g);
    let loss: Vec<f64> = (0..g.len()).map(|i| p.theta * w.values()[i] / p.d(u.values()[i])).collect();
    let gain: Vec<f64> = (0..g.len()).map(|i| p.alpha * u.values()[i] * (m.values()[i] - u.values()[i])).collect();
    let predator_loss = g.integrate_values(&loss);
    let prey_gain = g.integrate_values(&gain);
    let abs_gain: Vec<f64> = gain.iter().map(|v| v.abs()).collect();
    let scale = 1.0 + predator_loss.abs().max(g.integrate_values(&abs_gain));
    Ok(MassIdentity { predator_loss, prey_gain, gap: (predator_loss - prey_gain).abs(), scale })
}

/// Newton from `count` random positive starts; returns one representative
/// per cluster of states within `1e-6` in the sup norm.
pub fn multistart_probe(p: &ModelParams, g: &Grid, count: usize, seed: u64) -> Result<Vec<SteadyState>> {
    if count < 2 {
        return Err(Error::InvalidInput("multistart needs at least two starts".into()));
    }
    let mf = p.resource_field(*g);
    let prey = solve_logistic(p.eps, &mf)?;
    let ut = prey.utilde.clone();
    let w_scale = (c0_proxy(p, g, mf.max()) / g.length()).clamp(1e-3, 10.0);
    let results: Vec<Option<SteadyState>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let u: Vec<f64> = ut.values().iter().map(|x| x * rng.random_range(0.2..1.0)).collect();
            let w: Vec<f64> = (0..g.len()).map(|_| w_scale * rng.random_range(0.05..1.0)).collect();
            let (u, w) = (ScalarField::from_vec(*g, u), ScalarField::from_vec(*g, w));
            solve_coexistence(p, g, Init::Given(u, w)).ok().and_then(SteadyOutcome::into_state)
        })
        .collect();
    let mut reps: Vec<SteadyState> = Vec::new();
    for s in results.into_iter().flatten() {
        let close = reps.iter().any(|r| r.u.distance_inf(&s.u).max(r.w.distance_inf(&s.w)) <= 1e-6);
        if !close {
            reps.push(s);
        }
    }
    Ok(reps)
}
