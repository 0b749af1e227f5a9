//! Positive solution of the diffusive logistic problem
//! `εΔu + u(m − u) = 0` with Neumann ends, on the full interval or on
//! the pieces `(0, y)` and `(y, L)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid, ScalarField};
use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticSolution {
    pub utilde: ScalarField,
    pub u_min: f64,
    pub u_max: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Per-capita growth `ρ(i, u)` and its derivative `∂ρ/∂u` at node `i`.
pub(crate) trait Growth: Sync {
    fn rate(&self, i: usize, u: f64) -> (f64, f64);
}

impl<F: Fn(usize, f64) -> (f64, f64) + Sync> Growth for F {
    fn rate(&self, i: usize, u: f64) -> (f64, f64) {
        self(i, u)
    }
}

/// Residual `ℓΔ_h u + u ρ(u)` and its sup norm.
fn residual(grid: &Grid, ell: f64, growth: &dyn Growth, u: &[f64], out: &mut [f64]) -> f64 {
    laplacian_into(grid, ell, u, out);
    let mut norm: f64 = 0.0;
    for i in 0..u.len() {
        out[i] += u[i] * growth.rate(i, u[i]).0;
        norm = norm.max(out[i].abs());
    }
    norm
}

/// Tolerance on the residual sup norm. The second term is the rounding
/// floor of the stencil, which exceeds the nominal target once `ℓ/h²` is
/// large.
pub(crate) fn residual_tolerance(grid: &Grid, ell: f64, rate_scale: f64, u_scale: f64) -> f64 {
    let h = grid.spacing();
    1e-10 * (1.0 + rate_scale) + 64.0 * f64::EPSILON * (4.0 * ell / (h * h) + rate_scale) * u_scale
}

/// Damped Newton for `ℓΔ_h u + u ρ(x, u) = 0`, `u > 0`, with
/// pseudo-time marching as a fallback. Returns the solution and its
/// residual sup norm.
pub(crate) fn solve_semilinear(
    grid: &Grid,
    ell: f64,
    growth: &dyn Growth,
    init: Vec<f64>,
    rate_scale: f64,
) -> Result<(Vec<f64>, f64)> {
    match newton(grid, ell, growth, init.clone(), rate_scale) {
        Ok(s) => Ok(s),
        Err(_) => {
            let relaxed = pseudo_time(grid, ell, growth, init, rate_scale)?;
            newton(grid, ell, growth, relaxed, rate_scale)
        }
    }
}

fn newton(grid: &Grid, ell: f64, growth: &dyn Growth, mut u: Vec<f64>, rate_scale: f64) -> Result<(Vec<f64>, f64)> {
    let n = u.len();
    let c = ell / (grid.spacing() * grid.spacing());
    let mut r = vec![0.0; n];
    let mut trial_r = vec![0.0; n];
    let mut norm = residual(grid, ell, growth, &u, &mut r);
    for _ in 0..100 {
        let u_scale = u.iter().cloned().fold(0.0, f64::max);
        if norm <= residual_tolerance(grid, ell, rate_scale, u_scale) {
            return Ok((u, norm));
        }
        let mut diag = vec![-2.0 * c; n];
        let mut sub = vec![c; n - 1];
        let mut sup = vec![c; n - 1];
        sup[0] = 2.0 * c;
        sub[n - 2] = 2.0 * c;
        for i in 0..n {
            let (rho, drho) = growth.rate(i, u[i]);
            diag[i] += rho + u[i] * drho;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let du = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + step * b).collect();
            if trial.iter().all(|&v| v > 0.0) {
                let t_norm = residual(grid, ell, growth, &trial, &mut trial_r);
                if t_norm < norm {
                    u = trial;
                    norm = t_norm;
                    std::mem::swap(&mut r, &mut trial_r);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            let u_scale = u.iter().cloned().fold(0.0, f64::max);
            // Stalled at the rounding floor: accept if close to tolerance.
            if norm <= 16.0 * residual_tolerance(grid, ell, rate_scale, u_scale) {
                return Ok((u, norm));
            }
            return Err(Error::SolveFailure(format!("Newton line search stalled at residual {norm:.3e}")));
        }
    }
    Err(Error::SolveFailure(format!("Newton did not converge, residual {norm:.3e}")))
}

/// Linearly implicit marching `(I − dt ℓA + dt ρ⁻) u' = u + dt ρ⁺ u`, which
/// keeps `u` positive for every `dt`.
fn pseudo_time(grid: &Grid, ell: f64, growth: &dyn Growth, mut u: Vec<f64>, rate_scale: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let c = ell / (grid.spacing() * grid.spacing());
    let mut dt = 0.1 / (1.0 + rate_scale);
    for v in u.iter_mut() {
        *v = v.max(1e-6);
    }
    for _ in 0..4000 {
        let mut diag = vec![1.0 + 2.0 * dt * c; n];
        let mut sub = vec![-dt * c; n - 1];
        let mut sup = vec![-dt * c; n - 1];
        sup[0] = -2.0 * dt * c;
        sub[n - 2] = -2.0 * dt * c;
        let mut rhs = u.clone();
        for i in 0..n {
            let rho = growth.rate(i, u[i]).0;
            if rho >= 0.0 {
                rhs[i] += dt * rho * u[i];
            } else {
                diag[i] -= dt * rho;
            }
        }
        let next = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
        let change = next.iter().zip(&u).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let scale = next.iter().cloned().fold(0.0, f64::max);
        u = next;
        if scale <= 1e-300 {
            return Err(Error::SolveFailure("pseudo-time marching collapsed to zero".into()));
        }
        if change <= 1e-9 * scale * dt.max(1.0) {
            break;
        }
        dt = (dt * 1.2).min(1e4);
    }
    Ok(u)
}

fn logistic_on_grid(eps: f64, m: &ScalarField) -> Result<LogisticSolution> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidInput(format!("diffusion rate must be positive, got {eps}")));
    }
    let grid = *m.grid();
    let (m_min, m_max) = (m.min(), m.max());
    if m_max == m_min {
        if m_max > 0.0 {
            let utilde = ScalarField::constant(grid, m_max);
            return Ok(LogisticSolution { utilde, u_min: m_max, u_max: m_max, residual: 0.0 });
        }
        return Err(Error::SolveFailure(format!("constant resource {m_max} admits no positive solution")));
    }
    let lambda = crate::eigen::principal_eigenvalue(eps, m)?;
    if lambda <= 0.0 {
        return Err(Error::SolveFailure(format!(
            "principal eigenvalue {lambda:.3e} of the resource is not positive: no positive solution"
        )));
    }
    let mv = m.values().to_vec();
    let growth = move |i: usize, u: f64| (mv[i] - u, -1.0);
    let start = m.mean().max(0.1);
    let (u, res) = solve_semilinear(&grid, eps, &growth, vec![start; grid.len()], m.norm_inf())?;
    let utilde = ScalarField::new(grid, u)?;
    Ok(LogisticSolution { u_min: utilde.min(), u_max: utilde.max(), residual: res, utilde })
}

/// The unique positive solution on the grid carried by `m`.
pub fn solve_logistic(eps: f64, m: &ScalarField) -> Result<LogisticSolution> {
    logistic_on_grid(eps, m)
}

/// `m` restricted to `(0, y)` or `(y, L)`, on a re-based sub-grid.
pub fn restrict_field(m: &ScalarField, y: f64, side: Side) -> Result<ScalarField> {
    let g = m.grid();
    match side {
        Side::Left => {
            let sub = g.restrict(y)?;
            Ok(m.slice(sub, 0))
        }
        Side::Right => {
            let sub = g.restrict_right(y)?;
            Ok(m.slice(sub, g.len() - sub.len()))
        }
    }
}

/// Logistic solution on `(0, y)` (`Left`) or `(y, L)` (`Right`).
pub fn solve_logistic_on(eps: f64, m: &ScalarField, y: f64, side: Side) -> Result<LogisticSolution> {
    logistic_on_grid(eps, &restrict_field(m, y, side)?)
}

/// Value of the sub-interval solution at the end facing the split point.
pub fn endpoint_trace(eps: f64, m: &ScalarField, y: f64, side: Side) -> Result<f64> {
    let s = solve_logistic_on(eps, m, y, side)?;
    let v = s.utilde.values();
    Ok(match side {
        Side::Left => v[v.len() - 1],
        Side::Right => v[0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(g: Grid) -> ScalarField {
        ScalarField::from_fn(g, |x| 0.5 + 0.5 * x.sin())
    }

    #[test]
    fn constant_resource_is_exact() {
        let g = build_grid(3.0, 31).unwrap();
        let s = solve_logistic(0.7, &ScalarField::constant(g, 0.4)).unwrap();
        assert!(s.utilde.values().iter().all(|&v| v == 0.4));
        let s = solve_logistic_on(0.7, &ScalarField::constant(g, 0.4), 1.5, Side::Left).unwrap();
        assert!(s.utilde.values().iter().all(|&v| v == 0.4));
    }

    #[test]
    fn large_diffusion_tends_to_mean() {
        let g = build_grid(2.0 * PI, 401).unwrap();
        let s = solve_logistic(1e4, &sine(g)).unwrap();
        assert!(s.utilde.values().iter().all(|v| (v - 0.5).abs() < 1e-3));
        assert!(s.residual <= residual_tolerance(&g, 1e4, 1.0, s.u_max) * 16.0);
    }

    #[test]
    fn small_diffusion_tends_to_positive_part() {
        let g = build_grid(2.0 * PI, 401).unwrap();
        let m = sine(g);
        let s = solve_logistic(1e-6, &m).unwrap();
        for i in 0..g.len() {
            let x = g.x(i);
            if (x - 1.5 * PI).abs() > 0.5 {
                assert!((s.utilde.values()[i] - m.values()[i].max(0.0)).abs() < 0.05, "x = {x}");
            }
        }
    }

    #[test]
    fn residual_and_bounds() {
        let g = build_grid(2.0 * PI, 201).unwrap();
        let m = sine(g);
        let s = solve_logistic(0.1, &m).unwrap();
        assert!(s.residual <= 1e-10 * (1.0 + m.norm_inf()));
        assert!(s.utilde.values().iter().all(|&v| v > 0.0 && v <= m.max() + 1e-8));
        let lam = crate::eigen::principal_eigenvalue(0.1, &m.zip_map(&s.utilde, |a, b| a - b)).unwrap();
        assert!(lam.abs() < 1e-6, "{lam}");
    }

    #[test]
    fn uniqueness_from_random_starts() {
        let g = build_grid(2.0 * PI, 101).unwrap();
        let m = sine(g);
        let base = solve_logistic(0.1, &m).unwrap().utilde;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mv = m.values().to_vec();
        let growth = move |i: usize, u: f64| (mv[i] - u, -1.0);
        for _ in 0..5 {
            let init: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.05..2.0)).collect();
            let (u, _) = solve_semilinear(&g, 0.1, &growth, init, 1.0).unwrap();
            let d = u.iter().zip(base.values()).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
            assert!(d < 1e-8, "{d}");
        }
    }

    #[test]
    fn increasing_resource_gives_increasing_profile() {
        let g = build_grid(1.0, 201).unwrap();
        let m = ScalarField::from_fn(g, |x| 1.5 * x);
        let s = solve_logistic(0.05, &m).unwrap();
        assert!(s.utilde.values().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn subinterval_identity_and_monotone_trace() {
        let g = build_grid(1.0, 201).unwrap();
        let m = ScalarField::from_fn(g, |x| 1.5 * x);
        let full = solve_logistic(0.01, &m).unwrap();
        let at_l = solve_logistic_on(0.01, &m, 1.0, Side::Left).unwrap();
        assert_eq!(full.utilde, at_l.utilde);
        let t1 = endpoint_trace(0.01, &m, 0.3, Side::Left).unwrap();
        let t2 = endpoint_trace(0.01, &m, 0.6, Side::Left).unwrap();
        assert!(t2 > t1);
        let t_end = endpoint_trace(0.01, &m, 1.0, Side::Left).unwrap();
        assert!((t_end - full.u_max).abs() < 1e-14);
        let t0 = endpoint_trace(0.01, &m, 2.0 * g.spacing(), Side::Left).unwrap();
        assert!((t0 - m.values()[0]).abs() < 0.02, "{t0}");
    }

    #[test]
    fn right_restriction() {
        let g = build_grid(1.0, 101).unwrap();
        let m = ScalarField::from_fn(g, |x| 1.0 - x);
        let r = restrict_field(&m, 0.25, Side::Right).unwrap();
        assert_eq!(r.len(), 76);
        assert!((r.values()[0] - 0.75).abs() < 1e-12);
        assert!((r.grid().length() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_resource_is_rejected() {
        let g = build_grid(2.0 * PI, 101).unwrap();
        let m = ScalarField::from_fn(g, |x| -1.0 + 0.5 * x.sin());
        assert!(solve_logistic(0.1, &m).is_err());
    }
}
