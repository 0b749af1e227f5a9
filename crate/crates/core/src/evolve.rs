//! Time stepping for the original cross-diffusion system
//!
//! ```text
//! u_t = εΔu + u(m − u) − F(u) v,
//! v_t = μΔ(d(u) v) + (αF(u) − θ) v,
//! ```
//!
//! and a positivity-preserving relaxation of the transformed steady system.
//!
//! The cross term uses the face flux `d_{i+1}v_{i+1} − d_i v_i =
//! d̄ Δv + v̄ Δd`, exact in floating-point arithmetic up to rounding, with
//! zero flux through both ends. The first part is taken implicitly with `d`
//! frozen, the second explicitly. Fixed points are therefore exactly the
//! discrete steady states of the transformed system under `w = d(u) v`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid, ScalarField};
use crate::linalg::solve_tridiagonal;
use crate::model::ModelParams;

/// Cell Péclet number `|Δd|/d̄` above which the drift flux is upwinded.
const PECLET_UPWIND: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub u: ScalarField,
    pub v: ScalarField,
    /// Nodes whose value was raised from negative to zero.
    pub clipped: usize,
}

fn face_values(p: &ModelParams, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let d: Vec<f64> = u.iter().map(|&x| p.d(x)).collect();
    let mut dbar = vec![0.0; n - 1];
    let mut drift = vec![0.0; n - 1];
    for i in 0..n - 1 {
        dbar[i] = 0.5 * (d[i] + d[i + 1]);
        let dd = d[i + 1] - d[i];
        let vface = if dd.abs() > PECLET_UPWIND * dbar[i] {
            // Flux −μ v Δd/h moves mass towards lower d.
            if dd > 0.0 {
                v[i + 1]
            } else {
                v[i]
            }
        } else {
            0.5 * (v[i] + v[i + 1])
        };
        drift[i] = vface * dd;
    }
    (dbar, drift)
}

/// Largest step for which the explicit drift and reaction are stable.
pub fn max_stable_dt(p: &ModelParams, g: &Grid, u: &ScalarField, v: &ScalarField) -> f64 {
    let h = g.spacing();
    let m = p.resource_field(*g);
    let (uv, vv) = (u.values(), v.values());
    let mut speed: f64 = 0.0;
    for i in 0..uv.len() - 1 {
        speed = speed.max(p.mu * (p.d(uv[i + 1]) - p.d(uv[i])).abs() / h);
    }
    let mut rate: f64 = 0.0;
    for i in 0..uv.len() {
        let prey = (m.values()[i] - uv[i]).abs() + p.f_over_u(uv[i]) * vv[i];
        let pred = (p.alpha * p.f(uv[i]) - p.theta).abs();
        rate = rate.max(prey).max(pred);
    }
    let drift_dt = if speed > 0.0 { h / speed } else { f64::INFINITY };
    let react_dt = if rate > 0.0 { 0.5 / rate } else { f64::INFINITY };
    drift_dt.min(react_dt)
}

/// One implicit-explicit step of length `dt`.
pub fn step_original(state: (&ScalarField, &ScalarField), p: &ModelParams, dt: f64) -> Result<StepOutcome> {
    let (u, v) = state;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let g = *u.grid();
    let limit = max_stable_dt(p, &g, u, v);
    if dt > limit {
        return Err(Error::StepRejected { suggested: 0.9 * limit });
    }
    let n = g.len();
    let h = g.spacing();
    let m = p.resource_field(g);
    let (uv, vv) = (u.values(), v.values());
    let mut clipped = 0;

    // Prey: (I − dt εA) u' = u + dt (u(m − u) − F(u) v).
    let c = dt * p.eps / (h * h);
    let mut diag = vec![1.0 + 2.0 * c; n];
    let mut sub = vec![-c; n - 1];
    let mut sup = vec![-c; n - 1];
    sup[0] = -2.0 * c;
    sub[n - 2] = -2.0 * c;
    let rhs: Vec<f64> = (0..n).map(|i| uv[i] + dt * (uv[i] * (m.values()[i] - uv[i]) - p.f(uv[i]) * vv[i])).collect();
    let mut un = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;

    // Predator: v' − dt μ ∇·(d̄ ∇v') = v + dt (μ ∇·(v̄ ∇d) + (αF − θ) v).
    let (dbar, drift) = face_values(p, uv, vv);
    let q = dt * p.mu / (h * h);
    for d in diag.iter_mut() {
        *d = 1.0;
    }
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        // Node i's control volume is h/2 at the ends, h inside.
        let vol = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        let mut drift_div = 0.0;
        if i + 1 < n {
            diag[i] += q * dbar[i] / vol;
            sup[i] = -q * dbar[i] / vol;
            drift_div += drift[i];
        }
        if i > 0 {
            diag[i] += q * dbar[i - 1] / vol;
            sub[i - 1] = -q * dbar[i - 1] / vol;
            drift_div -= drift[i - 1];
        }
        rhs[i] = vv[i]
            + dt * (p.mu * drift_div / (h * h * vol) + (p.alpha * p.f(uv[i]) - p.theta) * vv[i]);
    }
    let mut vn = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    for x in un.iter_mut().chain(vn.iter_mut()) {
        if *x < 0.0 {
            *x = 0.0;
            clipped += 1;
        }
    }
    Ok(StepOutcome { u: ScalarField::new(g, un)?, v: ScalarField::new(g, vn)?, clipped })
}

/// `(u_t, v_t)` given by the spatial operator of the original system.
pub fn original_rates(p: &ModelParams, u: &ScalarField, v: &ScalarField) -> (ScalarField, ScalarField) {
    let g = *u.grid();
    let n = g.len();
    let m = p.resource_field(g);
    let (uv, vv) = (u.values(), v.values());
    let mut lu = vec![0.0; n];
    laplacian_into(&g, p.eps, uv, &mut lu);
    let dv: Vec<f64> = (0..n).map(|i| p.d(uv[i]) * vv[i]).collect();
    let mut lv = vec![0.0; n];
    laplacian_into(&g, p.mu, &dv, &mut lv);
    for i in 0..n {
        lu[i] += uv[i] * (m.values()[i] - uv[i]) - p.f(uv[i]) * vv[i];
        lv[i] += (p.alpha * p.f(uv[i]) - p.theta) * vv[i];
    }
    (ScalarField::from_vec(g, lu), ScalarField::from_vec(g, lv))
}

fn steady_gap(p: &ModelParams, u: &ScalarField, v: &ScalarField) -> f64 {
    let (a, b) = original_rates(p, u, v);
    a.norm_inf().max(b.norm_inf())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Times of the stored snapshots, ending with the final time.
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_u: ScalarField,
    pub final_v: ScalarField,
    pub converged: bool,
    /// `‖(u_t, v_t)‖∞` at the final time.
    pub steady_gap: f64,
    pub steps: usize,
    pub clipped: usize,
}

impl Trajectory {
    /// Share of node updates that had to be clipped at zero.
    pub fn clipped_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.clipped as f64 / (2 * self.steps * self.final_u.len()) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub dt: f64,
    pub tol: f64,
    pub t_max: f64,
    /// Times at which to store snapshots, ascending.
    pub snapshot_times: Vec<f64>,
}

/// Steps with adaptive `dt` until the PDE residual falls below `tol`.
pub fn run_to_steady(p: &ModelParams, g: &Grid, init: (ScalarField, ScalarField), dt: f64, tol: f64, t_max: f64) -> Result<Trajectory> {
    run_to_steady_with(p, g, init, &RunOptions { dt, tol, t_max, snapshot_times: Vec::new() })
}

pub fn run_to_steady_with(p: &ModelParams, g: &Grid, init: (ScalarField, ScalarField), opts: &RunOptions) -> Result<Trajectory> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    p.validate()?;
    let (mut u, mut v) = init;
    if u.grid() != g || v.grid() != g {
        return Err(Error::InvalidInput("initial fields do not match the grid".into()));
    }
    if u.values().iter().chain(v.values()).any(|&x| x < 0.0) {
        return Err(Error::InvalidInput("initial densities must be nonnegative".into()));
    }
    let mut t = 0.0;
    let mut dt = opts.dt;
    let mut streak = 0;
    let (mut steps, mut clipped) = (0usize, 0usize);
    let mut snapshots = Vec::new();
    let mut next_snap = 0;
    let mut gap = steady_gap(p, &u, &v);
    while gap > opts.tol && t < opts.t_max {
        while next_snap < opts.snapshot_times.len() && opts.snapshot_times[next_snap] <= t {
            snapshots.push(Snapshot { t, u: u.clone(), v: v.clone() });
            next_snap += 1;
        }
        let mut step_dt = dt.min(opts.t_max - t);
        if next_snap < opts.snapshot_times.len() {
            step_dt = step_dt.min(opts.snapshot_times[next_snap] - t).max(f64::MIN_POSITIVE);
        }
        match step_original((&u, &v), p, step_dt) {
            Ok(out) => {
                u = out.u;
                v = out.v;
                clipped += out.clipped;
                steps += 1;
                t += step_dt;
                streak += 1;
                if streak >= 20 {
                    dt *= 1.1;
                    streak = 0;
                }
                gap = steady_gap(p, &u, &v);
            }
            Err(Error::StepRejected { suggested }) => {
                dt = (0.5 * dt).min(suggested);
                streak = 0;
                if dt < 1e-14 {
                    return Err(Error::SolveFailure("time step underflow".into()));
                }
            }
            Err(e) => return Err(e),
        }
    }
    while next_snap < opts.snapshot_times.len() && opts.snapshot_times[next_snap] <= t {
        snapshots.push(Snapshot { t, u: u.clone(), v: v.clone() });
        next_snap += 1;
    }
    let mut times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    if times.last().is_none_or(|&last| last < t) {
        times.push(t);
    }
    Ok(Trajectory { times, snapshots, converged: gap <= opts.tol, steady_gap: gap, final_u: u, final_v: v, steps, clipped })
}

/// Linearly implicit relaxation of the transformed steady system,
/// `(I − dt ℓA + dt ρ⁻) z' = z + dt ρ⁺ z` for each species with per-capita
/// growth `ρ` frozen at the current state. Positivity is preserved for any
/// `dt`. Used to produce Newton starting points.
pub fn pseudo_time_transformed(
    p: &ModelParams,
    g: &Grid,
    init: (ScalarField, ScalarField),
    dt: f64,
    steps: usize,
) -> Result<(ScalarField, ScalarField)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let n = g.len();
    let h = g.spacing();
    let m = p.resource_field(*g);
    let bound = m.max().max(crate::steady::c0_proxy(p, g, m.max()));
    let (mut u, mut w) = (init.0.into_values(), init.1.into_values());
    let implicit = |ell: f64, z: &[f64], rho: &[f64]| -> Result<Vec<f64>> {
        let c = dt * ell / (h * h);
        let mut diag = vec![1.0 + 2.0 * c; n];
        let mut sub = vec![-c; n - 1];
        let mut sup = vec![-c; n - 1];
        sup[0] = -2.0 * c;
        sub[n - 2] = -2.0 * c;
        let mut rhs = z.to_vec();
        for i in 0..n {
            if rho[i] >= 0.0 {
                rhs[i] += dt * rho[i] * z[i];
            } else {
                diag[i] -= dt * rho[i];
            }
        }
        solve_tridiagonal(&sub, &diag, &sup, &rhs)
    };
    for _ in 0..steps {
        let rho_u: Vec<f64> =
            (0..n).map(|i| m.values()[i] - u[i] - p.f_over_u(u[i]) / p.d(u[i]) * w[i]).collect();
        let rho_w: Vec<f64> = (0..n).map(|i| (p.alpha * p.f(u[i]) - p.theta) / p.d(u[i])).collect();
        let un = implicit(p.eps, &u, &rho_u)?;
        let wn = implicit(p.mu, &w, &rho_w)?;
        let change = un.iter().zip(&u).chain(wn.iter().zip(&w)).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        u = un;
        w = wn;
        let peak = u.iter().chain(&w).fold(0.0f64, |a, &x| a.max(x));
        if !(peak <= 10.0 * bound) {
            return Err(Error::Aborted(format!("sup norm {peak:.3e} exceeds ten times the a priori bound {bound:.3e}")));
        }
        if change <= 1e-14 * (1.0 + peak) {
            break;
        }
    }
    Ok((ScalarField::new(*g, u)?, ScalarField::new(*g, w)?))
}
