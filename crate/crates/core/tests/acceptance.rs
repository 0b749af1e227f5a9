//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use coexist_core::asymptotics::{g_of, large_eps_profile, large_mu_profile, small_mu_profile};
use coexist_core::eigen::{dlambda_dk, principal_eigenvalue};
use coexist_core::evolve::run_to_steady;
use coexist_core::logistic::solve_logistic;
use coexist_core::steady::{mass_identity, multistart_probe, solve_coexistence, Init, SteadyOutcome, SteadyState};
use coexist_core::thresholds::{
    calf, chebyshev_sum_check, classify_regime, classify_semitrivial, convexity_check, k_star, mu_star, theta_0,
    theta_k, MuStar, RegimeTag, Stability,
};
use coexist_core::{integrate, Dispersal, Grid, ModelParams, Response, ScalarField};
use common::{circle, fig2, ramp, rng, smooth_positive, unit};
use nalgebra::DMatrix;
use rand::Rng;

type Outcome = (bool, String);

fn prey(p: &ModelParams, g: Grid) -> ScalarField {
    solve_logistic(p.eps, &p.resource_field(g)).unwrap().utilde
}

fn alpha_f_range(p: &ModelParams, ut: &ScalarField) -> (f64, f64) {
    (p.alpha * p.f(ut.min()), p.alpha * p.f(ut.max()))
}

fn found(p: &ModelParams, g: Grid) -> Option<SteadyState> {
    solve_coexistence(p, &g, Init::Bifurcation).unwrap().into_state()
}

/// Largest real eigenvalue of the dense ghost-node matrix `ℓΔ_h + diag r`.
fn dense_principal(ell: f64, r: &ScalarField) -> f64 {
    let n = r.len();
    let h = r.grid().spacing();
    let c = ell / (h * h);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = r.values()[i] - 2.0 * c;
        if i == 0 {
            a[(0, 1)] = 2.0 * c;
        } else if i == n - 1 {
            a[(i, i - 1)] = 2.0 * c;
        } else {
            a[(i, i - 1)] = c;
            a[(i, i + 1)] = c;
        }
    }
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_1() -> Outcome {
    let g = circle(401);
    let mut worst_const: f64 = 0.0;
    for r in [-1.3, 0.0, 0.37, 5.0] {
        for ell in [1e-3, 1.0, 1e3] {
            let lam = principal_eigenvalue(ell, &ScalarField::constant(g, r)).unwrap();
            worst_const = worst_const.max((lam - r).abs());
        }
    }
    let weights: [fn(f64) -> f64; 5] = [
        |x| x.sin(),
        |x| 0.5 + 0.5 * x.sin(),
        |x| (2.0 * x).cos() - 0.2,
        |x| x / 6.0 - 0.5,
        |x| if x < 2.0 { 1.0 } else { -0.5 },
    ];
    let mut monotone = true;
    for f in weights {
        let r = ScalarField::from_fn(g, f);
        let lams: Vec<f64> =
            [0.01, 0.1, 1.0, 10.0, 100.0].iter().map(|&l| principal_eigenvalue(l, &r).unwrap()).collect();
        monotone &= lams.windows(2).all(|w| w[1] < w[0]);
    }
    // Limits: λ₁ → max r as ℓ → 0 and → mean r as ℓ → ∞.
    let mut worst_limit: f64 = 0.0;
    for f in [(|x: f64| 0.1 * x.cos()) as fn(f64) -> f64, |x| 0.3 + 0.05 * x.cos()] {
        let r = ScalarField::from_fn(g, f);
        let small = principal_eigenvalue(1e-5, &r).unwrap();
        let large = principal_eigenvalue(1e6, &r).unwrap();
        let mean = integrate(&r) / g.length();
        worst_limit = worst_limit.max((small - r.max()).abs()).max((large - mean).abs());
    }
    let gd = circle(201);
    let mut worst_dense: f64 = 0.0;
    for (ell, f) in [
        (0.1, (|x: f64| x.sin()) as fn(f64) -> f64),
        (1.0, |x| 0.5 + 0.5 * x.sin()),
        (10.0, |x| (3.0 * x).cos() * x / 6.0),
        (0.01, |x| if x < 2.0 { 1.0 } else { -0.5 }),
    ] {
        let r = ScalarField::from_fn(gd, f);
        let lam = principal_eigenvalue(ell, &r).unwrap();
        worst_dense = worst_dense.max((lam - dense_principal(ell, &r)).abs());
    }
    (
        worst_const <= 1e-12 && monotone && worst_limit <= 1e-3 && worst_dense <= 1e-9,
        format!(
            "constant-r error {worst_const:.1e}, strict l-monotonicity {monotone}, limit error {worst_limit:.1e}, dense gap {worst_dense:.1e}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let g = circle(401);
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for dispersal in [Dispersal::Exponential, Dispersal::Algebraic] {
        let base = ModelParams { dispersal, ..fig2(0.0) };
        let ut = prey(&base, g);
        for _ in 0..10 {
            let p = ModelParams {
                k: r.random_range(0.0..8.0),
                theta: r.random_range(0.2..0.9),
                mu: 10f64.powf(r.random_range(-1.0..1.5)),
                ..base
            };
            let h = 1e-3;
            let lam = |k: f64| principal_eigenvalue(p.mu, &p.with_k(k).predator_weight(&ut)).unwrap();
            let fd = (lam(p.k + h) - lam(p.k - h)) / (2.0 * h);
            let an = dlambda_dk(&p, &ut, p.mu).unwrap();
            worst = worst.max((an - fd).abs() / an.abs());
        }
    }
    (worst < 1e-4, format!("max relative gap between dlambda/dk and central difference: {worst:.2e} over 20 points"))
}

fn criterion_3() -> Outcome {
    let g = circle(401);
    let p = fig2(0.0);
    let ut = prey(&p, g);
    let th0 = theta_0(&p, &ut);
    let (_, hi) = alpha_f_range(&p, &ut);
    let mut sign_ok = true;
    let mut mu_ok = true;
    for frac in [0.25, 0.5, 0.75] {
        let theta = th0 + frac * (hi - th0);
        let ks = k_star(theta, &p, &ut).unwrap();
        for d in [0.01, 0.1, 1.0] {
            if ks - d >= 0.0 {
                sign_ok &= calf(ks - d, theta, &p, &ut) < 0.0;
            }
            sign_ok &= calf(ks + d, theta, &p, &ut) > 0.0;
        }
        for k in [0.0, 0.5 * ks, 0.9 * ks] {
            let MuStar::Finite { value } = mu_star(k, theta, &p, &ut).unwrap() else {
                mu_ok = false;
                continue;
            };
            let q = ModelParams { k, theta, ..p };
            let lam = |mu: f64| principal_eigenvalue(mu, &q.predator_weight(&ut)).unwrap();
            mu_ok &= lam(0.5 * value) > 0.0 && lam(2.0 * value) < 0.0;
        }
    }
    let thetas: Vec<f64> = (0..=20).map(|i| theta_k(0.5 * i as f64, &p, &ut)).collect();
    let increasing = thetas.windows(2).all(|w| w[1] > w[0]);
    let mut r = rng(3);
    let mut cheb = true;
    let mut degenerate: f64 = 0.0;
    for _ in 0..1000 {
        let len = r.random_range(1..30);
        let mut draw = |scale: f64| {
            let mut v: Vec<f64> = (0..len).map(|_| scale * r.random::<f64>()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (a, b, c) = (draw(1.0), draw(2.0), draw(3.0));
        cheb &= chebyshev_sum_check(&a, &b, &c).unwrap();
        let flat = vec![a[0]; len];
        cheb &= chebyshev_sum_check(&flat, &b, &c).unwrap();
        let lhs: f64 = (0..len).map(|j| flat[j] * b[j] * c[j]).sum::<f64>() * c.iter().sum::<f64>();
        let rhs: f64 = (0..len).map(|j| flat[j] * c[j]).sum::<f64>() * (0..len).map(|j| b[j] * c[j]).sum::<f64>();
        degenerate = degenerate.max((lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE));
    }
    (
        sign_ok && mu_ok && increasing && cheb && degenerate < 1e-12,
        format!(
            "calF sign at k*±d {sign_ok}, lambda1 sign across mu* {mu_ok}, theta_k increasing {increasing}, Chebyshev {cheb}, degenerate relative gap {degenerate:.1e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let g = circle(201);
    let p = fig2(0.0);
    let ut = prey(&p, g);
    let th0 = theta_0(&p, &ut);
    let (lo, hi) = alpha_f_range(&p, &ut);
    let thetas: Vec<f64> = (0..20).map(|i| 0.05 + (1.05 - 0.05) * i as f64 / 19.0).collect();
    let mus: Vec<f64> = (0..20).map(|j| 10f64.powf(-2.0 + 4.0 * j as f64 / 19.0)).collect();
    let mut mismatches = 0;
    let mut grid_k0 = Vec::new();
    for &theta in &thetas {
        let mu_crit = if theta > th0 && theta < hi {
            Some(mu_star(0.0, theta, &p, &ut).unwrap().value())
        } else {
            None
        };
        for &mu in &mus {
            let q = ModelParams { theta, mu, ..p };
            // One branch per clause, so equal outcomes are kept apart.
            #[allow(clippy::if_same_then_else)]
            let expected = if theta <= lo {
                RegimeTag::CoexistenceExists
            } else if theta >= hi {
                RegimeTag::NoPositiveSolution
            } else if theta <= th0 {
                RegimeTag::CoexistenceExists
            } else if mu < mu_crit.unwrap() {
                RegimeTag::CoexistenceExists
            } else {
                RegimeTag::NoPositiveSolution
            };
            let got = classify_regime(&q, &g).unwrap().tag;
            if got != expected {
                mismatches += 1;
            }
            grid_k0.push((q, got));
        }
    }
    let mut superset_violations = 0;
    for k in [2.0, 8.0] {
        for (q, tag0) in &grid_k0 {
            if *tag0 == RegimeTag::CoexistenceExists && classify_regime(&q.with_k(k), &g).unwrap().tag != RegimeTag::CoexistenceExists {
                superset_violations += 1;
            }
        }
    }
    (
        mismatches == 0 && superset_violations == 0,
        format!("{mismatches} of 400 cells disagree with the k = 0 classification; {superset_violations} coexistence cells lost at k in {{2, 8}}"),
    )
}

fn criterion_5() -> Outcome {
    let g = unit(401);
    let p = ramp(0.0);
    let ut = prey(&p, g);
    let ks = match k_star(p.theta, &p, &ut) {
        Ok(k) => k,
        Err(e) => return (false, format!("k* unavailable: {e}")),
    };
    let sample: Vec<f64> = (0..8).map(|i| 0.9 * ks * i as f64 / 7.0).collect();
    let mus: Vec<f64> = sample.iter().map(|&k| mu_star(k, p.theta, &p, &ut).unwrap().value()).collect();
    let ok = mus.iter().all(|m| m.is_finite()) && mus.windows(2).all(|w| w[1] > w[0]);
    (ok, format!("k* = {ks:.4}; mu* from {:.4e} to {:.4e} over 8 samples, strictly increasing {ok}", mus[0], mus[7]))
}

fn criterion_6() -> Outcome {
    let g = circle(401);
    let p = fig2(0.0);
    let ut = prey(&p, g);
    let th0 = theta_0(&p, &ut);
    let (_, hi) = alpha_f_range(&p, &ut);
    let at = |f: f64| th0 + f * (hi - th0);
    let triples = [(0.1, 0.9, 0.5), (0.2, 0.6, 0.3), (0.3, 0.95, 0.7), (0.05, 0.5, 0.5), (0.4, 0.8, 0.9)];
    let results: Vec<bool> = triples.iter().map(|&(a, b, rho)| convexity_check(at(a), at(b), rho, &p, &ut).unwrap()).collect();
    (results.iter().all(|&b| b), format!("three-point convexity at k = 0 for 5 triples: {results:?}"))
}

fn criterion_7() -> Outcome {
    let g = circle(401);
    let base = fig2(4.0);
    let ut = prey(&base, g);
    let (lo, hi) = alpha_f_range(&base, &ut);
    let mut details = Vec::new();
    let mut ok = true;
    for theta in [0.5 * lo, lo] {
        let p = base.with_theta(theta);
        match found(&p, g) {
            Some(s) => {
                let mi = mass_identity(&s).unwrap();
                let res = s.residual_u.max(s.residual_w);
                let good = res < 1e-8 && s.below_prey_profile && mi.gap < 1e-6 * mi.scale;
                ok &= good;
                details.push(format!("theta {theta:.4}: residual {res:.1e}, u < u~ {}, mass gap {:.1e}", s.below_prey_profile, mi.gap / mi.scale));
            }
            None => {
                ok = false;
                details.push(format!("theta {theta:.4}: not found"));
            }
        }
    }
    let mut r = rng(7);
    for theta in [hi, 1.5 * hi] {
        let p = base.with_theta(theta);
        let nf = matches!(solve_coexistence(&p, &g, Init::Bifurcation).unwrap(), SteadyOutcome::NotFound { .. });
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let u0 = smooth_positive(g, 0.5, &mut r);
            let v0 = smooth_positive(g, 0.3, &mut r);
            let tr = run_to_steady(&p, &g, (u0, v0), 1e-2, 1e-9, 5e3).unwrap();
            worst = worst.max(tr.final_v.norm_inf());
        }
        ok &= nf && worst < 1e-6;
        details.push(format!("theta {theta:.4}: NotFound {nf}, max final |v| {worst:.1e}"));
    }
    (ok, details.join("; "))
}

fn criterion_8() -> Outcome {
    let g = circle(401);
    let p = ModelParams { eps: 1e3, theta: 0.25, ..fig2(2.0) };
    let prof = large_eps_profile(&p, &g).unwrap();
    let Some(s) = found(&p, g) else {
        return (false, "no coexistence state at eps = 1e3".into());
    };
    let du = s.u.distance_inf(&prof.u_limit) / prof.u_limit.norm_inf();
    let dw = s.w.distance_inf(&prof.w_limit) / prof.w_limit.norm_inf();
    let mbar = integrate(&p.resource_field(g)) / g.length();
    let high = p.with_theta(1.05 * p.alpha * p.f(mbar));
    let nf = matches!(solve_coexistence(&high, &g, Init::Bifurcation).unwrap(), SteadyOutcome::NotFound { .. });
    (
        du <= 0.02 && dw <= 0.02 && nf,
        format!("relative sup gaps u {du:.2e}, w {dw:.2e}; NotFound above alpha F(mean m): {nf}"),
    )
}

fn criterion_9() -> Outcome {
    let g = circle(401);
    let p = ModelParams { mu: 1e3, theta: 0.4, ..fig2(0.5) };
    assert!(p.response == Response::Linear && p.k <= p.alpha / p.theta);
    let prof = large_mu_profile(&p, &g).unwrap();
    let c_star = prof.scalars.c_star.unwrap();
    let Some(s) = found(&p, g) else {
        return (false, "no coexistence state at mu = 1e3".into());
    };
    let dw = s.w.distance_inf(&prof.w_limit) / c_star;
    let du = s.u.distance_inf(&prof.u_limit) / prof.u_limit.norm_inf();
    let clusters = multistart_probe(&p, &g, 8, 42).unwrap().len();
    let g_gap = (p.alpha * g_of(&prof.u_limit, &p) - p.theta).abs();
    (
        dw <= 0.02 && du <= 0.02 && clusters == 1,
        format!("c* = {c_star:.6}, relative sup gaps w {dw:.2e}, u {du:.2e}; {clusters} cluster(s) from 8 starts; |alpha g(u*) - theta| = {g_gap:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let g = unit(401);
    let p = ModelParams { eps: 0.002, mu: 1e-3, theta: 0.7, ..ramp(5.0) };
    let prof = small_mu_profile(&p, &g).unwrap();
    let c = prof.scalars.c.unwrap();
    let y_shoot = prof.scalars.y_star.unwrap();
    let Some(s) = found(&p, g) else {
        return (false, "no coexistence state at mu = 1e-3".into());
    };
    let du = s.u.distance_inf(&prof.u_limit) / prof.u_limit.norm_inf();
    let dw = integrate(&s.w.zip_map(&prof.w_limit, |a, b| (a - b).abs())) / integrate(&prof.w_limit);
    // Free boundary of the solve: first crossing of u through F⁻¹(θ/α),
    // where the predator growth rate changes sign.
    let uv = s.u.values();
    let y_solve = match uv.iter().position(|&x| x >= c) {
        Some(j) if j > 0 => g.x(j - 1) + (c - uv[j - 1]) / (uv[j] - uv[j - 1]) * g.spacing(),
        _ => f64::NAN,
    };
    let cells = (y_solve - y_shoot).abs() / g.spacing();
    (
        du <= 0.03 && dw <= 0.05 && cells <= 1.0,
        format!(
            "relative sup gap u {du:.2e}, relative L1 gap w {dw:.2e}, y* shooting {y_shoot:.5} vs solve {y_solve:.5} ({cells:.1} cells)"
        ),
    )
}

fn criterion_11() -> Outcome {
    let g = circle(401);
    let random = fig2(0.0);
    let ut = prey(&random, g);
    let st = classify_semitrivial(&random, &ut).unwrap();
    let mut r = rng(11);
    let tr = run_to_steady(&random, &g, (ut.clone(), smooth_positive(g, 0.2, &mut r)), 1e-2, 1e-9, 5e3).unwrap();
    let extinct = st.stability == Stability::Stable || tr.final_v.norm_inf() < 1e-6;
    let (coexist, spread) = match found(&fig2(8.0), g) {
        Some(s) => (s.v.min() > 0.0, (s.v.max() - s.v.min()) / s.v.max()),
        None => (false, 0.0),
    };
    (
        extinct && coexist && spread > 0.1,
        format!(
            "d = 1: semi-trivial {:?} (lambda1 {:.3e}), final |v| {:.1e}; d = exp(-8u): positive state {coexist}, relative v spread {spread:.2}",
            st.stability,
            st.lambda1,
            tr.final_v.norm_inf()
        ),
    )
}

fn criterion_12() -> Outcome {
    let configs = [
        (fig2(8.0), circle(401)),
        (ModelParams { theta: 0.6, ..fig2(3.0) }, circle(401)),
        (ModelParams { theta: 0.8, mu: 0.5, ..ramp(2.0) }, unit(401)),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (i, (p, g)) in configs.iter().enumerate() {
        let Some(s) = found(p, *g) else {
            ok = false;
            details.push(format!("config {i}: no steady state"));
            continue;
        };
        let ut = prey(p, *g);
        let mut r = rng(12 + i as u64);
        let v0 = smooth_positive(*g, 0.2, &mut r);
        let tr = run_to_steady(p, g, (ut, v0), 1e-3, 1e-8, 1e4).unwrap();
        let w = tr.final_u.zip_map(&tr.final_v, |u, v| p.d(u) * v);
        let gap = s.u.distance_inf(&tr.final_u).max(s.w.distance_inf(&w));
        let m = p.resource_field(*g);
        let res = coexist_core_residual(p, &m, &tr.final_u, &w);
        let good = tr.converged && gap < 1e-4 && res < 1e-5;
        ok &= good;
        details.push(format!("config {i}: gap {gap:.1e}, transformed residual {res:.1e}, converged {}", tr.converged));
    }
    (ok, details.join("; "))
}

/// Sup norm of the transformed steady residual, evaluated independently.
fn coexist_core_residual(p: &ModelParams, m: &ScalarField, u: &ScalarField, w: &ScalarField) -> f64 {
    let lap = |ell: f64, f: &ScalarField| coexist_core::grid::apply_neumann_laplacian(ell, f);
    let lu = lap(p.eps, u);
    let lw = lap(p.mu, w);
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        let (ui, wi) = (u.values()[i], w.values()[i]);
        let ru = lu.values()[i] + ui * (m.values()[i] - ui) - p.f(ui) * wi / p.d(ui);
        let rw = lw.values()[i] + (p.alpha * p.f(ui) - p.theta) * wi / p.d(ui);
        worst = worst.max(ru.abs()).max(rw.abs());
    }
    worst
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("eigenvalue laws", criterion_1),
        ("Hellmann-Feynman derivative", criterion_2),
        ("threshold consistency", criterion_3),
        ("regime classification", criterion_4),
        ("mu* increasing in k on a ramp", criterion_5),
        ("convexity of mu*(theta)", criterion_6),
        ("existence and non-existence end to end", criterion_7),
        ("large prey diffusion profile", criterion_8),
        ("large predator diffusion profile", criterion_9),
        ("small predator diffusion profile", criterion_10),
        ("random versus prey-dependent dispersal", criterion_11),
        ("steady solver versus time marching", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({name}): {detail} [{:.1}s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
