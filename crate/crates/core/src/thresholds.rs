//! Scalar thresholds of the semi-trivial state `(ũ, 0)` and the regime
//! classifier built on them.
//!
//! All root finders bracket first and polish with at most five Newton
//! steps that must stay inside the bracket. Integrals weighted by
//! `1/d(ũ; k)` are evaluated with the factor `e^{-k max s}` pulled out,
//! `s = -∂ln d/∂k`, so that large `k` neither overflows nor changes signs.

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::principal_eig;
use crate::error::{Error, Result};
use crate::grid::{gradient_energy, Grid, ScalarField};
use crate::logistic::{solve_logistic, LogisticSolution};
use crate::model::{check_assumptions, dlog_dispersal_dk, AssumptionReport, Dispersal, ModelParams, Response};

/// Half-width of the band in which `λ₁` counts as zero.
pub const NEUTRAL_BAND: f64 = 1e-8;
/// Relative band used to resolve ties at the ends of `(αF(ũ_min), αF(ũ_max))`.
const TIE_BAND: f64 = 1e-10;
const K_UNBOUNDED: f64 = 1e6;
const MU_BRACKET: (f64, f64) = (1e-6, 1e6);
const MU_LIMIT: f64 = 1e12;

/// `s_i = -∂ln d/∂k` at `ũ_i`, so that `1/d = e^{k s}`.
fn sensitivity(p: &ModelParams, ut: &ScalarField) -> Vec<f64> {
    ut.values().iter().map(|&u| -dlog_dispersal_dk(p.dispersal, u)).collect()
}

/// Node weights `e^{k (s_i − max s)}`, proportional to `1/d(ũ_i; k)`.
fn scaled_inverse_dispersal(k: f64, s: &[f64]) -> Vec<f64> {
    let smax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    s.iter().map(|&si| (k * (si - smax)).exp()).collect()
}

/// `α ∫F(ũ)/d(ũ;k) / ∫1/d(ũ;k)`.
pub fn theta_k(k: f64, p: &ModelParams, ut: &ScalarField) -> f64 {
    let g = ut.grid();
    let w = scaled_inverse_dispersal(k, &sensitivity(p, ut));
    let fw: Vec<f64> = ut.values().iter().zip(&w).map(|(&u, &wi)| p.f(u) * wi).collect();
    p.alpha * g.integrate_values(&fw) / g.integrate_values(&w)
}

/// `θ₀ = (α/|Ω|) ∫F(ũ)`.
pub fn theta_0(p: &ModelParams, ut: &ScalarField) -> f64 {
    theta_k(0.0, p, ut)
}

/// `∫(αF(ũ) − θ)/d(ũ; k)`.
pub fn calf(k: f64, theta: f64, p: &ModelParams, ut: &ScalarField) -> f64 {
    let p = p.with_k(k);
    let vals: Vec<f64> = ut.values().iter().map(|&u| (p.alpha * p.f(u) - theta) / p.d(u)).collect();
    ut.grid().integrate_values(&vals)
}

/// `𝓕(k)` and `𝓕'(k)`, both multiplied by the same positive factor.
fn calf_scaled(k: f64, theta: f64, p: &ModelParams, ut: &ScalarField, s: &[f64]) -> (f64, f64) {
    let g = ut.grid();
    let w = scaled_inverse_dispersal(k, s);
    let mut v = vec![0.0; w.len()];
    let mut dv = vec![0.0; w.len()];
    for (i, &u) in ut.values().iter().enumerate() {
        let a = p.alpha * p.f(u) - theta;
        v[i] = a * w[i];
        dv[i] = a * s[i] * w[i];
    }
    (g.integrate_values(&v), g.integrate_values(&dv))
}

fn alpha_f_range(p: &ModelParams, ut: &ScalarField) -> (f64, f64) {
    (p.alpha * p.f(ut.min()), p.alpha * p.f(ut.max()))
}

/// Unique root of `𝓕(k) = 0` for `θ ∈ (θ₀, αF(ũ_max))`.
pub fn k_star(theta: f64, p: &ModelParams, ut: &ScalarField) -> Result<f64> {
    let th0 = theta_0(p, ut);
    let (_, top) = alpha_f_range(p, ut);
    if !(theta > th0 && theta < top) {
        return Err(Error::OutOfRange(format!("theta = {theta} outside ({th0}, {top})")));
    }
    if p.dispersal == Dispersal::Constant {
        return Err(Error::Unbounded("dispersal does not depend on k".into()));
    }
    let s = sensitivity(p, ut);
    let sign = |k: f64| calf_scaled(k, theta, p, ut, &s).0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while sign(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > K_UNBOUNDED {
            return Err(Error::Unbounded(format!("no sign change of calF below k = {K_UNBOUNDED:e}")));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..5 {
        let (f, df) = calf_scaled(k, theta, p, ut, &s);
        if df <= 0.0 || f == 0.0 {
            break;
        }
        let next = k - f / df;
        if !(next >= lo && next <= hi) {
            break;
        }
        k = next;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuStar {
    Finite { value: f64 },
    /// `near_critical` marks a bracket that ran past `1e12` although `𝓕 < 0`.
    Infinite { near_critical: bool },
}

impl MuStar {
    pub fn value(&self) -> f64 {
        match *self {
            MuStar::Finite { value } => value,
            MuStar::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MuStar::Finite { .. })
    }
}

/// `λ₁(μ, (αF(ũ) − θ)/d(ũ; k))`.
pub fn semitrivial_lambda(mu: f64, k: f64, theta: f64, p: &ModelParams, ut: &ScalarField) -> Result<f64> {
    let p = p.with_k(k).with_theta(theta);
    Ok(principal_eig(mu, &p.predator_weight(ut))?.lambda)
}

/// Critical predator diffusion where the semi-trivial eigenvalue vanishes.
pub fn mu_star(k: f64, theta: f64, p: &ModelParams, ut: &ScalarField) -> Result<MuStar> {
    let q = p.with_k(k).with_theta(theta);
    let r = q.predator_weight(ut);
    if !(r.max() > 0.0) {
        return Err(Error::NoInstabilityWindow(format!(
            "alpha F(u~) - theta <= 0 everywhere for theta = {theta}"
        )));
    }
    let s = sensitivity(&q, ut);
    if calf_scaled(k, theta, &q, ut, &s).0 >= 0.0 {
        return Ok(MuStar::Infinite { near_critical: false });
    }
    let lambda = |mu: f64| principal_eig(mu, &r).map(|e| e.lambda);
    let (mut lo, mut hi) = MU_BRACKET;
    while lambda(lo)? <= 0.0 {
        hi = lo;
        lo /= 10.0;
        if lo < 1e-14 {
            return Err(Error::SolveFailure("mu* bracket collapsed towards zero".into()));
        }
    }
    while lambda(hi)? > 0.0 {
        lo = hi;
        hi *= 10.0;
        if hi > MU_LIMIT {
            return Ok(MuStar::Infinite { near_critical: true });
        }
    }
    while (hi / lo).ln() > 1e-10 {
        let mid = (lo * hi).sqrt();
        if lambda(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // dλ/dμ = −∫|φ'|²/∫φ².
    let mut mu = (lo * hi).sqrt();
    for _ in 0..5 {
        let e = principal_eig(mu, &r)?;
        let g = ut.grid();
        let phi = e.phi.values();
        let den: f64 = (0..g.len()).map(|i| g.weight(i) * phi[i] * phi[i]).sum();
        let slope = -gradient_energy(g, phi) / den;
        if !(slope < 0.0) || e.lambda == 0.0 {
            break;
        }
        let next = mu - e.lambda / slope;
        if !(next >= lo && next <= hi) {
            break;
        }
        mu = next;
    }
    Ok(MuStar::Finite { value: mu })
}

/// Mortality at which the semi-trivial eigenvalue vanishes for fixed `μ`.
pub fn theta_tilde(mu: f64, p: &ModelParams, ut: &ScalarField) -> Result<f64> {
    let (mut lo, mut hi) = alpha_f_range(p, ut);
    if hi - lo <= 0.0 {
        return Ok(hi);
    }
    let lambda = |th: f64| semitrivial_lambda(mu, p.k, th, p, ut);
    while hi - lo > 1e-10 * hi.abs().max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // dλ/dθ = −∫φ²/d / ∫φ².
    let mut th = 0.5 * (lo + hi);
    for _ in 0..5 {
        let q = p.with_theta(th);
        let e = principal_eig(mu, &q.predator_weight(ut))?;
        let g = ut.grid();
        let phi = e.phi.values();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.len() {
            let w = g.weight(i) * phi[i] * phi[i];
            num += w / q.d(ut.values()[i]);
            den += w;
        }
        if e.lambda == 0.0 {
            break;
        }
        let next = th + e.lambda * den / num;
        if !(next >= lo && next <= hi) {
            break;
        }
        th = next;
    }
    Ok(th)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiTrivialStability {
    pub stability: Stability,
    pub lambda1: f64,
}

/// Linear stability of `(ũ, 0)` from the sign of the predator eigenvalue.
pub fn classify_semitrivial(p: &ModelParams, ut: &ScalarField) -> Result<SemiTrivialStability> {
    let lambda1 = principal_eig(p.mu, &p.predator_weight(ut))?.lambda;
    let stability = if lambda1.abs() <= NEUTRAL_BAND {
        Stability::Neutral
    } else if lambda1 > 0.0 {
        Stability::Unstable
    } else {
        Stability::Stable
    };
    Ok(SemiTrivialStability { stability, lambda1 })
}

/// Largest `k̃` with `x ↦ (αF(x) − θ)/d(x; k)` increasing on `[0, ũ_max]`
/// for every `k ≤ k̃`. For linear `F` this is `α/θ`.
pub fn k_tilde(theta: f64, p: &ModelParams, u_max: f64) -> f64 {
    if theta <= 0.0 || p.dispersal == Dispersal::Constant {
        return f64::INFINITY;
    }
    if p.response == Response::Linear {
        return p.alpha / theta;
    }
    // Need αF' + k(αF − θ)·(−d'/d)/k > 0 wherever αF < θ.
    const SAMPLES: usize = 10_000;
    let mut best = f64::INFINITY;
    for i in 0..=SAMPLES {
        let x = u_max * i as f64 / SAMPLES as f64;
        let deficit = theta - p.alpha * p.f(x);
        if deficit > 0.0 {
            let gain = p.alpha * p.f_prime(x);
            let bound = match p.dispersal {
                Dispersal::Exponential => gain / deficit,
                Dispersal::Algebraic => gain * (1.0 + x) / deficit,
                Dispersal::Constant => f64::INFINITY,
            };
            best = best.min(bound);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeTag {
    CoexistenceExists,
    NoPositiveSolution,
    SemiTrivialStableNoProof,
    Neutral,
    AssumptionViolated,
}

impl RegimeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeTag::CoexistenceExists => "CoexistenceExists",
            RegimeTag::NoPositiveSolution => "NoPositiveSolution",
            RegimeTag::SemiTrivialStableNoProof => "SemiTrivialStableNoProof",
            RegimeTag::Neutral => "Neutral",
            RegimeTag::AssumptionViolated => "AssumptionViolated",
        }
    }
}

/// The clause of the classification that produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `θ ≤ αF(ũ_min)`: predator growth is nonnegative everywhere.
    MortalityBelowMinimum,
    /// `θ ≥ αF(ũ_max)`: predator growth is nonpositive everywhere.
    MortalityAboveMaximum,
    /// `(ũ, 0)` is linearly unstable, so a positive solution bifurcates.
    SemiTrivialUnstable,
    /// `|λ₁|` inside the neutral band.
    SemiTrivialNeutral,
    /// `(ũ, 0)` is stable and `k ≤ k̃`.
    StableWeakSensitivity,
    /// `(ũ, 0)` is stable and `k > k̃`; no conclusion.
    StableStrongSensitivity,
    /// One of H1 to H3 failed.
    HypothesisFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub clause: Clause,
    pub theta: f64,
    pub mu: f64,
    pub k: f64,
    pub alpha_f_min: f64,
    pub alpha_f_max: f64,
    pub lambda1: Option<f64>,
    pub k_tilde: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub tag: RegimeTag,
    pub evidence: Evidence,
}

/// Quantities shared by all classifications with the same `ε` and `m`.
#[derive(Debug, Clone)]
pub struct RegimeContext {
    pub report: AssumptionReport,
    pub prey: Option<LogisticSolution>,
}

impl RegimeContext {
    pub fn new(p: &ModelParams, g: &Grid) -> Result<Self> {
        p.validate()?;
        let report = check_assumptions(p, g);
        let prey = if report.h1.passed { Some(solve_logistic(p.eps, &p.resource_field(*g))?) } else { None };
        Ok(Self { report, prey })
    }

    fn violation(&self) -> Option<String> {
        self.report.first_core_failure().map(|(name, c)| format!("{name}: {}", c.detail))
    }
}

/// Classifies `p` on `g`; fails with `AssumptionViolated` when H1 to H3 fail.
pub fn classify_regime(p: &ModelParams, g: &Grid) -> Result<RegimeVerdict> {
    let ctx = RegimeContext::new(p, g)?;
    let v = classify_regime_in(p, &ctx)?;
    if v.tag == RegimeTag::AssumptionViolated {
        return Err(Error::AssumptionViolated(v.evidence.detail));
    }
    Ok(v)
}

pub fn classify_regime_in(p: &ModelParams, ctx: &RegimeContext) -> Result<RegimeVerdict> {
    let mut ev = Evidence {
        clause: Clause::HypothesisFailed,
        theta: p.theta,
        mu: p.mu,
        k: p.k,
        alpha_f_min: f64::NAN,
        alpha_f_max: f64::NAN,
        lambda1: None,
        k_tilde: None,
        detail: String::new(),
    };
    let (Some(prey), None) = (ctx.prey.as_ref(), ctx.violation()) else {
        ev.detail = ctx.violation().unwrap_or_else(|| "prey profile unavailable".into());
        return Ok(RegimeVerdict { tag: RegimeTag::AssumptionViolated, evidence: ev });
    };
    let ut = &prey.utilde;
    let (lo, hi) = alpha_f_range(p, ut);
    ev.alpha_f_min = lo;
    ev.alpha_f_max = hi;
    let verdict = |tag, clause, mut ev: Evidence, detail: String| {
        ev.clause = clause;
        ev.detail = detail;
        Ok(RegimeVerdict { tag, evidence: ev })
    };
    if p.theta <= lo * (1.0 + TIE_BAND) {
        return verdict(
            RegimeTag::CoexistenceExists,
            Clause::MortalityBelowMinimum,
            ev,
            format!("theta = {} <= alpha F(u~_min) = {lo}", p.theta),
        );
    }
    if p.theta >= hi * (1.0 - TIE_BAND) {
        return verdict(
            RegimeTag::NoPositiveSolution,
            Clause::MortalityAboveMaximum,
            ev,
            format!("theta = {} >= alpha F(u~_max) = {hi}", p.theta),
        );
    }
    let st = classify_semitrivial(p, ut)?;
    ev.lambda1 = Some(st.lambda1);
    match st.stability {
        Stability::Unstable => verdict(
            RegimeTag::CoexistenceExists,
            Clause::SemiTrivialUnstable,
            ev,
            format!("lambda1 = {:.6e} > 0", st.lambda1),
        ),
        Stability::Neutral => verdict(
            RegimeTag::Neutral,
            Clause::SemiTrivialNeutral,
            ev,
            format!("|lambda1| = {:.3e} within the neutral band", st.lambda1.abs()),
        ),
        Stability::Stable => {
            let kt = k_tilde(p.theta, p, prey.u_max);
            ev.k_tilde = Some(kt);
            if p.k <= kt {
                verdict(
                    RegimeTag::NoPositiveSolution,
                    Clause::StableWeakSensitivity,
                    ev,
                    format!("lambda1 = {:.6e} < 0 and k = {} <= k~ = {kt}", st.lambda1, p.k),
                )
            } else {
                verdict(
                    RegimeTag::SemiTrivialStableNoProof,
                    Clause::StableStrongSensitivity,
                    ev,
                    format!("lambda1 = {:.6e} < 0 but k = {} > k~ = {kt}", st.lambda1, p.k),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// `axis1` is `θ`, `axis2` is `μ`.
    ThetaMu,
    /// `axis1` is `k`, `axis2` is `μ`.
    KMu,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub axis1: f64,
    pub axis2: f64,
    pub tag: RegimeTag,
    pub lambda1: Option<f64>,
}

/// A point of the level set `λ₁ = 0`; `mu_star = ∞` when `𝓕(k) ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetPoint {
    pub k: f64,
    pub theta: f64,
    pub mu_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    /// Row-major over `axis1` then `axis2`.
    pub cells: Vec<SweepCell>,
    pub level_set: Vec<LevelSetPoint>,
}

/// Classifies every `(axis1, axis2)` pair and traces `μ*` along `axis1`.
pub fn sweep_regime(kind: SweepKind, axis1: &[f64], axis2: &[f64], p: &ModelParams, g: &Grid) -> Result<SweepResult> {
    let ctx = RegimeContext::new(p, g)?;
    let with_axis1 = |a: f64| match kind {
        SweepKind::ThetaMu => p.with_theta(a),
        SweepKind::KMu => p.with_k(a),
    };
    let cells = (0..axis1.len() * axis2.len())
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (axis1[idx / axis2.len()], axis2[idx % axis2.len()]);
            let q = with_axis1(a).with_mu(b);
            let v = classify_regime_in(&q, &ctx)?;
            Ok(SweepCell { axis1: a, axis2: b, tag: v.tag, lambda1: v.evidence.lambda1 })
        })
        .collect::<Result<Vec<_>>>()?;
    let level_set = match ctx.prey.as_ref() {
        Some(prey) if ctx.violation().is_none() => axis1
            .par_iter()
            .map(|&a| {
                let q = with_axis1(a);
                let mu = match mu_star(q.k, q.theta, &q, &prey.utilde) {
                    Ok(m) => m.value(),
                    // Predator growth negative everywhere: never unstable.
                    Err(Error::NoInstabilityWindow(_)) => 0.0,
                    Err(e) => return Err(e),
                };
                Ok(LevelSetPoint { k: q.k, theta: q.theta, mu_star: mu })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };
    Ok(SweepResult { kind, cells, level_set })
}

/// `(Σ a b c)(Σ c) ≥ (Σ a c)(Σ b c)` for nonnegative ascending sequences.
pub fn chebyshev_sum_check(a: &[f64], b: &[f64], c: &[f64]) -> Result<bool> {
    if a.len() != b.len() || b.len() != c.len() {
        return Err(Error::InvalidInput("sequences differ in length".into()));
    }
    for (name, s) in [("a", a), ("b", b), ("c", c)] {
        if s.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sequence {name} has negative or non-finite entries")));
        }
        if s.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput(format!("sequence {name} is not sorted ascending")));
        }
    }
    let abc: f64 = (0..a.len()).map(|j| a[j] * b[j] * c[j]).sum();
    let ac: f64 = (0..a.len()).map(|j| a[j] * c[j]).sum();
    let bc: f64 = (0..a.len()).map(|j| b[j] * c[j]).sum();
    let sc: f64 = c.iter().sum();
    let (lhs, rhs) = (abc * sc, ac * bc);
    Ok(lhs >= rhs - 1e-12 * lhs.abs().max(rhs.abs()))
}

/// Three-point convexity of `θ ↦ μ*(θ)` at fixed `k = p.k`.
/// `ρ ∈ {0, 1}` returns `true`.
pub fn convexity_check(theta1: f64, theta2: f64, rho: f64, p: &ModelParams, ut: &ScalarField) -> Result<bool> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::OutOfRange(format!("rho = {rho} outside [0, 1]")));
    }
    let lower = theta_k(p.k, p, ut);
    let (_, upper) = alpha_f_range(p, ut);
    for th in [theta1, theta2] {
        if !(th > lower && th < upper) {
            return Err(Error::OutOfRange(format!("theta = {th} outside ({lower}, {upper})")));
        }
    }
    if rho == 0.0 || rho == 1.0 {
        return Ok(true);
    }
    let finite = |th: f64| -> Result<f64> {
        match mu_star(p.k, th, p, ut)? {
            MuStar::Finite { value } => Ok(value),
            MuStar::Infinite { .. } => Err(Error::OutOfRange(format!("mu* infinite at theta = {th}"))),
        }
    };
    let (m1, m2) = (finite(theta1)?, finite(theta2)?);
    let mix = finite(rho * theta1 + (1.0 - rho) * theta2)?;
    Ok(rho * m1 + (1.0 - rho) * m2 > mix - 1e-8)
}
