//! Model ingredients: resource `m(x)`, functional response `F(u)`,
//! prey-dependent dispersal `d(u; k)`, and the sampled assumption checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Predator functional response `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Linear,
    HollingIi,
    HollingIii,
}

/// Predator motility as a function of prey density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersal {
    /// `e^{-k u}`
    Exponential,
    /// `(1 + u)^{-k}`
    Algebraic,
    /// `1`, independent of `k`.
    Constant,
}

/// Resource distribution `m(x)` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResourceSpec {
    /// `a + b sin x`
    SineOffset { a: f64, b: f64 },
    /// `a + b x / L`
    Ramp { a: f64, b: f64 },
    /// `a` on `[0, x0)`, `b` on `[x0, L]`.
    Step { a: f64, b: f64, x0: f64 },
    Constant { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub eps: f64,
    pub mu: f64,
    pub alpha: f64,
    pub theta: f64,
    pub k: f64,
    pub response: Response,
    pub dispersal: Dispersal,
    pub resource: ResourceSpec,
}

pub fn eval_resource(resource: &ResourceSpec, x: f64, length: f64) -> f64 {
    match *resource {
        ResourceSpec::SineOffset { a, b } => a + b * x.sin(),
        ResourceSpec::Ramp { a, b } => a + b * x / length,
        ResourceSpec::Step { a, b, x0 } => {
            if x < x0 {
                a
            } else {
                b
            }
        }
        ResourceSpec::Constant { c } => c,
    }
}

pub fn eval_response(kind: Response, u: f64) -> f64 {
    match kind {
        Response::Linear => u,
        Response::HollingIi => u / (1.0 + u),
        Response::HollingIii => u * u / (1.0 + u * u),
    }
}

pub fn eval_response_prime(kind: Response, u: f64) -> f64 {
    match kind {
        Response::Linear => 1.0,
        Response::HollingIi => 1.0 / ((1.0 + u) * (1.0 + u)),
        Response::HollingIii => {
            let q = 1.0 + u * u;
            2.0 * u / (q * q)
        }
    }
}

/// Supremum of `F` over `[0, ∞)`.
pub fn response_sup(kind: Response) -> f64 {
    match kind {
        Response::Linear => f64::INFINITY,
        Response::HollingIi | Response::HollingIii => 1.0,
    }
}

/// `F^{-1}(s)` for `s` in `[0, sup F)`.
pub fn eval_response_inverse(kind: Response, s: f64) -> Result<f64> {
    if !(s >= 0.0) || s >= response_sup(kind) {
        return Err(Error::OutOfRange(format!(
            "{s} is not in the range [0, {}) of the response",
            response_sup(kind)
        )));
    }
    Ok(match kind {
        Response::Linear => s,
        Response::HollingIi => s / (1.0 - s),
        Response::HollingIii => (s / (1.0 - s)).sqrt(),
    })
}

pub fn eval_dispersal(kind: Dispersal, k: f64, u: f64) -> f64 {
    match kind {
        Dispersal::Exponential => (-k * u).exp(),
        Dispersal::Algebraic => (1.0 + u).powf(-k),
        Dispersal::Constant => 1.0,
    }
}

pub fn eval_dispersal_prime(kind: Dispersal, k: f64, u: f64) -> f64 {
    match kind {
        Dispersal::Exponential => -k * (-k * u).exp(),
        Dispersal::Algebraic => -k * (1.0 + u).powf(-k - 1.0),
        Dispersal::Constant => 0.0,
    }
}

/// `ln d(u; k)`, finite even where `d` itself underflows.
pub fn log_dispersal(kind: Dispersal, k: f64, u: f64) -> f64 {
    match kind {
        Dispersal::Exponential => -k * u,
        Dispersal::Algebraic => -k * u.ln_1p(),
        Dispersal::Constant => 0.0,
    }
}

/// `∂ ln d / ∂k`; multiplying by `d` gives `∂d/∂k`.
pub fn dlog_dispersal_dk(kind: Dispersal, u: f64) -> f64 {
    match kind {
        Dispersal::Exponential => -u,
        Dispersal::Algebraic => -u.ln_1p(),
        Dispersal::Constant => 0.0,
    }
}

/// `d'(u) / d(u)`.
pub fn dispersal_log_slope(kind: Dispersal, k: f64, u: f64) -> f64 {
    match kind {
        Dispersal::Exponential => -k,
        Dispersal::Algebraic => -k / (1.0 + u),
        Dispersal::Constant => 0.0,
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [("eps", self.eps), ("mu", self.mu), ("alpha", self.alpha)];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("theta", self.theta), ("k", self.k)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn f(&self, u: f64) -> f64 {
        eval_response(self.response, u)
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        eval_response_prime(self.response, u)
    }

    /// `F(u)/u`, continuous at `u = 0`.
    pub fn f_over_u(&self, u: f64) -> f64 {
        match self.response {
            Response::Linear => 1.0,
            Response::HollingIi => 1.0 / (1.0 + u),
            Response::HollingIii => u / (1.0 + u * u),
        }
    }

    pub fn d(&self, u: f64) -> f64 {
        eval_dispersal(self.dispersal, self.k, u)
    }

    pub fn d_prime(&self, u: f64) -> f64 {
        eval_dispersal_prime(self.dispersal, self.k, u)
    }

    pub fn resource_field(&self, g: Grid) -> ScalarField {
        let length = g.length();
        ScalarField::from_fn(g, |x| eval_resource(&self.resource, x, length))
    }

    /// Predator growth weight `(αF(u) − θ)/d(u)`.
    pub fn predator_weight(&self, u: &ScalarField) -> ScalarField {
        u.map(|s| (self.alpha * self.f(s) - self.theta) / self.d(s))
    }

    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..*self }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        Self { mu, ..*self }
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self { theta, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// Outcome of the sampled assumption checks.
///
/// `h3` is the weak form `d > 0, d' ≤ 0`; `h3_strict` additionally requires
/// `d'` not identically zero, which random dispersal fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub h1: Check,
    pub h2: Check,
    pub h3: Check,
    pub h3_strict: bool,
    pub h4: Check,
    pub h5: Check,
}

impl AssumptionReport {
    /// Whether the hypotheses needed by the existence theory hold.
    pub fn core_ok(&self) -> bool {
        self.h1.passed && self.h2.passed && self.h3.passed
    }

    pub fn first_core_failure(&self) -> Option<(&'static str, &Check)> {
        [("H1", &self.h1), ("H2", &self.h2), ("H3", &self.h3)]
            .into_iter()
            .find(|(_, c)| !c.passed)
    }
}

const SAMPLES: usize = 10_000;

fn samples(upper: f64, include_zero: bool) -> impl Iterator<Item = f64> {
    let start = if include_zero { 0 } else { 1 };
    (start..=SAMPLES).map(move |i| upper * i as f64 / SAMPLES as f64)
}

fn core_checks(p: &ModelParams, m: &ScalarField) -> (Check, Check, Check, bool) {
    let total = crate::grid::integrate(m);
    let nonconstant = m.max() - m.min() > 1e-12 * (1.0 + m.norm_inf());
    let h1 = Check::new(
        total > 0.0 && nonconstant,
        format!("integral of m = {total:.6e}, m nonconstant on nodes: {nonconstant}"),
    );
    let upper = m.max().max(1e-3);

    let f0 = p.f(0.0);
    let fp_min = samples(upper, false).map(|u| p.f_prime(u)).fold(f64::INFINITY, f64::min);
    let h2 = Check::new(f0 == 0.0 && fp_min > 0.0, format!("F(0) = {f0}, min F' on (0, m_max] = {fp_min:.3e}"));

    let (mut d_min, mut dp_max, mut dp_min) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for u in samples(upper, true) {
        d_min = d_min.min(p.d(u));
        let dp = p.d_prime(u);
        dp_max = dp_max.max(dp);
        dp_min = dp_min.min(dp);
    }
    let h3 = Check::new(
        d_min > 0.0 && dp_max <= 0.0,
        format!("min d = {d_min:.3e}, d' in [{dp_min:.3e}, {dp_max:.3e}]"),
    );
    let h3_strict = h3.passed && dp_min < 0.0;
    (h1, h2, h3, h3_strict)
}

/// First failure among H1 to H3, if any.
pub(crate) fn core_violation(p: &ModelParams, g: &Grid) -> Option<String> {
    let (h1, h2, h3, _) = core_checks(p, &p.resource_field(*g));
    [("H1", h1), ("H2", h2), ("H3", h3)]
        .into_iter()
        .find(|(_, c)| !c.passed)
        .map(|(name, c)| format!("{name}: {}", c.detail))
}

/// Sampled checks of the standing hypotheses on `[0, m_max]`.
pub fn check_assumptions(p: &ModelParams, g: &Grid) -> AssumptionReport {
    let m = p.resource_field(*g);
    let (h1, h2, h3, h3_strict) = core_checks(p, &m);
    let upper = m.max().max(1e-3);
    let h4 = check_h4(p, &m, h1.passed);

    // Sign of (F/(u d))' is that of u F' − F − u F d'/d.
    let mut worst = f64::INFINITY;
    for u in samples(upper, false) {
        let f = p.f(u);
        let num = u * p.f_prime(u) - f - u * f * dispersal_log_slope(p.dispersal, p.k, u);
        let scale = f.abs().max(f64::MIN_POSITIVE);
        worst = worst.min(num / scale);
    }
    let h5 = Check::new(worst >= -1e-9, format!("min scaled (F/(u d))' numerator = {worst:.3e}"));

    AssumptionReport { h1, h2, h3, h3_strict, h4, h5 }
}

fn check_h4(p: &ModelParams, m: &ScalarField, h1: bool) -> Check {
    if p.dispersal == Dispersal::Constant {
        return Check::new(true, "d independent of u: g is the mean of F, increasing since F' > 0");
    }
    if !h1 {
        return Check::new(false, "not evaluated: prey profile needs H1");
    }
    let ut = match crate::logistic::solve_logistic(p.eps, m) {
        Ok(s) => s.utilde,
        Err(e) => return Check::new(false, format!("not evaluated: {e}")),
    };
    if ut.max() - ut.min() <= 1e-12 * ut.max() {
        return Check::new(true, "prey profile constant: F~ constant in k");
    }
    let values: Vec<f64> = (0..=20)
        .map(|i| crate::thresholds::theta_k(0.5 * i as f64, &p.with_theta(0.0), &ut) / p.alpha)
        .collect();
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    Check::new(
        increasing,
        format!("F~(k) on k = 0, 0.5, ..., 10 from {:.6} to {:.6}, increasing: {increasing}", values[0], values[20]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig2;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn resource_examples() {
        let s = ResourceSpec::SineOffset { a: 0.5, b: 0.5 };
        assert_relative_eq!(eval_resource(&s, PI / 2.0, 2.0 * PI), 1.0);
        assert_eq!(eval_resource(&ResourceSpec::Constant { c: 0.3 }, 1.7, 2.0), 0.3);
        assert_eq!(eval_resource(&ResourceSpec::Ramp { a: 0.0, b: 1.0 }, 2.0, 2.0), 1.0);
        let step = ResourceSpec::Step { a: 1.0, b: 2.0, x0: 0.5 };
        assert_eq!(eval_resource(&step, 0.49, 1.0), 1.0);
        assert_eq!(eval_resource(&step, 0.5, 1.0), 2.0);
    }

    #[test]
    fn response_examples() {
        assert_eq!(eval_response_inverse(Response::Linear, 0.8).unwrap(), 0.8);
        assert_relative_eq!(eval_response_inverse(Response::HollingIi, 0.5).unwrap(), 1.0);
        assert!(matches!(eval_response_inverse(Response::HollingIi, 1.2), Err(Error::OutOfRange(_))));
        assert!(matches!(eval_response_inverse(Response::HollingIii, 1.0), Err(Error::OutOfRange(_))));
        for kind in [Response::Linear, Response::HollingIi, Response::HollingIii] {
            assert_eq!(eval_response(kind, 0.0), 0.0);
            for i in 1..=1000 {
                let u = 0.1 * i as f64;
                assert!(eval_response_prime(kind, u) > 0.0);
                let back = eval_response_inverse(kind, eval_response(kind, u).min(response_sup(kind) - 1e-15));
                if let Ok(b) = back {
                    if u < 10.0 {
                        assert_relative_eq!(b, u, max_relative = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn response_derivative_matches_difference_quotient() {
        for kind in [Response::Linear, Response::HollingIi, Response::HollingIii] {
            for u in [0.1, 0.7, 2.0, 5.0] {
                let h = 1e-6;
                let fd = (eval_response(kind, u + h) - eval_response(kind, u - h)) / (2.0 * h);
                assert_relative_eq!(eval_response_prime(kind, u), fd, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn dispersal_examples() {
        for u in [0.0, 0.3, 7.0] {
            assert_eq!(eval_dispersal(Dispersal::Exponential, 0.0, u), 1.0);
            assert_eq!(eval_dispersal(Dispersal::Algebraic, 0.0, u), 1.0);
        }
        assert_relative_eq!(eval_dispersal(Dispersal::Exponential, 8.0, 0.5), 0.018_315_638_888_734_18, max_relative = 1e-12);
        assert_relative_eq!(eval_dispersal(Dispersal::Algebraic, 2.0, 1.0), 0.25);
        for kind in [Dispersal::Exponential, Dispersal::Algebraic] {
            for i in 1..=1000 {
                let u = 0.1 * i as f64;
                assert!(eval_dispersal(kind, 1.5, u) > 0.0);
                assert!(eval_dispersal_prime(kind, 1.5, u) < 0.0);
                let h = 1e-6;
                if u < 5.0 {
                    let fd = (eval_dispersal(kind, 1.5, u + h) - eval_dispersal(kind, 1.5, u - h)) / (2.0 * h);
                    assert_relative_eq!(eval_dispersal_prime(kind, 1.5, u), fd, max_relative = 1e-6);
                }
                assert_relative_eq!(
                    log_dispersal(kind, 1.5, u).exp(),
                    eval_dispersal(kind, 1.5, u),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn fig2_setup_passes_all_checks() {
        let g = Grid::new(2.0 * PI, 201).unwrap();
        let r = check_assumptions(&fig2(8.0), &g);
        for c in [&r.h1, &r.h2, &r.h3, &r.h4, &r.h5] {
            assert!(c.passed, "{c:?}");
        }
        assert!(r.h3_strict);
    }

    #[test]
    fn h1_failures() {
        let g = Grid::new(2.0 * PI, 201).unwrap();
        let mut p = fig2(1.0);
        p.resource = ResourceSpec::Constant { c: 0.5 };
        assert!(!check_assumptions(&p, &g).h1.passed);
        p.resource = ResourceSpec::SineOffset { a: -1.0, b: 0.5 };
        let r = check_assumptions(&p, &g);
        assert!(!r.h1.passed);
        assert!(!r.core_ok());
        assert_eq!(r.first_core_failure().unwrap().0, "H1");
    }

    #[test]
    fn random_dispersal_is_weak_h3_only() {
        let g = Grid::new(2.0 * PI, 101).unwrap();
        let r = check_assumptions(&fig2(0.0), &g);
        assert!(r.h3.passed && !r.h3_strict);
        let mut p = fig2(3.0);
        p.dispersal = Dispersal::Constant;
        let r = check_assumptions(&p, &g);
        assert!(r.h3.passed && !r.h3_strict && r.h4.passed);
    }

    #[test]
    fn h5_known_cases() {
        let g = Grid::new(2.0 * PI, 101).unwrap();
        for (dispersal, k) in [(Dispersal::Exponential, 0.0), (Dispersal::Exponential, 4.0), (Dispersal::Algebraic, 2.0)] {
            let p = ModelParams { dispersal, ..fig2(k) };
            assert!(check_assumptions(&p, &g).h5.passed);
        }
        for k in [1.0, 1.5, 3.0] {
            let p = ModelParams { response: Response::HollingIi, dispersal: Dispersal::Algebraic, ..fig2(k) };
            assert!(check_assumptions(&p, &g).h5.passed, "k = {k}");
        }
        // Holling II with random dispersal: F/u is decreasing.
        let p = ModelParams { response: Response::HollingIi, ..fig2(0.0) };
        assert!(!check_assumptions(&p, &g).h5.passed);
    }
}
