#![allow(dead_code)]

use std::f64::consts::PI;

use coexist_core::{build_grid, Dispersal, Grid, ModelParams, ResourceSpec, Response, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Resource `0.5 + 0.5 sin x` on `(0, 2π)`, `ε = 0.1`, `μ = 10`, `α = 1`,
/// `θ = 0.8`, linear response, exponential dispersal.
pub fn fig2(k: f64) -> ModelParams {
    ModelParams {
        eps: 0.1,
        mu: 10.0,
        alpha: 1.0,
        theta: 0.8,
        k,
        response: Response::Linear,
        dispersal: Dispersal::Exponential,
        resource: ResourceSpec::SineOffset { a: 0.5, b: 0.5 },
    }
}

/// Resource `1.5 x` on `(0, 1)`.
pub fn ramp(k: f64) -> ModelParams {
    ModelParams {
        eps: 0.05,
        mu: 1.0,
        alpha: 1.0,
        theta: 1.0,
        k,
        response: Response::Linear,
        dispersal: Dispersal::Exponential,
        resource: ResourceSpec::Ramp { a: 0.0, b: 1.5 },
    }
}

pub fn circle(n: usize) -> Grid {
    build_grid(2.0 * PI, n).unwrap()
}

pub fn unit(n: usize) -> Grid {
    build_grid(1.0, n).unwrap()
}

/// Smooth positive field `base · (1 + Σ a_j cos(j π x / L) / 2)` with
/// `|a_j| ≤ 1/j²`.
pub fn smooth_positive(g: Grid, base: f64, rng: &mut ChaCha8Rng) -> ScalarField {
    let coeffs: Vec<f64> = (1..=4).map(|j| rng.random_range(-1.0..1.0) / (j * j) as f64).collect();
    let len = g.length();
    ScalarField::from_fn(g, |x| {
        let s: f64 = coeffs.iter().enumerate().map(|(j, a)| a * ((j + 1) as f64 * PI * x / len).cos()).sum();
        base * (1.0 + 0.5 * s / 1.65)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
