//! The nonlinearity `N`, the correction constants and the compact maps `F`, `G`.
//!
//! `F` is built so that `F(x,λ,θ) = x` is exactly the β-modified system
//! `ẋ = −λβ(A x(t−τ/λ))∘(b+θx) − c₁`. With `N` carrying its own minus sign
//! this means `F = λ∫₀ᵗ βN − t c₁ − c₂`.

use std::f64::consts::PI;

use super::geometry::BetaChoice;
use super::loop_space::{FourierLoop, SpectralGrid};
use crate::model::LVSystem;

/// `N(x,θ)(t)_i = −(A x(t−τ/λ))_i (b_i + θ x_i(t))` on the grid.
pub fn eval_n(grid: &SpectralGrid, x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem) -> [Vec<f64>; 2] {
    assert!(lambda > 0.0, "lambda must be positive");
    let delayed = grid.synth(&x.delayed(system.tau / lambda));
    let now = grid.synth(x);
    let a = &system.a;
    let mut out = [vec![0.0; grid.points()], vec![0.0; grid.points()]];
    for j in 0..grid.points() {
        for i in 0..2 {
            let lin = a[(i, 0)] * delayed[0][j] + a[(i, 1)] * delayed[1][j];
            out[i][j] = -lin * (system.b[i] + theta * now[i][j]);
        }
    }
    out
}

/// Mean and Fourier projection of `N` on a grid fine enough for the product.
fn project_n(x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem) -> ([f64; 2], FourierLoop) {
    let grid = SpectralGrid::for_modes(x.modes());
    grid.project(&eval_n(&grid, x, lambda, theta, system))
}

/// `c₁ = (λ/2π)∫₀^{2π} βN` and `c₂ = (λ/2π)∫₀^{2π}∫₀ᵗ βN − π c₁`.
///
/// Both integrals are taken termwise on the grid projection of `N`, which is
/// exact for the truncated loop. `∫₀^{2π}(2π−s) sin ks ds = 2π/k` and the
/// cosine terms integrate to zero.
pub fn c_constants(x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem, beta: &BetaChoice) -> ([f64; 2], [f64; 2]) {
    let bv = beta.value(x);
    let (mean, n) = project_n(x, lambda, theta, system);
    let mut c1 = [0.0; 2];
    let mut c2 = [0.0; 2];
    for i in 0..2 {
        c1[i] = lambda * bv * mean[i];
        let sine_part: f64 = (1..=n.modes()).map(|k| n.sin(i, k) * 2.0 * PI / k as f64).sum();
        let double = 2.0 * PI * PI * mean[i] + sine_part;
        c2[i] = lambda * bv * double / (2.0 * PI) - PI * c1[i];
    }
    (c1, c2)
}

/// `F(x,λ,θ)`; the correction constants remove the secular term and the mean,
/// leaving the zero-mean antiderivative of `λβN`.
pub fn eval_f(x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem, beta: &BetaChoice) -> FourierLoop {
    let bv = beta.value(x);
    let (_, n) = project_n(x, lambda, theta, system);
    let mut out = n.antiderivative().scaled(lambda * bv);
    out.lambda_tag = Some(lambda);
    out
}

/// `F` assembled literally from `λ∫₀ᵗβN − t c₁ − c₂` on grid points `t`,
/// without cancelling terms. Used to cross-check [`eval_f`].
pub fn eval_f_literal(x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem, beta: &BetaChoice, t: f64) -> [f64; 2] {
    let bv = beta.value(x);
    let (mean, n) = project_n(x, lambda, theta, system);
    let (c1, c2) = c_constants(x, lambda, theta, system, beta);
    let anti = n.antiderivative();
    let at_t = anti.eval(t);
    let at_0 = anti.eval(0.0);
    let mut out = [0.0; 2];
    for i in 0..2 {
        let integral = mean[i] * t + at_t[i] - at_0[i];
        out[i] = lambda * bv * integral - t * c1[i] - c2[i];
    }
    out
}

/// `G(x,λ,θ) = (θσ(λ) + (1−θ)λ)∫₀ᵗ βN(x,0)`, which already has zero mean
/// up to the constant fixed by the zero-mean antiderivative.
pub fn eval_g(x: &FourierLoop, lambda: f64, theta: f64, system: &LVSystem, beta: &BetaChoice, sigma: &dyn Fn(f64) -> f64) -> FourierLoop {
    let bv = beta.value(x);
    let (_, n) = project_n(x, lambda, 0.0, system);
    let scale = theta * sigma(lambda) + (1.0 - theta) * lambda;
    let mut out = n.antiderivative().scaled(scale * bv);
    out.lambda_tag = Some(lambda);
    out
}
