//! Browser bindings for three small interactive views: remainder curves
//! along an α-grid, 2-d sample clouds of pure and mixed states, and a
//! Monte-Carlo check of the trace formula.
//!
//! Each export has a plain Rust twin (`*_impl`) so the logic is testable
//! without a JavaScript host.

use fieldlab::experiment::config::{random_density, random_symmetric};
use fieldlab::experiment::{closed_form_average, mc_average};
use fieldlab::gaussian::draw_batch;
use fieldlab::quantum::{quantum_average, t_variable, DensityOperator};
use fieldlab::{FieldVector, Functional, GaussianState, SymmetricOperator};
use wasm_bindgen::prelude::*;

fn err(e: fieldlab::Error) -> String {
    e.to_string()
}

fn family(name: &str, a: f64) -> Result<Functional, String> {
    let op = SymmetricOperator::diagonal(&[a]);
    match name {
        "cos" => Ok(Functional::cos_quad_minus_one(op)),
        "sin" => Ok(Functional::sin_quad(op)),
        "quadratic" => Ok(Functional::quadratic(op)),
        other => Err(format!("unknown family {other:?}")),
    }
}

/// Rows `[α, classical, α·T(f), |remainder|]` on a log grid from `alpha_max` down to `alpha_min`.
pub fn sweep_curve_impl(
    name: &str,
    a: f64,
    alpha_max: f64,
    alpha_min: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(alpha_min > 0.0 && alpha_max > alpha_min) || points < 2 {
        return Err("need 0 < alpha_min < alpha_max and at least 2 points".into());
    }
    let f = family(name, a)?;
    let d = DensityOperator::new(SymmetricOperator::identity(1)).map_err(err)?;
    let q = quantum_average(&d, &t_variable(&f).map_err(err)?).map_err(err)?;
    let step = (alpha_min / alpha_max).ln() / (points - 1) as f64;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let alpha = alpha_max * (step * i as f64).exp();
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[alpha]), None).map_err(err)?;
        let c = closed_form_average(&f, &rho)
            .map_err(err)?
            .ok_or("no closed form")?;
        out.extend([alpha, c, alpha * q, (c - alpha * q).abs()]);
    }
    Ok(out)
}

/// Flat `[x₀, y₀, x₁, y₁, …]` samples of `α((1−mix) ψ⊗ψ + mix·I/2)` with `ψ = (cos θ, sin θ)`.
pub fn sample_cloud_impl(
    theta: f64,
    mix: f64,
    alpha: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if !(0.0..=1.0).contains(&mix) {
        return Err("mix must lie in [0, 1]".into());
    }
    let psi = FieldVector::new(vec![theta.cos(), theta.sin()]);
    let rho = if mix == 0.0 {
        GaussianState::pure_state(&psi, alpha).map_err(err)?
    } else {
        let b = SymmetricOperator::outer_product(&psi)
            .scaled(1.0 - mix)
            .add(&SymmetricOperator::identity(2).scaled(0.5 * mix))
            .map_err(err)?
            .scaled(alpha);
        GaussianState::new(b, None).map_err(err)?
    };
    let batch = draw_batch(&rho, seed, count, 1024).map_err(err)?;
    Ok(batch.samples().flatten().copied().collect())
}

/// `[mean, stderr, Tr BA]` for a random `n`-dimensional pair `(B, A)`.
pub fn trace_check_impl(n: usize, seed: u64, samples: usize) -> Result<Vec<f64>, String> {
    if n == 0 || n > 64 {
        return Err("dimension must be in 1..=64".into());
    }
    let b = random_density(n, n, seed);
    let a = random_symmetric(n, seed.wrapping_add(1), 1.0);
    let rho = GaussianState::new(b.clone(), None).map_err(err)?;
    let e = mc_average(&Functional::quadratic(a.clone()), &rho, samples, seed, 1024).map_err(err)?;
    Ok(vec![e.mean, e.stderr, b.trace_product(&a).map_err(err)?])
}

#[wasm_bindgen]
pub fn sweep_curve(
    family: &str,
    a: f64,
    alpha_max: f64,
    alpha_min: f64,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    sweep_curve_impl(family, a, alpha_max, alpha_min, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sample_cloud(theta: f64, mix: f64, alpha: f64, count: usize, seed: u64) -> Result<Vec<f64>, JsValue> {
    sample_cloud_impl(theta, mix, alpha, count, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn trace_check(n: usize, seed: u64, samples: usize) -> Result<Vec<f64>, JsValue> {
    trace_check_impl(n, seed, samples).map_err(|e| JsValue::from_str(&e))
}
