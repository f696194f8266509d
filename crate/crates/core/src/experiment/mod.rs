//! Experiment drivers: classical averages by sampling and in closed form,
//! α-sweeps with remainder-order fits, and the individual demonstrations.

pub mod config;
mod nongaussian;
mod reports;
mod sweep;

pub use config::{
    Evaluation, ExperimentConfig, FamilyName, FunctionalSpec, OperatorSpec, SamplerKind,
    StateSpec, TermSpec,
};
pub use nongaussian::{nongaussian_experiment, NonGaussianReport, SecondMomentState};
pub use reports::{
    chebyshev_experiment, finite_qm_demo, higher_order_experiment, moments_experiment,
    pure_state_experiment, sub_alpha_states, ChebyshevReport, ChebyshevRow, DemoRow,
    FiniteQmReport, HigherOrderReport, HigherOrderRow, MomentRow, MomentsReport, PureStateReport,
    SubAlphaReport, BAND_SIGMAS,
};
pub use sweep::{alpha_sweep, SweepResult, SweepRow};

use crate::error::{Error, Result};
use crate::functional::{factorial, Family, Functional};
use crate::gaussian::{draw_batch, FieldSampler, GaussianState};
use crate::stats::Estimate;
use crate::wick;

/// Sample mean and standard error of `f` over `count` seeded draws.
pub fn mc_average<S: FieldSampler + ?Sized>(
    f: &Functional,
    state: &S,
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<Estimate> {
    if count < 2 {
        return Err(Error::Invalid("Monte-Carlo average needs at least 2 samples".into()));
    }
    if f.dim() != state.field_dim() {
        return Err(Error::Dimension("functional and state dimensions differ".into()));
    }
    let batch = draw_batch(state, seed, count, chunk_size)?;
    Ok(Estimate::from_values(&batch.map(|s| f.eval_slice(s))))
}

/// Truncated moment series `Σ_{2k ≤ max_order} α^k/(2k)! · Tr e(2k, D) f⁽²ᵏ⁾(0)`
/// with `α = σ²(ρ)` and `D = cov ρ / α`.
pub fn analytic_average(f: &Functional, rho: &GaussianState, max_order: usize) -> Result<f64> {
    if max_order > wick::MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order: max_order,
            reason: format!("analytic averages are capped at order {}", wick::MAX_MOMENT_ORDER),
        });
    }
    let alpha = rho.dispersion();
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let d = rho.covariance().scaled(1.0 / alpha);
    let mut total = 0.0;
    for k in 1..=max_order / 2 {
        let form = f.taylor_form(2 * k)?;
        total += alpha.powi(k as i32) / factorial(2 * k)
            * wick::gaussian_integral_multilinear(&form, &d)?;
    }
    Ok(total)
}

/// Exact classical average when the family admits a closed form.
///
/// Trigonometric families use the characteristic function of the quadratic
/// form: with `λⱼ` the eigenvalues of `B^{1/2} A B^{1/2}`,
/// `E e^{i(Aψ,ψ)} = Π (1 − 2iλⱼ)^{−1/2}`. Polynomials use Wick's theorem,
/// which is exact for them.
pub fn closed_form_average(f: &Functional, rho: &GaussianState) -> Result<Option<f64>> {
    let b = rho.covariance();
    let raw = match &f.family {
        Family::Quadratic { operator } => Some(b.trace_product(operator)?),
        Family::SinQuad { operator } => {
            let (log_modulus, phase) = log_characteristic(rho, operator)?;
            Some(log_modulus.exp() * phase.sin())
        }
        Family::CosQuadMinusOne { operator } => {
            let (log_modulus, phase) = log_characteristic(rho, operator)?;
            // e^a cos b − 1 = expm1(a) cos b − 2 sin²(b/2)
            let h = (0.5 * phase).sin();
            Some(log_modulus.exp_m1() * phase.cos() - 2.0 * h * h)
        }
        Family::EvenPolynomial { terms } => {
            if terms.iter().any(|t| t.order() > wick::MAX_MOMENT_ORDER) {
                None
            } else {
                let mut s = 0.0;
                for t in terms {
                    s += wick::gaussian_integral_multilinear(t, b)?;
                }
                Some(s)
            }
        }
        Family::Sum { parts } => {
            let mut s = 0.0;
            for p in parts {
                match closed_form_average(p, rho)? {
                    Some(v) => s += v,
                    None => return Ok(None),
                }
            }
            Some(s)
        }
    };
    Ok(raw.map(|v| v * f.factor))
}

/// `(ln|φ|, arg φ)` for `φ = E e^{i(Aψ,ψ)}`.
fn log_characteristic(
    rho: &GaussianState,
    a: &crate::linalg::SymmetricOperator,
) -> Result<(f64, f64)> {
    let root = rho
        .covariance()
        .spectral_decompose()?
        .reconstruct_with(|l| l.max(0.0).sqrt());
    let n = root.dim();
    let ra = crate::linalg::matmul(n, root.as_row_major(), a.as_row_major());
    let m = crate::linalg::matmul(n, &ra, root.as_row_major());
    let m = crate::linalg::SymmetricOperator::from_row_major(n, &m)?;
    let lambdas = m.spectral_decompose()?.eigenvalues;
    let log_modulus = -0.25 * lambdas.iter().map(|l| (4.0 * l * l).ln_1p()).sum::<f64>();
    let phase = 0.5 * lambdas.iter().map(|l| (2.0 * l).atan()).sum::<f64>();
    Ok((log_modulus, phase))
}
