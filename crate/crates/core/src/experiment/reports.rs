use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{analytic_average, closed_form_average, mc_average};
use crate::error::{Error, Result};
use crate::forms::SymmetricForm;
use crate::functional::{Family, Functional};
use crate::gaussian::{draw_batch, AlphaClass, GaussianState};
use crate::linalg::{FieldVector, SymmetricOperator};
use crate::quantum::{
    generalized_average, quantum_average, t2n_variable, t_state, t_state_extended, t_variable,
    DensityOperator,
};
use crate::stats::Estimate;
use crate::wick::{self, MomentCheck, MomentForm};

/// Acceptance band in standard errors for every Monte-Carlo comparison.
pub const BAND_SIGMAS: f64 = 4.0;

/// Unit-norm tolerance for the vector of a pure quantum state.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Relative tolerance for identities that hold exactly in exact arithmetic.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Allowed in-span residual of pure-state samples, in units of `ε |t| ‖ψ‖∞`.
const SPAN_ULPS: f64 = 4.0;

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureStateReport {
    pub alpha: f64,
    /// Sample mean of `(Aψ', ψ')/α` over `ρ_ψ`.
    pub amplified: Estimate,
    /// `(Aψ, ψ)`.
    pub expectation: f64,
    pub amplified_z: f64,
    /// Largest deviation of a sample from its own multiple of `ψ`, in ulps.
    pub span_residual_ulps: f64,
    /// Coordinates where `ψ` vanishes are exactly zero in every sample.
    pub orthogonal_zero_exact: bool,
    /// Entrywise sample covariance `/α` next to `ψ⊗ψ`.
    pub covariance: Vec<Vec<Estimate>>,
    pub covariance_max_z: f64,
    pub passed: bool,
}

/// `ρ_ψ` with covariance `α ψ⊗ψ`: amplified averages, support and covariance.
pub fn pure_state_experiment(
    psi: &FieldVector,
    alpha: f64,
    a: &SymmetricOperator,
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<PureStateReport> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::Invalid(format!(
            "a pure quantum state needs a unit vector, got norm {norm}"
        )));
    }
    a.check_dim(psi.dim())?;
    let rho = GaussianState::pure_state(psi, alpha)?;
    let f = Functional::quadratic(a.clone()).amplify(alpha)?;
    let amplified = mc_average(&f, &rho, count, seed, chunk_size)?;
    let expectation = a.quadratic_form(psi.as_slice());

    let batch = draw_batch(&rho, seed, count, chunk_size)?;
    let p = psi.as_slice();
    let n = p.len();
    let pivot = (0..n)
        .max_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs()))
        .expect("nonempty");
    let pmax = p[pivot].abs();
    let mut span_residual_ulps: f64 = 0.0;
    let mut orthogonal_zero_exact = true;
    for s in batch.samples() {
        let t = s[pivot] / p[pivot];
        let unit = f64::EPSILON * t.abs() * pmax;
        for i in 0..n {
            if p[i] == 0.0 && s[i] != 0.0 {
                orthogonal_zero_exact = false;
            }
            let r = (s[i] - t * p[i]).abs();
            if r > 0.0 {
                span_residual_ulps = span_residual_ulps.max(r / unit);
            }
        }
    }

    let mut covariance = vec![Vec::with_capacity(n); n];
    let mut covariance_max_z: f64 = 0.0;
    for (i, row) in covariance.iter_mut().enumerate() {
        for j in 0..n {
            let vals: Vec<f64> = batch.samples().map(|s| s[i] * s[j] / alpha).collect();
            let e = Estimate::from_values(&vals);
            let target = p[i] * p[j];
            // entries with zero target are exactly zero and have zero stderr
            let z = e.z_score(target).abs();
            if !(e.stderr == 0.0 && (e.mean - target).abs() <= 1e-15) {
                covariance_max_z = covariance_max_z.max(z);
            }
            row.push(e);
        }
    }

    let amplified_z = amplified.z_score(expectation);
    let passed = amplified_z.abs() <= BAND_SIGMAS
        && span_residual_ulps <= SPAN_ULPS
        && orthogonal_zero_exact
        && covariance_max_z <= BAND_SIGMAS;
    Ok(PureStateReport {
        alpha,
        amplified,
        expectation,
        amplified_z,
        span_residual_ulps,
        orthogonal_zero_exact,
        covariance,
        covariance_max_z,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAlphaReport {
    pub alpha: f64,
    pub shrink: f64,
    pub dispersion: f64,
    /// Error text from the exact-class correspondence map, if it refused.
    pub exact_rejection: Option<String>,
    /// Trace and smallest eigenvalue of the normalized image.
    pub extended_trace: f64,
    pub extended_min_eigenvalue: f64,
    /// Sample mean of `(Hψ, ψ)`.
    pub energy: Estimate,
    /// `‖H‖ σ²(ρ)`.
    pub energy_bound: f64,
    pub bound_holds: bool,
    pub passed: bool,
}

/// A state with dispersion `shrink·α` inside the class of dispersion `α`.
pub fn sub_alpha_states(
    alpha: f64,
    shrink: f64,
    density: &SymmetricOperator,
    h: &SymmetricOperator,
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<SubAlphaReport> {
    if !(shrink > 0.0 && shrink <= 1.0) {
        return Err(Error::Invalid(format!("shrink must lie in (0, 1], got {shrink}")));
    }
    let class = AlphaClass::exact(alpha)?;
    let d = DensityOperator::new(density.clone())?;
    let dispersion = shrink * alpha;
    let rho = GaussianState::new(d.matrix().scaled(dispersion), None)?;
    let exact_rejection = match class.check(rho.dispersion()).and_then(|_| t_state(&rho, alpha)) {
        Ok(_) => None,
        Err(e) => Some(e.to_string()),
    };
    let ext = t_state_extended(&rho)?;
    let energy = mc_average(&Functional::quadratic(h.clone()), &rho, count, seed, chunk_size)?;
    let energy_bound = h.operator_norm()? * rho.dispersion();
    let bound_holds = energy.mean.abs() <= energy_bound + BAND_SIGMAS * energy.stderr;

    let should_reject = (rho.dispersion() - alpha).abs() > crate::gaussian::CLASS_TOLERANCE * alpha;
    let extended_trace = ext.matrix().trace();
    let extended_min_eigenvalue = ext.min_eigenvalue()?;
    let passed = exact_rejection.is_some() == should_reject
        && bound_holds
        && (extended_trace - 1.0).abs() <= crate::quantum::TRACE_TOLERANCE
        && extended_min_eigenvalue >= -crate::quantum::PSD_TOLERANCE;
    Ok(SubAlphaReport {
        alpha,
        shrink,
        dispersion: rho.dispersion(),
        exact_rejection,
        extended_trace,
        extended_min_eigenvalue,
        energy,
        energy_bound,
        bound_holds,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevRow {
    pub alpha: f64,
    pub threshold: f64,
    pub bound: f64,
    pub empirical: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevReport {
    pub rows: Vec<ChebyshevRow>,
    pub passed: bool,
}

/// Empirical `P(‖ψ‖² > C)` against `σ²/C` for `C ∈ {α, 10α, 100α}` at every grid α.
pub fn chebyshev_experiment(
    density: &SymmetricOperator,
    alphas: &[f64],
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<ChebyshevReport> {
    let d = DensityOperator::new(density.clone())?;
    let mut rows = Vec::new();
    for &alpha in alphas {
        let rho = GaussianState::new(d.matrix().scaled(alpha), None)?;
        let batch = draw_batch(&rho, seed, count, chunk_size)?;
        for mult in [1.0, 10.0, 100.0] {
            let c = mult * alpha;
            let tail = rho.chebyshev_tail(c, &batch)?;
            rows.push(ChebyshevRow {
                alpha,
                threshold: c,
                bound: tail.bound,
                empirical: tail.empirical,
                holds: tail.holds(BAND_SIGMAS),
            });
        }
    }
    let passed = rows.iter().all(|r| r.holds);
    Ok(ChebyshevReport { rows, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub label: String,
    pub order: usize,
    #[serde(flatten)]
    pub check: MomentCheck,
    pub z: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsReport {
    pub order: usize,
    pub rows: Vec<MomentRow>,
    pub passed: bool,
}

fn moment_row(label: String, order: usize, check: MomentCheck) -> MomentRow {
    let z = check.z_score();
    MomentRow {
        label,
        order,
        check,
        z,
        passed: z.abs() <= BAND_SIGMAS,
    }
}

/// `e(2k, D)` at coordinate arguments and on a random form, against sample moments of `ρ_D`.
pub fn moments_experiment(
    d: &SymmetricOperator,
    k: usize,
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<MomentsReport> {
    let order = 2 * k;
    if k == 0 || order > wick::MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            reason: format!("moment checks cover orders 2..={}", wick::MAX_MOMENT_ORDER),
        });
    }
    let n = d.dim();
    let rho = GaussianState::new(d.clone(), None)?;
    let batch = draw_batch(&rho, seed, count, chunk_size)?;
    let e = MomentForm::new(order, d.clone())?;

    let mut index_sets: Vec<Vec<usize>> = vec![vec![0; order]];
    if n >= 2 {
        index_sets.push((0..order).map(|j| usize::from(j >= k)).collect());
        index_sets.push((0..order).map(|j| j % 2).collect());
    }
    let mut rows = Vec::new();
    for idx in index_sets {
        let basis: Vec<FieldVector> = idx.iter().map(|&i| FieldVector::basis(n, i)).collect();
        let args: Vec<&[f64]> = basis.iter().map(|v| v.as_slice()).collect();
        let analytic = e.eval(&args)?;
        let vals = batch.map(|s| idx.iter().map(|&i| s[i]).product());
        let est = Estimate::from_values(&vals);
        let label = format!(
            "e({order})({})",
            idx.iter().map(|i| format!("e{}", i + 1)).collect::<Vec<_>>().join(",")
        );
        rows.push(moment_row(
            label,
            order,
            MomentCheck {
                analytic,
                mc: est.mean,
                stderr: est.stderr,
            },
        ));
    }
    let form = super::config::random_form(order, n, seed, 1.0)?;
    rows.push(moment_row(
        "random-form".into(),
        order,
        wick::moment_mc_check(d, &form, &batch)?,
    ));
    let passed = rows.iter().all(|r| r.passed);
    Ok(MomentsReport { order, rows, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderRow {
    pub alpha: f64,
    /// Truncated moment series of the classical average.
    pub analytic: f64,
    /// `α ⟨T_{2n}(f)⟩_{T(ρ)}`.
    pub generalized: f64,
    pub relative_gap: f64,
    /// Exact classical average when available.
    pub exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderReport {
    pub order: usize,
    /// Whether `f` is an even polynomial of degree at most `2n`.
    pub in_p2n: bool,
    pub rows: Vec<HigherOrderRow>,
    pub passed: bool,
}

fn polynomial_degree(f: &Functional) -> Option<usize> {
    match &f.family {
        Family::Quadratic { .. } => Some(2),
        Family::EvenPolynomial { terms } => Some(
            terms
                .iter()
                .filter(|t| !t.is_zero())
                .map(SymmetricForm::order)
                .max()
                .unwrap_or(0),
        ),
        Family::Sum { parts } => parts
            .iter()
            .map(polynomial_degree)
            .try_fold(0, |m, d| d.map(|d| m.max(d))),
        Family::SinQuad { .. } | Family::CosQuadMinusOne { .. } => None,
    }
}

/// Classical moment series against the order-`n` generalized quantum model.
pub fn higher_order_experiment(
    f: &Functional,
    density: &SymmetricOperator,
    n: usize,
    alphas: &[f64],
) -> Result<HigherOrderReport> {
    let d = DensityOperator::new(density.clone())?;
    let in_p2n = polynomial_degree(f).is_some_and(|deg| deg <= 2 * n);
    let mut rows = Vec::new();
    for &alpha in alphas {
        let rho = GaussianState::new(d.matrix().scaled(alpha), None)?;
        let analytic = analytic_average(f, &rho, 2 * n)?;
        let td = t_state(&rho, alpha)?;
        let generalized = alpha * generalized_average(&td, &t2n_variable(f, n, alpha)?)?;
        rows.push(HigherOrderRow {
            alpha,
            analytic,
            generalized,
            relative_gap: relative_gap(analytic, generalized),
            exact: closed_form_average(f, &rho)?,
        });
    }
    let passed = rows.iter().all(|r| {
        r.relative_gap <= IDENTITY_TOLERANCE
            && (!in_p2n || r.exact.is_none_or(|x| relative_gap(x, r.analytic) <= IDENTITY_TOLERANCE))
    });
    Ok(HigherOrderReport {
        order: n,
        in_p2n,
        rows,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub alpha: f64,
    pub classical_mc: Estimate,
    pub classical_exact: Option<f64>,
    /// `α Tr D T(f)`.
    pub quantum_term: f64,
    /// `classical/α − Tr D T(f)`, from the exact value when known.
    pub amplified_gap: f64,
    /// `α ⟨T_{2n}(f)⟩`.
    pub generalized: f64,
    pub mc_consistent: bool,
    pub identity_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteQmReport {
    pub dim: usize,
    pub order: usize,
    pub density: SymmetricOperator,
    pub observable: SymmetricOperator,
    pub quantum_average: f64,
    pub rows: Vec<DemoRow>,
    pub pure_state: Option<PureStateReport>,
    pub passed: bool,
}

/// The whole pipeline on a small space, with every analytic cross-check.
pub fn finite_qm_demo(cfg: &ExperimentConfig) -> Result<FiniteQmReport> {
    let n = cfg.dim.get();
    if !(2..=4).contains(&n) {
        return Err(Error::Config(format!("the finite QM demo runs at dim 2..=4, got {n}")));
    }
    let f = cfg.functional()?;
    let d = DensityOperator::new(cfg.density()?)?;
    let a = t_variable(&f)?;
    let q = quantum_average(&d, &a)?;
    let in_p2n = polynomial_degree(&f).is_some_and(|deg| deg <= 2 * cfg.order);
    let mut rows = Vec::new();
    for &alpha in &cfg.alpha_grid {
        let rho = GaussianState::new(d.matrix().scaled(alpha), None)?;
        let mc = mc_average(&f, &rho, cfg.mc_samples, cfg.seed, cfg.chunk_size)?;
        let exact = closed_form_average(&f, &rho)?;
        let series = analytic_average(&f, &rho, 2 * cfg.order)?;
        let td = t_state(&rho, alpha)?;
        let generalized = alpha * generalized_average(&td, &t2n_variable(&f, cfg.order, alpha)?)?;
        let classical = exact.unwrap_or(mc.mean);
        let identity_holds = relative_gap(series, generalized) <= IDENTITY_TOLERANCE
            && (!in_p2n || exact.is_none_or(|x| relative_gap(x, series) <= IDENTITY_TOLERANCE));
        rows.push(DemoRow {
            alpha,
            classical_mc: mc,
            classical_exact: exact,
            quantum_term: alpha * q,
            amplified_gap: classical / alpha - q,
            generalized,
            mc_consistent: exact.is_none_or(|x| mc.within(x, BAND_SIGMAS)),
            identity_holds,
        });
    }
    let pure_state = match cfg.state.psi() {
        Some(psi) => Some(pure_state_experiment(
            &psi,
            cfg.alpha_grid[0],
            &cfg.observable()?,
            cfg.mc_samples,
            cfg.seed,
            cfg.chunk_size,
        )?),
        None => None,
    };
    let passed = rows.iter().all(|r| r.mc_consistent && r.identity_holds)
        && pure_state.as_ref().is_none_or(|p| p.passed);
    Ok(FiniteQmReport {
        dim: n,
        order: cfg.order,
        density: d.matrix().clone(),
        observable: a,
        quantum_average: q,
        rows,
        pure_state,
        passed,
    })
}
