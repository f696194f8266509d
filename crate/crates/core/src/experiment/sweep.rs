use serde::{Deserialize, Serialize};

use super::config::{Evaluation, ExperimentConfig};
use super::{closed_form_average, mc_average};
use crate::error::{Error, Result};
use crate::functional::Functional;
use crate::gaussian::GaussianState;
use crate::quantum::{quantum_average, t_variable, DensityOperator};
use crate::stats::{fit_line, LineFit};

/// Rows with `|remainder|` at or below this many noise units are excluded from the fit.
pub const NOISE_SIGMAS: f64 = 4.0;

/// Relative slope tolerance against the expected remainder order.
pub const SLOPE_TOLERANCE: f64 = 0.05;

/// Noise scale for analytic rows, in units of the magnitudes involved.
const ROUNDOFF_ULPS: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub classical_mc: f64,
    /// Standard error of `classical_mc`.
    pub mc_stderr: f64,
    pub classical_analytic: Option<f64>,
    /// `α Tr D T(f)`.
    pub quantum_term: f64,
    pub remainder: f64,
    /// Noise scale of `remainder`: the MC standard error, or a round-off floor
    /// when the classical value is analytic.
    pub stderr: f64,
    pub below_noise: bool,
}

impl SweepRow {
    /// `remainder / α`, the gap between the amplified classical average and
    /// the quantum average.
    pub fn amplified_gap(&self) -> f64 {
        self.remainder / self.alpha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares fit of `ln|remainder|` against `ln α` over rows above noise.
    pub fit: Option<LineFit>,
    pub noise_limited: bool,
    /// Order of the first nonvanishing correction, when the functional has one.
    pub expected_slope: Option<f64>,
    pub evaluation: Evaluation,
    pub passed: bool,
}

impl SweepResult {
    pub fn fitted_slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Smallest `k ≥ 2` with a nonzero `f⁽²ᵏ⁾(0)` among the orders the sweep can resolve.
fn expected_order(f: &Functional) -> Result<Option<f64>> {
    for k in 2..=crate::functional::MAX_TAYLOR_ORDER / 2 {
        match f.taylor_form(2 * k) {
            Ok(form) if !form.is_zero() => return Ok(Some(k as f64)),
            Ok(_) => {}
            Err(Error::UnsupportedOrder { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Classical averages, quantum terms and remainders along the α-grid, with a
/// log-log fit of the remainder order. Every α uses the same seed.
pub fn alpha_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let grid = &cfg.alpha_grid;
    if grid.len() < 3 {
        return Err(Error::Config(format!(
            "a sweep needs at least 3 grid points, got {}",
            grid.len()
        )));
    }
    let span = grid[0] / grid[grid.len() - 1];
    if span < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "a sweep grid must span at least two decades, got a ratio of {span}"
        )));
    }
    let f = cfg.functional()?;
    let d = DensityOperator::new(cfg.density()?)?;
    let tf = t_variable(&f)?;
    let quantum_unit = quantum_average(&d, &tf)?;

    let mut rows = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let rho = GaussianState::new(d.matrix().scaled(alpha), None)?;
        let mc = mc_average(&f, &rho, cfg.mc_samples, cfg.seed, cfg.chunk_size)?;
        let analytic = match cfg.evaluation {
            Evaluation::Analytic => closed_form_average(&f, &rho)?,
            Evaluation::Mc => None,
        };
        let quantum_term = alpha * quantum_unit;
        let (classical, stderr) = match analytic {
            Some(v) => (
                v,
                ROUNDOFF_ULPS * f64::EPSILON * (v.abs() + quantum_term.abs()),
            ),
            None => (mc.mean, mc.stderr),
        };
        let remainder = classical - quantum_term;
        rows.push(SweepRow {
            alpha,
            classical_mc: mc.mean,
            mc_stderr: mc.stderr,
            classical_analytic: analytic,
            quantum_term,
            remainder,
            stderr,
            below_noise: remainder.abs() <= NOISE_SIGMAS * stderr,
        });
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| !r.below_noise)
        .map(|r| (r.alpha.ln(), r.remainder.abs().ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    let noise_limited = fit.is_none();
    let expected_slope = expected_order(&f)?;

    let passed = match (fit, expected_slope) {
        (None, _) => true,
        (Some(fit), Some(k)) => match cfg.evaluation {
            Evaluation::Analytic if rows.iter().all(|r| r.classical_analytic.is_some()) => {
                (fit.slope - k).abs() <= SLOPE_TOLERANCE * k
            }
            _ => fit.slope >= 2.0 - 2.0 * SLOPE_TOLERANCE,
        },
        // rows above noise where no correction is expected
        (Some(_), None) => false,
    };

    Ok(SweepResult {
        rows,
        fit,
        noise_limited,
        expected_slope,
        evaluation: cfg.evaluation,
        passed,
    })
}
