//! The classical → quantum correspondence.
//!
//! States go to their covariance normalized by the dispersion class,
//! `D = cov ρ / α`. Variables go to half their second derivative at the
//! vacuum, `T(f) = ½ f″(0)`, or, for the higher-order model, to the multiple
//! `A_{2k} = α^{k−1}/(2k)! · f⁽²ᵏ⁾(0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{SymmetricForm, MAX_DENSE_ENTRIES};
use crate::functional::{factorial, Functional};
use crate::gaussian::{AlphaClass, GaussianState};
use crate::linalg::SymmetricOperator;
use crate::wick;

/// Tolerances for density operators.
pub const TRACE_TOLERANCE: f64 = 1e-9;
pub const PSD_TOLERANCE: f64 = 1e-12;
/// Entrywise tolerance for equivalence of variables.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

/// Symmetric, positive, unit-trace operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymmetricOperator", into = "SymmetricOperator")]
pub struct DensityOperator {
    matrix: SymmetricOperator,
}

impl DensityOperator {
    pub fn new(matrix: SymmetricOperator) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::Invalid(format!("density operator has trace {tr}")));
        }
        let min = matrix.spectral_decompose()?.min_eigenvalue();
        if min < -PSD_TOLERANCE {
            return Err(Error::Invalid(format!(
                "density operator has negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityOperator { matrix })
    }

    pub fn matrix(&self) -> &SymmetricOperator {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.matrix.spectral_decompose()?.min_eigenvalue())
    }
}

impl TryFrom<SymmetricOperator> for DensityOperator {
    type Error = Error;
    fn try_from(m: SymmetricOperator) -> Result<Self> {
        DensityOperator::new(m)
    }
}

impl From<DensityOperator> for SymmetricOperator {
    fn from(d: DensityOperator) -> Self {
        d.matrix
    }
}

/// A measure known through its zero mean and its covariance.
pub trait SecondMoment {
    fn covariance(&self) -> &SymmetricOperator;
}

impl SecondMoment for GaussianState {
    fn covariance(&self) -> &SymmetricOperator {
        GaussianState::covariance(self)
    }
}

fn divide(b: &SymmetricOperator, s: f64) -> Result<SymmetricOperator> {
    let raw: Vec<f64> = b.as_row_major().iter().map(|x| x / s).collect();
    SymmetricOperator::from_row_major(b.dim(), &raw)
}

/// `T(ρ) = cov ρ / α` for `ρ` in the exact class of dispersion `α`.
pub fn t_state(rho: &GaussianState, alpha: f64) -> Result<DensityOperator> {
    let class = AlphaClass::exact(alpha)?;
    let b = rho.covariance();
    if b.as_row_major().iter().all(|&x| x == 0.0) {
        return Err(Error::Degenerate("zero covariance has no quantum image".into()));
    }
    class.check(rho.dispersion())?;
    DensityOperator::new(divide(b, alpha)?)
}

/// `T(ρ) = cov ρ / σ²(ρ)` for any zero-mean measure with positive dispersion.
pub fn t_state_extended<S: SecondMoment + ?Sized>(state: &S) -> Result<DensityOperator> {
    let b = state.covariance();
    let dispersion = b.trace();
    if !(dispersion > 0.0) {
        return Err(Error::Degenerate(format!(
            "dispersion {dispersion:e} cannot be normalized"
        )));
    }
    DensityOperator::new(divide(b, dispersion)?)
}

/// `T(f) = ½ f″(0)`.
pub fn t_variable(f: &Functional) -> Result<SymmetricOperator> {
    Ok(f.taylor_form(2)?.matrix()?.scaled(0.5))
}

/// von Neumann average `Tr D A`.
pub fn quantum_average(d: &DensityOperator, a: &SymmetricOperator) -> Result<f64> {
    d.matrix.trace_product(a)
}

/// Observable of the order-`2n` model: forms of orders 2, 4, …, 2n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableMultiple {
    forms: Vec<SymmetricForm>,
}

impl ObservableMultiple {
    pub fn new(forms: Vec<SymmetricForm>) -> Result<Self> {
        if forms.is_empty() {
            return Err(Error::Invalid("observable multiple needs at least A₂".into()));
        }
        for (j, f) in forms.iter().enumerate() {
            if f.order() != 2 * (j + 1) {
                return Err(Error::Invalid(format!(
                    "component {} has order {} instead of {}",
                    j + 1,
                    f.order(),
                    2 * (j + 1)
                )));
            }
        }
        Ok(ObservableMultiple { forms })
    }

    pub fn forms(&self) -> &[SymmetricForm] {
        &self.forms
    }

    /// `A_{2k}` for `k = 1, 2, …`.
    pub fn component(&self, k: usize) -> Option<&SymmetricForm> {
        k.checked_sub(1).and_then(|i| self.forms.get(i))
    }

    pub fn max_order(&self) -> usize {
        2 * self.forms.len()
    }
}

/// `T_{2n}(f) = (½ f″(0), α/4! f⁽⁴⁾(0), …, α^{n−1}/(2n)! f⁽²ⁿ⁾(0))`.
pub fn t2n_variable(f: &Functional, n: usize, alpha: f64) -> Result<ObservableMultiple> {
    if n == 0 {
        return Err(Error::Invalid("model order n must be at least 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::Invalid(format!("alpha must be positive, got {alpha}")));
    }
    let forms = (1..=n)
        .map(|k| {
            let scale = alpha.powi(k as i32 - 1) / factorial(2 * k);
            Ok(f.taylor_form(2 * k)?.scaled(scale))
        })
        .collect::<Result<Vec<_>>>()?;
    ObservableMultiple::new(forms)
}

/// `⟨A⟩_D = Σ_k Tr e(2k, D) A_{2k}`.
pub fn generalized_average(d: &DensityOperator, a: &ObservableMultiple) -> Result<f64> {
    if a.max_order() > wick::MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order: a.max_order(),
            reason: format!("moment forms are capped at order {}", wick::MAX_MOMENT_ORDER),
        });
    }
    let mut total = 0.0;
    for form in a.forms() {
        if form.dim() != d.dim() {
            return Err(Error::Dimension("observable and state dimensions differ".into()));
        }
        let n = form.dim();
        total += if form.order() == 2 {
            d.matrix.trace_product(&form.matrix()?)?
        } else if n.checked_pow(form.order() as u32).is_some_and(|len| len <= MAX_DENSE_ENTRIES) {
            wick::trace_moment(&d.matrix, form)?
        } else {
            // too large to densify; contract pairings directly
            wick::gaussian_integral_multilinear(form, &d.matrix)?
        };
    }
    Ok(total)
}

/// `f ∼ g` iff `f″(0) = g″(0)`.
pub fn variables_equivalent(f: &Functional, g: &Functional) -> Result<bool> {
    let a = t_variable(f)?;
    let b = t_variable(g)?;
    if a.dim() != b.dim() {
        return Ok(false);
    }
    Ok(a.max_abs_diff(&b) <= EQUIVALENCE_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::FieldVector;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymmetricOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymmetricOperator::from_row_major(n, &raw).unwrap()
    }

    #[test]
    fn t_state_cases() {
        let alpha = 0.1;
        let n = 4;
        let rho = GaussianState::new(SymmetricOperator::identity(n).scaled(alpha / n as f64), None)
            .unwrap();
        let d = t_state(&rho, alpha).unwrap();
        assert!(d.matrix().max_abs_diff(&SymmetricOperator::identity(n).scaled(0.25)) < 1e-15);

        let psi = FieldVector::new(vec![0.6, 0.8]);
        let rho = GaussianState::pure_state(&psi, alpha).unwrap();
        let d = t_state(&rho, alpha).unwrap();
        assert!(d.matrix().max_abs_diff(&SymmetricOperator::outer_product(&psi)) < 1e-15);

        let rho = GaussianState::new(SymmetricOperator::diagonal(&[0.06, 0.04]), None).unwrap();
        let d = t_state(&rho, 0.1).unwrap();
        assert_relative_eq!(d.matrix().get(0, 0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(d.matrix().get(1, 1), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn t_state_errors() {
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[0.06, 0.05]), None).unwrap();
        assert!(matches!(t_state(&rho, 0.1), Err(Error::ClassMembership(_))));
        let zero = GaussianState::new(SymmetricOperator::zeros(2), None).unwrap();
        assert!(matches!(t_state(&zero, 0.1), Err(Error::Degenerate(_))));
        assert!(matches!(t_state_extended(&zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn extended_map_collapses_proportional_covariances() {
        let b = random_sym(3, 1);
        let b = SymmetricOperator::from_row_major(3, &crate::linalg::matmul(3, b.as_row_major(), b.as_row_major())).unwrap();
        let r1 = GaussianState::new(b.clone(), None).unwrap();
        let r2 = GaussianState::new(b.scaled(1.0 + 1e-3), None).unwrap();
        let d1 = t_state_extended(&r1).unwrap();
        let d2 = t_state_extended(&r2).unwrap();
        assert!(d1.matrix().max_abs_diff(d2.matrix()) < 1e-15);
        assert_relative_eq!(d1.matrix().trace(), 1.0, epsilon = 1e-14);
        // the exact map keeps them apart
        let alpha = r1.dispersion();
        assert!(t_state(&r1, alpha).is_ok());
        assert!(t_state(&r2, alpha).is_err());
    }

    #[test]
    fn t_variable_cases() {
        let a = random_sym(3, 2);
        assert_eq!(t_variable(&Functional::quadratic(a.clone())).unwrap(), a);
        assert_eq!(t_variable(&Functional::sin_quad(a.clone())).unwrap(), a);
        assert_eq!(
            t_variable(&Functional::cos_quad_minus_one(a.clone())).unwrap(),
            SymmetricOperator::zeros(3)
        );
    }

    #[test]
    fn t_variable_is_linear() {
        let a = random_sym(3, 3);
        let b = random_sym(3, 4);
        let (s, t) = (1.5, -0.25);
        let sum = Functional::sum(vec![
            Functional::quadratic(a.clone()).scaled(s),
            Functional::sin_quad(b.clone()).scaled(t),
        ])
        .unwrap();
        let lhs = t_variable(&sum).unwrap();
        let rhs = a.scaled(s).add(&b.scaled(t)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn quantum_average_cases() {
        let psi = FieldVector::new(vec![0.6, 0.8]);
        let d = DensityOperator::new(SymmetricOperator::outer_product(&psi)).unwrap();
        let a = random_sym(2, 5);
        assert_relative_eq!(
            quantum_average(&d, &a).unwrap(),
            a.quadratic_form(psi.as_slice()),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            quantum_average(&d, &SymmetricOperator::identity(2)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let d = DensityOperator::new(SymmetricOperator::identity(4).scaled(0.25)).unwrap();
        let a = SymmetricOperator::diagonal(&[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(quantum_average(&d, &a).unwrap(), 3.0);
    }

    #[test]
    fn density_operator_validation() {
        assert!(DensityOperator::new(SymmetricOperator::diagonal(&[0.5, 0.4])).is_err());
        assert!(DensityOperator::new(SymmetricOperator::diagonal(&[1.5, -0.5])).is_err());
    }

    #[test]
    fn t2n_reduces_to_t_variable() {
        let a = random_sym(2, 6);
        let f = Functional::sin_quad(a.clone());
        let m = t2n_variable(&f, 1, 0.1).unwrap();
        assert_eq!(m.forms().len(), 1);
        assert_eq!(m.component(1).unwrap().matrix().unwrap(), t_variable(&f).unwrap());
    }

    #[test]
    fn t4_of_cos_family() {
        let a = random_sym(2, 7);
        let alpha = 0.05;
        let f = Functional::cos_quad_minus_one(a.clone());
        let m = t2n_variable(&f, 2, alpha).unwrap();
        assert!(m.component(1).unwrap().is_zero());
        let expect = f.taylor_form(4).unwrap().scaled(alpha / 24.0);
        let psi = [0.3, -0.2];
        assert_relative_eq!(
            m.component(2).unwrap().eval_diag(&psi),
            expect.eval_diag(&psi),
            epsilon = 1e-16
        );
    }

    #[test]
    fn t4_of_polynomial_recovers_its_terms() {
        let q2 = SymmetricForm::from_operator(random_sym(2, 8));
        let q4 = SymmetricForm::dense(4, 2, (0..16).map(|i| i as f64 * 0.1).collect()).unwrap();
        let f = Functional::even_polynomial(vec![q2.clone(), q4.clone()]).unwrap();
        let m = t2n_variable(&f, 2, 1.0).unwrap();
        let psi = [0.7, -1.1];
        assert_relative_eq!(m.component(1).unwrap().eval_diag(&psi), q2.eval_diag(&psi), epsilon = 1e-14);
        assert_relative_eq!(m.component(2).unwrap().eval_diag(&psi), q4.eval_diag(&psi), epsilon = 1e-14);
    }

    #[test]
    fn generalized_average_cases() {
        let d = DensityOperator::new(SymmetricOperator::diagonal(&[0.7, 0.3])).unwrap();
        let a = random_sym(2, 9);
        let m = ObservableMultiple::new(vec![SymmetricForm::from_operator(a.clone())]).unwrap();
        assert_relative_eq!(
            generalized_average(&d, &m).unwrap(),
            quantum_average(&d, &a).unwrap(),
            epsilon = 1e-15
        );

        // f(ψ) = cψ⁴ at n = 1 with α = d: α·⟨T₄ f⟩ equals E[cψ⁴] = 3cd².
        let (c, alpha) = (2.5, 0.2);
        let q4 = SymmetricForm::coordinate_power(4, 1, 0).unwrap().scaled(c);
        let f = Functional::even_polynomial(vec![SymmetricForm::zero(2, 1), q4]).unwrap();
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[alpha]), None).unwrap();
        let d = t_state(&rho, alpha).unwrap();
        let m = t2n_variable(&f, 2, alpha).unwrap();
        assert_relative_eq!(
            alpha * generalized_average(&d, &m).unwrap(),
            3.0 * c * alpha * alpha,
            epsilon = 1e-15
        );
    }

    #[test]
    fn observable_orders_validated() {
        assert!(ObservableMultiple::new(vec![SymmetricForm::zero(4, 2)]).is_err());
        assert!(ObservableMultiple::new(vec![]).is_err());
        let forms = vec![
            SymmetricForm::zero(2, 1),
            SymmetricForm::zero(4, 1),
            SymmetricForm::zero(6, 1),
            SymmetricForm::zero(8, 1),
        ];
        let m = ObservableMultiple::new(forms).unwrap();
        let d = DensityOperator::new(SymmetricOperator::identity(1)).unwrap();
        assert!(matches!(generalized_average(&d, &m), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn equivalence_cases() {
        let a = random_sym(3, 10);
        assert!(variables_equivalent(&Functional::quadratic(a.clone()), &Functional::sin_quad(a.clone())).unwrap());
        assert!(!variables_equivalent(
            &Functional::quadratic(a.clone()),
            &Functional::quadratic(a.scaled(2.0))
        )
        .unwrap());
        assert!(variables_equivalent(&Functional::cos_quad_minus_one(a.clone()), &Functional::zero(3)).unwrap());
    }

    #[test]
    fn equivalent_variables_share_quantum_averages() {
        let a = random_sym(3, 11);
        let f = Functional::quadratic(a.clone());
        let g = Functional::sin_quad(a);
        let b = random_sym(3, 12);
        let b = SymmetricOperator::from_row_major(3, &crate::linalg::matmul(3, b.as_row_major(), b.as_row_major())).unwrap();
        let d = t_state_extended(&GaussianState::new(b, None).unwrap()).unwrap();
        let x = quantum_average(&d, &t_variable(&f).unwrap()).unwrap();
        let y = quantum_average(&d, &t_variable(&g).unwrap()).unwrap();
        assert_eq!(x, y);
    }
}
