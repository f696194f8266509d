//! Classical physical variables `f: H → R` with `f(0) = 0`.
//!
//! Each family supplies both pointwise evaluation and its exact Taylor
//! coefficients `f⁽ᵏ⁾(0)` at the vacuum as symmetric `k`-forms, normalized so
//! that `f(ψ) = Σ_k f⁽ᵏ⁾(0)(ψ,…,ψ)/k!`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::SymmetricForm;
use crate::linalg::{FieldVector, SymmetricOperator};
use crate::wick::MAX_PAIRING_K;

/// Highest Taylor order the trigonometric families can produce.
pub const MAX_TAYLOR_ORDER: usize = 2 * MAX_PAIRING_K;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `(Aψ, ψ)`
    Quadratic { operator: SymmetricOperator },
    /// `Σ_j Q_{2j}(ψ, …, ψ)`; `terms[j-1]` has order `2j` (missing orders may be zero forms).
    EvenPolynomial { terms: Vec<SymmetricForm> },
    /// `sin (Aψ, ψ)`
    SinQuad { operator: SymmetricOperator },
    /// `cos (Aψ, ψ) − 1`
    CosQuadMinusOne { operator: SymmetricOperator },
    Sum { parts: Vec<Functional> },
}

/// A family member times a constant factor (the factor carries amplification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub family: Family,
    pub factor: f64,
    dim: usize,
}

impl Functional {
    fn build(family: Family, dim: usize) -> Self {
        Functional {
            family,
            factor: 1.0,
            dim,
        }
    }

    pub fn quadratic(a: SymmetricOperator) -> Self {
        let n = a.dim();
        Self::build(Family::Quadratic { operator: a }, n)
    }

    pub fn sin_quad(a: SymmetricOperator) -> Self {
        let n = a.dim();
        Self::build(Family::SinQuad { operator: a }, n)
    }

    pub fn cos_quad_minus_one(a: SymmetricOperator) -> Self {
        let n = a.dim();
        Self::build(Family::CosQuadMinusOne { operator: a }, n)
    }

    /// Terms must have orders 2, 4, … in sequence.
    pub fn even_polynomial(terms: Vec<SymmetricForm>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::Invalid("even polynomial needs at least one term".into()));
        };
        let n = first.dim();
        for (j, t) in terms.iter().enumerate() {
            if t.order() != 2 * (j + 1) {
                return Err(Error::Invalid(format!(
                    "term {} has order {} but must have order {}",
                    j + 1,
                    t.order(),
                    2 * (j + 1)
                )));
            }
            if t.dim() != n {
                return Err(Error::Dimension("polynomial terms on different dimensions".into()));
            }
        }
        Ok(Self::build(Family::EvenPolynomial { terms }, n))
    }

    /// The zero variable.
    pub fn zero(n: usize) -> Self {
        Self::build(
            Family::EvenPolynomial {
                terms: vec![SymmetricForm::zero(2, n)],
            },
            n,
        )
    }

    pub fn sum(parts: Vec<Functional>) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::Invalid("empty sum".into()));
        };
        let n = first.dim;
        if parts.iter().any(|p| p.dim != n) {
            return Err(Error::Dimension("summands on different dimensions".into()));
        }
        Ok(Self::build(Family::Sum { parts }, n))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `c·f`.
    pub fn scaled(&self, c: f64) -> Functional {
        let mut g = self.clone();
        g.factor *= c;
        g
    }

    /// `f_α = f/α`.
    pub fn amplify(&self, alpha: f64) -> Result<Functional> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha must be positive, got {alpha}")));
        }
        let mut g = self.clone();
        g.factor /= alpha;
        Ok(g)
    }

    pub fn eval(&self, psi: &FieldVector) -> Result<f64> {
        if psi.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "variable on dimension {} evaluated at a vector of length {}",
                self.dim,
                psi.dim()
            )));
        }
        Ok(self.eval_slice(psi.as_slice()))
    }

    /// Evaluation without the dimension check (hot path for sampling).
    pub fn eval_slice(&self, psi: &[f64]) -> f64 {
        let raw = match &self.family {
            Family::Quadratic { operator } => operator.quadratic_form(psi),
            Family::EvenPolynomial { terms } => terms.iter().map(|t| t.eval_diag(psi)).sum(),
            Family::SinQuad { operator } => operator.quadratic_form(psi).sin(),
            Family::CosQuadMinusOne { operator } => {
                // cos q − 1 = −2 sin²(q/2), without cancellation near 0
                let h = (0.5 * operator.quadratic_form(psi)).sin();
                -2.0 * h * h
            }
            Family::Sum { parts } => parts.iter().map(|p| p.eval_slice(psi)).sum(),
        };
        self.factor * raw
    }

    /// `f⁽ᵏ⁾(0)` as a symmetric `k`-form.
    pub fn taylor_form(&self, k: usize) -> Result<SymmetricForm> {
        if k == 0 {
            return Err(Error::Invalid("Taylor order must be at least 1".into()));
        }
        let n = self.dim;
        if k % 2 == 1 {
            return Ok(SymmetricForm::zero(k, n));
        }
        let p = k / 2;
        let form = match &self.family {
            Family::Quadratic { operator } => {
                if p == 1 {
                    SymmetricForm::quad_power(operator.clone(), 1, 2.0)?
                } else {
                    SymmetricForm::zero(k, n)
                }
            }
            Family::EvenPolynomial { terms } => match terms.get(p - 1) {
                Some(t) => t.scaled(factorial(k)),
                None => SymmetricForm::zero(k, n),
            },
            Family::SinQuad { operator } => {
                trig_term(operator, k, if p % 2 == 1 { sign(p / 2) } else { 0.0 })?
            }
            Family::CosQuadMinusOne { operator } => {
                trig_term(operator, k, if p.is_multiple_of(2) { sign(p / 2) } else { 0.0 })?
            }
            Family::Sum { parts } => {
                let mut acc = SymmetricForm::zero(k, n);
                for part in parts {
                    acc = acc.add(&part.taylor_form(k)?)?;
                }
                acc
            }
        };
        Ok(form.scaled(self.factor))
    }

    /// Family-declared `(c₁, c₂)` for `|f(ψ)| ≤ c₁ + c₂‖ψ‖²`.
    pub fn quadratic_growth_constants(&self) -> Result<(f64, f64)> {
        let s = self.factor.abs();
        Ok(match &self.family {
            Family::Quadratic { operator } => (0.0, s * operator.operator_norm()?),
            Family::SinQuad { .. } => (s, 0.0),
            Family::CosQuadMinusOne { .. } => (2.0 * s, 0.0),
            Family::EvenPolynomial { terms } => {
                let mut c1 = 0.0;
                let mut c2 = 0.0;
                for (j, t) in terms.iter().enumerate() {
                    let b = t.norm_bound()?;
                    c2 += b;
                    if j > 0 {
                        c1 += b;
                    }
                }
                (s * c1, s * c2)
            }
            Family::Sum { parts } => {
                let mut acc = (0.0, 0.0);
                for p in parts {
                    let (a, b) = p.quadratic_growth_constants()?;
                    acc = (acc.0 + s * a, acc.1 + s * b);
                }
                acc
            }
        })
    }

    /// Checks the declared quadratic-growth bound at every probe.
    pub fn quadratic_growth_check(&self, probes: &[FieldVector]) -> Result<bool> {
        if probes.is_empty() {
            return Err(Error::Invalid("quadratic growth check needs probes".into()));
        }
        let (c1, c2) = self.quadratic_growth_constants()?;
        for p in probes {
            let v = self.eval(p)?;
            let bound = c1 + c2 * p.norm_sqr();
            if v.abs() > bound * (1.0 + 1e-12) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `(C₀, C₁)` with `|f(ψ)| ≤ C₀ e^{C₁‖ψ‖}`.
    pub fn exponential_growth_constants(&self) -> Result<(f64, f64)> {
        let s = self.factor.abs();
        Ok(match &self.family {
            // x² ≤ e^x for x ≥ 0
            Family::Quadratic { operator } => (s * operator.operator_norm()?, 1.0),
            Family::SinQuad { .. } => (s, 0.0),
            Family::CosQuadMinusOne { .. } => (2.0 * s, 0.0),
            Family::EvenPolynomial { terms } => {
                // x^m ≤ (m/e)^m e^x, and ≤ e^x for m ≤ 2
                let mut c0 = 0.0;
                for (j, t) in terms.iter().enumerate() {
                    let m = 2.0 * (j + 1) as f64;
                    c0 += t.norm_bound()? * (m / std::f64::consts::E).powf(m).max(1.0);
                }
                (s * c0, 1.0)
            }
            Family::Sum { parts } => {
                let mut c0 = 0.0;
                let mut c1: f64 = 0.0;
                for p in parts {
                    let (a, b) = p.exponential_growth_constants()?;
                    c0 += s * a;
                    c1 = c1.max(b);
                }
                (c0, c1)
            }
        })
    }
}

fn sign(j: usize) -> f64 {
    if j.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Order-`k` Taylor form of `g((Aψ,ψ))` where the series coefficient of
/// `q^{k/2}` in `g` is `s/(k/2)!`.
fn trig_term(a: &SymmetricOperator, k: usize, s: f64) -> Result<SymmetricForm> {
    let n = a.dim();
    if s == 0.0 {
        return Ok(SymmetricForm::zero(k, n));
    }
    if k > MAX_TAYLOR_ORDER {
        return Err(Error::UnsupportedOrder {
            order: k,
            reason: format!("Taylor forms of trigonometric families stop at order {MAX_TAYLOR_ORDER}"),
        });
    }
    let p = k / 2;
    SymmetricForm::quad_power(a.clone(), p, s * factorial(k) / factorial(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::FormRepr;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SymmetricOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SymmetricOperator::from_row_major(n, &raw).unwrap()
    }

    fn random_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> FieldVector {
        FieldVector::new((0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
    }

    fn families(n: usize) -> Vec<Functional> {
        let a = random_sym(n, 1);
        let q4 = SymmetricForm::dense(4, n, {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            (0..n.pow(4)).map(|_| rng.random_range(-1.0..1.0)).collect()
        })
        .unwrap();
        vec![
            Functional::quadratic(a.clone()),
            Functional::sin_quad(a.clone()),
            Functional::cos_quad_minus_one(a.clone()),
            Functional::even_polynomial(vec![SymmetricForm::from_operator(a.clone()), q4]).unwrap(),
        ]
    }

    #[test]
    fn evaluation_cases() {
        let f = Functional::quadratic(SymmetricOperator::identity(2));
        assert_eq!(f.eval(&FieldVector::new(vec![3.0, 4.0])).unwrap(), 25.0);
        let a = random_sym(3, 5);
        let s = Functional::sin_quad(a.clone());
        assert_eq!(s.eval(&FieldVector::zeros(3)).unwrap(), 0.0);
        let c = Functional::cos_quad_minus_one(a);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let v = c.eval(&random_vec(3, 5.0, &mut rng)).unwrap();
            assert!((-2.0..=0.0).contains(&v));
        }
        assert!(f.eval(&FieldVector::zeros(3)).is_err());
    }

    #[test]
    fn vacuum_is_preserved() {
        for f in families(3) {
            assert_eq!(f.eval(&FieldVector::zeros(3)).unwrap(), 0.0);
        }
    }

    #[test]
    fn taylor_form_cases() {
        let a = random_sym(3, 7);
        let f = Functional::quadratic(a.clone());
        let f2 = f.taylor_form(2).unwrap();
        let psi = [0.3, 0.1, -0.4];
        assert_relative_eq!(f2.eval_diag(&psi) / 2.0, a.quadratic_form(&psi), epsilon = 1e-15);
        assert!(f.taylor_form(4).unwrap().is_zero());

        let s = Functional::sin_quad(a.clone());
        assert!(s.taylor_form(4).unwrap().is_zero());
        assert_eq!(s.taylor_form(2).unwrap(), f2);

        // cos(aψ²) − 1 at n = 1: the ψ⁴ coefficient is −a²/2, so the tensor entry is −12a²
        let av = 0.7;
        let c = Functional::cos_quad_minus_one(SymmetricOperator::diagonal(&[av]));
        let c4 = c.taylor_form(4).unwrap().densify().unwrap();
        assert_relative_eq!(c4[0], -12.0 * av * av, epsilon = 1e-14);
        assert!(c.taylor_form(2).unwrap().is_zero());
        assert!(matches!(
            c.taylor_form(12),
            Err(Error::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn series_oracle_for_trig_families() {
        // n = 1: sin(aψ²) = aψ² − a³ψ⁶/6 + a⁵ψ¹⁰/120 …
        let a = 1.3;
        let op = SymmetricOperator::diagonal(&[a]);
        let s = Functional::sin_quad(op.clone());
        let f6 = s.taylor_form(6).unwrap().densify().unwrap()[0];
        assert_relative_eq!(f6 / 720.0, -a.powi(3) / 6.0, epsilon = 1e-14);
        let c = Functional::cos_quad_minus_one(op);
        let f8 = c.taylor_form(8).unwrap();
        assert!(matches!(f8.repr(), FormRepr::QuadPower { power: 4, .. }));
        assert_relative_eq!(f8.eval_diag(&[1.0]) / 40320.0, a.powi(4) / 24.0, epsilon = 1e-14);
    }

    #[test]
    fn polynomial_taylor_forms_are_factorial_scaled() {
        let fs = families(2);
        let p = &fs[3];
        let Family::EvenPolynomial { terms } = &p.family else {
            unreachable!()
        };
        let f4 = p.taylor_form(4).unwrap();
        let psi = [0.5, -0.25];
        assert_relative_eq!(f4.eval_diag(&psi), 24.0 * terms[1].eval_diag(&psi), epsilon = 1e-14);
        assert!(p.taylor_form(6).unwrap().is_zero());
    }

    #[test]
    fn odd_taylor_forms_vanish() {
        for f in families(2) {
            for k in [1, 3, 5] {
                assert!(f.taylor_form(k).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn taylor_remainder_shrinks_at_expected_rate() {
        // K = highest order retained; the first omitted even order is K+2.
        let n = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in families(n) {
            for kmax in [2usize, 4] {
                let dir = random_vec(n, 1.0, &mut rng).normalized().unwrap();
                let residual = |r: f64| {
                    let psi = dir.scaled(r);
                    let mut series = 0.0;
                    for k in 1..=kmax {
                        series += f.taylor_form(k).unwrap().eval_diag(psi.as_slice()) / factorial(k);
                    }
                    (f.eval(&psi).unwrap() - series).abs()
                };
                let (r1, r2) = (0.1, 0.05);
                let (e1, e2) = (residual(r1), residual(r2));
                if e1 < 1e-15 {
                    // polynomial fully captured
                    continue;
                }
                assert!(
                    e1 / e2 >= 2f64.powf(kmax as f64 + 1.5),
                    "ratio {} for K={kmax}",
                    e1 / e2
                );
            }
        }
    }

    #[test]
    fn amplification() {
        let a = random_sym(2, 3);
        let f = Functional::quadratic(a.clone());
        let g = f.amplify(0.1).unwrap();
        let h = Functional::quadratic(a.scaled(10.0));
        let psi = FieldVector::new(vec![0.3, -0.8]);
        assert_relative_eq!(g.eval(&psi).unwrap(), h.eval(&psi).unwrap(), epsilon = 1e-14);
        let twice = f.amplify(0.1).unwrap().amplify(0.3).unwrap();
        let once = f.amplify(0.03).unwrap();
        assert_relative_eq!(twice.eval(&psi).unwrap(), once.eval(&psi).unwrap(), max_relative = 1e-14);
        let t = g.taylor_form(2).unwrap().matrix().unwrap();
        assert!(t.max_abs_diff(&a.scaled(20.0)) < 1e-13);
        assert!(f.amplify(0.0).is_err());
    }

    #[test]
    fn quadratic_growth() {
        let a = random_sym(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let probes: Vec<FieldVector> = (0..50).map(|_| random_vec(2, 20.0, &mut rng)).collect();
        assert!(Functional::sin_quad(a.clone()).quadratic_growth_check(&probes).unwrap());
        assert!(Functional::quadratic(a.clone()).quadratic_growth_check(&probes).unwrap());
        assert!(Functional::cos_quad_minus_one(a.clone()).quadratic_growth_check(&probes).unwrap());

        let q4 = SymmetricForm::quad_power(SymmetricOperator::identity(2), 2, 1.0).unwrap();
        let p = Functional::even_polynomial(vec![SymmetricForm::zero(2, 2), q4]).unwrap();
        let small = [FieldVector::new(vec![0.5, 0.0])];
        assert!(p.quadratic_growth_check(&small).unwrap());
        let large: Vec<FieldVector> = [10.0, 100.0]
            .iter()
            .map(|t| FieldVector::basis(2, 0).scaled(*t))
            .collect();
        assert!(!p.quadratic_growth_check(&large).unwrap());
        assert!(p.quadratic_growth_check(&[]).is_err());
    }

    #[test]
    fn exponential_growth_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in families(3) {
            let (c0, c1) = f.exponential_growth_constants().unwrap();
            for _ in 0..100 {
                let psi = random_vec(3, 8.0, &mut rng);
                assert!(f.eval(&psi).unwrap().abs() <= c0 * (c1 * psi.norm()).exp() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sums_add_taylor_forms() {
        let a = random_sym(2, 8);
        let b = random_sym(2, 9);
        let s = Functional::sum(vec![
            Functional::quadratic(a.clone()),
            Functional::sin_quad(b.clone()).scaled(2.0),
        ])
        .unwrap();
        let m = s.taylor_form(2).unwrap().matrix().unwrap();
        let expect = a.scaled(2.0).add(&b.scaled(4.0)).unwrap();
        assert!(m.max_abs_diff(&expect) < 1e-14);
    }
}
