use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::SamplerKind;
use super::mc_average;
use crate::error::{Error, Result};
use crate::forms::SymmetricForm;
use crate::functional::Functional;
use crate::gaussian::{FieldSampler, GaussianState, EIGEN_CLIP};
use crate::linalg::SymmetricOperator;
use crate::quantum::SecondMoment;
use crate::stats::Estimate;

/// Zero-mean, finite-second-moment measure that is not Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMomentState {
    kind: SamplerKind,
    covariance: SymmetricOperator,
    /// `(√λ_r, q_r)` for product-Laplace; empty for the sphere.
    scales: Vec<f64>,
    directions: Vec<Vec<f64>>,
    radius: f64,
}

impl SecondMomentState {
    /// `ψ = Σ_r √λ_r u_r q_r` with i.i.d. unit-variance Laplace `u_r`; covariance `B`.
    pub fn product_laplace(b: SymmetricOperator) -> Result<Self> {
        let sd = b.spectral_decompose()?;
        let band = EIGEN_CLIP * b.trace().abs();
        let mut scales = Vec::new();
        let mut directions = Vec::new();
        for (k, &l) in sd.eigenvalues.iter().enumerate() {
            if l < -band {
                return Err(Error::InvalidCovariance(format!(
                    "covariance has eigenvalue {l:e}"
                )));
            }
            if l > band {
                scales.push(l.sqrt());
                directions.push(sd.eigenvector(k).into_inner());
            }
        }
        Ok(SecondMomentState {
            kind: SamplerKind::ProductLaplace,
            covariance: b,
            scales,
            directions,
            radius: 0.0,
        })
    }

    /// Uniform on the sphere of radius `r`; covariance `(r²/n) I`.
    pub fn uniform_sphere(n: usize, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("dimension must be at least 1".into()));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Invalid(format!("radius must be positive, got {r}")));
        }
        Ok(SecondMomentState {
            kind: SamplerKind::UniformSphere,
            covariance: SymmetricOperator::identity(n).scaled(r * r / n as f64),
            scales: vec![],
            directions: vec![],
            radius: r,
        })
    }

    /// The state of the given kind whose covariance is `b`. The sphere needs `b ∝ I`.
    pub fn with_covariance(kind: SamplerKind, b: SymmetricOperator) -> Result<Self> {
        match kind {
            SamplerKind::ProductLaplace => Self::product_laplace(b),
            SamplerKind::UniformSphere => {
                let n = b.dim();
                let c = b.trace() / n as f64;
                let iso = SymmetricOperator::identity(n).scaled(c);
                if b.max_abs_diff(&iso) > 1e-12 * c.abs() {
                    return Err(Error::Invalid(
                        "a uniform-sphere state has isotropic covariance".into(),
                    ));
                }
                Self::uniform_sphere(n, (c * n as f64).sqrt())
            }
        }
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn dispersion(&self) -> f64 {
        self.covariance.trace()
    }

    /// Exact `E ‖ψ‖⁴`.
    pub fn fourth_norm_moment(&self) -> f64 {
        match self.kind {
            // E u⁴ = 6 for unit Laplace
            SamplerKind::ProductLaplace => {
                let s2: f64 = self.scales.iter().map(|s| s * s).sum();
                let s4: f64 = self.scales.iter().map(|s| s.powi(4)).sum();
                s2 * s2 + 5.0 * s4
            }
            SamplerKind::UniformSphere => self.radius.powi(4),
        }
    }
}

impl SecondMoment for SecondMomentState {
    fn covariance(&self) -> &SymmetricOperator {
        &self.covariance
    }
}

impl FieldSampler for SecondMomentState {
    fn field_dim(&self) -> usize {
        self.covariance.dim()
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Vec<f64>, out: &mut [f64]) {
        scratch.clear();
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            SamplerKind::ProductLaplace => {
                for (s, q) in self.scales.iter().zip(&self.directions) {
                    let e1: f64 = Exp1.sample(rng);
                    let e2: f64 = Exp1.sample(rng);
                    let c = s * (e1 - e2) * std::f64::consts::FRAC_1_SQRT_2;
                    for (o, qi) in out.iter_mut().zip(q) {
                        *o += qi * c;
                    }
                }
            }
            SamplerKind::UniformSphere => loop {
                scratch.clear();
                scratch.extend((0..out.len()).map(|_| -> f64 { rng.sample(StandardNormal) }));
                let norm = crate::linalg::dot(scratch, scratch).sqrt();
                if norm > 0.0 {
                    for (o, z) in out.iter_mut().zip(scratch.iter()) {
                        *o = self.radius * z / norm;
                    }
                    break;
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonGaussianReport {
    pub kind: SamplerKind,
    pub dispersion: f64,
    pub quadratic: Estimate,
    /// `Tr(cov μ) A`.
    pub trace_value: f64,
    pub quadratic_z: f64,
    /// `‖ψ‖⁴` under the state.
    pub quartic: Estimate,
    pub quartic_exact: f64,
    /// `‖ψ‖⁴` under the Gaussian with the same covariance.
    pub quartic_gaussian: Estimate,
    /// Wick value `(Tr B)² + 2 Tr B²`.
    pub quartic_wick: f64,
    /// Separation of the two quartic estimates in combined standard errors.
    pub separation_z: f64,
    pub passed: bool,
}

/// Second-moment law for a non-Gaussian state, plus a fourth-moment contrast
/// with the Gaussian of equal covariance.
pub fn nongaussian_experiment(
    state: &SecondMomentState,
    a: &SymmetricOperator,
    count: usize,
    seed: u64,
    chunk_size: usize,
) -> Result<NonGaussianReport> {
    let n = state.field_dim();
    a.check_dim(n)?;
    let b = state.covariance.clone();
    let trace_value = b.trace_product(a)?;
    let quadratic = mc_average(&Functional::quadratic(a.clone()), state, count, seed, chunk_size)?;

    let quartic_f = Functional::even_polynomial(vec![
        SymmetricForm::zero(2, n),
        SymmetricForm::quad_power(SymmetricOperator::identity(n), 2, 1.0)?,
    ])?;
    let quartic = mc_average(&quartic_f, state, count, seed, chunk_size)?;
    let gaussian = GaussianState::new(b.clone(), None)?;
    let quartic_gaussian = mc_average(&quartic_f, &gaussian, count, seed ^ 0x5DEE_CE66, chunk_size)?;
    let tr = b.trace();
    let quartic_wick = tr * tr + 2.0 * b.trace_product(&b)?;

    let combined = quartic.stderr.hypot(quartic_gaussian.stderr);
    let separation_z = (quartic.mean - quartic_gaussian.mean) / combined;
    let quadratic_z = quadratic.z_score(trace_value);
    let passed = quadratic.within(trace_value, 4.0) && separation_z.abs() > 4.0;
    Ok(NonGaussianReport {
        kind: state.kind,
        dispersion: state.dispersion(),
        quadratic,
        trace_value,
        quadratic_z,
        quartic,
        quartic_exact: state.fourth_norm_moment(),
        quartic_gaussian,
        quartic_wick,
        separation_z,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{random_density, random_symmetric};
    use crate::gaussian::draw_batch;

    #[test]
    fn laplace_matches_covariance() {
        let b = random_density(4, 4, 21).scaled(0.3);
        let s = SecondMomentState::product_laplace(b.clone()).unwrap();
        let batch = draw_batch(&s, 5, 200_000, 4096).unwrap();
        let m = batch.second_moment();
        assert!(m.max_abs_diff(&b) < 5e-3);
        assert!((s.dispersion() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn sphere_samples_have_fixed_norm() {
        let s = SecondMomentState::uniform_sphere(5, 2.0).unwrap();
        let batch = draw_batch(&s, 1, 1000, 128).unwrap();
        assert!(batch.samples().all(|x| (crate::linalg::dot(x, x) - 4.0).abs() < 1e-12));
        assert!((s.covariance().get(0, 0) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sphere_quadratic_average_is_trace() {
        let n = 3;
        let r = 1.5;
        let a = random_symmetric(n, 4, 1.0);
        let s = SecondMomentState::uniform_sphere(n, r).unwrap();
        let rep = nongaussian_experiment(&s, &a, 100_000, 8, 4096).unwrap();
        assert!((rep.trace_value - r * r / n as f64 * a.trace()).abs() < 1e-12);
        assert!(rep.quadratic.within(rep.trace_value, 4.0));
        assert!(rep.quartic.stderr < 1e-9);
        assert!(rep.passed);
    }

    #[test]
    fn laplace_quartic_separates_from_gaussian() {
        let b = random_density(3, 3, 2);
        let a = random_symmetric(3, 9, 1.0);
        let s = SecondMomentState::product_laplace(b).unwrap();
        let rep = nongaussian_experiment(&s, &a, 100_000, 3, 4096).unwrap();
        assert!(rep.quadratic.within(rep.trace_value, 4.0));
        assert!(rep.separation_z > 4.0, "{rep:?}");
        assert!(rep.quartic.within(rep.quartic_exact, 4.0));
        assert!(rep.quartic_gaussian.within(rep.quartic_wick, 4.0));
        assert!(rep.passed);
    }

    #[test]
    fn sphere_requires_isotropic_covariance() {
        let b = SymmetricOperator::diagonal(&[1.0, 2.0]);
        assert!(SecondMomentState::with_covariance(SamplerKind::UniformSphere, b).is_err());
        let s = SecondMomentState::with_covariance(
            SamplerKind::UniformSphere,
            SymmetricOperator::identity(2).scaled(0.5),
        )
        .unwrap();
        assert!((s.radius - 1.0).abs() < 1e-15);
    }
}
