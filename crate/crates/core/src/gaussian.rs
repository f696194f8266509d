//! Zero-mean Gaussian measures on the truncated state space.
//!
//! A [`GaussianState`] is fixed by its covariance operator `B`. Its total
//! dispersion `σ²(ρ) = Tr B` is the mean field energy. Sampling goes through
//! the spectral factor of `B`, so rank-deficient covariances (pure states)
//! are handled without any pivoting.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{FieldVector, HilbertDim, SymmetricOperator};

/// Relative eigenvalue band around zero treated as round-off.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Relative tolerance for membership in the exact dispersion class.
pub const CLASS_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceMode {
    /// `σ²(ρ) = α` up to [`CLASS_TOLERANCE`].
    Exact,
    /// `σ²(ρ) = α + o(α)`: any positive dispersion is accepted.
    Approximate,
}

/// Target dispersion class for a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaClass {
    alpha: f64,
    mode: ToleranceMode,
}

impl AlphaClass {
    pub fn new(alpha: f64, mode: ToleranceMode) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(AlphaClass { alpha, mode })
    }

    pub fn exact(alpha: f64) -> Result<Self> {
        Self::new(alpha, ToleranceMode::Exact)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> ToleranceMode {
        self.mode
    }

    pub fn check(&self, dispersion: f64) -> Result<()> {
        match self.mode {
            ToleranceMode::Exact => {
                if (dispersion - self.alpha).abs() > CLASS_TOLERANCE * self.alpha {
                    return Err(Error::ClassMembership(format!(
                        "dispersion {dispersion:e} differs from alpha {:e}",
                        self.alpha
                    )));
                }
            }
            ToleranceMode::Approximate => {
                if !(dispersion > 0.0) {
                    return Err(Error::ClassMembership(format!(
                        "approximate class needs positive dispersion, got {dispersion:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Square-root factor `B = Σ_r s_r² q_r q_rᵀ` restricted to the nonzero spectrum.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    n: usize,
    scales: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

impl Factor {
    fn from_covariance(b: &SymmetricOperator) -> Result<Factor> {
        let n = b.dim();
        let tr = b.trace();
        if !tr.is_finite() {
            return Err(Error::InvalidCovariance("covariance trace is not finite".into()));
        }
        let sd = b.spectral_decompose()?;
        let band = EIGEN_CLIP * tr.abs();
        let mut scales = Vec::new();
        let mut directions = Vec::new();
        for (k, &l) in sd.eigenvalues.iter().enumerate() {
            if l < -band {
                return Err(Error::InvalidCovariance(format!(
                    "covariance has eigenvalue {l:e} below the clip threshold {:e}",
                    -band
                )));
            }
            if l > band {
                scales.push(l.sqrt());
                directions.push(sd.eigenvector(k).into_inner());
            }
        }
        Ok(Factor {
            n,
            scales,
            directions,
        })
    }

    fn scaled(&self, s: f64) -> Factor {
        Factor {
            n: self.n,
            scales: self.scales.iter().map(|x| x * s).collect(),
            directions: self.directions.clone(),
        }
    }

    pub(crate) fn rank(&self) -> usize {
        self.scales.len()
    }

    /// `out = Σ_r s_r z_r q_r`, using the first `rank` latent coordinates.
    pub(crate) fn apply(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for ((s, q), zr) in self.scales.iter().zip(&self.directions).zip(z) {
            let c = s * zr;
            for (o, qi) in out.iter_mut().zip(q) {
                *o += qi * c;
            }
        }
    }
}

/// A zero-mean Gaussian measure with covariance `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    covariance: SymmetricOperator,
    dim: HilbertDim,
    factor: Factor,
}

impl GaussianState {
    /// Validates `B` (and optionally its dispersion class) and builds the state.
    pub fn new(b: SymmetricOperator, alpha_class: Option<AlphaClass>) -> Result<Self> {
        let dim = HilbertDim::new(b.dim())?;
        if let Some(class) = alpha_class {
            class.check(b.trace())?;
        }
        let factor = Factor::from_covariance(&b)?;
        Ok(GaussianState {
            covariance: b,
            dim,
            factor,
        })
    }

    /// Rank-one state `α ψ⊗ψ`, concentrated on the line through `ψ`.
    pub fn pure_state(psi: &FieldVector, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha must be positive, got {alpha}")));
        }
        let r = psi.norm();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::Invalid("pure state needs a nonzero vector".into()));
        }
        let covariance = SymmetricOperator::outer_product(psi).scaled(alpha);
        let dim = HilbertDim::new(psi.dim())?;
        let factor = Factor {
            n: psi.dim(),
            scales: vec![alpha.sqrt()],
            directions: vec![psi.as_slice().to_vec()],
        };
        Ok(GaussianState {
            covariance,
            dim,
            factor,
        })
    }

    pub fn covariance(&self) -> &SymmetricOperator {
        &self.covariance
    }

    pub fn dim(&self) -> HilbertDim {
        self.dim
    }

    pub fn mean(&self) -> FieldVector {
        FieldVector::zeros(self.dim.get())
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    /// `σ²(ρ) = Tr B`.
    pub fn dispersion(&self) -> f64 {
        self.covariance.trace()
    }

    /// Characteristic function `exp(-(By, y)/2)`.
    pub fn fourier_transform(&self, y: &FieldVector) -> Result<f64> {
        self.covariance.check_dim(y.dim())?;
        Ok((-0.5 * self.covariance.quadratic_form(y.as_slice())).exp())
    }

    /// Pushforward under `ψ ↦ ψ/√α`; the covariance becomes `B/α`.
    pub fn scale(&self, alpha: f64) -> Result<GaussianState> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Invalid(format!("alpha must be positive, got {alpha}")));
        }
        let n = self.dim.get();
        let raw: Vec<f64> = self
            .covariance
            .as_row_major()
            .iter()
            .map(|x| x / alpha)
            .collect();
        Ok(GaussianState {
            covariance: SymmetricOperator::from_row_major(n, &raw)?,
            dim: self.dim,
            factor: self.factor.scaled(1.0 / alpha.sqrt()),
        })
    }

    /// Draws `count` samples with the default substream layout.
    pub fn sample(&self, seed: u64, count: usize) -> Result<SampleBatch> {
        draw_batch(self, seed, count, DEFAULT_CHUNK_SIZE)
    }

    /// `P(‖ψ‖² > C) ≤ σ²(ρ)/C` against the empirical tail of `batch`.
    pub fn chebyshev_tail(&self, c: f64, batch: &SampleBatch) -> Result<TailEstimate> {
        if !(c > 0.0) {
            return Err(Error::Invalid(format!("threshold must be positive, got {c}")));
        }
        let bound = (self.dispersion() / c).min(1.0);
        let hits = batch
            .samples()
            .filter(|s| crate::linalg::dot(s, s) > c)
            .count();
        Ok(TailEstimate {
            bound,
            empirical: hits as f64 / batch.len() as f64,
            samples: batch.len(),
        })
    }
}

/// Chebyshev bound next to the observed tail frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub bound: f64,
    pub empirical: f64,
    pub samples: usize,
}

impl TailEstimate {
    /// `empirical ≤ bound + k·√(bound/N)`.
    pub fn holds(&self, k: f64) -> bool {
        self.empirical <= self.bound + k * (self.bound / self.samples as f64).sqrt()
    }
}

/// Anything that can draw field samples from a per-chunk random stream.
pub trait FieldSampler: Sync {
    fn field_dim(&self) -> usize;
    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Vec<f64>, out: &mut [f64]);
}

impl FieldSampler for GaussianState {
    fn field_dim(&self) -> usize {
        self.dim.get()
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, scratch: &mut Vec<f64>, out: &mut [f64]) {
        let n = self.dim.get();
        scratch.clear();
        scratch.extend((0..n).map(|_| -> f64 { StandardNormal.sample(rng) }));
        self.factor.apply(scratch, out);
    }
}

/// Seeded batch of field samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    dim: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub chunk_size: usize,
    pub chunk_count: usize,
}

impl SampleBatch {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn samples(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Applies `f` to every sample, preserving sample order.
    pub fn map<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.data.par_chunks_exact(self.dim).map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.samples().map(f).collect()
        }
    }

    /// Empirical second-moment matrix `(1/N) Σ ψψᵀ` (the mean is known to be zero).
    pub fn second_moment(&self) -> SymmetricOperator {
        let n = self.dim;
        let mut acc = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let vals: Vec<f64> = self.samples().map(|s| s[i] * s[j]).collect();
                let m = crate::stats::pairwise_sum(&vals) / self.len() as f64;
                acc[i * n + j] = m;
                acc[j * n + i] = m;
            }
        }
        SymmetricOperator::from_row_major(n, &acc).expect("square")
    }

    /// CSV with a layout comment, a header row and one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# seed={} chunk_size={} chunk_count={} samples={}",
            self.seed,
            self.chunk_size,
            self.chunk_count,
            self.len()
        )?;
        let header: Vec<String> = (1..=self.dim).map(|i| format!("psi_{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for s in self.samples() {
            let row: Vec<String> = s.iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Random stream for chunk `chunk` of a batch seeded by `seed`.
pub fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Draws `count` samples in chunks of `chunk_size`. Chunk `c` always uses
/// substream `c`, so the batch does not depend on how chunks are scheduled.
pub fn draw_batch<S: FieldSampler + ?Sized>(
    sampler: &S,
    seed: u64,
    count: usize,
    chunk_size: usize,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::Invalid("sample count must be at least 1".into()));
    }
    if chunk_size == 0 {
        return Err(Error::Invalid("chunk size must be at least 1".into()));
    }
    let n = sampler.field_dim();
    let chunk_count = count.div_ceil(chunk_size);
    let mut data = vec![0.0; count * n];

    let fill = |(c, block): (usize, &mut [f64])| {
        let mut rng = substream(seed, c as u64);
        let mut scratch = Vec::with_capacity(n);
        for out in block.chunks_exact_mut(n) {
            sampler.draw_into(&mut rng, &mut scratch, out);
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_size * n).enumerate().for_each(fill);
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_size * n).enumerate().for_each(fill);
    }

    Ok(SampleBatch {
        dim: n,
        data,
        seed,
        chunk_size,
        chunk_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;
    use approx::assert_relative_eq;

    #[test]
    fn accepts_exact_class_member() {
        let b = SymmetricOperator::diagonal(&[0.05, 0.05]);
        let rho = GaussianState::new(b, Some(AlphaClass::exact(0.1).unwrap())).unwrap();
        assert_relative_eq!(rho.dispersion(), 0.1, epsilon = 1e-15);
        assert_eq!(rho.mean(), FieldVector::zeros(2));
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let b = SymmetricOperator::from_entries(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let err = GaussianState::new(b, None).unwrap_err();
        assert!(matches!(err, Error::InvalidCovariance(_)), "{err}");
    }

    #[test]
    fn rejects_dispersion_mismatch() {
        let b = SymmetricOperator::diagonal(&[0.05, 0.06]);
        let err = GaussianState::new(b, Some(AlphaClass::exact(0.1).unwrap())).unwrap_err();
        assert!(matches!(err, Error::ClassMembership(_)));
    }

    #[test]
    fn clips_round_off_negative_eigenvalues() {
        let b = SymmetricOperator::diagonal(&[1.0, -1e-14]);
        let rho = GaussianState::new(b, None).unwrap();
        assert_eq!(rho.rank(), 1);
        let b = SymmetricOperator::diagonal(&[1.0, -1e-10]);
        assert!(GaussianState::new(b, None).is_err());
    }

    #[test]
    fn rank_one_state_from_outer_product() {
        let psi = FieldVector::new(vec![0.6, 0.8]);
        let b = SymmetricOperator::outer_product(&psi).scaled(0.1);
        let rho = GaussianState::new(b, Some(AlphaClass::exact(0.1).unwrap())).unwrap();
        assert_eq!(rho.rank(), 1);
    }

    #[test]
    fn dispersion_cases() {
        let rho = GaussianState::new(SymmetricOperator::identity(5).scaled(0.2), None).unwrap();
        assert_relative_eq!(rho.dispersion(), 1.0, epsilon = 1e-15);
        let psi = FieldVector::new(vec![0.6, 0.8, 0.0]);
        let rho = GaussianState::pure_state(&psi, 0.05).unwrap();
        assert_relative_eq!(rho.dispersion(), 0.05, epsilon = 1e-15);
    }

    #[test]
    fn dispersion_matches_mean_energy() {
        let b = SymmetricOperator::diagonal(&[0.3, 0.1, 0.6]);
        let rho = GaussianState::new(b, None).unwrap();
        let batch = rho.sample(5, 100_000).unwrap();
        let e = Estimate::from_values(&batch.map(|s| crate::linalg::dot(s, s)));
        assert!(e.within(rho.dispersion(), 4.0), "{e:?}");
    }

    #[test]
    fn fourier_transform_cases() {
        let rho = GaussianState::new(SymmetricOperator::identity(3), None).unwrap();
        assert_eq!(rho.fourier_transform(&FieldVector::zeros(3)).unwrap(), 1.0);
        assert_relative_eq!(
            rho.fourier_transform(&FieldVector::basis(3, 0)).unwrap(),
            0.606_530_659_712_633_4,
            epsilon = 1e-15
        );
        let psi = FieldVector::new(vec![0.6, 0.8, 0.0]);
        let alpha = 0.3;
        let pure = GaussianState::pure_state(&psi, alpha).unwrap();
        let y = FieldVector::new(vec![1.0, -2.0, 5.0]);
        let yp = y.dot(&psi);
        assert_relative_eq!(
            pure.fourier_transform(&y).unwrap(),
            (-0.5 * alpha * yp * yp).exp(),
            epsilon = 1e-15
        );
        assert!(rho.fourier_transform(&FieldVector::zeros(2)).is_err());
    }

    #[test]
    fn scaling_cases() {
        let alpha = 0.01;
        let rho = GaussianState::new(SymmetricOperator::identity(4).scaled(alpha), None).unwrap();
        let d = rho.scale(alpha).unwrap();
        assert_eq!(d.covariance(), &SymmetricOperator::identity(4));

        let rho = GaussianState::new(SymmetricOperator::diagonal(&[0.06, 0.04]), None).unwrap();
        let d = rho.scale(0.1).unwrap();
        assert_relative_eq!(d.covariance().get(0, 0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(d.covariance().get(1, 1), 0.4, epsilon = 1e-15);
        assert_relative_eq!(d.dispersion(), 1.0, epsilon = 1e-15);
        assert!(rho.scale(0.0).is_err());
        assert!(rho.scale(-1.0).is_err());
    }

    #[test]
    fn scaled_samples_have_scaled_covariance() {
        let b = SymmetricOperator::from_entries(&[vec![0.05, 0.01], vec![0.01, 0.03]]).unwrap();
        let alpha = 0.08;
        let rho = GaussianState::new(b.clone(), None).unwrap();
        let d = rho.scale(alpha).unwrap();
        let n_samples = 100_000;
        let batch = d.sample(17, n_samples).unwrap();
        let emp = batch.second_moment();
        let target = b.scaled(1.0 / alpha);
        for i in 0..2 {
            for j in 0..2 {
                let band = 4.0
                    * ((target.get(i, i) * target.get(j, j) + target.get(i, j).powi(2))
                        / n_samples as f64)
                        .sqrt();
                assert!((emp.get(i, j) - target.get(i, j)).abs() <= band);
            }
        }
    }

    #[test]
    fn sample_variances_in_band() {
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[1.0, 4.0]), None).unwrap();
        let batch = rho.sample(1, 100_000).unwrap();
        let m = batch.second_moment();
        assert!((0.95..=1.05).contains(&m.get(0, 0)), "{}", m.get(0, 0));
        assert!((3.8..=4.2).contains(&m.get(1, 1)), "{}", m.get(1, 1));
    }

    #[test]
    fn rank_one_samples_are_exactly_on_axis() {
        let b = SymmetricOperator::diagonal(&[0.1, 0.0, 0.0, 0.0]);
        let rho = GaussianState::new(b, None).unwrap();
        let batch = rho.sample(3, 5000).unwrap();
        for s in batch.samples() {
            assert!(s[1..].iter().all(|&x| x == 0.0));
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn batches_are_thread_count_independent() {
        let b = SymmetricOperator::from_entries(&[
            vec![2.0, 0.3, 0.0],
            vec![0.3, 1.0, 0.1],
            vec![0.0, 0.1, 0.5],
        ])
        .unwrap();
        let rho = GaussianState::new(b, None).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| draw_batch(&rho, 99, 20_000, 1024).unwrap())
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a.chunk_count, 20);
        assert!(a
            .samples()
            .flatten()
            .zip(b.samples().flatten())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn chebyshev_cases() {
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[0.01]), None).unwrap();
        let batch = rho.sample(2, 10_000).unwrap();
        let t = rho.chebyshev_tail(1.0, &batch).unwrap();
        assert_relative_eq!(t.bound, 0.01, epsilon = 1e-15);
        assert!(t.holds(4.0));
        let t = rho.chebyshev_tail(1e12, &batch).unwrap();
        assert!(t.bound < 1e-13);
        assert!(rho.chebyshev_tail(0.0, &batch).is_err());

        // 1-d tail at C = α: P(z² > 1) = erfc(1/√2) ≈ 0.3173
        let alpha = 0.2;
        let rho = GaussianState::new(SymmetricOperator::diagonal(&[alpha]), None).unwrap();
        let n = 100_000;
        let batch = rho.sample(4, n).unwrap();
        let t = rho.chebyshev_tail(alpha, &batch).unwrap();
        let p = 0.317_310_507_862_914_1;
        assert_eq!(t.bound, 1.0);
        assert!((t.empirical - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn pure_state_cases() {
        let e1 = FieldVector::basis(3, 0);
        let rho = GaussianState::pure_state(&e1, 0.05).unwrap();
        assert_eq!(rho.covariance(), &SymmetricOperator::diagonal(&[0.05, 0.0, 0.0]));

        let psi = FieldVector::new(vec![0.6, 0.8]);
        let a = GaussianState::pure_state(&psi, 0.1).unwrap();
        let b = GaussianState::pure_state(&psi.scaled(2.0), 0.1).unwrap();
        assert_ne!(a.covariance(), b.covariance());
        assert_relative_eq!(b.dispersion(), 4.0 * a.dispersion(), epsilon = 1e-15);

        assert!(GaussianState::pure_state(&FieldVector::zeros(2), 0.1).is_err());
    }

    #[test]
    fn pure_state_samples_stay_on_line() {
        let psi = FieldVector::new(vec![0.6, -0.8, 0.0]);
        let rho = GaussianState::pure_state(&psi, 0.1).unwrap();
        let batch = rho.sample(8, 2000).unwrap();
        for s in batch.samples() {
            let t = crate::linalg::dot(s, psi.as_slice());
            assert_eq!(s[2], 0.0);
            for (x, p) in s.iter().zip(psi.as_slice()) {
                assert!((x - t * p).abs() <= 4.0 * f64::EPSILON * t.abs());
            }
        }
    }

    #[test]
    fn csv_header_records_layout() {
        let rho = GaussianState::new(SymmetricOperator::identity(2), None).unwrap();
        let batch = draw_batch(&rho, 42, 3, 2).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# seed=42 chunk_size=2 chunk_count=2 samples=3"
        );
        assert_eq!(lines.next().unwrap(), "psi_1,psi_2");
        assert_eq!(lines.count(), 3);
    }
}
