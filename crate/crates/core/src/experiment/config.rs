//! Experiment configuration: what to build and how to sample it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::SymmetricForm;
use crate::functional::Functional;
use crate::gaussian::DEFAULT_CHUNK_SIZE;
use crate::linalg::{matmul, transpose, FieldVector, HilbertDim, SymmetricOperator};

pub const DEFAULT_ALPHA_GRID: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
pub const MIN_MC_SAMPLES: usize = 1000;

/// How an operator is specified in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Diagonal(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
    Random { seed: u64, scale: f64 },
}

impl OperatorSpec {
    pub fn build(&self, n: usize) -> Result<SymmetricOperator> {
        match self {
            OperatorSpec::Identity => Ok(SymmetricOperator::identity(n)),
            OperatorSpec::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::Config(format!(
                        "diagonal operator has {} entries but dim is {n}",
                        d.len()
                    )));
                }
                Ok(SymmetricOperator::diagonal(d))
            }
            OperatorSpec::Matrix(rows) => {
                let a = SymmetricOperator::from_entries(rows)?;
                if a.dim() != n {
                    return Err(Error::Config(format!(
                        "matrix operator is {}x{} but dim is {n}",
                        a.dim(),
                        a.dim()
                    )));
                }
                Ok(a)
            }
            OperatorSpec::Random { seed, scale } => Ok(random_symmetric(n, *seed, *scale)),
        }
    }
}

/// Symmetrized matrix of `scale · N(0,1)` entries.
pub fn random_symmetric(n: usize, seed: u64, scale: f64) -> SymmetricOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SymmetricOperator::from_row_major(n, &raw).expect("square")
}

/// `G Gᵀ / Tr(G Gᵀ)` for a Gaussian `n × rank` matrix `G`.
pub fn random_density(n: usize, rank: usize, seed: u64) -> SymmetricOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..rank.min(n) {
            g[i * n + j] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let ggt = matmul(n, &g, &transpose(n, &g));
    let m = SymmetricOperator::from_row_major(n, &ggt).expect("square");
    let tr = m.trace();
    m.scaled(1.0 / tr)
}

/// Dense symmetric random form of the given order.
pub fn random_form(order: usize, n: usize, seed: u64, scale: f64) -> Result<SymmetricForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..n.pow(order as u32))
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    SymmetricForm::dense(order, n, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFormSpec {
    pub seed: u64,
    pub scale: f64,
}

/// One homogeneous term of an even polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub degree: usize,
    /// Term `(Aψ,ψ)^{degree/2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    /// Dense random symmetric form of order `degree`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_form: Option<RandomFormSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Quadratic,
    SinQuad,
    CosQuadMinusOne,
    EvenPolynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermSpec>,
}

impl FunctionalSpec {
    pub fn build(&self, n: usize) -> Result<Functional> {
        let op = || -> Result<SymmetricOperator> {
            self.operator
                .as_ref()
                .ok_or_else(|| Error::Config("functional.operator is required for this family".into()))?
                .build(n)
        };
        match self.family {
            FamilyName::Quadratic => Ok(Functional::quadratic(op()?)),
            FamilyName::SinQuad => Ok(Functional::sin_quad(op()?)),
            FamilyName::CosQuadMinusOne => Ok(Functional::cos_quad_minus_one(op()?)),
            FamilyName::EvenPolynomial => {
                if self.terms.is_empty() {
                    return Err(Error::Config("even-polynomial needs at least one term".into()));
                }
                let max_degree = self.terms.iter().map(|t| t.degree).max().unwrap_or(2);
                if max_degree % 2 == 1 || self.terms.iter().any(|t| t.degree == 0 || t.degree % 2 == 1) {
                    return Err(Error::Config("polynomial term degrees must be even and positive".into()));
                }
                let mut slots: Vec<SymmetricForm> =
                    (1..=max_degree / 2).map(|j| SymmetricForm::zero(2 * j, n)).collect();
                for t in &self.terms {
                    let form = match (&t.operator, &t.random_form) {
                        (Some(o), None) => SymmetricForm::quad_power(o.build(n)?, t.degree / 2, 1.0)?,
                        (None, Some(r)) => random_form(t.degree, n, r.seed, r.scale)?,
                        _ => {
                            return Err(Error::Config(
                                "each term needs exactly one of `operator` or `random_form`".into(),
                            ))
                        }
                    };
                    let slot = &mut slots[t.degree / 2 - 1];
                    *slot = slot.add(&form)?;
                }
                Functional::even_polynomial(slots)
            }
        }
    }
}

/// Shape of the trace-one operator `D`; a state of dispersion `α` has covariance `α D`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    Isotropic,
    Diagonal { diagonal: Vec<f64> },
    Rank1 { psi: Vec<f64> },
    Random {
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
    },
}

impl StateSpec {
    /// The unit-trace operator `D`.
    pub fn density(&self, n: usize) -> Result<SymmetricOperator> {
        let m = match self {
            StateSpec::Isotropic => SymmetricOperator::identity(n).scaled(1.0 / n as f64),
            StateSpec::Diagonal { diagonal } => {
                if diagonal.len() != n {
                    return Err(Error::Config(format!(
                        "state diagonal has {} entries but dim is {n}",
                        diagonal.len()
                    )));
                }
                if diagonal.iter().any(|&x| x < 0.0) {
                    return Err(Error::Config("state diagonal must be nonnegative".into()));
                }
                let tr: f64 = diagonal.iter().sum();
                if !(tr > 0.0) {
                    return Err(Error::Config("state diagonal must have positive sum".into()));
                }
                SymmetricOperator::diagonal(&diagonal.iter().map(|x| x / tr).collect::<Vec<_>>())
            }
            StateSpec::Rank1 { psi } => {
                if psi.len() != n {
                    return Err(Error::Config(format!(
                        "state psi has {} entries but dim is {n}",
                        psi.len()
                    )));
                }
                let v = FieldVector::new(psi.clone())
                    .normalized()
                    .map_err(|_| Error::Config("state psi must be nonzero".into()))?;
                SymmetricOperator::outer_product(&v)
            }
            StateSpec::Random { seed, rank } => {
                let r = rank.unwrap_or(n);
                if r == 0 || r > n {
                    return Err(Error::Config(format!("random state rank must be in 1..={n}")));
                }
                random_density(n, r, *seed)
            }
        };
        Ok(m)
    }

    /// The vector of a rank-one spec, unnormalized.
    pub fn psi(&self) -> Option<FieldVector> {
        match self {
            StateSpec::Rank1 { psi } => Some(FieldVector::new(psi.clone())),
            _ => None,
        }
    }
}

/// Remainder evaluation in sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    /// Closed-form classical averages when the family has one, Monte-Carlo otherwise.
    #[default]
    Analytic,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    ProductLaplace,
    UniformSphere,
}

fn default_alpha_grid() -> Vec<f64> {
    DEFAULT_ALPHA_GRID.to_vec()
}

fn default_order() -> usize {
    1
}

fn default_chunk_size() -> usize {
    DEFAULT_CHUNK_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: HilbertDim,
    pub functional: FunctionalSpec,
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
    /// Model order `n` for higher-order runs; moment order `2k` uses `k = order`.
    #[serde(default = "default_order")]
    pub order: usize,
    /// Observable `A` (or Hamiltonian `H`) for pure-state, non-Gaussian and sub-α runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<OperatorSpec>,
    #[serde(default)]
    pub evaluation: Evaluation,
    #[serde(default)]
    pub sampler: SamplerKind,
    /// Dispersion of sub-α states as a fraction of α.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    /// Explicit covariance for moment checks; defaults to the state density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<OperatorSpec>,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
}

impl ExperimentConfig {
    /// Checks every invariant; the error names the first violation.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim.get();
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha_grid must not be empty".into()));
        }
        if self.alpha_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Config("alpha_grid entries must be positive and finite".into()));
        }
        if self.alpha_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("alpha_grid must be strictly decreasing".into()));
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples must be at least {MIN_MC_SAMPLES}, got {}",
                self.mc_samples
            )));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be at least 1".into()));
        }
        if let Some(s) = self.shrink {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::Config(format!("shrink must lie in (0, 1], got {s}")));
            }
        }
        self.functional.build(n)?;
        self.state.density(n)?;
        if let Some(o) = &self.observable {
            o.build(n)?;
        }
        if let Some(c) = &self.covariance {
            c.build(n)?;
        }
        Ok(())
    }

    pub fn functional(&self) -> Result<Functional> {
        self.functional.build(self.dim.get())
    }

    pub fn density(&self) -> Result<SymmetricOperator> {
        self.state.density(self.dim.get())
    }

    /// The configured observable, or `T(f)` when none is given.
    pub fn observable(&self) -> Result<SymmetricOperator> {
        match &self.observable {
            Some(o) => o.build(self.dim.get()),
            None => crate::quantum::t_variable(&self.functional()?),
        }
    }

    /// The configured covariance, or the state density when none is given.
    pub fn covariance(&self) -> Result<SymmetricOperator> {
        match &self.covariance {
            Some(c) => c.build(self.dim.get()),
            None => self.density(),
        }
    }

    /// Seed for trial `t`, derived so that trial 0 uses the configured seed.
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}
