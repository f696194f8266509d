//! Dense real linear algebra on the truncated state space.
//!
//! Operators are stored row-major. Everything here is small-`n` (up to a few
//! dozen), so plain loops are used throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the truncated state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub const DEFAULT: HilbertDim = HilbertDim(16);

    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        Ok(HilbertDim(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for HilbertDim {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        HilbertDim::new(n)
    }
}

impl From<HilbertDim> for usize {
    fn from(d: HilbertDim) -> usize {
        d.0
    }
}

/// A classical field sample: a point of the truncated state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldVector(Vec<f64>);

impl FieldVector {
    pub fn new(coords: Vec<f64>) -> Self {
        FieldVector(coords)
    }

    pub fn zeros(n: usize) -> Self {
        FieldVector(vec![0.0; n])
    }

    /// The `i`-th standard basis vector of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        FieldVector(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &FieldVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Squared norm, i.e. the field energy.
    pub fn norm_sqr(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, s: f64) -> FieldVector {
        FieldVector(self.0.iter().map(|x| x * s).collect())
    }

    pub fn normalized(&self) -> Result<FieldVector> {
        let r = self.norm();
        if r == 0.0 {
            return Err(Error::Invalid("cannot normalize the zero vector".into()));
        }
        Ok(self.scaled(1.0 / r))
    }
}

impl From<Vec<f64>> for FieldVector {
    fn from(v: Vec<f64>) -> Self {
        FieldVector(v)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bounded self-adjoint operator, stored as an exactly symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymmetricOperator {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricOperator {
    /// Symmetrizes `raw` as `(raw + rawᵀ)/2`.
    pub fn from_entries(raw: &[Vec<f64>]) -> Result<Self> {
        let n = raw.len();
        if n == 0 {
            return Err(Error::Dimension("empty matrix".into()));
        }
        if let Some(row) = raw.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "matrix is not square: {} rows but a row of length {}",
                n,
                row.len()
            )));
        }
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j {
                    raw[i][i]
                } else {
                    0.5 * (raw[i][j] + raw[j][i])
                };
            }
        }
        Ok(SymmetricOperator { n, data })
    }

    /// Builds from a row-major buffer, symmetrizing.
    pub fn from_row_major(n: usize, raw: &[f64]) -> Result<Self> {
        if raw.len() != n * n || n == 0 {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                raw.len()
            )));
        }
        let mut data = raw.to_vec();
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        Ok(SymmetricOperator { n, data })
    }

    pub fn zeros(n: usize) -> Self {
        SymmetricOperator {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, &x) in d.iter().enumerate() {
            data[i * n + i] = x;
        }
        SymmetricOperator { n, data }
    }

    /// `ψ ⊗ ψ`, entries `ψᵢψⱼ`.
    pub fn outer_product(psi: &FieldVector) -> Self {
        let p = psi.as_slice();
        let n = p.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = p[i] * p[j];
            }
        }
        SymmetricOperator { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// `Σᵢⱼ AᵢⱼBᵢⱼ`, which is `Tr AB` for symmetric operands.
    pub fn trace_product(&self, other: &SymmetricOperator) -> Result<f64> {
        self.check_dim(other.n)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.data.chunks(self.n).map(|row| dot(row, v)).collect()
    }

    /// The quadratic form `(Aψ, ψ)`.
    pub fn quadratic_form(&self, psi: &[f64]) -> f64 {
        self.bilinear(psi, psi)
    }

    /// `(A x, y)`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.data
            .chunks(self.n)
            .zip(y)
            .map(|(row, yi)| yi * dot(row, x))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> SymmetricOperator {
        SymmetricOperator {
            n: self.n,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &SymmetricOperator) -> Result<SymmetricOperator> {
        self.check_dim(other.n)?;
        Ok(SymmetricOperator {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Plain matrix product (not symmetric in general), row-major.
    pub fn matmul(&self, other: &SymmetricOperator) -> Result<Vec<f64>> {
        self.check_dim(other.n)?;
        Ok(matmul(self.n, &self.data, &other.data))
    }

    /// `Q A Qᵀ` for a row-major orthogonal (or arbitrary) `Q`.
    pub fn conjugate(&self, q: &[f64]) -> SymmetricOperator {
        let n = self.n;
        let qa = matmul(n, q, &self.data);
        let qt = transpose(n, q);
        let r = matmul(n, &qa, &qt);
        SymmetricOperator::from_row_major(n, &r).expect("square by construction")
    }

    pub fn max_abs_diff(&self, other: &SymmetricOperator) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute eigenvalue.
    pub fn operator_norm(&self) -> Result<f64> {
        let sd = self.spectral_decompose()?;
        Ok(sd.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max))
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Dimension(format!(
                "operator has dimension {} but operand has dimension {n}",
                self.n
            )));
        }
        Ok(())
    }

    /// Cyclic Jacobi eigendecomposition.
    pub fn spectral_decompose(&self) -> Result<SpectralDecomposition> {
        jacobi_eigen(self)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymmetricOperator {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymmetricOperator::from_entries(&rows)
    }
}

impl From<SymmetricOperator> for Vec<Vec<f64>> {
    fn from(a: SymmetricOperator) -> Self {
        a.rows()
    }
}

pub(crate) fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub(crate) fn transpose(n: usize, a: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Eigenpairs of a symmetric operator.
///
/// `eigenvectors` is row-major with eigenvector `k` stored in column `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` as a vector.
    pub fn eigenvector(&self, k: usize) -> FieldVector {
        let n = self.dim();
        FieldVector::new((0..n).map(|i| self.eigenvectors[i * n + k]).collect())
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> SymmetricOperator {
        self.reconstruct_with(|l| l)
    }

    /// `Q g(Λ) Qᵀ`.
    pub fn reconstruct_with(&self, g: impl Fn(f64) -> f64) -> SymmetricOperator {
        let n = self.dim();
        let q = &self.eigenvectors;
        let gl: Vec<f64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += q[i * n + k] * gl[k] * q[j * n + k];
                }
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        SymmetricOperator::from_row_major(n, &out).expect("square")
    }

    /// Largest deviation of `QᵀQ` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let qt = transpose(n, &self.eigenvectors);
        let g = matmul(n, &qt, &self.eigenvectors);
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[i * n + j] - target).abs());
            }
        }
        err
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

const MAX_SWEEPS: usize = 100;

fn jacobi_eigen(a: &SymmetricOperator) -> Result<SpectralDecomposition> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.frobenius_norm();
    let mut converged = scale == 0.0 || n == 1;

    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-3 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Negligible against both diagonal entries: drop it.
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].abs())
            .fold(0.0, f64::max);
        if off > 1e-12 * scale {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge after {MAX_SWEEPS} sweeps (off-diagonal {off:e})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| m[k * n + k]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        // First nonzero coordinate positive.
        let sign = (0..n)
            .map(|i| v[i * n + k])
            .find(|x| x.abs() > 1e-14)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            eigenvectors[i * n + col] = sign * v[i * n + k];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}
