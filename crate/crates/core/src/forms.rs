//! Symmetric multilinear forms on the truncated space.
//!
//! Forms come in three representations. `Dense` stores all `n^k` entries.
//! `QuadPower` is the factored form `c · sym(A ⊗ … ⊗ A)` whose diagonal is
//! `c (Aψ, ψ)^p`; it is what Taylor coefficients of functions of a quadratic
//! form look like, and it never needs `n^{2p}` storage unless densified.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::wick;

/// Densification is refused beyond this order.
pub const MAX_DENSE_ORDER: usize = 6;
/// Densification is refused beyond this many entries (8⁶).
pub const MAX_DENSE_ENTRIES: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FormRepr {
    Zero,
    Dense {
        entries: Vec<f64>,
    },
    QuadPower {
        operator: SymmetricOperator,
        power: usize,
        coeff: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricForm {
    order: usize,
    dim: usize,
    repr: FormRepr,
}

impl SymmetricForm {
    pub fn zero(order: usize, dim: usize) -> Self {
        SymmetricForm {
            order,
            dim,
            repr: FormRepr::Zero,
        }
    }

    /// Dense form from arbitrary entries, symmetrized over index permutations.
    pub fn dense(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dense_size(order, dim)?;
        if entries.len() != dim.pow(order as u32) {
            return Err(Error::Dimension(format!(
                "order-{order} form on dimension {dim} needs {} entries, got {}",
                dim.pow(order as u32),
                entries.len()
            )));
        }
        Ok(SymmetricForm {
            order,
            dim,
            repr: FormRepr::Dense {
                entries: symmetrize(order, dim, &entries),
            },
        })
    }

    /// `coeff · sym(A^{⊗power})`, the form with diagonal `coeff (Aψ,ψ)^power`.
    pub fn quad_power(operator: SymmetricOperator, power: usize, coeff: f64) -> Result<Self> {
        if power == 0 {
            return Err(Error::Invalid("quadratic power must be at least 1".into()));
        }
        if power > wick::MAX_PAIRING_K {
            return Err(Error::UnsupportedOrder {
                order: 2 * power,
                reason: format!(
                    "factored forms are evaluated through pairings of at most {} indices",
                    2 * wick::MAX_PAIRING_K
                ),
            });
        }
        Ok(SymmetricForm {
            order: 2 * power,
            dim: operator.dim(),
            repr: FormRepr::QuadPower {
                operator,
                power,
                coeff,
            },
        })
    }

    /// The bilinear form `(A x, y)`.
    pub fn from_operator(a: SymmetricOperator) -> Self {
        Self::quad_power(a, 1, 1.0).expect("power 1 is always supported")
    }

    /// `e_{i}^{⊗k}`: the form whose diagonal is `ψ_i^k`.
    pub fn coordinate_power(order: usize, dim: usize, i: usize) -> Result<Self> {
        check_dense_size(order, dim)?;
        let mut entries = vec![0.0; dim.pow(order as u32)];
        let flat: usize = (0..order).fold(0, |acc, _| acc * dim + i);
        entries[flat] = 1.0;
        Ok(SymmetricForm {
            order,
            dim,
            repr: FormRepr::Dense { entries },
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn repr(&self) -> &FormRepr {
        &self.repr
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            FormRepr::Zero => true,
            FormRepr::Dense { entries } => entries.iter().all(|&x| x == 0.0),
            FormRepr::QuadPower { coeff, operator, .. } => {
                *coeff == 0.0 || operator.as_row_major().iter().all(|&x| x == 0.0)
            }
        }
    }

    /// `F(z₁, …, z_k)`.
    pub fn eval(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::Dimension(format!(
                "order-{} form applied to {} arguments",
                self.order,
                args.len()
            )));
        }
        if let Some(a) = args.iter().find(|a| a.len() != self.dim) {
            return Err(Error::Dimension(format!(
                "form on dimension {} applied to a vector of length {}",
                self.dim,
                a.len()
            )));
        }
        Ok(match &self.repr {
            FormRepr::Zero => 0.0,
            FormRepr::Dense { entries } => contract_all(entries, self.dim, args),
            FormRepr::QuadPower {
                operator,
                power,
                coeff,
            } => {
                let pairings = wick::enumerate_pairings(*power)?;
                let total: f64 = pairings
                    .iter()
                    .map(|m| {
                        m.iter()
                            .map(|&(a, b)| operator.bilinear(args[a], args[b]))
                            .product::<f64>()
                    })
                    .sum();
                coeff * total / pairings.len() as f64
            }
        })
    }

    /// `F(ψ, …, ψ)`.
    pub fn eval_diag(&self, psi: &[f64]) -> f64 {
        match &self.repr {
            FormRepr::Zero => 0.0,
            FormRepr::Dense { entries } => {
                let args = vec![psi; self.order];
                contract_all(entries, self.dim, &args)
            }
            FormRepr::QuadPower {
                operator,
                power,
                coeff,
            } => coeff * operator.quadratic_form(psi).powi(*power as i32),
        }
    }

    /// Dense entries, row-major over `(i₁, …, i_k)`.
    pub fn densify(&self) -> Result<Vec<f64>> {
        check_dense_size(self.order, self.dim)?;
        let n = self.dim;
        let k = self.order;
        let size = n.pow(k as u32);
        Ok(match &self.repr {
            FormRepr::Zero => vec![0.0; size],
            FormRepr::Dense { entries } => entries.clone(),
            FormRepr::QuadPower { .. } => {
                let basis: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        e
                    })
                    .collect();
                let mut idx = vec![0usize; k];
                let mut out = Vec::with_capacity(size);
                for _ in 0..size {
                    let args: Vec<&[f64]> = idx.iter().map(|&i| basis[i].as_slice()).collect();
                    out.push(self.eval(&args)?);
                    increment(&mut idx, n);
                }
                out
            }
        })
    }

    pub fn to_dense(&self) -> Result<SymmetricForm> {
        Ok(SymmetricForm {
            order: self.order,
            dim: self.dim,
            repr: FormRepr::Dense {
                entries: self.densify()?,
            },
        })
    }

    /// Representing matrix of an order-2 form.
    pub fn matrix(&self) -> Result<SymmetricOperator> {
        if self.order != 2 {
            return Err(Error::UnsupportedOrder {
                order: self.order,
                reason: "only bilinear forms have a representing matrix".into(),
            });
        }
        match &self.repr {
            FormRepr::Zero => Ok(SymmetricOperator::zeros(self.dim)),
            FormRepr::Dense { entries } => SymmetricOperator::from_row_major(self.dim, entries),
            FormRepr::QuadPower {
                operator, coeff, ..
            } => Ok(operator.scaled(*coeff)),
        }
    }

    pub fn scaled(&self, s: f64) -> SymmetricForm {
        let repr = match &self.repr {
            FormRepr::Zero => FormRepr::Zero,
            FormRepr::Dense { entries } => FormRepr::Dense {
                entries: entries.iter().map(|x| x * s).collect(),
            },
            FormRepr::QuadPower {
                operator,
                power,
                coeff,
            } => FormRepr::QuadPower {
                operator: operator.clone(),
                power: *power,
                coeff: coeff * s,
            },
        };
        SymmetricForm {
            order: self.order,
            dim: self.dim,
            repr,
        }
    }

    pub fn add(&self, other: &SymmetricForm) -> Result<SymmetricForm> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "cannot add an order-{} form on dim {} to an order-{} form on dim {}",
                self.order, self.dim, other.order, other.dim
            )));
        }
        match (&self.repr, &other.repr) {
            (FormRepr::Zero, _) => Ok(other.clone()),
            (_, FormRepr::Zero) => Ok(self.clone()),
            (
                FormRepr::QuadPower {
                    operator: a,
                    power: p,
                    coeff: c,
                },
                FormRepr::QuadPower {
                    operator: b,
                    coeff: d,
                    ..
                },
            ) if a == b => Self::quad_power(a.clone(), *p, c + d),
            (
                FormRepr::QuadPower {
                    operator: a,
                    power: 1,
                    coeff: c,
                },
                FormRepr::QuadPower {
                    operator: b,
                    power: 1,
                    coeff: d,
                },
            ) => Ok(Self::from_operator(a.scaled(*c).add(&b.scaled(*d))?)),
            _ => {
                let x = self.densify()?;
                let y = other.densify()?;
                Ok(SymmetricForm {
                    order: self.order,
                    dim: self.dim,
                    repr: FormRepr::Dense {
                        entries: x.iter().zip(&y).map(|(a, b)| a + b).collect(),
                    },
                })
            }
        }
    }

    /// `F'(z₁,…) = F(Qᵀz₁,…)`: the same form expressed in the basis `Q` (row-major).
    pub fn rotated(&self, q: &[f64]) -> Result<SymmetricForm> {
        let n = self.dim;
        if q.len() != n * n {
            return Err(Error::Dimension("rotation must be n×n".into()));
        }
        let mut t = self.densify()?;
        // Apply Q along each mode in turn.
        let k = self.order;
        for mode in 0..k {
            let stride = n.pow((k - 1 - mode) as u32);
            let mut out = vec![0.0; t.len()];
            for (flat, o) in out.iter_mut().enumerate() {
                let i = (flat / stride) % n;
                let base = flat - i * stride;
                *o = (0..n).map(|a| q[i * n + a] * t[base + a * stride]).sum();
            }
            t = out;
        }
        Ok(SymmetricForm {
            order: k,
            dim: n,
            repr: FormRepr::Dense { entries: t },
        })
    }

    /// Upper bound on `sup_{‖ψ‖=1} |F(ψ,…,ψ)|`.
    pub fn norm_bound(&self) -> Result<f64> {
        Ok(match &self.repr {
            FormRepr::Zero => 0.0,
            FormRepr::Dense { entries } => entries.iter().map(|x| x * x).sum::<f64>().sqrt(),
            FormRepr::QuadPower {
                operator,
                power,
                coeff,
            } => coeff.abs() * operator.operator_norm()?.powi(*power as i32),
        })
    }

    /// Largest deviation between entries related by an index permutation.
    pub fn symmetry_defect(&self) -> Result<f64> {
        let t = self.densify()?;
        let sym = symmetrize(self.order, self.dim, &t);
        Ok(t.iter()
            .zip(&sym)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_dense_size(order: usize, dim: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::Invalid("forms have order at least 1".into()));
    }
    if order > MAX_DENSE_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            reason: format!("dense forms are capped at order {MAX_DENSE_ORDER}"),
        });
    }
    match dim.checked_pow(order as u32) {
        Some(s) if s <= MAX_DENSE_ENTRIES => Ok(()),
        _ => Err(Error::UnsupportedOrder {
            order,
            reason: format!("dimension {dim} gives more than {MAX_DENSE_ENTRIES} dense entries"),
        }),
    }
}

/// Odometer increment of a multi-index over `0..n`, last index fastest.
pub(crate) fn increment(idx: &mut [usize], n: usize) {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return;
        }
        *d = 0;
    }
}

/// `Σ T[i₁…i_k] z₁[i₁] ⋯ z_k[i_k]`, contracting the last mode first.
fn contract_all(entries: &[f64], n: usize, args: &[&[f64]]) -> f64 {
    let mut t: Vec<f64> = entries.to_vec();
    for z in args.iter().rev() {
        t = t.chunks_exact(n).map(|row| crate::linalg::dot(row, z)).collect();
    }
    t[0]
}

/// Averages every entry over its permutation orbit. Orbits whose entries
/// already agree are left untouched, so the operation is exactly idempotent.
pub fn symmetrize(order: usize, dim: usize, entries: &[f64]) -> Vec<f64> {
    let size = entries.len();
    let mut idx = vec![0usize; order];
    let mut canon = vec![0usize; size];
    // (sum, count, first value, all equal)
    let mut acc: Vec<(f64, u32, f64, bool)> = vec![(0.0, 0, 0.0, true); size];
    let mut sorted = vec![0usize; order];
    for (flat, c) in canon.iter_mut().enumerate() {
        sorted.copy_from_slice(&idx);
        sorted.sort_unstable();
        let key = sorted.iter().fold(0, |a, &i| a * dim + i);
        *c = key;
        let v = entries[flat];
        let slot = &mut acc[key];
        if slot.1 == 0 {
            slot.2 = v;
        } else if v != slot.2 {
            slot.3 = false;
        }
        slot.0 += v;
        slot.1 += 1;
        increment(&mut idx, dim);
    }
    canon
        .iter()
        .map(|&key| {
            let (sum, count, first, equal) = acc[key];
            if equal {
                first
            } else {
                sum / count as f64
            }
        })
        .collect()
}
