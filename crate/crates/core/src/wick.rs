//! Gaussian moments through perfect pairings.
//!
//! For a zero-mean Gaussian with covariance `D` the moment form of order
//! `2k` is
//!
//! ```text
//! e(2k, D)(z₁, …, z₂ₖ) = Σ_{pairings π} Π_{(a,b) ∈ π} (D z_a, z_b)
//! ```
//!
//! and every odd moment vanishes. Integrals of multilinear forms against the
//! measure are traces of the form against these moment forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{increment, FormRepr, SymmetricForm, MAX_DENSE_ORDER};
use crate::gaussian::SampleBatch;
use crate::linalg::{matmul, SymmetricOperator};
use crate::stats::Estimate;

/// Pairings are enumerated for at most `2·4` indices (105 matchings).
pub const MAX_PAIRING_K: usize = 4;
/// Moment integrals are evaluated up to this order.
pub const MAX_MOMENT_ORDER: usize = MAX_DENSE_ORDER;

pub type Pairing = Vec<(usize, usize)>;

/// All perfect matchings of `{0, …, 2k-1}` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairingSet {
    k: usize,
    pairings: Vec<Pairing>,
}

impl PairingSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.pairings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairings.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Pairing> {
        self.pairings.iter()
    }
}

impl<'a> IntoIterator for &'a PairingSet {
    type Item = &'a Pairing;
    type IntoIter = std::slice::Iter<'a, Pairing>;
    fn into_iter(self) -> Self::IntoIter {
        self.pairings.iter()
    }
}

pub fn double_factorial_odd(k: usize) -> usize {
    (1..=k).map(|j| 2 * j - 1).product()
}

pub fn enumerate_pairings(k: usize) -> Result<PairingSet> {
    if k == 0 {
        return Err(Error::Invalid("pairings need k >= 1".into()));
    }
    if k > MAX_PAIRING_K {
        return Err(Error::UnsupportedOrder {
            order: 2 * k,
            reason: format!(
                "pairing enumeration is capped at k = {MAX_PAIRING_K} ({} matchings)",
                double_factorial_odd(MAX_PAIRING_K)
            ),
        });
    }
    let mut out = Vec::with_capacity(double_factorial_odd(k));
    let mut free: Vec<usize> = (0..2 * k).collect();
    let mut current = Vec::with_capacity(k);
    build_pairings(&mut free, &mut current, &mut out);
    Ok(PairingSet { k, pairings: out })
}

fn build_pairings(free: &mut Vec<usize>, current: &mut Pairing, out: &mut Vec<Pairing>) {
    if free.is_empty() {
        out.push(current.clone());
        return;
    }
    let first = free.remove(0);
    for j in 0..free.len() {
        let partner = free.remove(j);
        current.push((first, partner));
        build_pairings(free, current, out);
        current.pop();
        free.insert(j, partner);
    }
    free.insert(0, first);
}

/// `e(2k, D)(z₁, …, z₂ₖ)`.
pub fn moment_form_eval(d: &SymmetricOperator, args: &[&[f64]]) -> Result<f64> {
    if args.len() % 2 == 1 {
        return Err(Error::Parity(args.len()));
    }
    if args.is_empty() {
        return Ok(1.0);
    }
    if let Some(a) = args.iter().find(|a| a.len() != d.dim()) {
        return Err(Error::Dimension(format!(
            "covariance has dimension {} but an argument has length {}",
            d.dim(),
            a.len()
        )));
    }
    let pairings = enumerate_pairings(args.len() / 2)?;
    Ok(pairings
        .iter()
        .map(|m| m.iter().map(|&(a, b)| d.bilinear(args[a], args[b])).product::<f64>())
        .sum())
}

/// The moment form `e(2k, D)` as a lazily evaluated object.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentForm {
    order: usize,
    covariance: SymmetricOperator,
}

impl MomentForm {
    pub fn new(order: usize, covariance: SymmetricOperator) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("moment order must be at least 1".into()));
        }
        if order > 2 * MAX_PAIRING_K {
            return Err(Error::UnsupportedOrder {
                order,
                reason: "beyond pairing enumeration limit".into(),
            });
        }
        Ok(MomentForm { order, covariance })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn covariance(&self) -> &SymmetricOperator {
        &self.covariance
    }

    pub fn eval(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.order {
            return Err(Error::Dimension(format!(
                "order-{} moment form applied to {} arguments",
                self.order,
                args.len()
            )));
        }
        if self.order % 2 == 1 {
            return Ok(0.0);
        }
        moment_form_eval(&self.covariance, args)
    }

    /// Dense symmetric form with entries `e(2k, D)(e_{i₁}, …)`.
    pub fn densify(&self) -> Result<SymmetricForm> {
        let n = self.covariance.dim();
        let k = self.order;
        if k % 2 == 1 {
            return Ok(SymmetricForm::zero(k, n));
        }
        let size = n
            .checked_pow(k as u32)
            .filter(|&s| s <= crate::forms::MAX_DENSE_ENTRIES && k <= MAX_DENSE_ORDER)
            .ok_or_else(|| Error::UnsupportedOrder {
                order: k,
                reason: format!("dense moment form on dimension {n} is too large"),
            })?;
        let pairings = enumerate_pairings(k / 2)?;
        let dm = self.covariance.as_row_major();
        let mut idx = vec![0usize; k];
        let mut entries = Vec::with_capacity(size);
        for _ in 0..size {
            let v: f64 = pairings
                .iter()
                .map(|m| m.iter().map(|&(a, b)| dm[idx[a] * n + idx[b]]).product::<f64>())
                .sum();
            entries.push(v);
            increment(&mut idx, n);
        }
        SymmetricForm::dense(k, n, entries)
    }
}

/// `Tr B A = Σ_{j₁…j_k} B(e_{j₁},…) A(e_{j₁},…)` over the standard basis.
pub fn trace_forms(b: &SymmetricForm, a: &SymmetricForm) -> Result<f64> {
    if b.order() != a.order() {
        return Err(Error::Dimension(format!(
            "cannot trace an order-{} form against an order-{} form",
            b.order(),
            a.order()
        )));
    }
    if b.dim() != a.dim() {
        return Err(Error::Dimension(format!(
            "forms live on dimensions {} and {}",
            b.dim(),
            a.dim()
        )));
    }
    if b.order() > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order: b.order(),
            reason: format!("trace of forms is capped at order {MAX_MOMENT_ORDER}"),
        });
    }
    if b.is_zero() || a.is_zero() {
        return Ok(0.0);
    }
    let x = b.densify()?;
    let y = a.densify()?;
    Ok(x.iter().zip(&y).map(|(p, q)| p * q).sum())
}

/// `Tr e(order, D) A` computed by densifying the moment form.
pub fn trace_moment(d: &SymmetricOperator, a: &SymmetricForm) -> Result<f64> {
    if a.order() % 2 == 1 {
        return Ok(0.0);
    }
    if a.is_zero() {
        return Ok(0.0);
    }
    let e = MomentForm::new(a.order(), d.clone())?.densify()?;
    trace_forms(&e, a)
}

/// `∫ A(ψ, …, ψ) dρ_D(ψ)` for a zero-mean Gaussian with covariance `D`.
///
/// Odd orders vanish. Even orders sum the pairing contractions of `A`
/// against `D`; factored forms reduce to products of `Tr (AD)^ℓ` over the
/// cycles each pairing closes.
pub fn gaussian_integral_multilinear(a: &SymmetricForm, d: &SymmetricOperator) -> Result<f64> {
    if a.dim() != d.dim() {
        return Err(Error::Dimension(format!(
            "form on dimension {} integrated against covariance on dimension {}",
            a.dim(),
            d.dim()
        )));
    }
    let order = a.order();
    if order % 2 == 1 {
        return Ok(0.0);
    }
    if order > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder {
            order,
            reason: format!("Gaussian integrals are capped at order {MAX_MOMENT_ORDER}"),
        });
    }
    match a.repr() {
        FormRepr::Zero => Ok(0.0),
        FormRepr::QuadPower {
            operator,
            power,
            coeff,
        } => Ok(coeff * quad_power_moment(operator, *power, d)?),
        FormRepr::Dense { entries } => {
            let pairings = enumerate_pairings(order / 2)?;
            Ok(pairings
                .iter()
                .map(|m| contract_pairing(entries, d, order, m))
                .sum())
        }
    }
}

/// `E (Aψ,ψ)^p` under covariance `D`.
fn quad_power_moment(a: &SymmetricOperator, p: usize, d: &SymmetricOperator) -> Result<f64> {
    let n = a.dim();
    let ad = matmul(n, a.as_row_major(), d.as_row_major());
    // traces of (AD)^ℓ, ℓ = 1..p
    let mut traces = Vec::with_capacity(p);
    let mut pow = ad.clone();
    for l in 1..=p {
        if l > 1 {
            pow = matmul(n, &pow, &ad);
        }
        traces.push((0..n).map(|i| pow[i * n + i]).sum::<f64>());
    }
    let pairings = enumerate_pairings(p)?;
    let mut total = 0.0;
    for m in &pairings {
        total += cycle_product(m, p, &traces);
    }
    Ok(total)
}

/// The form pairs slots `(2j, 2j+1)`; the moment pairing `m` closes cycles
/// alternating between the two. A cycle with `ℓ` form-edges contributes
/// `Tr (AD)^ℓ`.
fn cycle_product(m: &Pairing, p: usize, traces: &[f64]) -> f64 {
    let mut partner = vec![0usize; 2 * p];
    for &(a, b) in m {
        partner[a] = b;
        partner[b] = a;
    }
    let mut seen = vec![false; 2 * p];
    let mut prod = 1.0;
    for start in 0..2 * p {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut v = start;
        loop {
            seen[v] = true;
            let w = v ^ 1;
            seen[w] = true;
            len += 1;
            v = partner[w];
            if v == start {
                break;
            }
        }
        prod *= traces[len - 1];
    }
    prod
}

/// `Σ_idx T[idx] Π_{(a,b)} D[i_a, i_b]`, contracting one pair of modes at a time.
fn contract_pairing(entries: &[f64], d: &SymmetricOperator, order: usize, m: &Pairing) -> f64 {
    let n = d.dim();
    let dm = d.as_row_major();
    let mut t = entries.to_vec();
    // live[j] = original slot held by current mode j
    let mut live: Vec<usize> = (0..order).collect();
    for &(a, b) in m {
        let pa = live.iter().position(|&s| s == a).expect("slot present");
        let pb = live.iter().position(|&s| s == b).expect("slot present");
        let modes = live.len();
        let mut out = vec![0.0; n.pow((modes - 2) as u32)];
        let mut idx = vec![0usize; modes];
        for &v in &t {
            if v != 0.0 {
                let w = dm[idx[pa] * n + idx[pb]];
                let flat = idx
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != pa && j != pb)
                    .fold(0, |acc, (_, &i)| acc * n + i);
                out[flat] += v * w;
            }
            increment(&mut idx, n);
        }
        t = out;
        live.retain(|&s| s != a && s != b);
    }
    t[0]
}

/// Analytic integral next to its Monte-Carlo estimate from `batch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub analytic: f64,
    pub mc: f64,
    pub stderr: f64,
}

impl MomentCheck {
    pub fn z_score(&self) -> f64 {
        Estimate {
            mean: self.mc,
            stderr: self.stderr,
        }
        .z_score(self.analytic)
    }

    pub fn within(&self, k: f64) -> bool {
        (self.mc - self.analytic).abs() <= k * self.stderr
    }
}

/// Compares `∫ A(ψ,…,ψ) dρ_D` with its sample mean over `batch` (drawn from `ρ_D`).
pub fn moment_mc_check(
    d: &SymmetricOperator,
    a: &SymmetricForm,
    batch: &SampleBatch,
) -> Result<MomentCheck> {
    let analytic = gaussian_integral_multilinear(a, d)?;
    if batch.dim() != a.dim() {
        return Err(Error::Dimension("batch and form dimensions differ".into()));
    }
    let values = batch.map(|s| a.eval_diag(s));
    let e = Estimate::from_values(&values);
    Ok(MomentCheck {
        analytic,
        mc: e.mean,
        stderr: e.stderr,
    })
}
