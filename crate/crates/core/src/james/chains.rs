//! Chain stability for `n ↦ y(d_n)` and `p ↦ x_p`.
//!
//! Along any chain of `k ≥ 2⌈1/ε⌉²` steps a functional in the dual unit ball
//! has some consecutive gap `|y(d_{n_i}) − y(d_{n_{i+1}})|` below `ε`, and a
//! vector in the unit ball has some gap `|x_{p_i} − x_{p_{i+1}}|` below `ε`.
//! When every gap is at least `ε` the checks here hand back an exact
//! certificate that the norm exceeds 1 instead.
//!
//! Both bounds are tight at the boundary: with `ε = 1/n` and `k = 2n²`,
//! norm exactly 1 is compatible with every gap equal to `ε`. The checks then
//! report an unstable chain without a certificate.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{cycle_value, eval_functional, james_norm_sq, Cycle, DualFunctional, JVector};
use super::NormCertificate;
use crate::error::{Error, Result};
use crate::scalar::{self, Rational, Root2Scalar};

/// `2⌈1/ε⌉²`, the chain length at which stability is forced.
pub fn lemma_chain_steps(eps: &Rational) -> Result<usize> {
    if !eps.is_positive() {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let c: BigInt = scalar::ceil_recip(eps);
    (c.clone() * c * 2u32)
        .to_usize()
        .ok_or_else(|| Error::Domain("epsilon too small".into()))
}

fn validate_chain(chain: &[usize], k: usize) -> Result<()> {
    if chain.len() < 2 {
        return Err(Error::ChainTooShort { needed: 1, found: chain.len().saturating_sub(1) });
    }
    if let Some(p) = chain.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::ChainNotIncreasing { position: p + 1 });
    }
    let last = *chain.last().expect("nonempty");
    if last > k {
        return Err(Error::IndexOutOfRange { index: last, k });
    }
    Ok(())
}

/// Signed steps `y(d_{n_{i+1}}) − y(d_{n_i})`, all of magnitude `≥ ε`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub gaps: Vec<Root2Scalar>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainCheck {
    /// Least `i` with `|y(d_{n_i}) − y(d_{n_{i+1}})| < ε`.
    Stable(usize),
    Violation(Violation),
}

fn chain_gaps(y: &DualFunctional, chain: &[usize]) -> Vec<Root2Scalar> {
    let prefix = y.prefix_values();
    chain.windows(2).map(|w| &prefix[w[1]] - &prefix[w[0]]).collect()
}

/// Exact stability check of `n ↦ y(d_n)` along `n_0 < … < n_k`.
pub fn chain_stability_check(
    y: &DualFunctional,
    eps: &Rational,
    chain: &[usize],
) -> Result<ChainCheck> {
    validate_chain(chain, y.k())?;
    let gaps = chain_gaps(y, chain);
    match gaps.iter().position(|g| g.abs() < *eps) {
        Some(i) => Ok(ChainCheck::Stable(i)),
        None => Ok(ChainCheck::Violation(Violation { gaps })),
    }
}

/// Which steps of the chain the block vector collects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    /// Steps where `y(d_n)` decreases.
    Descending,
    /// Steps where `y(d_n)` increases.
    Ascending,
}

/// `x̂ = Σ_{i∈I} (d_{n_{i+1}} − d_{n_i})` with `y(x̂)² > ‖x̂‖²_J`, i.e. a proof
/// that `‖y‖_{J*} > 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationWitness {
    pub xhat: JVector,
    pub partition: Partition,
    pub steps: Vec<usize>,
    pub lhs_sq: Root2Scalar,
    #[serde(with = "scalar::serde_rational")]
    pub rhs_sq: Rational,
}

impl ViolationWitness {
    /// Recomputes both sides from `y` and `xhat`.
    pub fn verify(&self, y: &DualFunctional) -> bool {
        let Ok(v) = eval_functional(y, &self.xhat) else {
            return false;
        };
        v.square() == self.lhs_sq
            && james_norm_sq(&self.xhat).0 == self.rhs_sq
            && self.lhs_sq > self.rhs_sq
    }
}

fn block_vector(k: usize, chain: &[usize], steps: &[usize]) -> JVector {
    let mut coeffs = vec![Rational::zero(); k + 1];
    for &i in steps {
        for c in &mut coeffs[chain[i] + 1..=chain[i + 1]] {
            *c = Rational::one();
        }
    }
    JVector::new(coeffs)
}

/// Turns a chain violation into a witness that `‖y‖_{J*} > 1`.
///
/// The steps split into descending and ascending ones; the block vector over
/// the larger side has `‖x̂‖² ≤ |I|` and `|y(x̂)| ≥ |I|·ε`. The larger side is
/// tried first (descending on a tie), then the other. If neither is strict,
/// which can only happen on the boundary, [`Error::WitnessNotStrict`] is
/// returned.
pub fn violation_to_witness(
    y: &DualFunctional,
    eps: &Rational,
    chain: &[usize],
    violation: &Violation,
) -> Result<ViolationWitness> {
    validate_chain(chain, y.k())?;
    let k_steps = chain.len() - 1;
    let needed = lemma_chain_steps(eps)?;
    if k_steps < needed {
        return Err(Error::ChainTooShort { needed, found: k_steps });
    }
    let gaps = chain_gaps(y, chain);
    if gaps != violation.gaps {
        return Err(Error::Domain("violation does not match functional and chain".into()));
    }
    if let Some(i) = gaps.iter().position(|g| g.abs() < *eps) {
        return Err(Error::NotAViolation { index: i });
    }
    let (desc, asc): (Vec<usize>, Vec<usize>) =
        (0..k_steps).partition(|&i| gaps[i].signum().is_lt());
    let mut order = vec![(Partition::Descending, desc), (Partition::Ascending, asc)];
    if order[1].1.len() > order[0].1.len() {
        order.swap(0, 1);
    }
    for (partition, steps) in order {
        if steps.is_empty() {
            continue;
        }
        let xhat = block_vector(y.k(), chain, &steps);
        let lhs_sq = eval_functional(y, &xhat)?.square();
        let rhs_sq = james_norm_sq(&xhat).0;
        if lhs_sq > rhs_sq {
            return Ok(ViolationWitness { xhat, partition, steps, lhs_sq, rhs_sq });
        }
    }
    Err(Error::WitnessNotStrict)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordinateCheck {
    /// Least `i` with `|x_{p_i} − x_{p_{i+1}}| < ε`.
    Stable(usize),
    /// All gaps are `≥ ε` and the chain cycle certifies `‖x‖²_J > 1`.
    Excess(NormCertificate),
    /// All gaps are `≥ ε` but the chain cycle value is `≤ 1` (short chain or
    /// boundary instance).
    Unstable {
        #[serde(with = "scalar::serde_rational_vec")]
        gaps: Vec<Rational>,
        #[serde(with = "scalar::serde_rational")]
        cycle_value: Rational,
    },
}

/// Exact stability check of `p ↦ x_p` along `p_0 < … < p_k`.
pub fn coordinate_chain_check(
    x: &JVector,
    eps: &Rational,
    chain: &[usize],
) -> Result<CoordinateCheck> {
    validate_chain(chain, x.k())?;
    let c = x.coeffs();
    let gaps: Vec<Rational> = chain.windows(2).map(|w| (&c[w[1]] - &c[w[0]]).abs()).collect();
    if let Some(i) = gaps.iter().position(|g| g < eps) {
        return Ok(CoordinateCheck::Stable(i));
    }
    let cycle = Cycle::from_indices(chain)?;
    let value = cycle_value(x, &cycle)?;
    if value > Rational::one() {
        Ok(CoordinateCheck::Excess(NormCertificate { cycle, value_sq: value }))
    } else {
        Ok(CoordinateCheck::Unstable { gaps, cycle_value: value })
    }
}
