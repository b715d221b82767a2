//! Bases of `J_K`, their dual functionals, and the lattice-style modulus
//! operations induced by a basis.

mod linalg;
mod uc;

pub use linalg::invert;
pub use uc::{ratio_sq, uc_lower_bound, SearchStrategy, SignPattern, UCEstimate, EXHAUSTIVE_MAX_K};

use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::james::{eval_functional, DualFunctional, JVector};
use crate::scalar::{self, Rational, Root2Scalar};

/// A basis `(ω_i)_{i≤K}` of `J_K`; column `i` is `ω_i` in canonical
/// coordinates. Construction checks invertibility and caches the dual basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BasisRepr", into = "BasisRepr")]
pub struct Basis {
    columns: Vec<Vec<Rational>>,
    dual: DualBasis,
}

#[derive(Serialize, Deserialize)]
struct BasisRepr {
    #[serde(rename = "K")]
    k: usize,
    #[serde(with = "scalar::serde_rational_matrix")]
    columns: Vec<Vec<Rational>>,
}

impl TryFrom<BasisRepr> for Basis {
    type Error = Error;
    fn try_from(r: BasisRepr) -> Result<Self> {
        if r.columns.len() != r.k + 1 {
            return Err(Error::DimensionMismatch {
                expected: r.k,
                found: r.columns.len().wrapping_sub(1),
            });
        }
        Basis::new(r.columns)
    }
}

impl From<Basis> for BasisRepr {
    fn from(b: Basis) -> Self {
        BasisRepr { k: b.k(), columns: b.columns }
    }
}

impl Basis {
    pub fn new(columns: Vec<Vec<Rational>>) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::Domain("a basis needs at least one vector".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n - 1, found: c.len().wrapping_sub(1) });
        }
        // Row-major copy of the column matrix W, so W·α = Σ α_i ω_i.
        let w: Vec<Vec<Rational>> = (0..n).map(|r| (0..n).map(|c| columns[c][r].clone()).collect()).collect();
        let inv = invert(&w)?;
        Ok(Self { columns, dual: DualBasis { rows: inv } })
    }

    pub fn canonical(k: usize) -> Self {
        let columns = (0..=k)
            .map(|i| (0..=k).map(|j| scalar::int((i == j) as i64)).collect())
            .collect();
        Self::new(columns).expect("identity is invertible")
    }

    /// Random invertible basis with small rational entries.
    pub fn random<R: Rng>(k: usize, rng: &mut R) -> Self {
        loop {
            let columns = (0..=k)
                .map(|_| {
                    (0..=k)
                        .map(|_| scalar::rat(rng.gen_range(-6..=6), rng.gen_range(1..=4)))
                        .collect()
                })
                .collect();
            if let Ok(b) = Self::new(columns) {
                return b;
            }
        }
    }

    pub fn k(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn columns(&self) -> &[Vec<Rational>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> JVector {
        JVector::new(self.columns[i].clone())
    }

    pub fn dual(&self) -> &DualBasis {
        &self.dual
    }

    /// `Σ α_i ω_i`.
    pub fn combine(&self, alpha: &[Rational]) -> Result<JVector> {
        if alpha.len() != self.columns.len() {
            return Err(Error::DimensionMismatch { expected: self.k(), found: alpha.len().wrapping_sub(1) });
        }
        let mut out = vec![Rational::zero(); self.columns.len()];
        for (a, col) in alpha.iter().zip(&self.columns) {
            if a.is_zero() {
                continue;
            }
            for (o, c) in out.iter_mut().zip(col) {
                *o += a * c;
            }
        }
        Ok(JVector::new(out))
    }

    /// `y(ω_i)` for every basis vector.
    pub fn values_of(&self, y: &DualFunctional) -> Result<Vec<Root2Scalar>> {
        (0..=self.k()).map(|i| eval_functional(y, &self.column(i))).collect()
    }
}

/// The functionals `γ*_i` with `γ*_i(ω_j) = [i = j]`, as rows over `e*_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualBasis {
    #[serde(with = "scalar::serde_rational_matrix")]
    rows: Vec<Vec<Rational>>,
}

impl DualBasis {
    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn functional(&self, i: usize) -> DualFunctional {
        DualFunctional::from_rationals(self.rows[i].clone())
    }

    /// `γ*_i(x)` for a single `i`.
    pub fn coord(&self, i: usize, x: &JVector) -> Rational {
        self.rows[i].iter().zip(x.coeffs()).map(|(g, a)| g * a).sum()
    }

    /// Basis coordinates `(γ*_i(x))_i`.
    pub fn coords(&self, x: &JVector) -> Result<Vec<Rational>> {
        x.check_same_k(self.rows.len() - 1)?;
        Ok((0..self.rows.len()).map(|i| self.coord(i, x)).collect())
    }

    /// Exact check of `γ*_i(ω_j) = [i = j]`.
    pub fn is_biorthogonal_to(&self, basis: &Basis) -> bool {
        (0..self.rows.len()).all(|i| {
            (0..self.rows.len()).all(|j| {
                let v = self.coord(i, &basis.column(j));
                v == scalar::int((i == j) as i64)
            })
        })
    }
}

pub fn dual_basis(basis: &Basis) -> DualBasis {
    basis.dual.clone()
}

/// `|x| = Σ_i |γ*_i(x)| ω_i`.
pub fn modulus_vector(basis: &Basis, x: &JVector) -> Result<JVector> {
    let coords = basis.dual.coords(x)?;
    let abs: Vec<Rational> = coords.iter().map(Signed::abs).collect();
    basis.combine(&abs)
}

/// `|x*| = Σ_i |x*(ω_i)| γ*_i`, so that `|x*|(x) = Σ_i γ*_i(x)|x*(ω_i)|`.
pub fn modulus_functional(basis: &Basis, y: &DualFunctional) -> Result<DualFunctional> {
    if y.k() != basis.k() {
        return Err(Error::DimensionMismatch { expected: basis.k(), found: y.k() });
    }
    let values = basis.values_of(y)?;
    let n = basis.k() + 1;
    let mut coeffs = vec![Root2Scalar::zero(); n];
    for (i, v) in values.iter().enumerate() {
        let a = v.abs();
        if a.is_zero() {
            continue;
        }
        for (c, g) in coeffs.iter_mut().zip(&basis.dual.rows[i]) {
            *c += &a.scale(g);
        }
    }
    Ok(DualFunctional::new(coeffs))
}

/// Result of aligning the signs of `x` with `x*` in basis coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignAlignment {
    pub signs: SignPattern,
    pub x_prime: JVector,
    /// `x*(x') = |x*|(|x|) ≥ 0`.
    pub pairing: Root2Scalar,
}

/// Chooses `ε_i` with `ε_i γ*_i(x) x*(ω_i) ≥ 0` (ties take `+1`) and returns
/// `x' = Σ ε_i γ*_i(x) ω_i` with the pairing `x*(x')`.
pub fn sign_align(basis: &Basis, x: &JVector, y: &DualFunctional) -> Result<SignAlignment> {
    let coords = basis.dual.coords(x)?;
    let values = basis.values_of(y)?;
    let signs: Vec<i8> = coords
        .iter()
        .zip(&values)
        .map(|(c, v)| if v.scale(c).signum().is_lt() { -1 } else { 1 })
        .collect();
    let signed: Vec<Rational> = coords
        .iter()
        .zip(&signs)
        .map(|(c, &s)| if s < 0 { -c } else { c.clone() })
        .collect();
    let x_prime = basis.combine(&signed)?;
    let pairing = eval_functional(y, &x_prime)?;
    Ok(SignAlignment { signs: SignPattern::new(signs)?, x_prime, pairing })
}
