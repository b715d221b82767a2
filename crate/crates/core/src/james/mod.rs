//! The finite James spaces `J_K`: vectors, index cycles, dual functionals.
//!
//! Coordinates run `0..=K`. Norm computations see one extra [`Slot::Virtual`]
//! coordinate past `K` that always reads zero; it stands in for the infinite
//! zero tail of the ambient space.

mod chains;
mod dual;
mod norm;

pub use chains::{
    chain_stability_check, coordinate_chain_check, lemma_chain_steps, violation_to_witness,
    ChainCheck, CoordinateCheck, Partition, Violation, ViolationWitness,
};
pub use dual::{
    dual_ball_sample, dual_norm_lower_bound, eval_functional, DualBallCertificate, DualBallTerm,
    DualLowerBound,
};
pub use norm::{
    cycle_value, james_norm_sq, james_norm_sq_f64, james_norm_sq_oracle, NormCertificate,
    ORACLE_MAX_K,
};

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Rational, Root2Scalar};

/// An element of `J_K` in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "JVectorRepr", into = "JVectorRepr")]
pub struct JVector {
    coeffs: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
struct JVectorRepr {
    #[serde(rename = "K")]
    k: usize,
    #[serde(with = "scalar::serde_rational_vec")]
    coeffs: Vec<Rational>,
}

impl TryFrom<JVectorRepr> for JVector {
    type Error = Error;
    fn try_from(r: JVectorRepr) -> Result<Self> {
        if r.coeffs.len() != r.k + 1 {
            return Err(Error::DimensionMismatch { expected: r.k, found: r.coeffs.len().wrapping_sub(1) });
        }
        Ok(JVector { coeffs: r.coeffs })
    }
}

impl From<JVector> for JVectorRepr {
    fn from(v: JVector) -> Self {
        JVectorRepr { k: v.k(), coeffs: v.coeffs }
    }
}

impl JVector {
    /// Builds a vector of `J_{len-1}`. Panics on an empty coefficient list.
    pub fn new(coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "J_K vectors have at least one coordinate");
        Self { coeffs }
    }

    pub fn from_ints(values: &[i64]) -> Self {
        Self::new(values.iter().map(|&v| scalar::int(v)).collect())
    }

    pub fn zero(k: usize) -> Self {
        Self::new(vec![Rational::zero(); k + 1])
    }

    /// Unit coordinate vector `e_i`.
    pub fn e(i: usize, k: usize) -> Result<Self> {
        check_index(i, k)?;
        let mut v = Self::zero(k);
        v.coeffs[i] = Rational::one();
        Ok(v)
    }

    /// `d_i = e_0 + … + e_i`.
    pub fn d(i: usize, k: usize) -> Result<Self> {
        check_index(i, k)?;
        let coeffs = (0..=k)
            .map(|j| if j <= i { Rational::one() } else { Rational::zero() })
            .collect();
        Ok(Self::new(coeffs))
    }

    pub fn k(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Rational> {
        self.coeffs
    }

    /// Coordinate at a slot; the virtual slot reads zero.
    pub fn at(&self, slot: Slot) -> Rational {
        match slot {
            Slot::Coord(i) => self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero),
            Slot::Virtual => Rational::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub(crate) fn check_same_k(&self, other_k: usize) -> Result<()> {
        if self.k() != other_k {
            return Err(Error::DimensionMismatch { expected: other_k, found: self.k() });
        }
        Ok(())
    }
}

impl Add for &JVector {
    type Output = JVector;
    fn add(self, rhs: &JVector) -> JVector {
        assert_eq!(self.k(), rhs.k(), "dimension mismatch");
        JVector::new(self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &JVector {
    type Output = JVector;
    fn sub(self, rhs: &JVector) -> JVector {
        assert_eq!(self.k(), rhs.k(), "dimension mismatch");
        JVector::new(self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &JVector {
    type Output = JVector;
    fn neg(self) -> JVector {
        JVector::new(self.coeffs.iter().map(|a| -a).collect())
    }
}

impl fmt::Display for JVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn check_index(i: usize, k: usize) -> Result<()> {
    if i > k {
        return Err(Error::IndexOutOfRange { index: i, k });
    }
    Ok(())
}

/// A position in a cycle: a real coordinate or the zero slot past `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Coord(usize),
    Virtual,
}

impl Serialize for Slot {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Slot::Coord(i) => s.serialize_u64(*i as u64),
            Slot::Virtual => s.serialize_str("V"),
        }
    }
}

impl<'de> Deserialize<'de> for Slot {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(Slot::Coord(i)),
            Raw::Tag(t) if t == "V" => Ok(Slot::Virtual),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown slot {t:?}"))),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Coord(i) => write!(f, "{i}"),
            Slot::Virtual => write!(f, "V"),
        }
    }
}

/// Strictly increasing slots `p_1 < … < p_m`, closed into a cycle by the
/// wrap-around term `(α_{p_m} − α_{p_1})²`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Slot>", into = "Vec<Slot>")]
pub struct Cycle {
    slots: Vec<Slot>,
}

impl TryFrom<Vec<Slot>> for Cycle {
    type Error = Error;
    fn try_from(slots: Vec<Slot>) -> Result<Self> {
        Cycle::new(slots)
    }
}

impl From<Cycle> for Vec<Slot> {
    fn from(c: Cycle) -> Self {
        c.slots
    }
}

impl Cycle {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::InvalidCycle("a cycle needs at least one slot".into()));
        }
        if let Some(w) = slots.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidCycle(format!(
                "slots not strictly increasing at position {}",
                w + 1
            )));
        }
        Ok(Self { slots })
    }

    /// Cycle over real coordinates only.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| Slot::Coord(i)).collect())
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub(crate) fn check_fits(&self, k: usize) -> Result<()> {
        for s in &self.slots {
            if let Slot::Coord(i) = *s {
                check_index(i, k)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

/// A linear functional on `J_K`, written over `e*_0..e*_K` with ℚ(√2) scalars.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DualRepr", into = "DualRepr")]
pub struct DualFunctional {
    coeffs: Vec<Root2Scalar>,
}

#[derive(Serialize, Deserialize)]
struct DualRepr {
    #[serde(rename = "K")]
    k: usize,
    coeffs: Vec<Root2Scalar>,
}

impl TryFrom<DualRepr> for DualFunctional {
    type Error = Error;
    fn try_from(r: DualRepr) -> Result<Self> {
        if r.coeffs.len() != r.k + 1 {
            return Err(Error::DimensionMismatch { expected: r.k, found: r.coeffs.len().wrapping_sub(1) });
        }
        Ok(DualFunctional { coeffs: r.coeffs })
    }
}

impl From<DualFunctional> for DualRepr {
    fn from(y: DualFunctional) -> Self {
        DualRepr { k: y.k(), coeffs: y.coeffs }
    }
}

impl DualFunctional {
    pub fn new(coeffs: Vec<Root2Scalar>) -> Self {
        assert!(!coeffs.is_empty(), "J_K functionals have at least one coordinate");
        Self { coeffs }
    }

    pub fn from_rationals(coeffs: Vec<Rational>) -> Self {
        Self::new(coeffs.into_iter().map(Root2Scalar::from_rational).collect())
    }

    pub fn zero(k: usize) -> Self {
        Self::new(vec![Root2Scalar::zero(); k + 1])
    }

    /// Coordinate functional `e*_i`.
    pub fn e_star(i: usize, k: usize) -> Result<Self> {
        check_index(i, k)?;
        let mut y = Self::zero(k);
        y.coeffs[i] = Root2Scalar::one();
        Ok(y)
    }

    pub fn k(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Root2Scalar] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Root2Scalar::is_zero)
    }

    /// Coefficients as rationals, if none involves √2.
    pub fn rational_coeffs(&self) -> Option<Vec<Rational>> {
        self.coeffs.iter().map(|c| c.as_rational().cloned()).collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|a| a.scale(c)).collect())
    }

    /// `y(d_n)` for every `n` in `0..=K` (running sums of the coefficients).
    pub fn prefix_values(&self) -> Vec<Root2Scalar> {
        let mut acc = Root2Scalar::zero();
        self.coeffs
            .iter()
            .map(|c| {
                acc += c;
                acc.clone()
            })
            .collect()
    }
}

impl Add for &DualFunctional {
    type Output = DualFunctional;
    fn add(self, rhs: &DualFunctional) -> DualFunctional {
        assert_eq!(self.k(), rhs.k(), "dimension mismatch");
        DualFunctional::new(self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect())
    }
}

/// Which canonical element to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CanonicalKind {
    E,
    D,
    EStar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CanonicalElement {
    Vector(JVector),
    Functional(DualFunctional),
}

pub fn canonical(kind: CanonicalKind, i: usize, k: usize) -> Result<CanonicalElement> {
    Ok(match kind {
        CanonicalKind::E => CanonicalElement::Vector(JVector::e(i, k)?),
        CanonicalKind::D => CanonicalElement::Vector(JVector::d(i, k)?),
        CanonicalKind::EStar => CanonicalElement::Functional(DualFunctional::e_star(i, k)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::int;

    #[test]
    fn canonical_d_two_in_j3() {
        let d = JVector::d(2, 3).unwrap();
        assert_eq!(d, JVector::from_ints(&[1, 1, 1, 0]));
    }

    #[test]
    fn canonical_e_single_coordinate() {
        assert_eq!(JVector::e(0, 0).unwrap(), JVector::from_ints(&[1]));
    }

    #[test]
    fn e_star_is_biorthogonal_to_e() {
        let y = DualFunctional::e_star(1, 2).unwrap();
        assert_eq!(eval_functional(&y, &JVector::e(1, 2).unwrap()).unwrap(), Root2Scalar::one());
        assert_eq!(eval_functional(&y, &JVector::e(0, 2).unwrap()).unwrap(), Root2Scalar::zero());
    }

    #[test]
    fn canonical_rejects_out_of_range() {
        assert_eq!(
            canonical(CanonicalKind::D, 4, 3),
            Err(Error::IndexOutOfRange { index: 4, k: 3 })
        );
        assert!(canonical(CanonicalKind::EStar, 1, 0).is_err());
    }

    #[test]
    fn cycle_validation() {
        assert!(Cycle::new(vec![]).is_err());
        assert!(Cycle::from_indices(&[0, 2, 2]).is_err());
        assert!(Cycle::new(vec![Slot::Virtual, Slot::Coord(0)]).is_err());
        assert!(Cycle::new(vec![Slot::Coord(0), Slot::Virtual]).is_ok());
        assert!(Cycle::from_indices(&[0, 5]).unwrap().check_fits(3).is_err());
    }

    #[test]
    fn json_shapes() {
        let x = JVector::new(vec![int(1), crate::scalar::rat(-1, 2)]);
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"K":1,"coeffs":["1/1","-1/2"]}"#);
        assert_eq!(serde_json::from_str::<JVector>(&s).unwrap(), x);
        assert!(serde_json::from_str::<JVector>(r#"{"K":2,"coeffs":["1"]}"#).is_err());

        let y = DualFunctional::new(vec![Root2Scalar::inv_sqrt2()]);
        let s = serde_json::to_string(&y).unwrap();
        assert_eq!(s, r#"{"K":0,"coeffs":[["0/1","1/2"]]}"#);

        let c = Cycle::new(vec![Slot::Coord(0), Slot::Virtual]).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"[0,"V"]"#);
        assert_eq!(serde_json::from_str::<Cycle>(r#"[0,"V"]"#).unwrap(), c);
    }

    #[test]
    fn prefix_values_are_values_on_d() {
        let y = DualFunctional::from_rationals(vec![int(2), int(-1), int(5)]);
        for (n, v) in y.prefix_values().iter().enumerate() {
            assert_eq!(v, &eval_functional(&y, &JVector::d(n, 2).unwrap()).unwrap());
        }
    }
}
