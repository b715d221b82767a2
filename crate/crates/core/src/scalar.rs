//! Exact scalars: arbitrary-precision rationals and the quadratic field ℚ(√2).
//!
//! Rationals travel through JSON as `"p/q"` strings and elements of ℚ(√2)
//! as `["p/q", "r/s"]` pairs meaning `p/q + (r/s)·√2`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exact rational scalar, always in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for signed `e`.
pub fn pow2(e: i64) -> Rational {
    let p = BigInt::one() << e.unsigned_abs() as usize;
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

/// Canonical `"p/q"` rendering; integers keep the `/1`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `"p/q"` or a bare integer `"p"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Parse(format!("zero denominator in {s:?}")));
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Quotients of huge integers: scale both down before dividing.
        let nb = r.numer().bits() as i64;
        let db = r.denom().bits() as i64;
        let shift_n = (nb - 60).max(0) as usize;
        let shift_d = (db - 60).max(0) as usize;
        let n = (r.numer() >> shift_n).to_f64().unwrap_or(f64::NAN);
        let d = (r.denom() >> shift_d).to_f64().unwrap_or(f64::NAN);
        n / d * 2f64.powi(shift_n as i32 - shift_d as i32)
    })
}

/// Rounds `x` to the nearest rational with denominator `denom`.
pub fn snap_f64(x: f64, denom: i64) -> Rational {
    let scaled = (x * denom as f64).round();
    let n = BigInt::from(scaled as i128);
    Rational::new(n, BigInt::from(denom))
}

/// Smallest integer `s ≥ 0` with `s² ≥ q`.
pub fn ceil_sqrt(q: &Rational) -> BigInt {
    if !q.is_positive() {
        return BigInt::zero();
    }
    let c = q.ceil().to_integer();
    let mut s = c.sqrt();
    if &s * &s < c {
        s += 1;
    }
    s
}

/// `⌈1/ε⌉` for positive `ε`.
pub fn ceil_recip(eps: &Rational) -> BigInt {
    eps.recip().ceil().to_integer()
}

pub fn lcm_of_denominators<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    xs.into_iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
}

pub fn biguint_to_bigint(n: &BigUint) -> BigInt {
    BigInt::from_biguint(Sign::Plus, n.clone())
}

/// serde adapter for a single [`Rational`].
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(D::Error::custom)
    }
}

/// serde adapter for `Vec<Rational>`.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(format_rational).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| parse_rational(s).map_err(D::Error::custom))
            .collect()
    }
}

/// serde adapter for `Vec<Vec<Rational>>`.
pub mod serde_rational_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(
        m: &[Vec<Rational>],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<Vec<String>> = m
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Vec<Rational>>, D::Error> {
        let strs = Vec::<Vec<String>>::deserialize(d)?;
        strs.iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse_rational(s).map_err(D::Error::custom))
                    .collect()
            })
            .collect()
    }
}

/// serde adapter for `Option<Rational>`.
pub mod serde_rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        r.as_ref().map(format_rational).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(D::Error::custom))
            .transpose()
    }
}

/// An element `a + b·√2` of ℚ(√2).
///
/// The representation is unique (√2 is irrational), so structural equality
/// is numeric equality. Ordering is exact: the sign of `a + b√2` is decided
/// by comparing `a²` with `2b²` when `a` and `b` disagree in sign.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Root2Scalar {
    pub a: Rational,
    pub b: Rational,
}

impl Root2Scalar {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }

    pub fn from_rational(a: Rational) -> Self {
        Self { a, b: Rational::zero() }
    }

    /// `1/√2 = (1/2)·√2`.
    pub fn inv_sqrt2() -> Self {
        Self { a: Rational::zero(), b: rat(1, 2) }
    }

    pub fn zero() -> Self {
        Self::from_rational(Rational::zero())
    }

    pub fn one() -> Self {
        Self::from_rational(Rational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.a)
    }

    /// Algebraic conjugate `a − b√2`.
    pub fn conjugate(&self) -> Self {
        Self { a: self.a.clone(), b: -&self.b }
    }

    /// Field norm `(a + b√2)(a − b√2) = a² − 2b²`.
    pub fn field_norm(&self) -> Rational {
        &self.a * &self.a - int(2) * &self.b * &self.b
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Rational::zero());
        let sb = self.b.cmp(&Rational::zero());
        match (sa, sb) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            // Opposite signs: the larger magnitude of a and b√2 wins.
            (sa, _) => match (&self.a * &self.a).cmp(&(int(2) * &self.b * &self.b)) {
                Ordering::Greater => sa,
                Ordering::Less => sa.reverse(),
                Ordering::Equal => unreachable!("a² = 2b² forces a = b = 0"),
            },
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() == Ordering::Less {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn scale(&self, r: &Rational) -> Self {
        Self { a: &self.a * r, b: &self.b * r }
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.a) + to_f64(&self.b) * std::f64::consts::SQRT_2
    }
}

impl PartialOrd for Root2Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Root2Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl PartialEq<Rational> for Root2Scalar {
    fn eq(&self, other: &Rational) -> bool {
        self.b.is_zero() && &self.a == other
    }
}

impl PartialOrd<Rational> for Root2Scalar {
    fn partial_cmp(&self, other: &Rational) -> Option<Ordering> {
        Some(Root2Scalar::new(&self.a - other, self.b.clone()).signum())
    }
}

impl From<Rational> for Root2Scalar {
    fn from(a: Rational) -> Self {
        Self::from_rational(a)
    }
}

impl fmt::Display for Root2Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) => write!(f, "{}√2", self.b),
            (false, false) if self.b.is_negative() => {
                write!(f, "{} - {}√2", self.a, -&self.b)
            }
            (false, false) => write!(f, "{} + {}√2", self.a, self.b),
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl<'a> $tr<&'a Root2Scalar> for &'a Root2Scalar {
            type Output = Root2Scalar;
            fn $method(self, rhs: &'a Root2Scalar) -> Root2Scalar {
                let f: fn(&Root2Scalar, &Root2Scalar) -> Root2Scalar = $body;
                f(self, rhs)
            }
        }
        impl $tr for Root2Scalar {
            type Output = Root2Scalar;
            fn $method(self, rhs: Root2Scalar) -> Root2Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $tr<&'a Root2Scalar> for Root2Scalar {
            type Output = Root2Scalar;
            fn $method(self, rhs: &'a Root2Scalar) -> Root2Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, |x, y| Root2Scalar { a: &x.a + &y.a, b: &x.b + &y.b });
forward_binop!(Sub, sub, |x, y| Root2Scalar { a: &x.a - &y.a, b: &x.b - &y.b });
forward_binop!(Mul, mul, |x, y| Root2Scalar {
    a: &x.a * &y.a + int(2) * &x.b * &y.b,
    b: &x.a * &y.b + &x.b * &y.a,
});

impl AddAssign<&Root2Scalar> for Root2Scalar {
    fn add_assign(&mut self, rhs: &Root2Scalar) {
        self.a += &rhs.a;
        self.b += &rhs.b;
    }
}

impl SubAssign<&Root2Scalar> for Root2Scalar {
    fn sub_assign(&mut self, rhs: &Root2Scalar) {
        self.a -= &rhs.a;
        self.b -= &rhs.b;
    }
}

impl Neg for Root2Scalar {
    type Output = Root2Scalar;
    fn neg(self) -> Root2Scalar {
        Root2Scalar { a: -self.a, b: -self.b }
    }
}

impl Serialize for Root2Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [format_rational(&self.a), format_rational(&self.b)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Root2Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b] = <[String; 2]>::deserialize(d)?;
        Ok(Root2Scalar {
            a: parse_rational(&a).map_err(D::Error::custom)?,
            b: parse_rational(&b).map_err(D::Error::custom)?,
        })
    }
}
