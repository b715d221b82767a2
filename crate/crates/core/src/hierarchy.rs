//! Budgeted evaluation of the fast-growing hierarchy
//! `f_0(n) = n + 1`, `f_{m+1}(n) = f_m^n(n)`, `f_ω(m) = f_m(m)`.
//!
//! Every `f_m` is nondecreasing, and for `n ≥ 1` also nondecreasing in `m`,
//! so any value met during the iteration is a lower bound for the final
//! result. When the budget runs out the evaluator returns the largest value
//! it reached.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{self, Rational};

pub type BigNat = BigUint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalBudget {
    pub max_digits: u64,
    pub max_steps: u64,
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self { max_digits: 1_000_000, max_steps: 1_000_000 }
    }
}

impl EvalBudget {
    /// Values of at most this many bits have at most `max_digits` digits.
    fn max_bits(&self) -> u64 {
        // 3.321928 < log2(10)
        self.max_digits.saturating_mul(3_321_928) / 1_000_000
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FghValue {
    Exact(#[serde(with = "serde_nat")] BigNat),
    ExceedsBudget {
        #[serde(with = "serde_nat")]
        lower_bound: BigNat,
    },
}

impl FghValue {
    /// The exact value, or the certified lower bound.
    pub fn lower_bound(&self) -> &BigNat {
        match self {
            Self::Exact(v) => v,
            Self::ExceedsBudget { lower_bound } => lower_bound,
        }
    }

    pub fn exact(&self) -> Option<&BigNat> {
        match self {
            Self::Exact(v) => Some(v),
            Self::ExceedsBudget { .. } => None,
        }
    }

    fn weaken(self) -> Self {
        FghValue::ExceedsBudget { lower_bound: self.lower_bound().clone() }
    }
}

mod serde_nat {
    use super::BigNat;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigNat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigNat, D::Error> {
        let s = String::deserialize(d)?;
        BigNat::parse_bytes(s.as_bytes(), 10).ok_or_else(|| D::Error::custom("invalid natural"))
    }
}

struct Frame {
    /// Computing `f_level` by iterating `f_{level-1}`.
    level: u64,
    remaining: BigNat,
    value: BigNat,
}

fn run(m: u64, n: &BigNat, budget: &EvalBudget, accelerate: bool) -> FghValue {
    let max_bits = budget.max_bits();
    if m == 0 {
        return FghValue::Exact(n + 1u32);
    }
    let mut steps = 0u64;
    let mut stack = vec![Frame { level: m, remaining: n.clone(), value: n.clone() }];
    loop {
        let top = stack.last_mut().expect("stack nonempty");
        if top.remaining.is_zero() {
            let done = stack.pop().expect("stack nonempty").value;
            match stack.last_mut() {
                None => return FghValue::Exact(done),
                Some(parent) => {
                    parent.value = done;
                    parent.remaining -= 1u32;
                }
            }
            continue;
        }
        if top.level == 1 {
            // f_0 iterated `remaining` times.
            top.value += &top.remaining;
            top.remaining.set_zero();
            if top.value.bits() > max_bits {
                return FghValue::ExceedsBudget { lower_bound: top.value.clone() };
            }
        } else if top.level == 2 && accelerate {
            // f_1 iterated `remaining` times is a shift.
            let room = max_bits.saturating_sub(top.value.bits());
            match top.remaining.to_u64() {
                Some(r) if r <= room => {
                    top.value <<= r;
                    top.remaining.set_zero();
                }
                _ => {
                    return FghValue::ExceedsBudget { lower_bound: &top.value << room };
                }
            }
        } else {
            steps += 1;
            if steps > budget.max_steps {
                return FghValue::ExceedsBudget { lower_bound: top.value.clone() };
            }
            let v = top.value.clone();
            let level = top.level - 1;
            stack.push(Frame { level, remaining: v.clone(), value: v });
        }
    }
}

/// `f_m(n)`, with `f_1` iterations collapsed to shifts.
///
/// If `m` itself exceeds `max_steps`, the value of `f_3(n)` (a lower bound
/// for `n ≥ 1`) is returned as the certified bound.
pub fn fgh_eval(m: u64, n: &BigNat, budget: &EvalBudget) -> FghValue {
    if m > budget.max_steps && m > 3 && !n.is_zero() {
        return run(3, n, budget, true).weaken();
    }
    run(m, n, budget, true)
}

/// `f_m(n)` strictly by the defining iteration; only the `n`-fold successor
/// is done in one step.
pub fn fgh_eval_literal(m: u64, n: &BigNat, budget: &EvalBudget) -> FghValue {
    run(m, n, budget, false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    Finite(u64),
    Omega,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Finite(m) => write!(f, "{m}"),
            Level::Omega => f.write_str("w"),
        }
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "w" | "omega" | "ω" => Ok(Level::Omega),
            t => t
                .parse()
                .map(Level::Finite)
                .map_err(|_| Error::Parse(format!("invalid hierarchy level '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Argument {
    Value(#[serde(with = "serde_nat")] BigNat),
    Expr(Box<HierarchyExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyExpr {
    pub level: Level,
    pub argument: Argument,
}

impl HierarchyExpr {
    pub fn new(level: Level, n: BigNat) -> Self {
        Self { level, argument: Argument::Value(n) }
    }

    pub fn nested(level: Level, inner: HierarchyExpr) -> Self {
        Self { level, argument: Argument::Expr(Box::new(inner)) }
    }

    pub fn eval(&self, budget: &EvalBudget) -> FghValue {
        let (arg, exact) = match &self.argument {
            Argument::Value(n) => (n.clone(), true),
            Argument::Expr(inner) => {
                let v = inner.eval(budget);
                let exact = v.exact().is_some();
                (v.lower_bound().clone(), exact)
            }
        };
        let out = match self.level {
            Level::Finite(m) => fgh_eval(m, &arg, budget),
            // f_ω(n) = f_n(n)
            Level::Omega => match arg.to_u64() {
                Some(m) => fgh_eval(m, &arg, budget),
                None => run(3, &arg, budget, true).weaken(),
            },
        };
        if exact {
            out
        } else {
            out.weaken()
        }
    }
}

impl fmt::Display for HierarchyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.argument {
            Argument::Value(n) => write!(f, "f_{}({})", self.level, n),
            Argument::Expr(inner) => write!(f, "f_{}({})", self.level, inner),
        }
    }
}

/// `⌈2^29·B^4⌉ + 5`.
pub fn threshold_arg(b: &Rational) -> Result<BigNat> {
    threshold(b, &scalar::pow2(29))
}

/// `⌈2^22·B^4·⌈1/ε⌉^4⌉ + 5`, the argument in the general fluctuation bound.
pub fn cited_threshold_arg(b: &Rational, eps: &Rational) -> Result<BigNat> {
    if !eps.is_positive() {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let c = Rational::from_integer(scalar::ceil_recip(eps));
    threshold(b, &(scalar::pow2(22) * &c * &c * &c * &c))
}

fn threshold(b: &Rational, factor: &Rational) -> Result<BigNat> {
    if *b < Rational::one() {
        return Err(Error::Domain("B must be at least 1".into()));
    }
    let b2 = b * b;
    let v = (factor * &b2 * &b2).ceil().to_integer() + 5u32;
    Ok(v.to_biguint().expect("positive"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Less,
    GreaterOrEqual,
    /// The budget ran out below `N`; nothing is claimed.
    Undetermined,
}

/// Compares `expr` with `n`. `GreaterOrEqual` is answered from a certified
/// lower bound, `Less` only from a full evaluation.
pub fn fgh_compare(expr: &HierarchyExpr, n: &BigNat, budget: &EvalBudget) -> Comparison {
    match expr.eval(budget) {
        FghValue::Exact(v) if v < *n => Comparison::Less,
        v if v.lower_bound() >= n => Comparison::GreaterOrEqual,
        _ => Comparison::Undetermined,
    }
}

/// Decimal up to 60 digits, otherwise `m.mmme+E` with the mantissa rounded
/// down (so a rendered lower bound stays a lower bound).
pub fn render_nat(n: &BigNat) -> String {
    let bits = n.bits();
    if bits <= 196 {
        let s = n.to_str_radix(10);
        if s.len() <= 60 {
            return s;
        }
    }
    let shift = bits.saturating_sub(64);
    let top = (n >> shift).to_u64().expect("64 bits") as f64;
    let log10 = top.log10() + shift as f64 * std::f64::consts::LOG10_2;
    let exp = log10.floor();
    let mantissa = (10f64.powf(log10 - exp) * 1000.0).floor() / 1000.0;
    format!("{mantissa:.3}e+{}", exp as u64)
}

pub fn render_value(v: &FghValue) -> String {
    match v {
        FghValue::Exact(n) => render_nat(n),
        FghValue::ExceedsBudget { lower_bound } => format!(">= {}", render_nat(lower_bound)),
    }
}
