//! Exact squared James norm.
//!
//! `‖x‖²_J = ½ · max over cycles p_1 < … < p_m of Σ (x_{p_i} − x_{p_{i+1}})²`
//! (indices cyclic). For a fixed start `a`, the best cycle is a longest path
//! in the index DAG `a → … → j` closed by the edge `j → a`, so each start
//! costs one `O(N²)` sweep and the whole norm `O(N³)`.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::ops::Add;

use super::{Cycle, JVector, Slot};
use crate::error::{Error, Result};
use crate::scalar::{self, Rational};

/// Largest `K` accepted by the subset-enumeration oracle.
pub const ORACLE_MAX_K: usize = 14;

/// A cycle attaining the supremum, with the squared norm it certifies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormCertificate {
    pub cycle: Cycle,
    #[serde(with = "scalar::serde_rational")]
    pub value_sq: Rational,
}

impl NormCertificate {
    /// Replays the cycle on `x` and compares with the recorded value.
    pub fn replays_on(&self, x: &JVector) -> bool {
        cycle_value(x, &self.cycle).is_ok_and(|v| v == self.value_sq)
    }
}

/// `½ · [Σ consecutive squared differences + wrap-around term]`.
pub fn cycle_value(x: &JVector, c: &Cycle) -> Result<Rational> {
    c.check_fits(x.k())?;
    let slots = c.slots();
    let m = slots.len();
    let mut sum = Rational::zero();
    if m > 1 {
        for i in 0..m {
            let diff = x.at(slots[i]) - x.at(slots[(i + 1) % m]);
            sum += &diff * &diff;
        }
    }
    Ok(sum / scalar::int(2))
}

/// Path-sum scalar for the cycle search. Implemented for exact integers and
/// for `f64` (heuristic searches only).
pub(crate) trait Score: Clone + PartialOrd + Add<Output = Self> {
    fn zero() -> Self;
}

impl Score for i128 {
    fn zero() -> Self {
        0
    }
}

impl Score for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }
}

impl Score for f64 {
    fn zero() -> Self {
        0.0
    }
}

/// Finds the maximal cycle sum over slots `0..w.len()` given the squared
/// difference matrix `w`. Returns the lexicographically least optimal cycle.
pub(crate) fn best_cycle<T: Score>(w: &[Vec<T>]) -> (T, Vec<usize>) {
    let n = w.len();
    let mut winner: Option<(usize, Vec<T>)> = None;
    let mut winner_total = T::zero();
    for a in 0..n {
        // best[i]: best completion of a path currently at i back to a.
        let mut best: Vec<T> = vec![T::zero(); n];
        for i in (a..n).rev() {
            let mut v = w[i][a].clone();
            for j in i + 1..n {
                let c = w[i][j].clone() + best[j].clone();
                if c > v {
                    v = c;
                }
            }
            best[i] = v;
        }
        if winner.is_none() || best[a] > winner_total {
            winner_total = best[a].clone();
            winner = Some((a, best));
        }
    }
    let (a, best) = winner.expect("at least one slot");
    // Closing is a proper prefix of every extension, so it wins ties; among
    // extensions the smallest next index wins.
    let mut path = vec![a];
    let mut i = a;
    loop {
        if best[i] <= w[i][a] {
            break;
        }
        let j = (i + 1..n)
            .find(|&j| best[i] <= w[i][j].clone() + best[j].clone())
            .expect("optimal successor exists");
        path.push(j);
        i = j;
    }
    (winner_total, path)
}

/// Squared differences of a coordinate list, in exact integers after scaling
/// by the common denominator `scale`.
pub(crate) enum IntWeights {
    Small(Vec<Vec<i128>>),
    Big(Vec<Vec<BigInt>>),
}

pub(crate) fn int_weights(values: &[Rational]) -> (IntWeights, BigInt) {
    let scale = scalar::lcm_of_denominators(values);
    let ints: Vec<BigInt> = values.iter().map(|v| (v * &scale).to_integer()).collect();
    let max_bits = ints.iter().map(|z| z.bits()).max().unwrap_or(0);
    let n = ints.len();
    if max_bits <= 56 && n <= 1 << 10 {
        let small: Vec<i128> = ints.iter().map(|z| z.to_i128().expect("fits")).collect();
        let w = (0..n)
            .map(|i| (0..n).map(|j| (small[i] - small[j]).pow(2)).collect())
            .collect();
        (IntWeights::Small(w), scale)
    } else {
        let w = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = &ints[i] - &ints[j];
                        &d * &d
                    })
                    .collect()
            })
            .collect();
        (IntWeights::Big(w), scale)
    }
}

fn slot_values(x: &JVector) -> Vec<Rational> {
    let mut v = x.coeffs().to_vec();
    v.push(Rational::zero());
    v
}

fn slot_of(i: usize, k: usize) -> Slot {
    if i > k {
        Slot::Virtual
    } else {
        Slot::Coord(i)
    }
}

fn unscale(total: BigInt, scale: &BigInt) -> Rational {
    Rational::new(total, scale * scale * 2)
}

/// Exact squared James norm with a certificate cycle (the lexicographically
/// least optimal one).
pub fn james_norm_sq(x: &JVector) -> (Rational, NormCertificate) {
    let (w, scale) = int_weights(&slot_values(x));
    let (total, path) = match w {
        IntWeights::Small(w) => {
            let (t, p) = best_cycle(&w);
            (BigInt::from(t), p)
        }
        IntWeights::Big(w) => best_cycle(&w),
    };
    let value = unscale(total, &scale);
    let cycle = Cycle::new(path.into_iter().map(|i| slot_of(i, x.k())).collect())
        .expect("search paths are strictly increasing");
    (value.clone(), NormCertificate { cycle, value_sq: value })
}

/// Float squared James norm of a coordinate list; search heuristics only.
pub fn james_norm_sq_f64(coeffs: &[f64]) -> f64 {
    let mut v = coeffs.to_vec();
    v.push(0.0);
    let n = v.len();
    let w: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| (v[i] - v[j]).powi(2)).collect())
        .collect();
    best_cycle(&w).0 / 2.0
}

/// Brute-force squared norm: every subset of the slots, in increasing order,
/// read as a cycle. Guarded at `K ≤ 14`.
pub fn james_norm_sq_oracle(x: &JVector) -> Result<Rational> {
    if x.k() > ORACLE_MAX_K {
        return Err(Error::DimensionTooLarge { k: x.k(), limit: ORACLE_MAX_K });
    }
    Ok(oracle_with_padding(x, 1))
}

/// Oracle over `K + 1 + pad` slots, the last `pad` of which read zero.
pub(crate) fn oracle_with_padding(x: &JVector, pad: usize) -> Rational {
    let mut values = x.coeffs().to_vec();
    values.extend(std::iter::repeat_with(Rational::zero).take(pad));
    let (w, scale) = int_weights(&values);
    let total = match w {
        IntWeights::Small(w) => BigInt::from(enumerate_subsets(&w)),
        IntWeights::Big(w) => enumerate_subsets(&w),
    };
    unscale(total, &scale)
}

fn enumerate_subsets<T: Score>(w: &[Vec<T>]) -> T {
    let n = w.len();
    let mut best = T::zero();
    let mut members = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        members.clear();
        members.extend((0..n).filter(|&i| mask >> i & 1 == 1));
        let m = members.len();
        let mut sum = T::zero();
        for t in 0..m {
            sum = sum + w[members[t]][members[(t + 1) % m]].clone();
        }
        if sum > best {
            best = sum;
        }
    }
    best
}
