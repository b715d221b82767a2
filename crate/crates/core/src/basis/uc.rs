//! Certified lower bounds on the unconditional constant of a basis.
//!
//! The supremum over coefficient vectors is a nonconvex ratio problem, so the
//! search runs in floating point; every candidate is snapped to rationals
//! with denominator `10^6` and re-scored exactly. The returned bound is the
//! exact ratio of its own certificate.

use std::cmp::Ordering;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Basis;
use crate::error::{Error, Result};
use crate::james::{james_norm_sq, james_norm_sq_f64};
use crate::scalar::{self, Rational};

/// Largest `K` for exhaustive sign enumeration (`2^{K+1}` patterns).
pub const EXHAUSTIVE_MAX_K: usize = 12;

const SNAP_DENOM: i64 = 1_000_000;

/// Signs `ε_i ∈ {−1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Domain("sign entries must be -1 or +1".into()));
        }
        Ok(Self(signs))
    }

    pub fn all_plus(len: usize) -> Self {
        Self(vec![1; len])
    }

    /// Pattern number `bits`: bit `i` set means `ε_i = −1`.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        Self((0..len).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn apply(&self, alpha: &[Rational]) -> Vec<Rational> {
        alpha
            .iter()
            .zip(&self.0)
            .map(|(a, &s)| if s < 0 { -a } else { a.clone() })
            .collect()
    }
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(s: SignPattern) -> Self {
        s.0
    }
}

/// `‖Σ ε_i α_i ω_i‖² / ‖Σ α_i ω_i‖²`, exactly.
pub fn ratio_sq(basis: &Basis, eps: &SignPattern, alpha: &[Rational]) -> Result<Rational> {
    if eps.len() != basis.k() + 1 {
        return Err(Error::DimensionMismatch { expected: basis.k(), found: eps.len().wrapping_sub(1) });
    }
    let den_vec = basis.combine(alpha)?;
    if den_vec.is_zero() {
        return Err(Error::ZeroVector);
    }
    let num_vec = basis.combine(&eps.apply(alpha))?;
    Ok(james_norm_sq(&num_vec).0 / james_norm_sq(&den_vec).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Exhaustive,
    Anneal,
}

/// A lower bound on the squared unconditional constant with its replayable
/// certificate `(ε, α)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UCEstimate {
    #[serde(with = "scalar::serde_rational")]
    pub lower_bound_sq: Rational,
    pub signs: SignPattern,
    #[serde(with = "scalar::serde_rational_vec")]
    pub alpha: Vec<Rational>,
}

impl UCEstimate {
    pub fn replay(&self, basis: &Basis) -> Result<Rational> {
        ratio_sq(basis, &self.signs, &self.alpha)
    }

    /// Larger bound wins; equal bounds go to the lexicographically least signs.
    fn beats(&self, other: &UCEstimate) -> bool {
        match self.lower_bound_sq.cmp(&other.lower_bound_sq) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.signs < other.signs,
        }
    }
}

fn pick(a: UCEstimate, b: UCEstimate) -> UCEstimate {
    if b.beats(&a) {
        b
    } else {
        a
    }
}

/// Float view of a basis for the heuristic search.
struct FloatBasis {
    columns: Vec<Vec<f64>>,
}

impl FloatBasis {
    fn new(b: &Basis) -> Self {
        Self {
            columns: b
                .columns()
                .iter()
                .map(|c| c.iter().map(scalar::to_f64).collect())
                .collect(),
        }
    }

    fn combine(&self, alpha: &[f64], signs: Option<&[i8]>) -> Vec<f64> {
        let n = self.columns.len();
        let mut out = vec![0.0; n];
        for (i, col) in self.columns.iter().enumerate() {
            let a = alpha[i] * signs.map_or(1.0, |s| s[i] as f64);
            for (o, c) in out.iter_mut().zip(col) {
                *o += a * c;
            }
        }
        out
    }

    fn ratio(&self, signs: &[i8], alpha: &[f64]) -> f64 {
        let den = james_norm_sq_f64(&self.combine(alpha, None));
        if den <= 1e-18 {
            return 0.0;
        }
        james_norm_sq_f64(&self.combine(alpha, Some(signs))) / den
    }

    fn ascend(&self, signs: &[i8], mut alpha: Vec<f64>, max_evals: usize) -> (Vec<f64>, f64) {
        let mut best = self.ratio(signs, &alpha);
        let mut evals = 1;
        let mut step = 0.5;
        while step > 1.0 / 512.0 && evals < max_evals {
            let mut improved = false;
            for j in 0..alpha.len() {
                for delta in [step, -step] {
                    let old = alpha[j];
                    alpha[j] = old + delta;
                    let r = self.ratio(signs, &alpha);
                    evals += 1;
                    if r > best * (1.0 + 1e-12) {
                        best = r;
                        improved = true;
                    } else {
                        alpha[j] = old;
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        (alpha, best)
    }
}

fn certify(basis: &Basis, signs: &SignPattern, alpha: Vec<Rational>) -> Option<UCEstimate> {
    let value = ratio_sq(basis, signs, &alpha).ok()?;
    Some(UCEstimate { lower_bound_sq: value, signs: signs.clone(), alpha })
}

fn snap(alpha: &[f64]) -> Vec<Rational> {
    let scale = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    alpha.iter().map(|a| scalar::snap_f64(a / scale, SNAP_DENOM)).collect()
}

fn stream_rng(seed: u64, lane: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ lane.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

/// `restarts` α-searches for one sign pattern; restart 0 starts from all
/// ones, the rest from uniform draws on `[-1, 1]`.
fn search_pattern(
    basis: &Basis,
    fb: &FloatBasis,
    signs: &SignPattern,
    restarts: usize,
    seed: u64,
    lane: u64,
) -> UCEstimate {
    let n = basis.k() + 1;
    let ones = vec![Rational::one(); n];
    let mut best = certify(basis, signs, ones).unwrap_or_else(|| baseline(basis));
    for r in 0..restarts {
        let start: Vec<f64> = if r == 0 {
            vec![1.0; n]
        } else {
            let mut rng = stream_rng(seed, lane, r as u64);
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let (alpha, _) = fb.ascend(signs.signs(), start, 80 * n);
        if let Some(c) = certify(basis, signs, snap(&alpha)) {
            best = pick(best, c);
        }
    }
    best
}

/// Ratio 1 from `ε = +1…+1`, `α = e_0`.
fn baseline(basis: &Basis) -> UCEstimate {
    let n = basis.k() + 1;
    let mut alpha = vec![Rational::zero(); n];
    alpha[0] = Rational::one();
    UCEstimate { lower_bound_sq: Rational::one(), signs: SignPattern::all_plus(n), alpha }
}

/// Best certified lower bound on the squared unconditional constant.
///
/// `Exhaustive` enumerates all `2^{K+1}` sign patterns (in parallel, merged
/// deterministically) with `budget` α-restarts each. `Anneal` runs `budget`
/// steps of simulated annealing over sign patterns. Both are best-so-far
/// with per-step random streams, so raising the budget never lowers the
/// result for a fixed seed.
pub fn uc_lower_bound(
    basis: &Basis,
    strategy: SearchStrategy,
    budget: usize,
    seed: u64,
) -> Result<UCEstimate> {
    if budget == 0 {
        return Err(Error::InvalidBudget);
    }
    let n = basis.k() + 1;
    let fb = FloatBasis::new(basis);
    let base = baseline(basis);
    match strategy {
        SearchStrategy::Exhaustive => {
            if basis.k() > EXHAUSTIVE_MAX_K {
                return Err(Error::DimensionTooLarge { k: basis.k(), limit: EXHAUSTIVE_MAX_K });
            }
            let best = (0..1u64 << n)
                .into_par_iter()
                .map(|bits| {
                    let signs = SignPattern::from_bits(bits, n);
                    search_pattern(basis, &fb, &signs, budget, seed, bits)
                })
                .reduce(|| base.clone(), pick);
            Ok(best)
        }
        SearchStrategy::Anneal => Ok(anneal(basis, &fb, budget, seed, base)),
    }
}

fn anneal(basis: &Basis, fb: &FloatBasis, steps: usize, seed: u64, base: UCEstimate) -> UCEstimate {
    let n = basis.k() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = SignPattern::all_plus(n);
    let mut current_score = 1.0f64;
    let mut best = base;
    for t in 0..steps {
        let mut candidate = current.clone();
        let flip = rng.gen_range(0..n);
        candidate.0[flip] = -candidate.0[flip];
        let est = search_pattern(basis, fb, &candidate, 2, seed, t as u64 + 1);
        let score = scalar::to_f64(&est.lower_bound_sq);
        best = pick(best, est);
        // Budget-independent cooling keeps runs with larger budgets as
        // extensions of shorter ones.
        let temperature = 0.5 / (2.0 + t as f64).ln();
        let accept = score >= current_score
            || rng.gen::<f64>() < ((score.ln() - current_score.ln()) / temperature).exp();
        if accept {
            current = candidate;
            current_score = score;
        }
    }
    best
}
