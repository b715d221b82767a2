//! Generators and brute-force references shared by the integration tests.
//! Nothing here calls the code paths it is used to check.

#![allow(dead_code)]

use jameslab::james::{james_norm_sq, DualFunctional, JVector};
use jameslab::scalar::{self, rat, Rational};
use jameslab::Root2Scalar;
use num_traits::{One, Signed, Zero};
use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn random_vector(r: &mut ChaCha8Rng, k: usize) -> JVector {
    JVector::new((0..=k).map(|_| rat(r.gen_range(-20..=20), r.gen_range(1..=9))).collect())
}

/// `½·max` over every nonempty subset of `{0..K, V}` (as an increasing
/// cycle) of the wrapped sum of squared differences.
pub fn brute_norm_sq(x: &JVector) -> Rational {
    let mut vals: Vec<Rational> = x.coeffs().to_vec();
    vals.push(Rational::zero());
    let n = vals.len();
    assert!(n <= 20, "brute force is exponential");
    let mut best = Rational::zero();
    for mask in 1u32..1 << n {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut s = Rational::zero();
        for w in 0..idx.len() {
            let a = &vals[idx[w]];
            let b = &vals[idx[(w + 1) % idx.len()]];
            let d = a - b;
            s += &d * &d;
        }
        if s > best {
            best = s;
        }
    }
    best / scalar::int(2)
}

pub fn random_chain(r: &mut ChaCha8Rng, k: usize, steps: usize) -> Vec<usize> {
    let mut c = index::sample(r, k + 1, steps + 1).into_vec();
    c.sort_unstable();
    c
}

/// `y(d_n)` by direct summation `Σ_{j≤n} y_j`.
pub fn prefix_value(y: &DualFunctional, n: usize) -> Root2Scalar {
    y.coeffs()[..=n].iter().fold(Root2Scalar::zero(), |acc, c| acc + c.clone())
}

/// `t·(1/√2)·Σ_i u_i (e*_{p_i} − e*_{p_{i+1}})` over the cycle of chain
/// points, with alternating-sign unit weights `u` and the smallest
/// multiple `t` of 1/32 (above 1) that pushes every chain gap to `≥ ε`.
pub fn planted_violator(r: &mut ChaCha8Rng, k: usize, chain: &[usize], eps: &Rational) -> (DualFunctional, Rational) {
    let m = chain.len();
    let signs: Vec<i64> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let raw: Vec<i64> = signs.iter().map(|s| s * r.gen_range(2..=7)).collect();
    let sq: i64 = raw.iter().map(|v| v * v).sum();
    let mut root = (sq as f64).sqrt().ceil() as i64;
    while root * root < sq {
        root += 1;
    }
    let inv = Root2Scalar::inv_sqrt2();
    let mut coeffs = vec![Root2Scalar::zero(); k + 1];
    for i in 0..m {
        let w = inv.scale(&rat(raw[i], root));
        coeffs[chain[i]] = coeffs[chain[i]].clone() + w.clone();
        let j = chain[(i + 1) % m];
        coeffs[j] = coeffs[j].clone() - w;
    }
    let y = DualFunctional::new(coeffs);
    let gaps: Vec<Root2Scalar> = chain
        .windows(2)
        .map(|w| (prefix_value(&y, w[1]) - prefix_value(&y, w[0])).abs())
        .collect();
    let mut t = rat(33, 32);
    while gaps.iter().any(|g| g.scale(&t) < *eps) {
        t += rat(1, 32);
    }
    (y.scale(&t), t)
}

/// `c·x` with `‖c·x‖² < 1` exactly and `c` within about 1e-9 of `1/‖x‖`.
/// Norm exactly 1 is avoided: there the chain bound is attained with
/// every gap equal to `ε`.
pub fn into_unit_ball(x: &JVector) -> JVector {
    let n = james_norm_sq(x).0;
    if n.is_zero() {
        return x.clone();
    }
    let mut c = scalar::snap_f64(0.999_999_999 / scalar::to_f64(&n).sqrt(), 1_000_000_000);
    while &c * &c * &n >= Rational::one() {
        c *= rat(999_999, 1_000_000);
    }
    x.scale(&c)
}

/// A step vector that alternates by equal jumps at the chain points, the
/// shape that makes every chain gap as large as the unit ball permits.
pub fn chain_adapted_vector(r: &mut ChaCha8Rng, k: usize, chain: &[usize]) -> JVector {
    let base = rat(r.gen_range(-5..=5), 3);
    let mut coeffs = vec![base.clone(); k + 1];
    for (i, w) in chain.windows(2).enumerate() {
        let level = if i % 2 == 0 { &base + Rational::one() } else { base.clone() };
        for c in &mut coeffs[w[0] + 1..=w[1]] {
            *c = level.clone();
        }
    }
    JVector::new(coeffs)
}

/// A sequence whose greedy `h`-jump count from index 0 is exactly `c`:
/// after each jump the values wander strictly inside the `h`-window of the
/// new anchor.
pub fn planted_sequence(r: &mut ChaCha8Rng, c: usize, h: &Rational) -> Vec<Rational> {
    let mut out = Vec::new();
    let mut anchor = rat(r.gen_range(-4..=4), 1);
    out.push(anchor.clone());
    for jump in 0..=c {
        for _ in 0..r.gen_range(0..5) {
            // strictly inside (anchor − h, anchor + h)
            let f = rat(r.gen_range(-9..=9), 10);
            out.push(&anchor + h * f);
        }
        if jump < c {
            let dir = if r.gen_bool(0.5) { 1 } else { -1 };
            let step = h * rat(r.gen_range(10..=25), 10);
            anchor = if dir > 0 { &anchor + step } else { &anchor - step };
            out.push(anchor.clone());
        }
    }
    out
}

pub fn abs_max(v: &[Rational]) -> Rational {
    v.iter().map(Signed::abs).max().unwrap_or_else(Rational::zero)
}
