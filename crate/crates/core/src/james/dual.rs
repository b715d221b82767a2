//! Functionals on `J_K`: exact evaluation, a sampler whose outputs come with
//! a constructive proof of `‖y‖_{J*} ≤ 1`, and certified dual-norm lower
//! bounds.
//!
//! Every cycle `c` gives a linear map `A_c x = (x_{p_i} − x_{p_{i+1}})_i` with
//! `‖A_c x‖² / 2 ≤ ‖x‖²_J`. So `y(x) = (1/√2)·⟨u, A_c x⟩` with `‖u‖₂ ≤ 1` has
//! `|y(x)| ≤ ‖x‖_J`, and sub-convex combinations of such functionals stay in
//! the dual unit ball.

use num_traits::{One, Signed, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::norm::james_norm_sq_f64;
use super::{james_norm_sq, Cycle, DualFunctional, JVector, Slot};
use crate::error::Result;
use crate::scalar::{self, Rational, Root2Scalar};

/// Exact `y(x)` in ℚ(√2).
pub fn eval_functional(y: &DualFunctional, x: &JVector) -> Result<Root2Scalar> {
    x.check_same_k(y.k())?;
    let mut acc = Root2Scalar::zero();
    for (c, a) in y.coeffs().iter().zip(x.coeffs()) {
        if !a.is_zero() {
            acc += &c.scale(a);
        }
    }
    Ok(acc)
}

/// One summand `λ · (1/√2) Σ_i u_i (x_{p_i} − x_{p_{i+1 mod m}})`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualBallTerm {
    #[serde(with = "scalar::serde_rational")]
    pub weight: Rational,
    pub cycle: Cycle,
    #[serde(with = "scalar::serde_rational_vec")]
    pub unit: Vec<Rational>,
}

/// A sub-convex combination of cycle functionals; proof that the encoded
/// functional lies in the dual unit ball.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DualBallCertificate {
    pub terms: Vec<DualBallTerm>,
}

impl DualBallCertificate {
    /// Checks `Σλ ≤ 1`, `λ ≥ 0` and `Σu² ≤ 1` with `u` matching each cycle.
    pub fn is_valid(&self) -> bool {
        let mut total = Rational::zero();
        for t in &self.terms {
            if t.weight.is_negative() || t.unit.len() != t.cycle.len() {
                return false;
            }
            let norm: Rational = t.unit.iter().map(|u| u * u).sum();
            if norm > Rational::one() {
                return false;
            }
            total += &t.weight;
        }
        total <= Rational::one()
    }

    /// Expands the certificate into coordinates over `e*_0..e*_K`.
    pub fn to_functional(&self, k: usize) -> Result<DualFunctional> {
        let mut coeffs = vec![Root2Scalar::zero(); k + 1];
        for t in &self.terms {
            t.cycle.check_fits(k)?;
            let slots = t.cycle.slots();
            let m = slots.len();
            for (i, u) in t.unit.iter().enumerate() {
                // λ·u/√2 = (λ·u/2)·√2
                let c = Root2Scalar::new(Rational::zero(), &t.weight * u / scalar::int(2));
                if let Slot::Coord(p) = slots[i] {
                    coeffs[p] += &c;
                }
                if let Slot::Coord(q) = slots[(i + 1) % m] {
                    coeffs[q] -= &c;
                }
            }
        }
        Ok(DualFunctional::new(coeffs))
    }
}

fn random_cycle(rng: &mut ChaCha8Rng, k: usize) -> Cycle {
    let n_slots = k + 2;
    let max_len = n_slots.min(24);
    let m = rng.gen_range(2..=max_len);
    let mut picked = sample(rng, n_slots, m).into_vec();
    picked.sort_unstable();
    Cycle::new(
        picked
            .into_iter()
            .map(|i| if i > k { Slot::Virtual } else { Slot::Coord(i) })
            .collect(),
    )
    .expect("sorted distinct slots")
}

fn random_unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<Rational> {
    let mut v: Vec<i64> = (0..m).map(|_| rng.gen_range(-9..=9)).collect();
    if v.iter().all(|&x| x == 0) {
        v[0] = 1;
    }
    let norm_sq = scalar::int(v.iter().map(|x| x * x).sum());
    let mut s = Rational::from_integer(scalar::ceil_sqrt(&norm_sq));
    // Some samples sit strictly inside the ball.
    if rng.gen_bool(0.25) {
        s *= scalar::rat(rng.gen_range(5..=9), 4);
    }
    v.into_iter().map(|x| scalar::int(x) / &s).collect()
}

/// Deterministic sampler of functionals in the dual unit ball of `J_K`,
/// returned together with the certificate that proves membership.
pub fn dual_ball_sample(
    seed: u64,
    k: usize,
    num_terms: usize,
) -> (DualFunctional, DualBallCertificate) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<i64> = (0..num_terms).map(|_| rng.gen_range(1..=9)).collect();
    let total = raw.iter().sum::<i64>() + rng.gen_range(0..=3);
    let terms = raw
        .into_iter()
        .map(|w| {
            let cycle = random_cycle(&mut rng, k);
            let unit = random_unit(&mut rng, cycle.len());
            DualBallTerm { weight: scalar::rat(w, total.max(1)), cycle, unit }
        })
        .collect();
    let cert = DualBallCertificate { terms };
    let y = cert.to_functional(k).expect("sampled cycles fit J_K");
    (y, cert)
}

/// A certified lower bound `lb_sq = y(w)² / ‖w‖²_J ≤ ‖y‖²_{J*}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualLowerBound {
    pub lb_sq: Root2Scalar,
    pub witness: JVector,
}

fn exact_ratio(y: &DualFunctional, x: &JVector) -> Option<Root2Scalar> {
    if x.is_zero() {
        return None;
    }
    let num = eval_functional(y, x).expect("matching K").square();
    let den = james_norm_sq(x).0;
    Some(num.scale(&den.recip()))
}

fn float_ratio(yf: &[f64], x: &[f64]) -> f64 {
    let n = james_norm_sq_f64(x);
    if n <= 1e-300 {
        return 0.0;
    }
    let v: f64 = yf.iter().zip(x).map(|(a, b)| a * b).sum();
    v * v / n
}

fn coordinate_ascent(yf: &[f64], mut x: Vec<f64>, max_evals: usize) -> Vec<f64> {
    let mut best = float_ratio(yf, &x);
    let mut evals = 1;
    let mut step = 0.5;
    while step > 1.0 / 256.0 && evals < max_evals {
        let mut improved = false;
        for j in 0..x.len() {
            for delta in [step, -step] {
                let old = x[j];
                x[j] = old + delta;
                let r = float_ratio(yf, &x);
                evals += 1;
                if r > best * (1.0 + 1e-12) {
                    best = r;
                    improved = true;
                } else {
                    x[j] = old;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    x
}

/// Certified lower bound on `‖y‖²_{J*}`.
///
/// Tries every `e_j` and `d_j`, then `budget` float coordinate-ascent restarts
/// (restart `r` draws from its own stream of `seed`). Each candidate is
/// snapped to rationals and re-scored exactly; the bound returned is always
/// `y(w)²/‖w‖²` for the returned witness.
pub fn dual_norm_lower_bound(y: &DualFunctional, budget: usize, seed: u64) -> DualLowerBound {
    let k = y.k();
    if y.is_zero() {
        return DualLowerBound { lb_sq: Root2Scalar::zero(), witness: JVector::zero(k) };
    }
    let mut candidates: Vec<JVector> = Vec::new();
    for j in 0..=k {
        candidates.push(JVector::e(j, k).expect("in range"));
        candidates.push(JVector::d(j, k).expect("in range"));
    }
    let yf: Vec<f64> = y.coeffs().iter().map(Root2Scalar::to_f64).collect();
    for r in 0..budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let start: Vec<f64> = if r == 0 {
            yf.iter().map(|c| c.signum()).collect()
        } else {
            (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let x = coordinate_ascent(&yf, start, 60 * (k + 1));
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
        candidates.push(JVector::new(
            x.iter().map(|v| scalar::snap_f64(v / scale, 1_000_000)).collect(),
        ));
    }
    let mut best: Option<DualLowerBound> = None;
    for w in candidates {
        if let Some(lb) = exact_ratio(y, &w) {
            if best.as_ref().is_none_or(|b| lb > b.lb_sq) {
                best = Some(DualLowerBound { lb_sq: lb, witness: w });
            }
        }
    }
    best.expect("e_0 is always a candidate")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn zero_functional_evaluates_to_zero() {
        let x = JVector::from_ints(&[3, -1, 4]);
        assert!(eval_functional(&DualFunctional::zero(2), &x).unwrap().is_zero());
    }

    #[test]
    fn e_star_on_d() {
        for p in 0..4 {
            for n in 0..4 {
                let v = eval_functional(
                    &DualFunctional::e_star(p, 3).unwrap(),
                    &JVector::d(n, 3).unwrap(),
                )
                .unwrap();
                let want = if p <= n { int(1) } else { int(0) };
                assert_eq!(v, Root2Scalar::from_rational(want));
            }
        }
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        assert!(eval_functional(&DualFunctional::zero(2), &JVector::zero(3)).is_err());
    }

    #[test]
    fn single_term_certificate_on_e0() {
        let cert = DualBallCertificate {
            terms: vec![DualBallTerm {
                weight: int(1),
                cycle: Cycle::from_indices(&[0, 1]).unwrap(),
                unit: vec![int(1), int(0)],
            }],
        };
        assert!(cert.is_valid());
        let y = cert.to_functional(1).unwrap();
        let v = eval_functional(&y, &JVector::e(0, 1).unwrap()).unwrap();
        assert_eq!(v, Root2Scalar::new(int(0), rat(1, 2)));
    }

    #[test]
    fn pythagorean_term_in_j0() {
        let cert = DualBallCertificate {
            terms: vec![DualBallTerm {
                weight: int(1),
                cycle: Cycle::new(vec![Slot::Coord(0), Slot::Virtual]).unwrap(),
                unit: vec![rat(3, 5), rat(-4, 5)],
            }],
        };
        assert!(cert.is_valid());
        let y = cert.to_functional(0).unwrap();
        let v = eval_functional(&y, &JVector::e(0, 0).unwrap()).unwrap();
        assert!(v.square() <= Root2Scalar::one());
        // (3/5 + 4/5)/√2 = 7/(5√2)
        assert_eq!(v, Root2Scalar::new(int(0), rat(7, 10)));
    }

    #[test]
    fn invalid_certificates_are_rejected() {
        let over = DualBallCertificate {
            terms: vec![DualBallTerm {
                weight: int(1),
                cycle: Cycle::from_indices(&[0, 1]).unwrap(),
                unit: vec![int(1), rat(1, 10)],
            }],
        };
        assert!(!over.is_valid());
        let heavy = DualBallCertificate {
            terms: vec![
                DualBallTerm {
                    weight: rat(2, 3),
                    cycle: Cycle::from_indices(&[0]).unwrap(),
                    unit: vec![int(1)],
                };
                2
            ],
        };
        assert!(!heavy.is_valid());
    }

    #[test]
    fn empty_sample_is_zero() {
        let (y, cert) = dual_ball_sample(1, 4, 0);
        assert!(y.is_zero());
        assert!(cert.terms.is_empty());
    }

    #[test]
    fn sampler_is_deterministic_and_certified() {
        for seed in 0..50 {
            let (y, cert) = dual_ball_sample(seed, 6, 3);
            assert!(cert.is_valid());
            assert_eq!(dual_ball_sample(seed, 6, 3).0, y);
            for i in 0..=6 {
                let v = eval_functional(&y, &JVector::e(i, 6).unwrap()).unwrap();
                assert!(v.square() <= Root2Scalar::one());
            }
        }
    }

    #[test]
    fn sampled_functionals_are_contractions() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..40 {
            let k = rng.gen_range(0..7);
            let (y, _) = dual_ball_sample(seed, k, rng.gen_range(1..4));
            for _ in 0..25 {
                let x = JVector::new(
                    (0..=k).map(|_| rat(rng.gen_range(-9..=9), rng.gen_range(1..=4))).collect(),
                );
                let lhs = eval_functional(&y, &x).unwrap().square();
                assert!(lhs <= james_norm_sq(&x).0, "seed {seed}: {lhs} vs {x}");
            }
        }
    }

    #[test]
    fn lower_bound_examples() {
        let y = DualFunctional::e_star(2, 4).unwrap();
        let lb = dual_norm_lower_bound(&y, 2, 0);
        assert_eq!(lb.lb_sq, Root2Scalar::one());

        let lb = dual_norm_lower_bound(&DualFunctional::zero(3), 2, 0);
        assert!(lb.lb_sq.is_zero());
        assert!(lb.witness.is_zero());

        let y = DualFunctional::e_star(0, 0).unwrap().scale(&int(2));
        let lb = dual_norm_lower_bound(&y, 1, 0);
        assert_eq!(lb.lb_sq, Root2Scalar::from_rational(int(4)));
        assert_eq!(lb.witness, JVector::e(0, 0).unwrap());
    }

    #[test]
    fn lower_bound_replays_and_stays_below_certified_ball() {
        for seed in 0..10 {
            let (y, _) = dual_ball_sample(seed, 4, 2);
            let lb = dual_norm_lower_bound(&y, 3, seed);
            if !y.is_zero() {
                let replay = eval_functional(&y, &lb.witness)
                    .unwrap()
                    .square()
                    .scale(&james_norm_sq(&lb.witness).0.recip());
                assert_eq!(replay, lb.lb_sq);
            }
            assert!(lb.lb_sq <= Root2Scalar::one());
        }
    }
}
