//! The atomic measure space induced by a basis of `J_K`.
//!
//! Atoms are the basis vectors `ω_0, …, ω_K`. With
//! `d = Σ_j 2^{−j−1}|d_j|` and `d* = Σ_j 2^{−j−1}|e*_j|` (moduli taken in
//! basis coordinates) the weights are `μ({ω_i}) = γ*_i(d)·d*(ω_i)/d*(d)`, and
//!
//! ```text
//! π(x)   = Σ_i d*(d)/γ*_i(d) · γ*_i(x) · χ_i
//! π*(x*) = Σ_i d*(d)/d*(ω_i) · x*(ω_i) · χ_i
//! ```
//!
//! so that `∫ π*(x*)π(x) dμ = x*(x)·d*(d)`. Only functionals with rational
//! values on the atoms are admitted, which keeps every integral in ℚ.

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{modulus_functional, modulus_vector, Basis};
use crate::error::{Error, Result};
use crate::james::{eval_functional, DualFunctional, JVector};
use crate::report::{Check, VerificationReport};
use crate::scalar::{self, Rational};

/// Largest `K` for which atom subsets are enumerated exhaustively.
pub const EXHAUSTIVE_SIGMA_MAX_K: usize = 16;

/// A function on the atoms, `Σ_i values[i]·χ_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepFunction {
    #[serde(with = "scalar::serde_rational_vec")]
    values: Vec<Rational>,
}

impl StepFunction {
    pub fn new(values: Vec<Rational>) -> Self {
        Self { values }
    }

    pub fn zero(k: usize) -> Self {
        Self::constant(k, Rational::zero())
    }

    pub fn constant(k: usize, c: Rational) -> Self {
        Self { values: vec![c; k + 1] }
    }

    /// `χ_i`.
    pub fn indicator(i: usize, k: usize) -> Result<Self> {
        if i > k {
            return Err(Error::IndexOutOfRange { index: i, k });
        }
        let mut values = vec![Rational::zero(); k + 1];
        values[i] = Rational::one();
        Ok(Self { values })
    }

    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn abs(&self) -> Self {
        Self { values: self.values.iter().map(Signed::abs).collect() }
    }

    pub fn mul(&self, other: &StepFunction) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect() }
    }

    pub fn sup_norm(&self) -> Rational {
        self.values.iter().map(Signed::abs).max().unwrap_or_else(Rational::zero)
    }
}

/// A set of atoms, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomSet(Vec<usize>);

impl AtomSet {
    pub fn new(mut atoms: Vec<usize>) -> Self {
        atoms.sort_unstable();
        atoms.dedup();
        Self(atoms)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn all(k: usize) -> Self {
        Self((0..=k).collect())
    }

    /// Bit `i` of `mask` selects atom `i`.
    pub fn from_mask(mask: u64, k: usize) -> Self {
        Self((0..=k).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn atoms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Either every subset of `Ω` (small `K`) or a deterministic sample that
/// always includes the singletons and the prefixes of atoms sorted by weight.
pub fn sigma_family(model: &MeasureSpaceModel, samples: usize, seed: u64) -> Vec<AtomSet> {
    let k = model.k();
    if k <= EXHAUSTIVE_SIGMA_MAX_K {
        return (0..1u64 << (k + 1)).map(|m| AtomSet::from_mask(m, k)).collect();
    }
    let mut out = vec![AtomSet::empty()];
    out.extend((0..=k).map(|i| AtomSet(vec![i])));
    let mut by_weight: Vec<usize> = (0..=k).collect();
    by_weight.sort_by(|&a, &b| model.mu[a].cmp(&model.mu[b]).then(a.cmp(&b)));
    out.extend((1..=k + 1).map(|len| AtomSet::new(by_weight[..len].to_vec())));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..samples).map(|_| AtomSet::new((0..=k).filter(|_| rng.gen_bool(0.5)).collect())));
    out
}

/// The measure space of a basis, with everything needed for `π` and `π*`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MeasureSpaceModel {
    pub basis: Basis,
    pub d: JVector,
    /// Coefficients of `d*` over `e*_j`.
    #[serde(with = "scalar::serde_rational_vec")]
    pub d_star: Vec<Rational>,
    #[serde(with = "scalar::serde_rational")]
    pub d_star_d: Rational,
    #[serde(with = "scalar::serde_rational_vec")]
    pub mu: Vec<Rational>,
    /// `γ*_i(d)`.
    #[serde(with = "scalar::serde_rational_vec")]
    pub gamma_d: Vec<Rational>,
    /// `d*(ω_i)`.
    #[serde(with = "scalar::serde_rational_vec")]
    pub d_star_omega: Vec<Rational>,
    /// `|e*_j|(|d_{j'}|)` indexed `[j][j']`.
    #[serde(with = "scalar::serde_rational_matrix")]
    pub moduli_pairing: Vec<Vec<Rational>>,
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds the model and checks `μ(Ω) = 1` and `d*(d) ≥ 1/4` before
/// returning.
pub fn build(basis: &Basis) -> Result<MeasureSpaceModel> {
    let k = basis.k();
    let n = k + 1;
    let mut abs_d = Vec::with_capacity(n);
    let mut abs_e = Vec::with_capacity(n);
    for j in 0..n {
        abs_d.push(modulus_vector(basis, &JVector::d(j, k)?)?);
        let e = modulus_functional(basis, &DualFunctional::e_star(j, k)?)?;
        abs_e.push(e.rational_coeffs().ok_or(Error::IrrationalFunctional { atom: j })?);
    }
    let mut d = vec![Rational::zero(); n];
    let mut d_star = vec![Rational::zero(); n];
    for j in 0..n {
        let w = scalar::pow2(-(j as i64) - 1);
        for (t, v) in d.iter_mut().zip(abs_d[j].coeffs()) {
            *t += &w * v;
        }
        for (t, v) in d_star.iter_mut().zip(&abs_e[j]) {
            *t += &w * v;
        }
    }
    let moduli_pairing: Vec<Vec<Rational>> = abs_e
        .iter()
        .map(|e| abs_d.iter().map(|x| dot(e, x.coeffs())).collect())
        .collect();
    let d = JVector::new(d);
    let d_star_d = dot(&d_star, d.coeffs());
    let gamma_d = basis.dual().coords(&d)?;
    let d_star_omega: Vec<Rational> = basis.columns().iter().map(|c| dot(&d_star, c)).collect();
    for i in 0..n {
        if !gamma_d[i].is_positive() {
            return Err(Error::DegenerateAtom { atom: i, what: "gamma*_i(d)" });
        }
        if !d_star_omega[i].is_positive() {
            return Err(Error::DegenerateAtom { atom: i, what: "d*(omega_i)" });
        }
    }
    let mu: Vec<Rational> = (0..n).map(|i| &gamma_d[i] * &d_star_omega[i] / &d_star_d).collect();
    if mu.iter().sum::<Rational>() != Rational::one() {
        return Err(Error::StructureViolation("mu(Omega) != 1".into()));
    }
    if d_star_d < scalar::rat(1, 4) {
        return Err(Error::StructureViolation("d*(d) < 1/4".into()));
    }
    Ok(MeasureSpaceModel {
        basis: basis.clone(),
        d,
        d_star,
        d_star_d,
        mu,
        gamma_d,
        d_star_omega,
        moduli_pairing,
    })
}

impl MeasureSpaceModel {
    pub fn k(&self) -> usize {
        self.basis.k()
    }

    pub fn d_star_functional(&self) -> DualFunctional {
        DualFunctional::from_rationals(self.d_star.clone())
    }

    /// `max_{j,j'} |e*_j|(|d_{j'}|)`, an upper bound for `d*(d)`.
    pub fn max_moduli_pairing(&self) -> Rational {
        self.moduli_pairing.iter().flatten().max().cloned().expect("nonempty")
    }

    /// `f_n = π(d_n)`.
    pub fn f(&self, n: usize) -> Result<StepFunction> {
        pi(self, &JVector::d(n, self.k())?)
    }

    /// `g_p = π*(e*_p)`.
    pub fn g(&self, p: usize) -> Result<StepFunction> {
        pi_star(self, &DualFunctional::e_star(p, self.k())?)
    }
}

pub fn pi(model: &MeasureSpaceModel, x: &JVector) -> Result<StepFunction> {
    let coords = model.basis.dual().coords(x)?;
    Ok(StepFunction::new(
        coords
            .iter()
            .zip(&model.gamma_d)
            .map(|(c, g)| &model.d_star_d / g * c)
            .collect(),
    ))
}

/// Errors with [`Error::IrrationalFunctional`] if `x*(ω_i) ∉ ℚ` for some atom.
pub fn pi_star(model: &MeasureSpaceModel, y: &DualFunctional) -> Result<StepFunction> {
    if y.k() != model.k() {
        return Err(Error::DimensionMismatch { expected: model.k(), found: y.k() });
    }
    let values = model.basis.values_of(y)?;
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let v = v.as_rational().ok_or(Error::IrrationalFunctional { atom: i })?;
        out.push(&model.d_star_d / &model.d_star_omega[i] * v);
    }
    Ok(StepFunction::new(out))
}

/// `Σ_{i∈σ} h(ω_i)·μ({ω_i})`.
pub fn integrate_over(model: &MeasureSpaceModel, h: &StepFunction, sigma: &AtomSet) -> Result<Rational> {
    let k = model.k();
    if h.k() != k {
        return Err(Error::DimensionMismatch { expected: k, found: h.k() });
    }
    let mut total = Rational::zero();
    for &i in sigma.atoms() {
        if i > k {
            return Err(Error::IndexOutOfRange { index: i, k });
        }
        total += &h.values[i] * &model.mu[i];
    }
    Ok(total)
}

pub fn integral(model: &MeasureSpaceModel, h: &StepFunction) -> Result<Rational> {
    integrate_over(model, h, &AtomSet::all(model.k()))
}

pub fn l1_norm(model: &MeasureSpaceModel, h: &StepFunction) -> Result<Rational> {
    integral(model, &h.abs())
}

pub fn measure_of(model: &MeasureSpaceModel, sigma: &AtomSet) -> Result<Rational> {
    integrate_over(model, &StepFunction::constant(model.k(), Rational::one()), sigma)
}

/// `M[n][p] = ∫ f_n g_p dμ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductMatrix {
    #[serde(with = "scalar::serde_rational_matrix")]
    pub entries: Vec<Vec<Rational>>,
}

impl ProductMatrix {
    pub fn get(&self, n: usize, p: usize) -> &Rational {
        &self.entries[n][p]
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn to_csv(&self) -> String {
        let n = self.entries.len();
        let mut out = String::from("n");
        for p in 0..n {
            out.push_str(&format!(",p{p}"));
        }
        out.push('\n');
        for (i, row) in self.entries.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push(',');
                out.push_str(&scalar::format_rational(v));
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates every `f_n g_p`, then checks the result against
/// `d*(d)·[p ≤ n]`.
pub fn product_matrix(model: &MeasureSpaceModel) -> Result<ProductMatrix> {
    let n = model.k() + 1;
    let f: Vec<StepFunction> = (0..n).map(|i| model.f(i)).collect::<Result<_>>()?;
    let g: Vec<StepFunction> = (0..n).map(|p| model.g(p)).collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(n);
    for (i, fi) in f.iter().enumerate() {
        let mut row = Vec::with_capacity(n);
        for (p, gp) in g.iter().enumerate() {
            let v = integral(model, &fi.mul(gp))?;
            let expected = if p <= i { model.d_star_d.clone() } else { Rational::zero() };
            if v != expected {
                return Err(Error::StructureViolation(format!(
                    "M[{i}][{p}] = {} but expected {}",
                    scalar::format_rational(&v),
                    scalar::format_rational(&expected)
                )));
            }
            row.push(v);
        }
        entries.push(row);
    }
    Ok(ProductMatrix { entries })
}

/// Outcome of the small-set continuity scan for the family `f_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuityScan {
    #[serde(with = "scalar::serde_rational")]
    pub b_hat: Rational,
    #[serde(with = "scalar::serde_rational")]
    pub eps: Rational,
    pub sets_checked: usize,
    /// `(n, σ)` with `μ(σ) < ε/(B̂·2^n)` but `∫_σ |f_n| ≥ ε`; at most 16 kept.
    pub violations: Vec<(usize, AtomSet)>,
    pub violation_count: usize,
}

/// Checks `∫_σ |f_n| dμ < ε` for every `σ` with `μ(σ) < ε/(B̂·2^n)`.
pub fn small_set_continuity(
    model: &MeasureSpaceModel,
    b_hat: &Rational,
    eps: &Rational,
    seed: u64,
) -> Result<ContinuityScan> {
    let k = model.k();
    let n = k + 1;
    // w[m][i] = |f_m(ω_i)|·μ_i
    let w: Vec<Vec<Rational>> = (0..n)
        .map(|m| {
            let f = model.f(m)?;
            Ok(f.values.iter().zip(&model.mu).map(|(v, mu)| v.abs() * mu).collect())
        })
        .collect::<Result<_>>()?;
    let thresholds: Vec<Rational> =
        (0..n).map(|m| eps / (b_hat * scalar::pow2(m as i64))).collect();
    let mut scan = ContinuityScan {
        b_hat: b_hat.clone(),
        eps: eps.clone(),
        sets_checked: 0,
        violations: Vec::new(),
        violation_count: 0,
    };
    let record = |scan: &mut ContinuityScan, m: usize, sigma: AtomSet| {
        scan.violation_count += 1;
        if scan.violations.len() < 16 {
            scan.violations.push((m, sigma));
        }
    };
    if k <= EXHAUSTIVE_SIGMA_MAX_K {
        // Gray-code walk: one atom toggles per step, sums update in place.
        let mut mask = 0u64;
        let mut measure = Rational::zero();
        let mut sums = vec![Rational::zero(); n];
        scan.sets_checked = 1;
        for g in 1u64..1 << n {
            let bit = g.trailing_zeros() as usize;
            mask ^= 1 << bit;
            let adding = mask >> bit & 1 == 1;
            if adding {
                measure += &model.mu[bit];
            } else {
                measure -= &model.mu[bit];
            }
            for (s, wm) in sums.iter_mut().zip(&w) {
                if adding {
                    *s += &wm[bit];
                } else {
                    *s -= &wm[bit];
                }
            }
            scan.sets_checked += 1;
            for m in 0..n {
                if measure < thresholds[m] && sums[m] >= *eps {
                    record(&mut scan, m, AtomSet::from_mask(mask, k));
                }
            }
        }
    } else {
        for sigma in sigma_family(model, 4096, seed) {
            let measure = measure_of(model, &sigma)?;
            scan.sets_checked += 1;
            for m in 0..n {
                if measure < thresholds[m] {
                    let s: Rational = sigma.atoms().iter().map(|&i| &w[m][i]).sum();
                    if s >= *eps {
                        record(&mut scan, m, sigma.clone());
                    }
                }
            }
        }
    }
    Ok(scan)
}

/// `max_n ‖f_n‖_∞·2^{−n}`, the certified stand-in for `B` in the bound
/// `‖f_n‖_∞ ≤ B·2^n`.
pub fn sup_norm_constant(model: &MeasureSpaceModel) -> Result<Rational> {
    (0..=model.k())
        .map(|n| Ok(model.f(n)?.sup_norm() * scalar::pow2(-(n as i64))))
        .try_fold(Rational::zero(), |acc, v: Result<Rational>| Ok(acc.max(v?)))
}

fn random_vector(rng: &mut ChaCha8Rng, k: usize) -> JVector {
    JVector::new((0..=k).map(|_| scalar::rat(rng.gen_range(-9..=9), rng.gen_range(1..=6))).collect())
}

fn random_rational_functional(rng: &mut ChaCha8Rng, k: usize) -> DualFunctional {
    DualFunctional::from_rationals(
        (0..=k).map(|_| scalar::rat(rng.gen_range(-9..=9), rng.gen_range(1..=6))).collect(),
    )
}

struct SampleOutcome {
    pairing: bool,
    pi_l1: bool,
    pi_star_l1: bool,
}

fn check_sample(model: &MeasureSpaceModel, x: &JVector, y: &DualFunctional) -> Result<SampleOutcome> {
    let px = pi(model, x)?;
    let py = pi_star(model, y)?;
    let yx = eval_functional(y, x)?;
    let pairing = yx.scale(&model.d_star_d) == integral(model, &py.mul(&px))?;
    let abs_x = modulus_vector(&model.basis, x)?;
    let pi_l1 = l1_norm(model, &px)? == dot(&model.d_star, abs_x.coeffs());
    let abs_y = modulus_functional(&model.basis, y)?;
    let pi_star_l1 = eval_functional(&abs_y, &model.d)? == l1_norm(model, &py)?;
    Ok(SampleOutcome { pairing, pi_l1, pi_star_l1 })
}

fn count_line(name: &str, failures: usize, total: usize) -> Check {
    Check::new(name, failures == 0, format!("{failures} failures in {total} samples"))
}

/// Exact checks of the measure-space identities on deterministic samples.
///
/// Sample `i` draws from stream `i` of `seed`. Bounds that depend on an
/// unconditional constant are reported with the certified stand-in
/// `B̂ = max_n ‖f_n‖_∞·2^{−n}` rather than asserted.
pub fn check_identities(model: &MeasureSpaceModel, sample_count: usize, seed: u64) -> Result<VerificationReport> {
    let k = model.k();
    let mut report = VerificationReport::default();

    let mut samples: Vec<(JVector, DualFunctional)> = vec![(JVector::zero(k), DualFunctional::zero(k))];
    for n in 0..=k {
        samples.push((JVector::d(n, k)?, DualFunctional::e_star(n, k)?));
    }
    samples.extend((0..sample_count).map(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        (random_vector(&mut rng, k), random_rational_functional(&mut rng, k))
    }));
    let outcomes: Vec<SampleOutcome> = samples
        .par_iter()
        .map(|(x, y)| check_sample(model, x, y))
        .collect::<Result<_>>()?;
    let total = outcomes.len();
    report.push(count_line("pairing identity", outcomes.iter().filter(|o| !o.pairing).count(), total));
    report.push(count_line("pi L1 norm", outcomes.iter().filter(|o| !o.pi_l1).count(), total));
    report.push(count_line("pi* L1 norm", outcomes.iter().filter(|o| !o.pi_star_l1).count(), total));

    let mass: Rational = model.mu.iter().sum();
    report.push(Check::new(
        "total mass",
        mass.is_one() && model.mu.iter().all(Signed::is_positive),
        format!("mu(Omega) = {}", scalar::format_rational(&mass)),
    ));
    let quarter = scalar::rat(1, 4);
    let upper = model.max_moduli_pairing();
    report.push(Check::new(
        "d*(d) bounds",
        model.d_star_d >= quarter && model.d_star_d <= upper,
        format!(
            "1/4 <= d*(d) = {} <= {}",
            scalar::format_rational(&model.d_star_d),
            scalar::format_rational(&upper)
        ),
    ));
    let double_sum: Rational = (0..=k)
        .flat_map(|j| (0..=k).map(move |jp| (j, jp)))
        .map(|(j, jp)| scalar::pow2(-(j as i64) - (jp as i64) - 2) * &model.moduli_pairing[j][jp])
        .sum();
    report.push(Check::new(
        "d*(d) double sum",
        double_sum == model.d_star_d,
        format!("sum = {}", scalar::format_rational(&double_sum)),
    ));
    match product_matrix(model) {
        Ok(_) => report.push(Check::new("product matrix", true, "M[n][p] = d*(d)[p <= n]")),
        Err(e) => report.push(Check::new("product matrix", false, e.to_string())),
    }

    let b_f = sup_norm_constant(model)?;
    let b_g = (0..=k)
        .map(|p| Ok(model.g(p)?.sup_norm() * scalar::pow2(-(p as i64))))
        .try_fold(Rational::zero(), |acc, v: Result<Rational>| Ok(acc.max(v?)))?;
    report.push(Check::new(
        "sup norms",
        true,
        format!(
            "max ||f_n||_inf 2^-n = {}, max ||g_p||_inf 2^-p = {}",
            scalar::format_rational(&b_f),
            scalar::format_rational(&b_g)
        ),
    ));
    for eps in [scalar::rat(1, 80), scalar::rat(1, 4), scalar::int(1)] {
        let scan = small_set_continuity(model, &b_f, &eps, seed)?;
        report.push(Check::new(
            format!("small-set continuity eps={}", scalar::format_rational(&eps)),
            scan.violation_count == 0,
            format!("{} violations over {} sets", scan.violation_count, scan.sets_checked),
        ));
    }
    Ok(report)
}

/// JSON export of a model with its product matrix.
#[derive(Clone, Debug, Serialize)]
pub struct ModelExport<'a> {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(flatten)]
    pub model: &'a MeasureSpaceModel,
    pub product_matrix: ProductMatrix,
}

pub fn export(model: &MeasureSpaceModel) -> Result<ModelExport<'_>> {
    Ok(ModelExport { k: model.k(), model, product_matrix: product_matrix(model)? })
}
