//! Metastable convergence and bounded fluctuations, specialised to the
//! sequences `n ↦ ∫_σ f_n g_p dμ` and `p ↦ ∫_σ f_n g_p dμ` of a measure-space
//! model.
//!
//! A sequence has bounded fluctuations with bound `b` for `ε` when, for any
//! start `n` and any nondecreasing `F`, some `m ∈ [n, F^b(n)]` has
//! `|a_k − a_{k'}| < ε` for all `k, k' ∈ [m, F(m)]`.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{
    integral, l1_norm, sigma_family, small_set_continuity, AtomSet, MeasureSpaceModel,
    ProductMatrix, StepFunction,
};
use crate::report::Check;
use crate::scalar::{self, Rational};

/// A total map `ℕ → ℕ`, saturating at `u64::MAX`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IndexFunction {
    /// `table[n]` below the horizon, `max(floor, n)` beyond it.
    Table { table: Vec<u64>, floor: u64 },
    /// `mul·n + add`.
    Affine { mul: u64, add: u64 },
}

impl IndexFunction {
    pub fn table(table: Vec<u64>) -> Self {
        Self::Table { table, floor: 0 }
    }

    pub fn affine(mul: u64, add: u64) -> Self {
        Self::Affine { mul, add }
    }

    pub fn eval(&self, n: u64) -> u64 {
        match self {
            Self::Table { table, floor } => match usize::try_from(n).ok().and_then(|i| table.get(i)) {
                Some(&v) => v,
                None => n.max(*floor),
            },
            Self::Affine { mul, add } => n.saturating_mul(*mul).saturating_add(*add),
        }
    }

    /// `F^times(n)`, stopping early at a fixed point.
    pub fn iterate(&self, mut n: u64, times: u64) -> u64 {
        for _ in 0..times {
            let next = self.eval(n);
            if next == n {
                break;
            }
            n = next;
        }
        n
    }
}

/// `F'(n) = max_{n' ≤ n} F(n')`.
pub fn monotonize(f: &IndexFunction) -> IndexFunction {
    match f {
        IndexFunction::Table { table, floor } => {
            let mut running = 0u64;
            let table: Vec<u64> = table
                .iter()
                .map(|&v| {
                    running = running.max(v);
                    running
                })
                .collect();
            IndexFunction::Table { floor: running.max(*floor), table }
        }
        IndexFunction::Affine { .. } => f.clone(),
    }
}

/// A rational sequence, constant after its last tabulated value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SequenceRepr", into = "SequenceRepr")]
pub struct SequenceOracle {
    values: Vec<Rational>,
}

#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct SequenceRepr(#[serde(with = "scalar::serde_rational_vec")] Vec<Rational>);

impl TryFrom<SequenceRepr> for SequenceOracle {
    type Error = Error;
    fn try_from(r: SequenceRepr) -> Result<Self> {
        Self::new(r.0)
    }
}

impl From<SequenceOracle> for SequenceRepr {
    fn from(s: SequenceOracle) -> Self {
        SequenceRepr(s.values)
    }
}

impl SequenceOracle {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("a sequence needs at least one value".into()));
        }
        Ok(Self { values })
    }

    /// Last tabulated index; the sequence is constant from here on.
    pub fn horizon(&self) -> u64 {
        self.values.len() as u64 - 1
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn eval(&self, n: u64) -> &Rational {
        &self.values[n.min(self.horizon()) as usize]
    }

    /// Tabulated indices of `[start, end]`; the constant tail adds nothing
    /// new past the horizon.
    fn scan_range(&self, start: u64, end: u64) -> std::ops::RangeInclusive<u64> {
        start.min(self.horizon())..=end.min(self.horizon())
    }
}

/// Greedy count of `ε`-jumps on `[start, end]`: each time
/// `|a_j − a_anchor| ≥ ε` the count goes up and `j` becomes the anchor.
pub fn count_fluctuations(seq: &SequenceOracle, eps: &Rational, start: u64, end: u64) -> usize {
    if end < start {
        return 0;
    }
    let mut anchor = seq.eval(start);
    let mut count = 0;
    for j in seq.scan_range(start, end) {
        let v = seq.eval(j);
        if (v - anchor).abs() >= *eps {
            count += 1;
            anchor = v;
        }
    }
    count
}

/// `[m, F(m)]` on which the sequence is `ε`-stable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableInterval {
    pub m: u64,
    pub end: u64,
    /// The `ε/2`-jumps taken before settling, i.e. `m_1, …, m_i`.
    pub jumps: Vec<u64>,
}

impl StableInterval {
    pub fn budget_used(&self) -> usize {
        self.jumps.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityOutcome {
    Stable(StableInterval),
    /// `budget` jumps were taken and the next window still jumps.
    BudgetExceeded { jumps: Vec<u64> },
}

impl StabilityOutcome {
    pub fn is_stable(&self) -> bool {
        matches!(self, Self::Stable(_))
    }
}

/// Direct scan: `|a_k − a_{k'}| < ε` for all `k, k' ∈ [start, end]`.
pub fn is_stable_on(seq: &SequenceOracle, eps: &Rational, start: u64, end: u64) -> bool {
    let mut range = seq.scan_range(start, end.max(start));
    let first = range.next().map(|j| seq.eval(j)).expect("nonempty range");
    let (lo, hi) = range.fold((first, first), |(lo, hi), j| {
        let v = seq.eval(j);
        (lo.min(v), hi.max(v))
    });
    hi - lo < *eps
}

/// Iterates `m_0 = n`, `m_{i+1}` = least `m ∈ [m_i, F(m_i)]` with
/// `|a_{m_i} − a_m| ≥ ε/2`. When no such `m` exists the window
/// `[m_i, F(m_i)]` is `ε`-stable, which is re-verified by direct scan.
/// At most `budget` jumps are taken, so a returned `m` is `≤ F^budget(n)`.
///
/// The jumps are exactly the greedy `ε/2`-jumps from `n`, so the search
/// succeeds whenever `count_fluctuations(seq, ε/2, n, F^{budget+1}(n)) ≤ budget`.
pub fn find_stable_interval(
    seq: &SequenceOracle,
    eps: &Rational,
    f: &IndexFunction,
    n: u64,
    budget: usize,
) -> Result<StabilityOutcome> {
    if !eps.is_positive() {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let half = eps / scalar::int(2);
    let mut m = n;
    let mut jumps = Vec::new();
    loop {
        let end = f.eval(m).max(m);
        let anchor = seq.eval(m);
        let next = seq
            .scan_range(m, end)
            .find(|&j| (seq.eval(j) - anchor).abs() >= half);
        match next {
            None => {
                if !is_stable_on(seq, eps, m, end) {
                    return Err(Error::StructureViolation(format!(
                        "window [{m}, {end}] failed the direct stability scan"
                    )));
                }
                return Ok(StabilityOutcome::Stable(StableInterval { m, end, jumps }));
            }
            Some(j) => {
                if jumps.len() == budget {
                    return Ok(StabilityOutcome::BudgetExceeded { jumps });
                }
                jumps.push(j);
                m = j;
            }
        }
    }
}

/// `⌊8·B̂²·⌈1/ε⌉²⌋`.
pub fn fluctuation_budget(b_hat: &Rational, eps: &Rational) -> Result<usize> {
    if !eps.is_positive() || !b_hat.is_positive() {
        return Err(Error::Domain("epsilon and B must be positive".into()));
    }
    let c = Rational::from_integer(scalar::ceil_recip(eps));
    let b: BigInt = (b_hat * b_hat * &c * &c * scalar::int(8)).floor().to_integer();
    b.to_usize().ok_or_else(|| Error::Domain("fluctuation budget too large".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessMode {
    /// Sequences `n ↦ ∫_σ f_n g_p dμ` for each fixed `p`.
    FixP,
    /// Sequences `p ↦ ∫_σ f_n g_p dμ` for each fixed `n`.
    FixN,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessFailure {
    pub sigma: AtomSet,
    pub fixed: usize,
    pub start: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub mode: HarnessMode,
    pub f: IndexFunction,
    pub budget: usize,
    pub sets: usize,
    pub runs: usize,
    pub max_budget_used: usize,
    /// First failures, at most 16.
    pub failures: Vec<HarnessFailure>,
    pub failure_count: usize,
}

/// Per-atom products `f_n(ω_i)·g_p(ω_i)·μ_i`, indexed `[n][p][i]`.
fn weighted_products(model: &MeasureSpaceModel) -> Result<Vec<Vec<Vec<Rational>>>> {
    let n = model.k() + 1;
    let f: Vec<StepFunction> = (0..n).map(|i| model.f(i)).collect::<Result<_>>()?;
    let g: Vec<StepFunction> = (0..n).map(|p| model.g(p)).collect::<Result<_>>()?;
    Ok(f.iter()
        .map(|fi| {
            g.iter()
                .map(|gp| {
                    fi.mul(gp).values().iter().zip(&model.mu).map(|(v, mu)| v * mu).collect()
                })
                .collect()
        })
        .collect())
}

/// Runs [`find_stable_interval`] with budget `8·B̂²·⌈1/ε⌉²` on every
/// sequence of the chosen mode, for every `σ` in the family and every
/// start index `0..=K`. Failures are reported, never asserted.
pub fn fluctuation_harness(
    model: &MeasureSpaceModel,
    b_hat: &Rational,
    eps: &Rational,
    f: &IndexFunction,
    mode: HarnessMode,
    sigmas: &[AtomSet],
) -> Result<HarnessReport> {
    let budget = fluctuation_budget(b_hat, eps)?;
    let size = model.k() + 1;
    let products = weighted_products(model)?;
    let per_sigma: Vec<(usize, usize, Vec<HarnessFailure>)> = sigmas
        .par_iter()
        .map(|sigma| {
            let mut runs = 0;
            let mut max_used = 0;
            let mut failures = Vec::new();
            let entry = |n: usize, p: usize| -> Rational {
                sigma.atoms().iter().map(|&i| &products[n][p][i]).sum()
            };
            for fixed in 0..size {
                let values: Vec<Rational> = (0..size)
                    .map(|t| match mode {
                        HarnessMode::FixP => entry(t, fixed),
                        HarnessMode::FixN => entry(fixed, t),
                    })
                    .collect();
                let seq = SequenceOracle::new(values)?;
                for start in 0..size as u64 {
                    runs += 1;
                    match find_stable_interval(&seq, eps, f, start, budget)? {
                        StabilityOutcome::Stable(iv) => max_used = max_used.max(iv.budget_used()),
                        StabilityOutcome::BudgetExceeded { .. } => failures.push(HarnessFailure {
                            sigma: sigma.clone(),
                            fixed,
                            start,
                        }),
                    }
                }
            }
            Ok((runs, max_used, failures))
        })
        .collect::<Result<_>>()?;
    let mut report = HarnessReport {
        mode,
        f: f.clone(),
        budget,
        sets: sigmas.len(),
        runs: 0,
        max_budget_used: 0,
        failures: Vec::new(),
        failure_count: 0,
    };
    for (runs, used, failures) in per_sigma {
        report.runs += runs;
        report.max_budget_used = report.max_budget_used.max(used);
        report.failure_count += failures.len();
        let room = 16usize.saturating_sub(report.failures.len());
        report.failures.extend(failures.into_iter().take(room));
    }
    Ok(report)
}

/// Each hypothesis clause of the fluctuation theorem evaluated against `B̂`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    #[serde(with = "scalar::serde_rational")]
    pub b_hat: Rational,
    #[serde(with = "scalar::serde_rational")]
    pub eps: Rational,
    /// `‖f_n‖_{L¹} = d*(|d_n|)`.
    #[serde(with = "scalar::serde_rational_vec")]
    pub f_l1: Vec<Rational>,
    /// `‖g_p‖_{L¹} = |e*_p|(d)`.
    #[serde(with = "scalar::serde_rational_vec")]
    pub g_l1: Vec<Rational>,
    pub clauses: Vec<Check>,
    pub harness: Vec<HarnessReport>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }
}

/// Index functions the fluctuation clauses are exercised with:
/// `n + 1`, `2n + 1`, and one that spans the whole model at once.
pub fn standard_index_functions(k: usize) -> Vec<IndexFunction> {
    vec![
        IndexFunction::affine(1, 1),
        IndexFunction::affine(2, 1),
        IndexFunction::affine(1, k as u64 + 1),
    ]
}

const HARNESS_SAMPLE_SEED: u64 = 0x5eed;

pub fn hypothesis_report(model: &MeasureSpaceModel, b_hat: &Rational, eps: &Rational) -> Result<HypothesisReport> {
    let k = model.k();
    let f_l1: Vec<Rational> = (0..=k).map(|n| l1_norm(model, &model.f(n)?)).collect::<Result<_>>()?;
    let g_l1: Vec<Rational> = (0..=k).map(|p| l1_norm(model, &model.g(p)?)).collect::<Result<_>>()?;
    let mut clauses = Vec::new();
    let over = |v: &[Rational]| v.iter().filter(|x| *x > b_hat).count();
    let worst = |v: &[Rational]| v.iter().max().map(scalar::format_rational).unwrap_or_default();
    clauses.push(Check::new(
        "L1 bound f_n",
        over(&f_l1) == 0,
        format!("max ||f_n||_1 = {}, {} of {} above B", worst(&f_l1), over(&f_l1), k + 1),
    ));
    clauses.push(Check::new(
        "L1 bound g_p",
        over(&g_l1) == 0,
        format!("max ||g_p||_1 = {}, {} of {} above B", worst(&g_l1), over(&g_l1), k + 1),
    ));
    let scan = small_set_continuity(model, b_hat, eps, HARNESS_SAMPLE_SEED)?;
    clauses.push(Check::new(
        "small-set continuity",
        scan.violation_count == 0,
        format!("{} violations over {} sets", scan.violation_count, scan.sets_checked),
    ));
    let sigmas = if k <= 8 {
        sigma_family(model, 0, HARNESS_SAMPLE_SEED)
    } else {
        let mut s = sigma_family(model, 0, HARNESS_SAMPLE_SEED);
        s.truncate(256);
        s
    };
    let mut harness = Vec::new();
    for mode in [HarnessMode::FixP, HarnessMode::FixN] {
        let mut failures = 0;
        let mut runs = 0;
        for f in standard_index_functions(k) {
            let r = fluctuation_harness(model, b_hat, eps, &f, mode, &sigmas)?;
            failures += r.failure_count;
            runs += r.runs;
            harness.push(r);
        }
        let name = match mode {
            HarnessMode::FixP => "bounded fluctuations (fixed p)",
            HarnessMode::FixN => "bounded fluctuations (fixed n)",
        };
        clauses.push(Check::new(name, failures == 0, format!("{failures} failures in {runs} runs")));
    }
    Ok(HypothesisReport { b_hat: b_hat.clone(), eps: eps.clone(), f_l1, g_l1, clauses, harness })
}

/// Indices with `m < s`, `q < l` and `|M[m][s] − M[l][q]| < 20ε`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FoundPair {
    pub m: usize,
    pub s: usize,
    pub q: usize,
    pub l: usize,
}

/// Exhaustive search for the conclusion of the fluctuation theorem in its
/// specialised form; returns the lexicographically least `(m, s, q, l)`.
pub fn conclusion_search(matrix: &ProductMatrix, eps: &Rational) -> Option<FoundPair> {
    let size = matrix.size();
    let bound = eps * scalar::int(20);
    for m in 0..size {
        for s in m + 1..size {
            for q in 0..size {
                for l in q + 1..size {
                    if (matrix.get(m, s) - matrix.get(l, q)).abs() < bound {
                        return Some(FoundPair { m, s, q, l });
                    }
                }
            }
        }
    }
    None
}

/// `min |M[m][s] − M[l][q]|` over `m < s`, `q < l`; `None` when `K = 0`.
pub fn minimum_gap(matrix: &ProductMatrix) -> Option<Rational> {
    let size = matrix.size();
    let mut best: Option<Rational> = None;
    for m in 0..size {
        for s in m + 1..size {
            for q in 0..size {
                for l in q + 1..size {
                    let g = (matrix.get(m, s) - matrix.get(l, q)).abs();
                    if best.as_ref().is_none_or(|b| g < *b) {
                        best = Some(g);
                    }
                }
            }
        }
    }
    best
}

/// `∫_σ f_n g_p dμ` for one entry, by direct integration.
pub fn sigma_entry(model: &MeasureSpaceModel, n: usize, p: usize, sigma: &AtomSet) -> Result<Rational> {
    crate::measure::integrate_over(model, &model.f(n)?.mul(&model.g(p)?), sigma)
}

/// `∫ f_n g_p dμ` over all of `Ω`.
pub fn full_entry(model: &MeasureSpaceModel, n: usize, p: usize) -> Result<Rational> {
    integral(model, &model.f(n)?.mul(&model.g(p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Basis;
    use crate::measure::{build, product_matrix};
    use crate::scalar::{int, rat};
    use proptest::prelude::*;

    fn seq(v: &[i64]) -> SequenceOracle {
        SequenceOracle::new(v.iter().map(|&x| int(x)).collect()).unwrap()
    }

    #[test]
    fn monotonize_examples() {
        let f = IndexFunction::table(vec![5, 3, 7]);
        let g = monotonize(&f);
        assert_eq!(g, IndexFunction::Table { table: vec![5, 5, 7], floor: 7 });
        assert_eq!(monotonize(&g), g);
        assert_eq!(g.eval(3), 7);
        assert_eq!(g.eval(100), 100);
        let inc = IndexFunction::table(vec![1, 2, 3]);
        assert_eq!(monotonize(&inc).eval(1), inc.eval(1));
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_fluctuations(&seq(&[3, 3, 3]), &rat(1, 2), 0, 10), 0);
        assert_eq!(count_fluctuations(&seq(&[0, 1, 0, 1, 0]), &rat(1, 2), 0, 4), 4);
        let eps = rat(1, 3);
        let rising = SequenceOracle::new((0..=6).map(|i| &eps * int(i)).collect()).unwrap();
        assert_eq!(count_fluctuations(&rising, &eps, 0, 6), 6);
    }

    #[test]
    fn constant_sequence_is_stable_at_start() {
        let out = find_stable_interval(&seq(&[2, 2, 2]), &rat(1, 4), &IndexFunction::affine(2, 1), 1, 0).unwrap();
        assert_eq!(out, StabilityOutcome::Stable(StableInterval { m: 1, end: 3, jumps: vec![] }));
    }

    #[test]
    fn staircase_needs_its_steps() {
        let s = seq(&[0, 1, 2, 3, 4, 5]);
        let f = IndexFunction::affine(1, 1);
        assert!(find_stable_interval(&s, &int(2), &f, 0, 5).unwrap().is_stable());
        assert!(matches!(
            find_stable_interval(&s, &int(2), &f, 0, 4).unwrap(),
            StabilityOutcome::BudgetExceeded { .. }
        ));
    }

    #[test]
    fn budget_formula() {
        assert_eq!(fluctuation_budget(&int(3), &rat(1, 4)).unwrap(), 1152);
        assert_eq!(fluctuation_budget(&rat(1, 3), &int(1)).unwrap(), 0);
        assert_eq!(fluctuation_budget(&int(2), &rat(1, 80)).unwrap(), 204800);
    }

    #[test]
    fn harness_examples() {
        let m = build(&Basis::canonical(3)).unwrap();
        let f = IndexFunction::affine(2, 1);
        for mode in [HarnessMode::FixP, HarnessMode::FixN] {
            let r = fluctuation_harness(&m, &int(3), &rat(1, 4), &f, mode, &[AtomSet::empty(), AtomSet::all(3)]).unwrap();
            assert_eq!(r.failure_count, 0);
        }
        assert_eq!(full_entry(&m, 2, 0).unwrap(), m.d_star_d);
        assert_eq!(sigma_entry(&m, 2, 0, &AtomSet::empty()).unwrap(), int(0));
    }

    #[test]
    fn hypothesis_l1_values() {
        let m = build(&Basis::canonical(2)).unwrap();
        let r = hypothesis_report(&m, &int(2), &rat(1, 80)).unwrap();
        for n in 0..=2 {
            let dn = crate::james::JVector::d(n, 2).unwrap();
            let want: Rational = m.d_star.iter().zip(dn.coeffs()).map(|(a, b)| a * b).sum();
            assert_eq!(r.f_l1[n], want);
        }
        assert!(r.clauses.iter().any(|c| c.name == "small-set continuity"));
    }

    #[test]
    fn conclusion_examples() {
        let m = build(&Basis::canonical(3)).unwrap();
        let pm = product_matrix(&m).unwrap();
        assert_eq!(conclusion_search(&pm, &rat(1, 80)), None);
        assert_eq!(conclusion_search(&pm, &int(1)), Some(FoundPair { m: 0, s: 1, q: 0, l: 1 }));
        assert_eq!(minimum_gap(&pm), Some(m.d_star_d.clone()));
        let pm0 = product_matrix(&build(&Basis::canonical(0)).unwrap()).unwrap();
        assert_eq!(conclusion_search(&pm0, &int(1)), None);
        assert_eq!(minimum_gap(&pm0), None);
    }

    proptest! {
        #[test]
        fn monotonize_dominates_and_is_idempotent(table in proptest::collection::vec(0u64..50, 1..20)) {
            let f = IndexFunction::table(table.clone());
            let g = monotonize(&f);
            for n in 0..30u64 {
                prop_assert!(g.eval(n) >= f.eval(n));
                if n > 0 {
                    prop_assert!(g.eval(n) >= g.eval(n - 1));
                }
            }
            prop_assert_eq!(monotonize(&g), g);
        }

        #[test]
        fn finder_is_complete_against_greedy_count(
            values in proptest::collection::vec(-6i64..6, 1..30),
            start in 0u64..10,
            budget in 0usize..6,
            mul in 1u64..3,
            add in 0u64..3,
        ) {
            let s = seq(&values);
            let eps = int(2);
            let f = IndexFunction::affine(mul, add);
            let reach = f.iterate(start, budget as u64 + 1);
            let greedy = count_fluctuations(&s, &int(1), start, reach);
            match find_stable_interval(&s, &eps, &f, start, budget).unwrap() {
                StabilityOutcome::Stable(iv) => {
                    prop_assert!(is_stable_on(&s, &eps, iv.m, iv.end));
                    prop_assert!(iv.m <= f.iterate(start, budget as u64));
                }
                StabilityOutcome::BudgetExceeded { .. } => prop_assert!(greedy > budget),
            }
        }
    }
}
