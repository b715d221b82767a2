//! End-to-end runs: the refutation report for a basis and a bound `B`, and
//! the self-verification suite.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{uc_lower_bound, Basis, SearchStrategy};
use crate::error::{Error, Result};
use crate::hierarchy::{
    cited_threshold_arg, fgh_compare, fgh_eval, fgh_eval_literal, threshold_arg, Comparison,
    EvalBudget, FghValue, HierarchyExpr, Level,
};
use crate::james::{
    chain_stability_check, coordinate_chain_check, cycle_value, dual_ball_sample,
    james_norm_sq, james_norm_sq_oracle, lemma_chain_steps, violation_to_witness, ChainCheck,
    CoordinateCheck, Cycle, DualFunctional, JVector,
};
use crate::measure::{build, check_identities, product_matrix, MeasureSpaceModel, ProductMatrix};
use crate::metastability::{
    conclusion_search, count_fluctuations, find_stable_interval, hypothesis_report, is_stable_on,
    minimum_gap, FoundPair, HypothesisReport, IndexFunction, SequenceOracle, StabilityOutcome,
};
use crate::report::{Check, VerificationReport};
use crate::scalar::{self, Rational, Root2Scalar};

/// The accuracy at which the conclusion is refuted: `20ε = 1/4 ≤ d*(d)`.
pub fn refutation_eps() -> Rational {
    scalar::rat(1, 80)
}

#[derive(Clone, Debug, Serialize)]
pub struct RefutationReport {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "B", with = "scalar::serde_rational")]
    pub b: Rational,
    #[serde(with = "scalar::serde_rational")]
    pub eps: Rational,
    pub model: MeasureSpaceModel,
    pub product_matrix: ProductMatrix,
    pub hypothesis: HypothesisReport,
    pub conclusion: Option<FoundPair>,
    #[serde(with = "scalar::serde_rational_opt")]
    pub minimum_gap: Option<Rational>,
    pub degenerate: bool,
    pub refuted: bool,
    pub verdict: String,
    pub threshold_arg: String,
    pub cited_threshold_arg: String,
    pub threshold: String,
}

/// Builds the measure space of `basis`, evaluates the hypotheses with
/// `B̂ = B`, and searches for the conclusion at `ε = 1/80`. The conclusion
/// can never be met, since every candidate gap is `d*(d) ≥ 1/4 = 20ε`.
pub fn run_refutation(basis: &Basis, b: &Rational) -> Result<RefutationReport> {
    let threshold_n = threshold_arg(b)?;
    let eps = refutation_eps();
    let model = build(basis)?;
    let matrix = product_matrix(&model)?;
    let hypothesis = hypothesis_report(&model, b, &eps)?;
    let conclusion = conclusion_search(&matrix, &eps);
    let gap = minimum_gap(&matrix);
    let degenerate = model.k() == 0;
    let (refuted, verdict) = match (&conclusion, &gap) {
        (Some(p), _) => (
            false,
            format!("conclusion met at (m, s, q, l) = ({}, {}, {}, {})", p.m, p.s, p.q, p.l),
        ),
        (None, None) => (
            false,
            "degenerate: K = 0 leaves no index pairs m < s, so the conclusion is vacuous".to_string(),
        ),
        (None, Some(g)) => (
            true,
            format!(
                "conclusion impossible: minimum gap {} >= {}",
                scalar::format_rational(g),
                scalar::format_rational(&(&eps * scalar::int(20)))
            ),
        ),
    };
    let expr = HierarchyExpr::new(Level::Omega, threshold_n.clone());
    Ok(RefutationReport {
        k: model.k(),
        b: b.clone(),
        eps: eps.clone(),
        product_matrix: matrix,
        hypothesis,
        conclusion,
        minimum_gap: gap,
        degenerate,
        refuted,
        verdict,
        threshold_arg: threshold_n.to_string(),
        cited_threshold_arg: cited_threshold_arg(b, &eps)?.to_string(),
        threshold: format!("K >= {expr} required by the threshold theorem"),
        model,
    })
}

/// Deliberate defects for exercising the verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Inflates every nonzero DP norm by `1/1000`.
    CorruptNormDp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Samples per parameter combination.
    pub samples: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { seed: 0, samples: 40, fault: None }
    }
}

fn rng_for(seed: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(lane);
    rng
}

fn random_vector(rng: &mut ChaCha8Rng, k: usize) -> JVector {
    JVector::new((0..=k).map(|_| scalar::rat(rng.gen_range(-12..=12), rng.gen_range(1..=8))).collect())
}

/// Strictly increasing chain of `steps + 1` indices in `0..=k`.
pub fn random_chain(rng: &mut ChaCha8Rng, k: usize, steps: usize) -> Vec<usize> {
    let mut chain = index::sample(rng, k + 1, steps + 1).into_vec();
    chain.sort_unstable();
    chain
}

/// A functional whose prefix values jump by at least `ε` at every step of
/// `chain`: one dual-ball term on the cycle of chain points with
/// alternating unit weights, scaled by a rational factor `> 1`.
pub fn planted_violator(rng: &mut ChaCha8Rng, k: usize, chain: &[usize], eps: &Rational) -> Result<DualFunctional> {
    let m = chain.len();
    let raw: Vec<i64> = (0..m)
        .map(|i| {
            let v = rng.gen_range(1..=9);
            if i % 2 == 0 { v } else { -v }
        })
        .collect();
    let norm = scalar::ceil_sqrt(&scalar::int(raw.iter().map(|v| v * v).sum()));
    let u: Vec<Rational> = raw.iter().map(|&v| scalar::int(v) / Rational::from_integer(norm.clone())).collect();
    let inv = Root2Scalar::inv_sqrt2();
    let mut coeffs = vec![Root2Scalar::zero(); k + 1];
    for i in 0..m {
        let w = inv.scale(&u[i]);
        coeffs[chain[i]] += &w;
        coeffs[chain[(i + 1) % m]] -= &w;
    }
    let y = DualFunctional::new(coeffs);
    let prefix = y.prefix_values();
    let min_gap = chain
        .windows(2)
        .map(|w| (&prefix[w[1]] - &prefix[w[0]]).abs())
        .min()
        .ok_or(Error::ChainTooShort { needed: 1, found: 0 })?;
    if min_gap.is_zero() {
        return Err(Error::Domain("planted functional has a flat step".into()));
    }
    // t ≥ ε / min_gap, rounded up to a multiple of 1/64 and then checked.
    let approx = scalar::to_f64(eps) / min_gap.to_f64();
    let mut t = scalar::rat(((approx * 64.0).ceil() as i64).max(65), 64);
    while min_gap.scale(&t) < *eps {
        t += scalar::rat(1, 64);
    }
    Ok(y.scale(&t))
}

/// `c` with `c²·‖x‖² ≤ 1`, close to `1/‖x‖`.
pub fn unit_scale(x: &JVector) -> Rational {
    let n = james_norm_sq(x).0;
    if n.is_zero() {
        return Rational::one();
    }
    let mut c = scalar::snap_f64((1.0 / scalar::to_f64(&n).sqrt()) * (1.0 - 1e-9), 1_000_000_000);
    while &c * &c * &n > Rational::one() {
        c *= scalar::rat(999, 1000);
    }
    c
}

fn oracle_equivalence(cfg: &VerifyConfig) -> Check {
    let mut mismatches = 0;
    let mut total = 0;
    for k in 2..=8 {
        for i in 0..cfg.samples {
            let mut rng = rng_for(cfg.seed, (k * 100_000 + i) as u64);
            let x = random_vector(&mut rng, k);
            let mut dp = james_norm_sq(&x).0;
            if cfg.fault == Some(Fault::CorruptNormDp) && !dp.is_zero() {
                dp *= scalar::rat(1001, 1000);
            }
            total += 1;
            if james_norm_sq_oracle(&x).ok() != Some(dp) {
                mismatches += 1;
            }
        }
    }
    Check::new("oracle equivalence", mismatches == 0, format!("{mismatches} mismatches in {total} vectors"))
}

const CHAIN_K: usize = 200;

fn chain_epsilons() -> [Rational; 3] {
    [scalar::rat(1, 2), scalar::rat(1, 4), scalar::rat(1, 10)]
}

fn dual_chain_stability(cfg: &VerifyConfig) -> Result<Check> {
    let mut violations = 0;
    let mut weak = 0;
    let mut total = 0;
    for (e, eps) in chain_epsilons().iter().enumerate() {
        let steps = lemma_chain_steps(eps)?;
        for i in 0..cfg.samples {
            let lane = (e * 1_000_000 + i) as u64;
            let mut rng = rng_for(cfg.seed ^ 0xd0a1, lane);
            let (y, _) = dual_ball_sample(rng.gen(), CHAIN_K, rng.gen_range(1..=4));
            let chain = random_chain(&mut rng, CHAIN_K, steps);
            total += 1;
            if !matches!(chain_stability_check(&y, eps, &chain)?, ChainCheck::Stable(_)) {
                violations += 1;
            }
            let planted = planted_violator(&mut rng, CHAIN_K, &chain, eps)?;
            let strict = match chain_stability_check(&planted, eps, &chain)? {
                ChainCheck::Violation(v) => violation_to_witness(&planted, eps, &chain, &v)
                    .map(|w| w.verify(&planted))
                    .unwrap_or(false),
                ChainCheck::Stable(_) => false,
            };
            if !strict {
                weak += 1;
            }
        }
    }
    Ok(Check::new(
        "dual chain stability",
        violations == 0 && weak == 0,
        format!("{violations} violations in {total} ball samples, {weak} planted violators without a strict witness"),
    ))
}

fn coordinate_chain_stability(cfg: &VerifyConfig) -> Result<Check> {
    let mut failures = 0;
    let mut total = 0;
    for (e, eps) in chain_epsilons().iter().enumerate() {
        let steps = lemma_chain_steps(eps)?;
        for i in 0..cfg.samples {
            let mut rng = rng_for(cfg.seed ^ 0xc00d, (e * 1_000_000 + i) as u64);
            let x = random_vector(&mut rng, CHAIN_K);
            let x = x.scale(&unit_scale(&x));
            let chain = random_chain(&mut rng, CHAIN_K, steps);
            total += 1;
            if !matches!(coordinate_chain_check(&x, eps, &chain)?, CoordinateCheck::Stable(_)) {
                failures += 1;
            }
        }
    }
    Ok(Check::new(
        "coordinate chain stability",
        failures == 0,
        format!("{failures} unstable chains in {total} unit-ball vectors"),
    ))
}

fn suite_models(cfg: &VerifyConfig) -> Vec<(String, Basis)> {
    let mut out = Vec::new();
    for k in 0..=4 {
        out.push((format!("canonical K={k}"), Basis::canonical(k)));
    }
    let mut rng = rng_for(cfg.seed ^ 0xba5e, 0);
    for k in 1..=4 {
        for j in 0..3 {
            out.push((format!("random K={k} #{j}"), Basis::random(k, &mut rng)));
        }
    }
    out
}

fn measure_checks(cfg: &VerifyConfig) -> Result<(Check, Check)> {
    let mut identity_failure: Option<String> = None;
    let mut matrix_failure: Option<String> = None;
    let models = suite_models(cfg);
    for (name, basis) in &models {
        let model = build(basis)?;
        let report = check_identities(&model, cfg.samples / 4 + 1, cfg.seed)?;
        if identity_failure.is_none() {
            if let Some(c) = report.first_failure() {
                identity_failure = Some(format!("{name}: {}: {}", c.name, c.detail));
            }
        }
        let ok = product_matrix(&model)
            .map(|m| conclusion_search(&m, &refutation_eps()).is_none())
            .unwrap_or(false);
        if !ok && matrix_failure.is_none() {
            matrix_failure = Some(name.clone());
        }
    }
    let n = models.len();
    let identities = Check::new(
        "measure identities",
        identity_failure.is_none(),
        identity_failure.unwrap_or_else(|| format!("{n} models exact")),
    );
    let matrix = Check::new(
        "refutation gap",
        matrix_failure.is_none(),
        matrix_failure
            .map(|m| format!("{m}: product matrix or conclusion search failed"))
            .unwrap_or_else(|| format!("{n} models: M[n][p] = d*(d)[p <= n], no conclusion at eps = 1/80")),
    );
    Ok((identities, matrix))
}

fn finder_completeness(cfg: &VerifyConfig) -> Result<Check> {
    let mut failures = 0;
    let mut total = 0;
    let eps = scalar::int(2);
    let half = scalar::int(1);
    for i in 0..cfg.samples * 5 {
        let mut rng = rng_for(cfg.seed ^ 0xf1c, i as u64);
        let len = rng.gen_range(1..40);
        let values: Vec<Rational> = (0..len).map(|_| scalar::int(rng.gen_range(-5..=5))).collect();
        let seq = SequenceOracle::new(values)?;
        let f = IndexFunction::affine(rng.gen_range(1..=2), rng.gen_range(0..=3));
        let start = rng.gen_range(0..10u64);
        let budget = rng.gen_range(0..8usize);
        let greedy = count_fluctuations(&seq, &half, start, f.iterate(start, budget as u64 + 1));
        total += 1;
        let ok = match find_stable_interval(&seq, &eps, &f, start, budget)? {
            StabilityOutcome::Stable(iv) => {
                is_stable_on(&seq, &eps, iv.m, iv.end) && iv.m <= f.iterate(start, budget as u64)
            }
            StabilityOutcome::BudgetExceeded { .. } => greedy > budget,
        };
        if !ok {
            failures += 1;
        }
    }
    Ok(Check::new(
        "fluctuation finder completeness",
        failures == 0,
        format!("{failures} failures in {total} sequences"),
    ))
}

fn hierarchy_closed_forms() -> Check {
    let b = EvalBudget::default();
    let nat = |v: u64| BigUint::from(v);
    let mut bad = Vec::new();
    for n in 0..=16u64 {
        for (m, want) in [(0, nat(n + 1)), (1, nat(2 * n)), (2, nat(n << n))] {
            if fgh_eval_literal(m, &nat(n), &b) != FghValue::Exact(want) {
                bad.push(format!("f_{m}({n})"));
            }
        }
    }
    if fgh_eval(3, &nat(2), &b) != FghValue::Exact(nat(2048)) {
        bad.push("f_3(2)".into());
    }
    match fgh_eval(3, &nat(3), &b) {
        FghValue::ExceedsBudget { lower_bound } if lower_bound > BigUint::from(10u32).pow(100) => {}
        _ => bad.push("f_3(3)".into()),
    }
    if threshold_arg(&scalar::int(2)).ok() != Some(nat(8_589_934_597)) {
        bad.push("threshold_arg(2)".into());
    }
    let head = HierarchyExpr::new(Level::Omega, threshold_arg(&scalar::int(1)).expect("B = 1"));
    if fgh_compare(&head, &BigUint::from(10u32).pow(100), &b) != Comparison::GreaterOrEqual {
        bad.push("f_w(threshold_arg(1)) >= 10^100".into());
    }
    Check::new(
        "hierarchy closed forms",
        bad.is_empty(),
        if bad.is_empty() { "all values match".to_string() } else { format!("mismatch at {}", bad.join(", ")) },
    )
}

fn uc_certificates(cfg: &VerifyConfig) -> Result<Check> {
    let basis = Basis::canonical(3);
    let est = uc_lower_bound(&basis, SearchStrategy::Exhaustive, 2, cfg.seed)?;
    let num = basis.combine(&sign_applied(&est.alpha, est.signs.signs()))?;
    let den = basis.combine(&est.alpha)?;
    let replay = james_norm_sq_oracle(&num)? / james_norm_sq_oracle(&den)?;
    let ok = est.lower_bound_sq >= scalar::int(8) && replay == est.lower_bound_sq;
    Ok(Check::new(
        "unconditional certificates",
        ok,
        format!("canonical K=3: lower bound {}", scalar::format_rational(&est.lower_bound_sq)),
    ))
}

fn sign_applied(alpha: &[Rational], signs: &[i8]) -> Vec<Rational> {
    alpha.iter().zip(signs).map(|(a, &s)| if s < 0 { -a } else { a.clone() }).collect()
}

/// Runs every invariant family once; the report is a pure function of the
/// configuration.
pub fn verify_suite(cfg: &VerifyConfig) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    report.push(oracle_equivalence(cfg));
    report.push(dual_chain_stability(cfg)?);
    report.push(coordinate_chain_stability(cfg)?);
    let (identities, gap) = measure_checks(cfg)?;
    report.push(identities);
    report.push(gap);
    report.push(finder_completeness(cfg)?);
    report.push(hierarchy_closed_forms());
    report.push(uc_certificates(cfg)?);
    report.push(cycle_replay(cfg)?);
    Ok(report)
}

/// DP certificates replay to the reported value.
fn cycle_replay(cfg: &VerifyConfig) -> Result<Check> {
    let mut bad = 0;
    let mut total = 0;
    for i in 0..cfg.samples {
        let mut rng = rng_for(cfg.seed ^ 0xcafe, i as u64);
        let k = rng.gen_range(0..30);
        let x = random_vector(&mut rng, k);
        let (v, cert) = james_norm_sq(&x);
        total += 1;
        let replay = Cycle::new(cert.cycle.slots().to_vec()).and_then(|c| cycle_value(&x, &c));
        if replay.ok() != Some(v) {
            bad += 1;
        }
    }
    Ok(Check::new("norm certificates", bad == 0, format!("{bad} failed replays in {total} vectors")))
}
