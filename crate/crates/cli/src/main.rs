use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jameslab::basis::{uc_lower_bound, Basis, SearchStrategy};
use jameslab::hierarchy::{
    cited_threshold_arg, fgh_compare, render_nat, render_value, threshold_arg, BigNat, Comparison, EvalBudget,
    HierarchyExpr, Level,
};
use jameslab::james::{james_norm_sq, james_norm_sq_oracle, JVector, ORACLE_MAX_K};
use jameslab::measure::{self, build, check_identities, product_matrix};
use jameslab::metastability::{find_stable_interval, hypothesis_report, IndexFunction, SequenceOracle, StabilityOutcome};
use jameslab::pipeline::{refutation_eps, run_refutation, verify_suite, Fault, VerifyConfig};
use jameslab::scalar::{self, Rational};
use jameslab::{Error, VerificationReport};
use serde::Serialize;
use serde_json::json;

const WORKERS_ENV: &str = "JAMESLAB_WORKERS";

#[derive(Parser)]
#[command(name = "jameslab", version, about = "Exact experiments on the finite James spaces J_K")]
struct Cli {
    /// Seed for every randomized search or sample.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Search budget: restarts or annealing steps for `uc`, jumps for
    /// `metastable --sequence`, samples per combination for `verify`.
    #[arg(long, global = true)]
    budget: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact squared James norm with its maximizing cycle.
    Norm(NormArgs),
    /// Certified lower bound on the unconditional constant of a basis.
    Uc(UcArgs),
    /// Measure-space model of a basis and its exact identities.
    Space(SpaceArgs),
    /// Product matrix of a basis.
    Matrix(MatrixArgs),
    /// Hypothesis clauses for a model, or a stable-interval search on a sequence.
    Metastable(MetastableArgs),
    /// Budgeted fast-growing hierarchy evaluation.
    Fgh(FghArgs),
    /// Threshold arguments for a bound B.
    Threshold(ThresholdArgs),
    /// End-to-end refutation report.
    Refute(RefuteArgs),
    /// Run every invariant suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BasisSource {
    /// Use the canonical basis of J_K.
    #[arg(long, short = 'k', conflicts_with = "basis")]
    k: Option<usize>,
    /// Basis JSON file: {"K": int, "columns": [["p/q", ...], ...]}.
    #[arg(long)]
    basis: Option<PathBuf>,
}

#[derive(Args)]
struct NormArgs {
    /// Comma-separated coefficients x_0, ..., x_K as integers or p/q.
    #[arg(long, conflicts_with = "input", allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// JVector JSON file: {"K": int, "coeffs": ["p/q", ...]}.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Also evaluate by exhaustive cycle enumeration and require agreement.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct UcArgs {
    #[command(flatten)]
    source: BasisSource,
    #[arg(long, value_enum, default_value_t = Strategy::Exhaustive)]
    strategy: Strategy,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Exhaustive,
    Anneal,
}

#[derive(Args)]
struct SpaceArgs {
    #[command(flatten)]
    source: BasisSource,
    /// Sampled vectors and functionals per identity.
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    source: BasisSource,
    /// Print the matrix as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct MetastableArgs {
    #[command(flatten)]
    source: BasisSource,
    /// Bound B̂ for the hypothesis clauses.
    #[arg(long = "b", default_value = "2")]
    b: String,
    /// Accuracy ε; defaults to 1/80.
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated sequence values; switches to a stable-interval search.
    #[arg(long, allow_hyphen_values = true)]
    sequence: Option<String>,
    /// Start index for the stable-interval search.
    #[arg(long, default_value_t = 0)]
    start: u64,
    /// Index function F(n) = mul·n + add.
    #[arg(long, default_value_t = 1)]
    mul: u64,
    #[arg(long, default_value_t = 1)]
    add: u64,
}

#[derive(Args)]
struct FghArgs {
    /// Level: a natural number, or `w` for omega.
    #[arg(long)]
    level: String,
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_digits: u64,
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
    /// Compare f_level(n) with this number instead of printing its value.
    #[arg(long)]
    compare: Option<String>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long = "b")]
    b: String,
    /// Accuracy for the general threshold; defaults to 1/80.
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Args)]
struct RefuteArgs {
    #[command(flatten)]
    source: BasisSource,
    #[arg(long = "b", default_value = "2")]
    b: String,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    CorruptNormDp,
}

/// Exit 1: an invariant failed. Exit 2: the input was rejected.
enum Failure {
    Invariant(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StructureViolation(_) => Failure::Invariant(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

struct Output {
    text: String,
    passed: bool,
}

impl Output {
    fn pass(text: String) -> Self {
        Self { text, passed: true }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_workers() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            if out.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err(format!("{WORKERS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Norm(a) => norm(cli, a),
        Command::Uc(a) => uc(cli, a),
        Command::Space(a) => space(cli, a),
        Command::Matrix(a) => matrix(cli, a),
        Command::Metastable(a) => metastable(cli, a),
        Command::Fgh(a) => fgh(cli, a),
        Command::Threshold(a) => threshold(cli, a),
        Command::Refute(a) => refute(cli, a),
        Command::Verify(a) => verify(cli, a),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn parse_rat(s: &str) -> Result<Rational, Failure> {
    Ok(scalar::parse_rational(s)?)
}

fn parse_list(s: &str) -> Result<Vec<Rational>, Failure> {
    let vals: Vec<Rational> = s.split(',').map(|t| parse_rat(t.trim())).collect::<Result<_, _>>()?;
    if vals.is_empty() {
        return Err(Failure::Input("empty list".into()));
    }
    Ok(vals)
}

fn parse_nat(s: &str) -> Result<BigNat, Failure> {
    s.trim()
        .parse()
        .map_err(|_| Failure::Input(format!("'{s}' is not a natural number")))
}

fn eps_or_default(eps: &Option<String>) -> Result<Rational, Failure> {
    eps.as_deref().map(parse_rat).transpose().map(|e| e.unwrap_or_else(refutation_eps))
}

fn load_basis(src: &BasisSource) -> Result<Basis, Failure> {
    match (&src.basis, src.k) {
        (Some(path), _) => read_json(path),
        (None, Some(k)) => Ok(Basis::canonical(k)),
        (None, None) => Err(Failure::Input("give either --k or --basis".into())),
    }
}

fn fmt(r: &Rational) -> String {
    scalar::format_rational(r)
}

fn approx_sqrt(r: &Rational) -> f64 {
    scalar::to_f64(r).sqrt()
}

fn render_report(report: &VerificationReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {}: {}\n", c.name, c.detail));
    }
    match report.first_failure() {
        None => out.push_str("all checks passed\n"),
        Some(c) => out.push_str(&format!("first failure: {}\n", c.name)),
    }
    out
}

fn norm(cli: &Cli, a: &NormArgs) -> Result<Output, Failure> {
    let x = match (&a.coeffs, &a.input) {
        (Some(c), _) => JVector::new(parse_list(c)?),
        (None, Some(p)) => read_json(p)?,
        (None, None) => return Err(Failure::Input("give either --coeffs or --input".into())),
    };
    let (n, cert) = james_norm_sq(&x);
    let oracle = if a.check {
        if x.k() > ORACLE_MAX_K {
            return Err(Error::DimensionTooLarge { k: x.k(), limit: ORACLE_MAX_K }.into());
        }
        Some(james_norm_sq_oracle(&x)?)
    } else {
        None
    };
    let agrees = oracle.as_ref().is_none_or(|o| *o == n) && cert.replays_on(&x);
    let text = if cli.json {
        to_json(&json!({
            "vector": x,
            "norm_sq": fmt(&n),
            "norm_approx": approx_sqrt(&n),
            "certificate": cert,
            "oracle_sq": oracle.as_ref().map(fmt),
            "agrees": agrees,
        }))
    } else {
        let slots: Vec<String> = cert.cycle.slots().iter().map(|s| s.to_string()).collect();
        let mut t = format!(
            "K          {}\nnorm^2     {}\nnorm       {:.12} (approx)\ncycle      ({})\n",
            x.k(),
            fmt(&n),
            approx_sqrt(&n),
            slots.join(", ")
        );
        if let Some(o) = &oracle {
            t.push_str(&format!("oracle^2   {}\nagrees     {agrees}\n", fmt(o)));
        }
        t
    };
    Ok(Output { text, passed: agrees })
}

fn uc(cli: &Cli, a: &UcArgs) -> Result<Output, Failure> {
    let basis = load_basis(&a.source)?;
    let strategy = match a.strategy {
        Strategy::Exhaustive => SearchStrategy::Exhaustive,
        Strategy::Anneal => SearchStrategy::Anneal,
    };
    let budget = cli.budget.unwrap_or(8);
    let est = uc_lower_bound(&basis, strategy, budget, cli.seed)?;
    let replay = est.replay(&basis)?;
    let ok = replay == est.lower_bound_sq;
    let text = if cli.json {
        to_json(&json!({
            "K": basis.k(),
            "strategy": strategy,
            "budget": budget,
            "seed": cli.seed,
            "estimate": est,
            "lower_bound_approx": approx_sqrt(&est.lower_bound_sq),
            "replay_matches": ok,
        }))
    } else {
        let signs: Vec<String> = est.signs.signs().iter().map(|s| if *s > 0 { "+" } else { "-" }.to_string()).collect();
        let alpha: Vec<String> = est.alpha.iter().map(fmt).collect();
        format!(
            "K               {}\nlower bound^2   {}\nlower bound     {:.12} (approx)\nsigns           {}\nalpha           [{}]\nreplay          {}\n",
            basis.k(),
            fmt(&est.lower_bound_sq),
            approx_sqrt(&est.lower_bound_sq),
            signs.concat(),
            alpha.join(", "),
            if ok { "exact match" } else { "MISMATCH" }
        )
    };
    Ok(Output { text, passed: ok })
}

fn space(cli: &Cli, a: &SpaceArgs) -> Result<Output, Failure> {
    let basis = load_basis(&a.source)?;
    let model = build(&basis)?;
    let report = check_identities(&model, a.samples, cli.seed)?;
    let text = if cli.json {
        to_json(&json!({ "model": measure::export(&model)?, "identities": report }))
    } else {
        let mut t = format!("K        {}\nd*(d)    {}\n", model.k(), fmt(&model.d_star_d));
        for (i, m) in model.mu.iter().enumerate() {
            t.push_str(&format!("mu[{i}]    {}\n", fmt(m)));
        }
        t.push('\n');
        t.push_str(&render_report(&report));
        t
    };
    Ok(Output { text, passed: report.passed() })
}

fn matrix(cli: &Cli, a: &MatrixArgs) -> Result<Output, Failure> {
    let basis = load_basis(&a.source)?;
    let model = build(&basis)?;
    let m = product_matrix(&model)?;
    let text = if cli.json {
        to_json(&json!({ "K": model.k(), "d_star_d": fmt(&model.d_star_d), "product_matrix": m }))
    } else if a.csv {
        m.to_csv()
    } else {
        let cells: Vec<Vec<String>> = m.entries.iter().map(|r| r.iter().map(fmt).collect()).collect();
        let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
        let mut t = String::new();
        for row in cells {
            let padded: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
            t.push_str(&padded.join("  "));
            t.push('\n');
        }
        t
    };
    Ok(Output::pass(text))
}

fn metastable(cli: &Cli, a: &MetastableArgs) -> Result<Output, Failure> {
    let eps = eps_or_default(&a.eps)?;
    if let Some(seq) = &a.sequence {
        let oracle = SequenceOracle::new(parse_list(seq)?)?;
        let f = IndexFunction::affine(a.mul, a.add);
        let budget = cli.budget.unwrap_or(16);
        let outcome = find_stable_interval(&oracle, &eps, &f, a.start, budget)?;
        let text = if cli.json {
            to_json(&json!({ "eps": fmt(&eps), "budget": budget, "outcome": outcome }))
        } else {
            match &outcome {
                StabilityOutcome::Stable(s) => format!(
                    "stable on [{}, {}] after {} jump(s) {:?}\n",
                    s.m,
                    s.end,
                    s.budget_used(),
                    s.jumps
                ),
                StabilityOutcome::BudgetExceeded { jumps } => {
                    format!("budget exceeded after {} jump(s) {:?}\n", jumps.len(), jumps)
                }
            }
        };
        return Ok(Output::pass(text));
    }
    let basis = load_basis(&a.source)?;
    let b = parse_rat(&a.b)?;
    let model = build(&basis)?;
    let report = hypothesis_report(&model, &b, &eps)?;
    let text = if cli.json {
        to_json(&report)
    } else {
        let mut t = format!("K {}  B {}  eps {}\n", model.k(), fmt(&b), fmt(&eps));
        for c in &report.clauses {
            let status = if c.passed { "holds " } else { "fails " };
            t.push_str(&format!("{status} {}: {}\n", c.name, c.detail));
        }
        t
    };
    Ok(Output::pass(text))
}

fn fgh(cli: &Cli, a: &FghArgs) -> Result<Output, Failure> {
    let level: Level = a.level.parse()?;
    let n = parse_nat(&a.n)?;
    let budget = EvalBudget { max_digits: a.max_digits, max_steps: a.max_steps };
    let expr = HierarchyExpr::new(level, n);
    if let Some(c) = &a.compare {
        let target = parse_nat(c)?;
        let cmp = fgh_compare(&expr, &target, &budget);
        let text = if cli.json {
            to_json(&json!({ "expr": expr.to_string(), "compare_to": target.to_string(), "result": cmp }))
        } else {
            let rel = match cmp {
                Comparison::Less => "<",
                Comparison::GreaterOrEqual => ">=",
                Comparison::Undetermined => "undetermined vs",
            };
            format!("{expr} {rel} {}\n", render_nat(&target))
        };
        return Ok(Output::pass(text));
    }
    let v = expr.eval(&budget);
    let text = if cli.json {
        to_json(&json!({ "expr": expr.to_string(), "value": v }))
    } else {
        format!("{expr} = {}\n", render_value(&v))
    };
    Ok(Output::pass(text))
}

fn threshold(cli: &Cli, a: &ThresholdArgs) -> Result<Output, Failure> {
    let b = parse_rat(&a.b)?;
    let eps = eps_or_default(&a.eps)?;
    let arg = threshold_arg(&b)?;
    let cited = cited_threshold_arg(&b, &eps)?;
    let expr = HierarchyExpr::new(Level::Omega, arg.clone());
    let cited_expr = HierarchyExpr::new(Level::Omega, cited.clone());
    let text = if cli.json {
        to_json(&json!({
            "B": fmt(&b),
            "eps": fmt(&eps),
            "threshold_arg": arg.to_string(),
            "threshold": expr.to_string(),
            "cited_threshold_arg": cited.to_string(),
            "cited_threshold": cited_expr.to_string(),
        }))
    } else {
        format!("K >= {expr}\ngeneral bound at eps = {}: K >= {cited_expr}\n", fmt(&eps))
    };
    Ok(Output::pass(text))
}

fn refute(cli: &Cli, a: &RefuteArgs) -> Result<Output, Failure> {
    let basis = load_basis(&a.source)?;
    let b = parse_rat(&a.b)?;
    let r = run_refutation(&basis, &b)?;
    let text = if cli.json {
        to_json(&r)
    } else {
        let mut t = format!("K {}  B {}  eps {}\n", r.k, fmt(&r.b), fmt(&r.eps));
        t.push_str(&format!("d*(d) = {}\n\nproduct matrix\n", fmt(&r.model.d_star_d)));
        t.push_str(&r.product_matrix.to_csv());
        t.push_str("\nhypotheses\n");
        for c in &r.hypothesis.clauses {
            let status = if c.passed { "holds " } else { "fails " };
            t.push_str(&format!("  {status} {}\n", c.name));
        }
        t.push_str(&format!("\nverdict: {}\n{}\n", r.verdict, r.threshold));
        t
    };
    Ok(Output { text, passed: r.conclusion.is_none() })
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<Output, Failure> {
    let cfg = VerifyConfig {
        seed: cli.seed,
        samples: cli.budget.unwrap_or(VerifyConfig::default().samples),
        fault: a.inject_fault.map(|f| match f {
            FaultArg::CorruptNormDp => Fault::CorruptNormDp,
        }),
    };
    let report = verify_suite(&cfg)?;
    let text = if cli.json { to_json(&report) } else { render_report(&report) };
    Ok(Output { text, passed: report.passed() })
}
