//! `tvhom`: exact product TV, homogenized TV, constants and the check suite.
//!
//! Exit codes: 0 on success, 1 when a check fails, 2 on usage or input errors.

mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tvhom::measure::{AtomicMeasure, DEFAULT_ATOM_CAP};
use tvhom::score::{optimize_c0, ConstantsReport, GridSpec, C0_BOUND, C_LOWER_BOUND};
use tvhom::tv::{
    tv_homogenized_multinomial_capped, tv_product_bruteforce_capped, tv_product_exact_capped,
    ProductInstance, DEFAULT_ENUMERATION_CAP,
};
use tvhom::verify::{
    run_suite_with_jobs, search_worst_ratio, verify_instance, Family, GeneratorConfig,
    SearchConfig, Tolerances, VerifyOptions, DEFAULT_LAMBDAS,
};
use tvhom::Error;

/// Above this many coordinates product weights can underflow to zero.
const UNDERFLOW_WARN_N: usize = 40;

#[derive(Parser, Debug)]
#[command(
    name = "tvhom",
    version,
    about = "Exact TV between product distributions and their homogenized counterparts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode each coordinate pair of an instance as an atomic measure.
    Encode(EncodeArgs),
    /// Exact TV(⊗P_i, ⊗Q_i) through convolution of the encodings.
    TvProduct(ProductArgs),
    /// Exact TV(P̄^⊗n, Q̄^⊗n) through multinomial enumeration.
    TvHomog(HomogArgs),
    /// Optimize the homogenization constant over ε.
    Constants(ConstantsArgs),
    /// Run every check on generated instances, or on one instance file.
    Verify(VerifyArgs),
    /// Hill-climb for instances with a large TV(hom)/TV(vec) ratio.
    Search(SearchArgs),
    /// Brute-force TV over the product space, compared with tv-product.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Instance file: {"m": int, "n": int, "P": [[...]], "Q": [[...]]}.
    #[arg(long)]
    input: PathBuf,
    /// Smooth every pmf to (1-δ)P + δ/m before use, allowing zeros in the file.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ProductArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Largest number of atom pairs in a single convolution step.
    #[arg(long, default_value_t = DEFAULT_ATOM_CAP)]
    atom_cap: usize,
}

#[derive(Args, Debug)]
struct HomogArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Largest number of enumerated outcomes.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = DEFAULT_ATOM_CAP)]
    atom_cap: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: usize,
    /// Largest accepted |brute force − tv-product|.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = 1e-4)]
    lo: f64,
    #[arg(long, default_value_t = 0.5)]
    hi: f64,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-10)]
    refine_tol: f64,
    /// Evaluate at this ε instead of optimizing.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Verify this instance file instead of generated ones.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    delta: Option<f64>,
    #[arg(long, env = "TVH_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000, allow_negative_numbers = true,
          value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    #[arg(long, default_value_t = 2)]
    m_min: usize,
    #[arg(long, default_value_t = 4)]
    m_max: usize,
    /// Dirichlet concentration of the generator.
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_identity: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_lift: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol_lemma: f64,
    #[arg(long, default_value_t = 1e-12)]
    tol_sandwich: f64,
    #[arg(long, default_value_t = C_LOWER_BOUND)]
    c_lower: f64,
    #[arg(long, default_value_t = C0_BOUND)]
    c_upper: f64,
    /// Laplace grid, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS.to_vec())]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ATOM_CAP)]
    atom_cap: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: usize,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Bernoulli,
    General,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, env = "TVH_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = FamilyArg::Bernoulli)]
    family: FamilyArg,
    #[arg(long, default_value_t = 16)]
    n_max: usize,
    #[arg(long, default_value_t = 3)]
    m_max: usize,
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
}

/// Everything that ends the run early, with its exit code.
#[derive(Debug)]
enum Failure {
    /// Bad flags, unreadable or malformed input, exhausted budgets.
    Usage(String),
    /// A check or a proven bound failed.
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TheoremViolation { .. } => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => encode(a),
        Command::TvProduct(a) => tv_product(a),
        Command::TvHomog(a) => tv_homog(a),
        Command::Constants(a) => constants(a),
        Command::Verify(a) => verify(a),
        Command::Search(a) => search(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Check(msg) => eprintln!("check failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(args: &InputArgs) -> Result<ProductInstance, Failure> {
    let inst =
        input::read_instance(&args.input, args.delta).map_err(|e| Failure::Usage(e.to_string()))?;
    if inst.n() > UNDERFLOW_WARN_N {
        eprintln!(
            "warning: n = {} > {UNDERFLOW_WARN_N}; product weights may underflow",
            inst.n()
        );
    }
    Ok(inst)
}

fn emit<T: Serialize>(out: &OutArgs, value: &T) -> Outcome {
    output::write_json(out.out.as_deref(), value).map_err(|e| Failure::Usage(e.to_string()))
}

#[derive(Serialize)]
struct CoordinateEncoding {
    index: usize,
    atoms: Vec<[f64; 2]>,
    t_functional: f64,
    total_mass: f64,
    integral_plus: f64,
    integral_minus: f64,
}

#[derive(Serialize)]
struct EncodeReport {
    n: usize,
    m: usize,
    coordinates: Vec<CoordinateEncoding>,
    mixture: Vec<[f64; 2]>,
}

fn atoms_of(mu: &AtomicMeasure) -> Vec<[f64; 2]> {
    mu.atoms().iter().map(|a| [a.position, a.weight]).collect()
}

fn encode(a: EncodeArgs) -> Outcome {
    let inst = load(&a.input)?;
    let etas = inst.encodings()?;
    let coordinates = etas
        .iter()
        .enumerate()
        .map(|(index, eta)| {
            let adm = eta.admissibility(0.0);
            CoordinateEncoding {
                index,
                atoms: atoms_of(eta),
                t_functional: eta.t_functional(),
                total_mass: eta.total_mass(),
                integral_plus: adm.integral_plus,
                integral_minus: adm.integral_minus,
            }
        })
        .collect();
    let mixture = AtomicMeasure::uniform_mixture(&etas)?;
    emit(
        &a.out,
        &EncodeReport {
            n: inst.n(),
            m: inst.m(),
            coordinates,
            mixture: atoms_of(&mixture),
        },
    )
}

#[derive(Serialize)]
struct ProductReport {
    n: usize,
    m: usize,
    tv_product: f64,
}

fn tv_product(a: ProductArgs) -> Outcome {
    let inst = load(&a.input)?;
    let tv = tv_product_exact_capped(&inst, a.atom_cap)?;
    emit(
        &a.out,
        &ProductReport {
            n: inst.n(),
            m: inst.m(),
            tv_product: tv,
        },
    )
}

#[derive(Serialize)]
struct HomogReport {
    n: usize,
    m: usize,
    pbar: Vec<f64>,
    qbar: Vec<f64>,
    tv_homogenized: f64,
}

fn tv_homog(a: HomogArgs) -> Outcome {
    let inst = load(&a.input)?;
    let (pbar, qbar) = inst.homogenized()?;
    let tv = tv_homogenized_multinomial_capped(&pbar, &qbar, inst.n(), a.enumeration_cap)?;
    emit(
        &a.out,
        &HomogReport {
            n: inst.n(),
            m: inst.m(),
            pbar: pbar.probs().to_vec(),
            qbar: qbar.probs().to_vec(),
            tv_homogenized: tv,
        },
    )
}

#[derive(Serialize)]
struct OracleReport {
    n: usize,
    m: usize,
    tv_bruteforce: f64,
    tv_product: f64,
    difference: f64,
    tolerance: f64,
    #[serde(rename = "match")]
    matches: bool,
}

fn oracle(a: OracleArgs) -> Outcome {
    let inst = load(&a.input)?;
    let brute = tv_product_bruteforce_capped(&inst, a.enumeration_cap)?;
    let exact = tv_product_exact_capped(&inst, a.atom_cap)?;
    let difference = (brute - exact).abs();
    let matches = difference <= a.tol;
    emit(
        &a.out,
        &OracleReport {
            n: inst.n(),
            m: inst.m(),
            tv_bruteforce: brute,
            tv_product: exact,
            difference,
            tolerance: a.tol,
            matches,
        },
    )?;
    if matches {
        Ok(())
    } else {
        Err(Failure::Check(format!(
            "brute force and tv-product differ by {difference:e} > {:e}",
            a.tol
        )))
    }
}

fn constants(a: ConstantsArgs) -> Outcome {
    let report: ConstantsReport = match a.eps {
        Some(eps) => ConstantsReport::at(eps)?,
        None => optimize_c0(GridSpec {
            lo: a.lo,
            hi: a.hi,
            steps: a.steps,
            refine_tol: a.refine_tol,
        })?,
    };
    emit(&a.out, &report)
}

fn usage_check(ok: bool, msg: &str) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Usage(msg.to_string()))
    }
}

fn verify(a: VerifyArgs) -> Outcome {
    usage_check(a.jobs >= 1, "--jobs must be at least 1")?;
    usage_check(!a.lambdas.is_empty(), "--lambdas must not be empty")?;
    for tol in [a.tol_identity, a.tol_lift, a.tol_lemma, a.tol_sandwich] {
        usage_check(
            tol.is_finite() && tol >= 0.0,
            "tolerances must be finite and non-negative",
        )?;
    }
    let opts = VerifyOptions {
        tol: Tolerances {
            identity: a.tol_identity,
            lift_atoms: a.tol_lift,
            lemma: a.tol_lemma,
            sandwich: a.tol_sandwich,
        },
        c_lower: a.c_lower,
        c_upper: a.c_upper,
        lambdas: a.lambdas.clone(),
        atom_cap: a.atom_cap,
        enumeration_cap: a.enumeration_cap,
        ..VerifyOptions::default()
    };

    if let Some(path) = &a.input {
        let inst = load(&InputArgs {
            input: path.clone(),
            delta: a.delta,
        })?;
        let report = verify_instance(&inst, &opts);
        write_verify(&a, std::slice::from_ref(&report), &report)?;
        let failed = report.failures().count();
        return if failed == 0 {
            Ok(())
        } else {
            Err(Failure::Check(format!("{failed} checks failed")))
        };
    }

    let cfg = GeneratorConfig {
        seed: a.seed,
        n_range: (a.n_min, a.n_max),
        m_range: (a.m_min, a.m_max),
        concentration: a.concentration,
        count: usize::try_from(a.count).map_err(|_| Failure::Usage("--count too large".into()))?,
    };
    cfg.validate()?;
    let suite = run_suite_with_jobs(&cfg, &opts, a.jobs)?;
    write_verify(&a, &suite.reports, &suite)?;
    let s = &suite.summary;
    eprintln!(
        "{} instances, {} checks, {} failures, {} skipped, max hom/vec ratio {:.6}",
        s.instances, s.checks_run, s.failures, s.skipped, s.max_ratio
    );
    if s.failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} checks failed", s.failures)))
    }
}

fn write_verify<T: Serialize>(
    a: &VerifyArgs,
    reports: &[tvhom::verify::LemmaReport],
    full: &T,
) -> Outcome {
    let path = a.out.out.as_deref();
    let res = match a.format {
        Format::Json => output::write_json(path, full),
        Format::Csv => output::write_check_csv(path, reports),
    };
    res.map_err(|e| Failure::Usage(e.to_string()))
}

fn search(a: SearchArgs) -> Outcome {
    let cfg = SearchConfig {
        seed: a.seed,
        restarts: a.restarts,
        steps: a.steps,
        family: match a.family {
            FamilyArg::Bernoulli => Family::Bernoulli,
            FamilyArg::General => Family::General,
        },
        n_max: a.n_max,
        m_max: a.m_max,
        concentration: a.concentration,
    };
    let report = search_worst_ratio(&cfg)?;
    emit(&a.out, &report)
}
