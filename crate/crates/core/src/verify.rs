//! Seeded instance generation and the per-instance verification suite.
//!
//! [`verify_instance`] evaluates every identity and inequality of the
//! homogenization argument on one `(P_1..P_n, Q_1..Q_n)` instance and records
//! each as a [`CheckRecord`] with its two sides and margin. Failures are data:
//! a report never aborts halfway. Checks whose enumeration exceeds the budget
//! are recorded as skipped, never silently passed.
//!
//! [`search_worst_ratio`] hill-climbs `TV(hom)/TV(vec)` from random restarts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, DEFAULT_ATOM_CAP};
use crate::score::{
    d_rho, enumerate_psi, laplace_v, optimize_c0, remainder_l2, score_laws,
    sqrt_quadratic_mean_capped, sum_abs_mean_capped, GridSpec, ScoreLaw, C0_BOUND, C_LOWER_BOUND,
};
use crate::tv::{
    lift, tv_homogenized_multinomial_capped, tv_pmf, tv_product_bruteforce_capped,
    tv_product_exact_capped, Pmf, ProductInstance, DEFAULT_ENUMERATION_CAP,
};

/// Smallest probability the generator emits.
pub const PROB_FLOOR: f64 = 1e-6;

/// Laplace-transform arguments checked by default.
pub const DEFAULT_LAMBDAS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_range: (usize, usize),
    pub m_range: (usize, usize),
    /// Shape of the symmetric Dirichlet draw; smaller is sharper.
    pub concentration: f64,
    pub count: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_range: (1, 6),
            m_range: (2, 4),
            concentration: 1.0,
            count: 10_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let (n_lo, n_hi) = self.n_range;
        let (m_lo, m_hi) = self.m_range;
        if n_lo == 0 || n_lo > n_hi {
            return Err(Error::InvalidConfig(format!(
                "bad n range ({n_lo}, {n_hi})"
            )));
        }
        if m_lo == 0 || m_lo > m_hi {
            return Err(Error::InvalidConfig(format!(
                "bad m range ({m_lo}, {m_hi})"
            )));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        Ok(())
    }
}

/// Symmetric Dirichlet draw with every coordinate at least [`PROB_FLOOR`].
///
/// Coordinates that fall below the floor after normalization get a fresh
/// Gamma variate and the vector is renormalized, until none remain.
fn draw_pmf(rng: &mut ChaCha8Rng, gamma: &Gamma<f64>, m: usize) -> Pmf {
    if m == 1 {
        return Pmf::uniform(1).expect("m >= 1");
    }
    let mut g: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    loop {
        let sum: f64 = g.iter().sum();
        let mut low = false;
        if sum > 0.0 && sum.is_finite() {
            for x in g.iter_mut() {
                if *x / sum < PROB_FLOOR {
                    *x = gamma.sample(rng);
                    low = true;
                }
            }
        } else {
            g.iter_mut().for_each(|x| *x = gamma.sample(rng));
            low = true;
        }
        if !low {
            let probs = g.iter().map(|x| x / sum).collect();
            return Pmf::new(probs).expect("normalized positive draw");
        }
    }
}

/// Instance number `index` of the corpus described by `cfg`.
///
/// Deterministic in `(seed, index)`: the generator is ChaCha8 seeded from
/// `seed` with stream `index`, so instances are independent of evaluation
/// order. Draw order: `n`, `m`, then `P_1..P_n`, then `Q_1..Q_n`.
pub fn gen_instance(cfg: &GeneratorConfig, index: usize) -> Result<ProductInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let n = rng.random_range(cfg.n_range.0..=cfg.n_range.1);
    let m = rng.random_range(cfg.m_range.0..=cfg.m_range.1);
    let gamma =
        Gamma::new(cfg.concentration, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let ps = (0..n).map(|_| draw_pmf(&mut rng, &gamma, m)).collect();
    let qs = (0..n).map(|_| draw_pmf(&mut rng, &gamma, m)).collect();
    ProductInstance::new(ps, qs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

/// One checked relation `lhs ≤ rhs` (or `lhs = rhs`).
///
/// For inequalities `margin = rhs − lhs`; for equalities
/// `margin = −|lhs − rhs|`. A record passes iff `margin ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub lhs: f64,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub rhs: f64,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub margin: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Exact-value identities: encoding vs brute force, multinomial vs brute force.
    pub identity: f64,
    /// Atomwise comparison of the lifted encoding with the coordinate mixture.
    pub lift_atoms: f64,
    /// Analytic lemmas evaluated through convolutions or enumerations.
    pub lemma: f64,
    /// Closed-form sandwiches: mass control, signal size, Laplace ordering, main-hom.
    pub sandwich: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            lift_atoms: 1e-12,
            lemma: 1e-9,
            sandwich: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tol: Tolerances,
    /// Constant used in the convolution-level homogenization check.
    pub c0_upper: f64,
    /// Lower constant in `TV(vec) ≥ c·TV(hom)`.
    pub c_lower: f64,
    /// Upper constant in `TV(hom) ≤ C·TV(vec)`.
    pub c_upper: f64,
    pub lambdas: Vec<f64>,
    pub atom_cap: usize,
    pub enumeration_cap: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        let c0 = optimize_c0(GridSpec::default())
            .map(|r| r.c0_upper)
            .unwrap_or(C0_BOUND);
        Self {
            tol: Tolerances::default(),
            c0_upper: c0,
            c_lower: C_LOWER_BOUND,
            c_upper: C0_BOUND,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            atom_cap: DEFAULT_ATOM_CAP,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub instance_id: usize,
    pub n: usize,
    pub m: usize,
    /// `TV(⊗P_i, ⊗Q_i)`.
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub tv_vec: f64,
    /// `TV(P̄^{⊗n}, Q̄^{⊗n})`.
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub tv_hom: f64,
    /// `T(η̄^{*n})`, the convolution-level homogenized quantity.
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub t_hom_conv: f64,
    /// `tv_hom / tv_vec`, 0 when both vanish.
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub ratio: f64,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub alpha: f64,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub nu: f64,
    pub checks: Vec<CheckRecord>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `TV(hom)/TV(vec)` with the convention `0/0 = 0`.
///
/// Under strict positivity `TV(vec) = 0` forces `P_i = Q_i` for every `i`,
/// so the homogenized distance vanishes too.
pub fn hom_vec_ratio(tv_hom: f64, tv_vec: f64) -> f64 {
    if tv_vec == 0.0 {
        0.0
    } else {
        tv_hom / tv_vec
    }
}

fn is_budget(err: &Error) -> bool {
    matches!(
        err,
        Error::AtomBudgetExceeded { .. } | Error::EnumerationBudgetExceeded { .. }
    )
}

#[derive(Default)]
struct Checks {
    records: Vec<CheckRecord>,
}

impl Checks {
    fn push(&mut self, name: &str, lhs: f64, rhs: f64, margin: f64, tolerance: f64) {
        let status = if margin >= -tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        self.records.push(CheckRecord {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            tolerance,
            status,
            note: None,
        });
    }

    /// `lhs ≤ rhs`.
    fn le(&mut self, name: &str, lhs: f64, rhs: f64, tolerance: f64) {
        let margin = if lhs.is_nan() || rhs.is_nan() {
            f64::NEG_INFINITY
        } else {
            rhs - lhs
        };
        self.push(name, lhs, rhs, margin, tolerance);
    }

    /// `lhs = rhs`.
    fn eq(&mut self, name: &str, lhs: f64, rhs: f64, tolerance: f64) {
        let margin = if lhs.is_nan() || rhs.is_nan() {
            f64::NEG_INFINITY
        } else {
            -(lhs - rhs).abs()
        };
        self.push(name, lhs, rhs, margin, tolerance);
    }

    /// Records a check that could not be evaluated. Budget overruns are
    /// skips; anything else is a failure.
    fn unavailable(&mut self, name: &str, err: &Error) {
        let status = if is_budget(err) {
            CheckStatus::Skip
        } else {
            CheckStatus::Fail
        };
        let note = if is_budget(err) {
            format!("skipped: budget ({err})")
        } else {
            err.to_string()
        };
        self.records.push(CheckRecord {
            name: name.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            tolerance: 0.0,
            status,
            note: Some(note),
        });
    }

    fn le_res(&mut self, name: &str, lhs: &Result<f64>, rhs: &Result<f64>, tolerance: f64) {
        match (lhs, rhs) {
            (Ok(l), Ok(r)) => self.le(name, *l, *r, tolerance),
            (Err(e), _) | (_, Err(e)) => self.unavailable(name, e),
        }
    }

    fn eq_res(&mut self, name: &str, lhs: &Result<f64>, rhs: &Result<f64>, tolerance: f64) {
        match (lhs, rhs) {
            (Ok(l), Ok(r)) => self.eq(name, *l, *r, tolerance),
            (Err(e), _) | (_, Err(e)) => self.unavailable(name, e),
        }
    }
}

/// Largest positional or weight discrepancy between two canonical measures;
/// a differing atom count is reported as the count difference.
pub fn atomwise_distance(a: &AtomicMeasure, b: &AtomicMeasure) -> f64 {
    if a.len() != b.len() {
        return (a.len() as f64 - b.len() as f64).abs();
    }
    a.atoms()
        .iter()
        .zip(b.atoms())
        .map(|(x, y)| {
            (x.position - y.position)
                .abs()
                .max((x.weight - y.weight).abs())
        })
        .fold(0.0, f64::max)
}

fn mass_control(checks: &mut Checks, label: &str, mu: &AtomicMeasure, tol: f64) {
    let m = mu.total_mass();
    let t = mu.t_functional();
    checks.le(&format!("mass_control.{label}.lower"), 1.0 - m, t, tol);
    checks.le(
        &format!("mass_control.{label}.upper"),
        t,
        (1.0 - m * m).max(0.0).sqrt(),
        tol,
    );
}

fn worst_mass_control(checks: &mut Checks, etas: &[AtomicMeasure], tol: f64) {
    // Report the coordinate with the smallest margin for each side.
    let mut lower = (f64::INFINITY, 0.0, 0.0);
    let mut upper = (f64::INFINITY, 0.0, 0.0);
    for eta in etas {
        let m = eta.total_mass();
        let t = eta.t_functional();
        let ub = (1.0 - m * m).max(0.0).sqrt();
        if t - (1.0 - m) < lower.0 {
            lower = (t - (1.0 - m), 1.0 - m, t);
        }
        if ub - t < upper.0 {
            upper = (ub - t, t, ub);
        }
    }
    checks.le("mass_control.coordinates.lower", lower.1, lower.2, tol);
    checks.le("mass_control.coordinates.upper", upper.1, upper.2, tol);
}

/// Runs every check on one instance.
pub fn verify_instance(inst: &ProductInstance, opts: &VerifyOptions) -> LemmaReport {
    verify_instance_with_id(0, inst, opts)
}

pub fn verify_instance_with_id(
    instance_id: usize,
    inst: &ProductInstance,
    opts: &VerifyOptions,
) -> LemmaReport {
    let tol = opts.tol;
    let (n, m) = (inst.n(), inst.m());
    let mut checks = Checks::default();

    // Strictly positive instances always encode; an error here is a bug.
    let etas = match inst.encodings() {
        Ok(e) => e,
        Err(e) => {
            checks.unavailable("encoding", &e);
            return LemmaReport {
                instance_id,
                n,
                m,
                tv_vec: f64::NAN,
                tv_hom: f64::NAN,
                t_hom_conv: f64::NAN,
                ratio: f64::NAN,
                alpha: f64::NAN,
                nu: f64::NAN,
                checks: checks.records,
            };
        }
    };

    // Product side.
    let conv = AtomicMeasure::convolve_family_capped(&etas, opts.atom_cap);
    let tv_vec = conv
        .as_ref()
        .map(|c| c.t_functional())
        .map_err(Clone::clone);

    // Homogenized side.
    let (pbar, qbar) = inst.homogenized().expect("common alphabet");
    let tv_hom = tv_homogenized_multinomial_capped(&pbar, &qbar, n, opts.enumeration_cap);
    let mixture = AtomicMeasure::uniform_mixture(&etas).expect("non-empty family");
    let mix_power = mixture.power_capped(n, opts.atom_cap);
    let t_hom_conv = mix_power
        .as_ref()
        .map(|c| c.t_functional())
        .map_err(Clone::clone);

    // Admissibility closure.
    let coord_dev = etas
        .iter()
        .map(|e| e.admissibility(tol.lemma).max_deviation())
        .fold(0.0, f64::max);
    checks.le("admissibility.coordinates", coord_dev, 0.0, tol.lemma);
    match &conv {
        Ok(c) => checks.le(
            "admissibility.convolution",
            c.admissibility(tol.lemma).max_deviation(),
            0.0,
            tol.lemma,
        ),
        Err(e) => checks.unavailable("admissibility.convolution", e),
    }
    checks.le(
        "admissibility.mixture",
        mixture.admissibility(tol.lemma).max_deviation(),
        0.0,
        tol.lemma,
    );
    match &mix_power {
        Ok(c) => checks.le(
            "admissibility.mixture_power",
            c.admissibility(tol.lemma).max_deviation(),
            0.0,
            tol.lemma,
        ),
        Err(e) => checks.unavailable("admissibility.mixture_power", e),
    }

    // Encoding: single coordinates and the full product against enumeration.
    let single = inst
        .ps()
        .iter()
        .zip(inst.qs())
        .zip(&etas)
        .map(|((p, q), eta)| (eta.t_functional() - tv_pmf(p, q).expect("same alphabet")).abs())
        .fold(0.0, f64::max);
    checks.le("encoding.coordinates", single, 0.0, tol.identity);
    let brute = tv_product_bruteforce_capped(inst, opts.enumeration_cap);
    checks.eq_res("encoding.bruteforce", &tv_vec, &brute, tol.identity);

    // Lift.
    match lift(inst).and_then(|l| l.encode().map(|e| (l, e))) {
        Ok((lifted, lifted_eta)) => {
            checks.le(
                "lift.mixture_atoms",
                atomwise_distance(&lifted_eta, &mixture),
                0.0,
                tol.lift_atoms,
            );
            let copies =
                ProductInstance::homogeneous(lifted.lambda_p.clone(), lifted.lambda_q.clone(), n)
                    .and_then(|c| tv_product_exact_capped(&c, opts.atom_cap));
            checks.eq_res("lift.power_tv", &t_hom_conv, &copies, tol.lemma);
        }
        Err(e) => {
            checks.unavailable("lift.mixture_atoms", &e);
            checks.unavailable("lift.power_tv", &e);
        }
    }

    // Multinomial reduction.
    let hom_brute = ProductInstance::homogeneous(pbar.clone(), qbar.clone(), n)
        .and_then(|h| tv_product_bruteforce_capped(&h, opts.enumeration_cap));
    checks.eq_res("multinomial.bruteforce", &tv_hom, &hom_brute, tol.identity);
    checks.le_res(
        "multinomial.data_processing",
        &tv_hom,
        &t_hom_conv,
        tol.identity,
    );

    // Score variables.
    let laws = score_laws(&etas);
    let (alpha, nu) = match &laws {
        Ok(laws) => {
            let alpha: f64 = etas.iter().map(|e| 1.0 - e.total_mass()).sum();
            let seconds: Vec<f64> = laws.iter().map(ScoreLaw::second_moment).collect();
            let nu: f64 = seconds.iter().sum();
            score_checks(&mut checks, laws, &seconds, alpha, nu, &conv, opts);
            (alpha, nu)
        }
        Err(e) => {
            checks.unavailable("score.laws", e);
            (f64::NAN, f64::NAN)
        }
    };

    // Mass control.
    worst_mass_control(&mut checks, &etas, tol.sandwich);
    match &conv {
        Ok(c) => mass_control(&mut checks, "convolution", c, tol.sandwich),
        Err(e) => {
            checks.unavailable("mass_control.convolution.lower", e);
            checks.unavailable("mass_control.convolution.upper", e);
        }
    }
    match &mix_power {
        Ok(c) => mass_control(&mut checks, "mixture_power", c, tol.sandwich),
        Err(e) => {
            checks.unavailable("mass_control.mixture_power.lower", e);
            checks.unavailable("mass_control.mixture_power.upper", e);
        }
    }

    // Homogenization bounds.
    let scaled_vec = tv_vec.clone().map(|v| opts.c0_upper * v);
    checks.le_res("main_conv.ratio", &t_hom_conv, &scaled_vec, tol.lemma);
    let lower_lhs = tv_hom.clone().map(|h| opts.c_lower * h);
    checks.le_res("main_hom.lower", &lower_lhs, &tv_vec, tol.sandwich);
    let upper_rhs = tv_vec.clone().map(|v| opts.c_upper * v);
    checks.le_res("main_hom.upper", &tv_hom, &upper_rhs, tol.sandwich);

    let tv_vec = tv_vec.unwrap_or(f64::NAN);
    let tv_hom = tv_hom.unwrap_or(f64::NAN);
    LemmaReport {
        instance_id,
        n,
        m,
        tv_vec,
        tv_hom,
        t_hom_conv: t_hom_conv.unwrap_or(f64::NAN),
        ratio: hom_vec_ratio(tv_hom, tv_vec),
        alpha,
        nu,
        checks: checks.records,
    }
}

fn score_checks(
    checks: &mut Checks,
    laws: &[ScoreLaw],
    seconds: &[f64],
    alpha: f64,
    nu: f64,
    conv: &Result<AtomicMeasure>,
    opts: &VerifyOptions,
) {
    let tol = opts.tol;
    let max_mean = laws.iter().map(|l| l.mean().abs()).fold(0.0, f64::max);
    checks.le("score.zero_mean", max_mean, 0.0, tol.lemma);

    checks.le("signal.lower", alpha, nu, tol.sandwich);
    checks.le("signal.upper", nu, 2.0 * alpha, tol.sandwich);

    let t_conv = conv
        .as_ref()
        .map(|c| c.t_functional())
        .map_err(Clone::clone);
    let rem = remainder_l2(seconds);
    checks.le("linearization.a_series", rem, nu.sinh() - nu, tol.sandwich);

    match enumerate_psi(laws, opts.enumeration_cap) {
        Ok(psi) => {
            checks.eq_res("score.representation", &Ok(psi.abs_psi), &t_conv, tol.lemma);
            checks.eq(
                "linearization.remainder_identity",
                psi.remainder_sq,
                rem,
                tol.lemma,
            );
            checks.le(
                "linearization.a_enumerated",
                psi.abs_remainder * psi.abs_remainder,
                rem,
                tol.lemma,
            );
        }
        Err(e) => {
            checks.unavailable("score.representation", &e);
            checks.unavailable("linearization.remainder_identity", &e);
            checks.unavailable("linearization.a_enumerated", &e);
        }
    }

    let abs_s = sum_abs_mean_capped(laws, opts.atom_cap);
    let lower_b = Ok(nu / (1.0 + 3.0 * nu).sqrt());
    checks.le_res("linearization.b", &lower_b, &abs_s, tol.lemma);
    match (&t_conv, &abs_s) {
        (Ok(t), Ok(s)) => checks.le("linearization.c", (t - s).abs(), d_rho(nu) * s, tol.lemma),
        (Err(e), _) | (_, Err(e)) => checks.unavailable("linearization.c", e),
    }

    let sqrt_v = sqrt_quadratic_mean_capped(laws, opts.atom_cap);
    let kh_lower = sqrt_v.clone().map(|v| v / (2.0 * std::f64::consts::SQRT_2));
    checks.le_res("khintchine.lower", &kh_lower, &abs_s, tol.lemma);
    let kh_upper = sqrt_v.clone().map(|v| 2.0 * v);
    checks.le_res("khintchine.upper", &abs_s, &kh_upper, tol.lemma);

    match ScoreLaw::uniform_mixture(laws) {
        Ok(bar) => {
            let copies = vec![bar; laws.len()];
            for &lambda in &opts.lambdas {
                checks.le(
                    &format!("laplace.lambda={lambda}"),
                    laplace_v(laws, lambda),
                    laplace_v(&copies, lambda),
                    tol.sandwich,
                );
            }
            let sqrt_v_bar = sqrt_quadratic_mean_capped(&copies, opts.atom_cap);
            checks.le_res("laplace.sqrt_v", &sqrt_v_bar, &sqrt_v, tol.lemma);
        }
        Err(e) => checks.unavailable("laplace.sqrt_v", &e),
    }
}

/// Aggregate over a verified corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub instances: usize,
    pub checks_run: usize,
    pub failures: usize,
    pub skipped: usize,
    /// Smallest margin seen for each check name, with the instance that
    /// produced it.
    #[serde(deserialize_with = "crate::json::map_f64_or_nan")]
    pub min_margin: BTreeMap<String, (f64, usize)>,
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub max_ratio: f64,
    pub max_ratio_instance: Option<usize>,
    /// Largest `T(η̄^{*n}) / T(η_1 * ⋯ * η_n)`.
    pub max_conv_ratio: f64,
    /// Smallest `TV(vec) − c·TV(hom)`.
    #[serde(deserialize_with = "crate::json::f64_or_nan")]
    pub min_hom_lower_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: GeneratorConfig,
    pub summary: SuiteSummary,
    pub reports: Vec<LemmaReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.summary.failures == 0
    }
}

pub fn summarize(reports: &[LemmaReport], c_lower: f64) -> SuiteSummary {
    let mut s = SuiteSummary {
        instances: reports.len(),
        checks_run: 0,
        failures: 0,
        skipped: 0,
        min_margin: BTreeMap::new(),
        max_ratio: 0.0,
        max_ratio_instance: None,
        max_conv_ratio: 0.0,
        min_hom_lower_gap: f64::INFINITY,
    };
    for r in reports {
        for c in &r.checks {
            match c.status {
                CheckStatus::Skip => {
                    s.skipped += 1;
                    continue;
                }
                CheckStatus::Fail => s.failures += 1,
                CheckStatus::Pass => {}
            }
            s.checks_run += 1;
            let entry = s
                .min_margin
                .entry(c.name.clone())
                .or_insert((f64::INFINITY, r.instance_id));
            if c.margin < entry.0 || c.margin.is_nan() {
                *entry = (c.margin, r.instance_id);
            }
        }
        if r.ratio > s.max_ratio || (r.ratio.is_nan() && !s.max_ratio.is_nan()) {
            s.max_ratio = r.ratio;
            s.max_ratio_instance = Some(r.instance_id);
        }
        let conv_ratio = hom_vec_ratio(r.t_hom_conv, r.tv_vec);
        if conv_ratio > s.max_conv_ratio {
            s.max_conv_ratio = conv_ratio;
        }
        let gap = r.tv_vec - c_lower * r.tv_hom;
        if gap < s.min_hom_lower_gap {
            s.min_hom_lower_gap = gap;
        }
    }
    s
}

/// Verifies `cfg.count` generated instances in index order.
pub fn run_suite(cfg: &GeneratorConfig, opts: &VerifyOptions) -> Result<SuiteReport> {
    run_suite_with_jobs(cfg, opts, 1)
}

/// As [`run_suite`], splitting instances across `jobs` threads. The output
/// does not depend on `jobs`.
pub fn run_suite_with_jobs(
    cfg: &GeneratorConfig,
    opts: &VerifyOptions,
    jobs: usize,
) -> Result<SuiteReport> {
    cfg.validate()?;
    let jobs = jobs.max(1).min(cfg.count.max(1));
    let verify = |index: usize| -> Result<LemmaReport> {
        let inst = gen_instance(cfg, index)?;
        Ok(verify_instance_with_id(index, &inst, opts))
    };
    let reports: Vec<LemmaReport> = if jobs == 1 {
        (0..cfg.count).map(verify).collect::<Result<_>>()?
    } else {
        let mut slots: Vec<Option<LemmaReport>> = vec![None; cfg.count];
        std::thread::scope(|scope| -> Result<()> {
            let handles: Vec<_> = (0..jobs)
                .map(|j| {
                    let verify = &verify;
                    scope.spawn(move || {
                        (j..cfg.count)
                            .step_by(jobs)
                            .map(|i| verify(i).map(|r| (i, r)))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("worker panicked")? {
                    slots[i] = Some(r);
                }
            }
            Ok(())
        })?;
        slots
            .into_iter()
            .map(|r| r.expect("every index filled"))
            .collect()
    };
    Ok(SuiteReport {
        config: cfg.clone(),
        summary: summarize(&reports, opts.c_lower),
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Two-letter alphabet, `n` up to a few dozen through the exact path.
    Bernoulli,
    /// Alphabets of size 2..=`m_max`.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub restarts: usize,
    pub steps: usize,
    pub family: Family,
    pub n_max: usize,
    /// Largest alphabet for [`Family::General`].
    pub m_max: usize,
    pub concentration: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            restarts: 50,
            steps: 200,
            family: Family::Bernoulli,
            n_max: 16,
            m_max: 3,
            concentration: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub best_ratio: f64,
    pub witness: ProductInstance,
    pub witness_tv_vec: f64,
    pub witness_tv_hom: f64,
    pub evaluations: usize,
    pub seed: u64,
}

/// `TV(hom)/TV(vec)` for one instance, with the exact convolution path for
/// the product side.
pub fn evaluate_ratio(inst: &ProductInstance) -> Result<(f64, f64, f64)> {
    let tv_vec = tv_product_exact_capped(inst, DEFAULT_ATOM_CAP)?;
    let (pbar, qbar) = inst.homogenized()?;
    let tv_hom =
        tv_homogenized_multinomial_capped(&pbar, &qbar, inst.n(), DEFAULT_ENUMERATION_CAP)?;
    Ok((hom_vec_ratio(tv_hom, tv_vec), tv_vec, tv_hom))
}

/// Multiplies one probability by `factor` and renormalizes; `None` if the
/// result would drop below [`PROB_FLOOR`].
fn perturb(pmf: &Pmf, symbol: usize, factor: f64) -> Option<Pmf> {
    let mut w = pmf.probs().to_vec();
    w[symbol] *= factor;
    let sum: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / sum).collect();
    if probs.iter().any(|&p| p < PROB_FLOOR) {
        return None;
    }
    Pmf::new(probs).ok()
}

/// Random-restart hill climbing on `TV(hom)/TV(vec)`.
///
/// Each restart starts from a generated instance and takes `steps` proposals;
/// a proposal scales one probability of one `P_i` or `Q_i` by 0.9 or 1.1,
/// renormalizes, and is kept only if the ratio strictly improves. A ratio
/// above the proven bound aborts with [`Error::TheoremViolation`].
pub fn search_worst_ratio(cfg: &SearchConfig) -> Result<SearchReport> {
    if cfg.restarts == 0 {
        return Err(Error::InvalidConfig(
            "at least one restart is required".into(),
        ));
    }
    if cfg.n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be positive".into()));
    }
    let m_range = match cfg.family {
        Family::Bernoulli => (2, 2),
        Family::General => {
            if cfg.m_max < 2 {
                return Err(Error::InvalidConfig("m_max must be at least 2".into()));
            }
            (2, cfg.m_max)
        }
    };
    let gen = GeneratorConfig {
        seed: cfg.seed,
        n_range: (1, cfg.n_max),
        m_range,
        concentration: cfg.concentration,
        count: cfg.restarts,
    };
    gen.validate()?;

    let mut evaluations = 0usize;
    let mut best: Option<(f64, ProductInstance, f64, f64)> = None;
    let eval = |inst: &ProductInstance, evaluations: &mut usize| -> Result<(f64, f64, f64)> {
        *evaluations += 1;
        let r = evaluate_ratio(inst)?;
        if r.0 > C0_BOUND {
            return Err(Error::TheoremViolation {
                ratio: r.0,
                bound: C0_BOUND,
            });
        }
        Ok(r)
    };

    for restart in 0..cfg.restarts {
        let mut current = gen_instance(&gen, restart)?;
        let (mut ratio, mut tv_vec, mut tv_hom) = eval(&current, &mut evaluations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        rng.set_stream(restart as u64);
        let (n, m) = (current.n(), current.m());
        for _ in 0..cfg.steps {
            let on_q = rng.random_bool(0.5);
            let coord = rng.random_range(0..n);
            let symbol = rng.random_range(0..m);
            let factor = if rng.random_bool(0.5) { 1.1 } else { 0.9 };
            let mut ps = current.ps().to_vec();
            let mut qs = current.qs().to_vec();
            let target = if on_q { &mut qs[coord] } else { &mut ps[coord] };
            let Some(moved) = perturb(target, symbol, factor) else {
                continue;
            };
            *target = moved;
            let candidate = ProductInstance::new(ps, qs)?;
            let (r, v, h) = eval(&candidate, &mut evaluations)?;
            if r > ratio {
                current = candidate;
                ratio = r;
                tv_vec = v;
                tv_hom = h;
            }
        }
        if best.as_ref().is_none_or(|b| ratio > b.0) {
            best = Some((ratio, current, tv_vec, tv_hom));
        }
    }
    let (best_ratio, witness, witness_tv_vec, witness_tv_hom) = best.expect("at least one restart");
    Ok(SearchReport {
        best_ratio,
        witness,
        witness_tv_vec,
        witness_tv_hom,
        evaluations,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(p: &[f64]) -> Pmf {
        Pmf::new(p.to_vec()).unwrap()
    }

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig::default();
        for i in [0, 1, 17, 9999] {
            let a = gen_instance(&cfg, i).unwrap();
            let b = gen_instance(&cfg, i).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
            assert!((1..=6).contains(&a.n()) && (2..=4).contains(&a.m()));
        }
        assert_ne!(
            gen_instance(&cfg, 0).unwrap(),
            gen_instance(&cfg, 1).unwrap()
        );
    }

    #[test]
    fn generator_range_collapse() {
        let cfg = GeneratorConfig {
            n_range: (1, 1),
            m_range: (2, 2),
            ..GeneratorConfig::default()
        };
        let inst = gen_instance(&cfg, 3).unwrap();
        assert_eq!((inst.n(), inst.m()), (1, 2));
    }

    #[test]
    fn generator_rejects_bad_config() {
        let cfg = GeneratorConfig {
            n_range: (3, 2),
            ..GeneratorConfig::default()
        };
        assert!(matches!(
            gen_instance(&cfg, 0),
            Err(Error::InvalidConfig(_))
        ));
        let cfg = GeneratorConfig {
            concentration: 0.0,
            ..GeneratorConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn homogeneous_pair_a_report() {
        let inst = ProductInstance::homogeneous(pmf(&[0.5, 0.5]), pmf(&[0.75, 0.25]), 2).unwrap();
        let r = verify_instance(&inst, &opts());
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let enc = r.check("encoding.bruteforce").unwrap();
        assert!((enc.lhs - 0.3125).abs() < 1e-15 && (enc.rhs - 0.3125).abs() < 1e-15);
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pairs_degenerate_pass() {
        let p = pmf(&[0.2, 0.3, 0.5]);
        let inst = ProductInstance::homogeneous(p.clone(), p, 3).unwrap();
        let r = verify_instance(&inst, &opts());
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.tv_vec, 0.0);
        assert!(r.tv_hom.abs() < 1e-15);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn no_reverse_witness_report() {
        let inst = ProductInstance::new(
            vec![pmf(&[0.5, 0.5]), pmf(&[0.5, 0.5])],
            vec![pmf(&[0.7, 0.3]), pmf(&[0.3, 0.7])],
        )
        .unwrap();
        let r = verify_instance(&inst, &opts());
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert!(r.tv_hom.abs() < 1e-15);
        assert!((r.tv_vec - 0.24).abs() < 1e-15);
        let upper = r.check("main_hom.upper").unwrap();
        assert!((upper.margin - 6.7129 * 0.24).abs() < 1e-12);
        assert!((upper.margin - 1.611).abs() < 1e-3);
    }

    #[test]
    fn budget_overruns_are_skips() {
        let inst = gen_instance(
            &GeneratorConfig {
                n_range: (4, 4),
                m_range: (3, 3),
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let o = VerifyOptions {
            enumeration_cap: 10,
            ..opts()
        };
        let r = verify_instance(&inst, &o);
        let enc = r.check("encoding.bruteforce").unwrap();
        assert_eq!(enc.status, CheckStatus::Skip);
        assert!(enc.note.as_deref().unwrap().starts_with("skipped: budget"));
        assert_eq!(
            r.check("score.representation").unwrap().status,
            CheckStatus::Skip
        );
        assert!(r.passed());
    }

    #[test]
    fn failing_check_is_reported() {
        // An impossible constant turns main_conv into a failure, not a panic.
        let inst = ProductInstance::new(
            vec![pmf(&[0.5, 0.5]), pmf(&[0.5, 0.5])],
            vec![pmf(&[0.7, 0.3]), pmf(&[0.3, 0.7])],
        )
        .unwrap();
        let o = VerifyOptions {
            c0_upper: 0.1,
            ..opts()
        };
        let r = verify_instance(&inst, &o);
        assert!(!r.passed());
        assert_eq!(r.failures().next().unwrap().name, "main_conv.ratio");
    }

    #[test]
    fn empty_suite_passes() {
        let cfg = GeneratorConfig {
            count: 0,
            ..GeneratorConfig::default()
        };
        let s = run_suite(&cfg, &opts()).unwrap();
        assert!(s.reports.is_empty());
        assert!(s.passed());
    }

    #[test]
    fn suite_is_independent_of_jobs() {
        let cfg = GeneratorConfig {
            count: 12,
            n_range: (1, 3),
            ..GeneratorConfig::default()
        };
        let a = run_suite_with_jobs(&cfg, &opts(), 1).unwrap();
        let b = run_suite_with_jobs(&cfg, &opts(), 3).unwrap();
        assert_eq!(
            crate::json::to_string_pretty(&a).unwrap(),
            crate::json::to_string_pretty(&b).unwrap()
        );
        assert!(a.passed());
    }

    #[test]
    fn degenerate_search_returns_initial_ratio() {
        let cfg = SearchConfig {
            restarts: 1,
            steps: 0,
            n_max: 4,
            ..SearchConfig::default()
        };
        let r = search_worst_ratio(&cfg).unwrap();
        assert_eq!(r.evaluations, 1);
        let gen = GeneratorConfig {
            seed: cfg.seed,
            n_range: (1, 4),
            m_range: (2, 2),
            concentration: 1.0,
            count: 1,
        };
        let init = gen_instance(&gen, 0).unwrap();
        assert_eq!(r.witness, init);
        assert_eq!(r.best_ratio, evaluate_ratio(&init).unwrap().0);
    }

    #[test]
    fn perturb_respects_floor() {
        let p = pmf(&[1.0 - 1e-6, 1e-6]);
        assert!(perturb(&p, 1, 0.9).is_none());
        let q = perturb(&p, 1, 1.1).unwrap();
        assert!(q.probs()[1] > 1e-6);
    }
}
