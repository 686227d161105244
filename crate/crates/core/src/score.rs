//! Score laws and the explicit homogenization constant.
//!
//! For an admissible measure `η`, the tilted law `M(dx) = cosh(x) η(dx)` is a
//! probability measure and `U = tanh(X)` with `X ~ M` is centered in
//! `[−1, 1]`. With independent `U_i` and
//! `Ψ(y) = ½(Π(1+y_i) − Π(1−y_i))`, the T functional of a convolution is
//! `E|Ψ(U_1, …, U_n)|`. Everything here is computed exactly over the finite
//! supports: sums of independent draws are formed by convolving the laws.
//!
//! The second half evaluates `Δ(ε)`, `D(ρ)` and `C(ε)` and minimizes `C` to
//! obtain the certified constant `C₀ < 6.7129`, hence `c = 1/C₀ > 0.1489`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, ADMISSIBLE_TOL, DEFAULT_ATOM_CAP};

/// Upper bound on `C₀` certified by [`optimize_c0`].
pub const C0_BOUND: f64 = 6.7129;

/// Lower bound on the homogenization constant `c = 1/C₀`.
pub const C_LOWER_BOUND: f64 = 0.1489;

/// Iteration budget of the golden-section refinement.
pub const GOLDEN_MAX_ITER: usize = 200;

/// Below this argument `(sinh t − t)/t²` is evaluated by its power series.
const SERIES_CUTOFF: f64 = 1e-2;

/// Finite law of a score variable `U ∈ [−1, 1]`.
///
/// Stored as an [`AtomicMeasure`] whose positions are the values of `U`, which
/// gives canonical merging and convolution for free.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLaw {
    dist: AtomicMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalStats {
    /// Mass defect `Σ (1 − η_i(ℝ))`.
    pub alpha: f64,
    /// `Σ E U_i²`.
    pub nu: f64,
}

impl ScoreLaw {
    /// Builds a law from `(value, probability)` pairs.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let dist = AtomicMeasure::new(atoms)?;
        if let Some(a) = dist.atoms().iter().find(|a| a.position.abs() > 1.0) {
            return Err(Error::NonFiniteInput {
                index: 0,
                value: a.position,
            });
        }
        let sum = dist.total_mass();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { dist })
    }

    /// Law of `tanh(X)` for `X ~ cosh(x) η(dx)`.
    ///
    /// Requires `η` admissible within [`ADMISSIBLE_TOL`]; the tilted weights
    /// are renormalized so the result sums to 1 exactly up to rounding.
    pub fn from_measure(eta: &AtomicMeasure) -> Result<Self> {
        Self::from_measure_tol(eta, ADMISSIBLE_TOL)
    }

    pub fn from_measure_tol(eta: &AtomicMeasure, tol: f64) -> Result<Self> {
        let report = eta.admissibility(tol);
        if !report.admissible {
            return Err(Error::NotAdmissible {
                plus: report.integral_plus,
                minus: report.integral_minus,
            });
        }
        let tilted: Vec<(f64, f64)> = eta
            .atoms()
            .iter()
            .map(|a| (a.position.tanh(), a.weight * a.position.cosh()))
            .collect();
        let total: f64 = tilted.iter().map(|(_, w)| w).sum();
        let dist = AtomicMeasure::new(tilted.into_iter().map(|(u, w)| (u, w / total)))?;
        Ok(Self { dist })
    }

    /// The degenerate law `U = 0`.
    pub fn zero() -> Self {
        Self {
            dist: AtomicMeasure::dirac(0.0, 1.0).expect("unit point mass"),
        }
    }

    /// `(value, probability)` pairs in ascending value order.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.dist.atoms().iter().map(|a| (a.position, a.weight))
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(u, p)| u * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms().map(|(u, p)| u * u * p).sum()
    }

    /// `E e^{−λU²}`.
    pub fn laplace_square(&self, lambda: f64) -> f64 {
        self.atoms().map(|(u, p)| p * (-lambda * u * u).exp()).sum()
    }

    /// Law of `Ū`: the arithmetic average of the given laws.
    pub fn uniform_mixture(laws: &[Self]) -> Result<Self> {
        let dists: Vec<AtomicMeasure> = laws.iter().map(|l| l.dist.clone()).collect();
        Ok(Self {
            dist: AtomicMeasure::uniform_mixture(&dists)?,
        })
    }

    fn squares(&self) -> Result<AtomicMeasure> {
        AtomicMeasure::new(self.atoms().map(|(u, p)| (u * u, p)))
    }
}

/// Score laws of an admissible family.
pub fn score_laws(etas: &[AtomicMeasure]) -> Result<Vec<ScoreLaw>> {
    etas.iter().map(ScoreLaw::from_measure).collect()
}

/// Exact `E|S|` for `S = Σ U_i` with independent `U_i`.
pub fn sum_abs_mean(laws: &[ScoreLaw]) -> Result<f64> {
    sum_abs_mean_capped(laws, DEFAULT_ATOM_CAP)
}

pub fn sum_abs_mean_capped(laws: &[ScoreLaw], cap: usize) -> Result<f64> {
    let dists: Vec<AtomicMeasure> = laws.iter().map(|l| l.dist.clone()).collect();
    let sum = AtomicMeasure::convolve_family_capped(&dists, cap)?;
    Ok(sum
        .atoms()
        .iter()
        .map(|a| a.weight * a.position.abs())
        .sum())
}

/// Exact `E√V` for `V = Σ U_i²`.
pub fn sqrt_quadratic_mean(laws: &[ScoreLaw]) -> Result<f64> {
    sqrt_quadratic_mean_capped(laws, DEFAULT_ATOM_CAP)
}

pub fn sqrt_quadratic_mean_capped(laws: &[ScoreLaw], cap: usize) -> Result<f64> {
    let squares = laws
        .iter()
        .map(ScoreLaw::squares)
        .collect::<Result<Vec<_>>>()?;
    let identical = laws.windows(2).all(|w| w[0] == w[1]);
    let v = if identical && !squares.is_empty() {
        squares[0].power_capped(squares.len(), cap)?
    } else {
        AtomicMeasure::convolve_family_capped(&squares, cap)?
    };
    Ok(v.atoms()
        .iter()
        .map(|a| a.weight * a.position.max(0.0).sqrt())
        .sum())
}

/// `E e^{−λV} = Π E e^{−λU_i²}`.
pub fn laplace_v(laws: &[ScoreLaw], lambda: f64) -> f64 {
    laws.iter().map(|l| l.laplace_square(lambda)).product()
}

/// `(α, ν)` for an admissible family.
pub fn signal_stats(etas: &[AtomicMeasure]) -> Result<SignalStats> {
    let mut alpha = 0.0;
    let mut nu = 0.0;
    for eta in etas {
        let law = ScoreLaw::from_measure(eta)?;
        alpha += 1.0 - eta.total_mass();
        nu += law.second_moment();
    }
    Ok(SignalStats { alpha, nu })
}

/// Moments of `Ψ(U)` and of its linear part, by enumerating the product of
/// supports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiMoments {
    /// `E|Ψ(U_1, …, U_n)|`.
    pub abs_psi: f64,
    /// `E|S|`.
    pub abs_linear: f64,
    /// `E|Ψ − S|`.
    pub abs_remainder: f64,
    /// `E(Ψ − S)²`.
    pub remainder_sq: f64,
}

/// Number of points in the product of the laws' supports, saturating.
pub fn support_product(laws: &[ScoreLaw]) -> u128 {
    laws.iter()
        .try_fold(1u128, |acc, l| acc.checked_mul(l.len() as u128))
        .unwrap_or(u128::MAX)
}

pub fn enumerate_psi(laws: &[ScoreLaw], cap: usize) -> Result<PsiMoments> {
    if laws.is_empty() {
        return Err(Error::EmptyInput("score laws"));
    }
    let requested = support_product(laws);
    if requested > cap as u128 {
        return Err(Error::EnumerationBudgetExceeded { requested, cap });
    }
    let supports: Vec<Vec<(f64, f64)>> = laws.iter().map(|l| l.atoms().collect()).collect();
    let n = supports.len();
    let mut digits = vec![0usize; n];
    // Prefix products of (1+u), (1−u) and probability; prefix sums of u.
    let mut plus = vec![1.0; n + 1];
    let mut minus = vec![1.0; n + 1];
    let mut prob = vec![1.0; n + 1];
    let mut lin = vec![0.0; n + 1];
    let mut from = 0;
    let mut out = PsiMoments {
        abs_psi: 0.0,
        abs_linear: 0.0,
        abs_remainder: 0.0,
        remainder_sq: 0.0,
    };
    loop {
        for i in from..n {
            let (u, p) = supports[i][digits[i]];
            plus[i + 1] = plus[i] * (1.0 + u);
            minus[i + 1] = minus[i] * (1.0 - u);
            prob[i + 1] = prob[i] * p;
            lin[i + 1] = lin[i] + u;
        }
        let psi = 0.5 * (plus[n] - minus[n]);
        let s = lin[n];
        let r = psi - s;
        let w = prob[n];
        out.abs_psi += w * psi.abs();
        out.abs_linear += w * s.abs();
        out.abs_remainder += w * r.abs();
        out.remainder_sq += w * r * r;

        let mut i = n;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < supports[i].len() {
                break;
            }
            digits[i] = 0;
        }
        from = i;
    }
}

/// Exact `E R²` where `R` collects the odd monomials of degree ≥ 3 of `Ψ`,
/// given the second moments `a_i = E Y_i²`.
///
/// Equals `(Π(1+a_i) − Π(1−a_i))/2 − Σa_i`; evaluated through the elementary
/// symmetric polynomials so that no cancellation occurs.
pub fn remainder_l2(second_moments: &[f64]) -> f64 {
    let n = second_moments.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (j, &a) in second_moments.iter().enumerate() {
        for k in (1..=j + 1).rev() {
            e[k] += a * e[k - 1];
        }
    }
    e.iter().skip(3).step_by(2).sum()
}

/// `(sinh t − t)/t²`, with value 0 at `t = 0`.
pub fn sinh_excess_ratio(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if t.abs() < SERIES_CUTOFF {
        // Σ_{j=1}^{6} t^{2j−1}/(2j+1)!
        let t2 = t * t;
        let mut term = t / 6.0;
        let mut acc = term;
        for j in 2..=6u32 {
            let k = (2 * j) as f64;
            term *= t2 / (k * (k + 1.0));
            acc += term;
        }
        acc
    } else {
        (t.sinh() - t) / (t * t)
    }
}

/// `D(ρ) = √((1+3ρ)(sinh ρ − ρ)/ρ²)`, `D(0) = 0`.
pub fn d_rho(rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    ((1.0 + 3.0 * rho) * sinh_excess_ratio(rho)).sqrt()
}

/// `Δ(ε) = √((1+6ε)(sinh 2ε − 2ε)/(2ε)²)`.
pub fn delta_eps(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    ((1.0 + 6.0 * eps) * sinh_excess_ratio(2.0 * eps)).sqrt()
}

/// First branch of `C(ε)`: the small-mass-defect regime.
pub fn c_linear_branch(eps: f64) -> Result<f64> {
    let d = delta_eps(eps);
    if d >= 1.0 {
        return Err(Error::DeltaTooLarge { eps, delta: d });
    }
    Ok((4.0 * std::f64::consts::SQRT_2 + d) / (1.0 - d))
}

/// Second branch of `C(ε)`: `√((1+e^{−ε})/(1−e^{−ε}))`.
pub fn c_mass_branch(eps: f64) -> f64 {
    let em1 = (-eps).exp_m1();
    ((2.0 + em1) / -em1).sqrt()
}

/// `C(ε) = max{(4√2 + Δ)/(1 − Δ), √((1+e^{−ε})/(1−e^{−ε}))}`.
pub fn c_eps(eps: f64) -> Result<f64> {
    Ok(c_linear_branch(eps)?.max(c_mass_branch(eps)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub eps_star: f64,
    pub delta_eps: f64,
    pub c_eps: f64,
    pub c0_upper: f64,
    pub c_lower: f64,
}

impl ConstantsReport {
    pub fn at(eps: f64) -> Result<Self> {
        let c = c_eps(eps)?;
        Ok(Self {
            eps_star: eps,
            delta_eps: delta_eps(eps),
            c_eps: c,
            c0_upper: c,
            c_lower: 1.0 / c,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub refine_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 1e-4,
            hi: 0.5,
            steps: 1000,
            refine_tol: 1e-10,
        }
    }
}

/// Minimizes `C(ε)` over the feasible set `{Δ(ε) < 1}`.
///
/// A uniform grid scan locates the best feasible grid point (ties go to the
/// smaller ε); golden-section search then refines within the neighbouring
/// grid cells. Deterministic for a fixed [`GridSpec`].
pub fn optimize_c0(grid: GridSpec) -> Result<ConstantsReport> {
    let GridSpec {
        lo,
        hi,
        steps,
        refine_tol,
    } = grid;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::InvalidGrid(format!(
            "need 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if steps < 10 {
        return Err(Error::InvalidGrid(format!(
            "need at least 10 steps, got {steps}"
        )));
    }
    if refine_tol.is_nan() || refine_tol <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "refine tolerance must be positive, got {refine_tol}"
        )));
    }

    let point = |k: usize| lo + (hi - lo) * (k as f64) / (steps as f64);
    let values: Vec<Option<f64>> = (0..=steps).map(|k| c_eps(point(k)).ok()).collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        if let Some(c) = *v {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((k, c));
            }
        }
    }
    let (k, grid_value) = best.ok_or(Error::NoFeasiblePoint)?;

    let feasible = |j: usize| values.get(j).is_some_and(|v| v.is_some());
    let a = if k > 0 && feasible(k - 1) {
        point(k - 1)
    } else {
        point(k)
    };
    let b = if feasible(k + 1) {
        point(k + 1)
    } else {
        point(k)
    };
    let (x, fx) = golden_section(|e| c_eps(e).unwrap_or(f64::INFINITY), a, b, refine_tol);

    let eps_star = if fx < grid_value || (fx == grid_value && x < point(k)) {
        x
    } else {
        point(k)
    };
    ConstantsReport::at(eps_star)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .fold(
            (mid, fm),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        )
}
