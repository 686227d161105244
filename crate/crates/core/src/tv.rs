//! Probability mass functions, exact TV for product distributions, and the
//! homogenized counterpart.
//!
//! The exact path encodes each coordinate pair as an admissible measure,
//! convolves, and applies the T functional. [`tv_product_bruteforce`]
//! enumerates the product space directly and serves as the oracle. The
//! homogenized TV uses the multinomial reduction: `P̄^{⊗n}` and `Q̄^{⊗n}` are
//! compared through their count vectors.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, DEFAULT_ATOM_CAP};

/// Default cap on the number of enumerated outcomes.
pub const DEFAULT_ENUMERATION_CAP: usize = 10_000_000;

/// Tolerance on `Σ p = 1` accepted by [`Pmf::new`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Strictly positive probability mass function on `{0, …, m−1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("pmf"));
        }
        for (index, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFiniteInput { index, value: p });
            }
            if p < 0.0 {
                return Err(Error::NegativeWeight { index, value: p });
            }
            if p == 0.0 {
                return Err(Error::ZeroProbability { index });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    /// Normalizes strictly positive weights into a pmf.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::NotNormalized { sum });
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyInput("pmf"));
        }
        Ok(Self {
            probs: vec![1.0 / m as f64; m],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(1−δ)P + δ/m`, the only way to turn a pmf with zeros into a [`Pmf`].
    pub fn smooth(raw: &[f64], delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::BadDelta(delta));
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput("pmf"));
        }
        for (index, &p) in raw.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFiniteInput { index, value: p });
            }
            if p < 0.0 {
                return Err(Error::NegativeWeight { index, value: p });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        let m = raw.len() as f64;
        Self::new(raw.iter().map(|p| (1.0 - delta) * p + delta / m).collect())
    }
}

fn check_alphabet(p: &Pmf, q: &Pmf) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// `½ Σ |P(ω) − Q(ω)|`.
pub fn tv_pmf(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_alphabet(p, q)?;
    Ok(0.5
        * p.probs
            .iter()
            .zip(&q.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// The admissible encoding `Σ_ω √(P(ω)Q(ω)) δ_{½ log(P(ω)/Q(ω))}`.
pub fn encode_pair(p: &Pmf, q: &Pmf) -> Result<AtomicMeasure> {
    check_alphabet(p, q)?;
    AtomicMeasure::new(
        p.probs
            .iter()
            .zip(&q.probs)
            .map(|(&a, &b)| (0.5 * (a / b).ln(), (a * b).sqrt())),
    )
}

/// A pair of product distributions `⊗P_i` and `⊗Q_i` on a common alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct ProductInstance {
    ps: Vec<Pmf>,
    qs: Vec<Pmf>,
}

/// On-disk form: `{"m": int, "n": int, "P": [[...]; n], "Q": [[...]; n]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("field {field}: expected {expected} entries, found {found}")]
    Shape {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("field {field}: {source}")]
    Pmf {
        field: String,
        #[source]
        source: Error,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl TryFrom<InstanceFile> for ProductInstance {
    type Error = InstanceError;

    fn try_from(file: InstanceFile) -> std::result::Result<Self, InstanceError> {
        let convert =
            |name: &str, rows: Vec<Vec<f64>>| -> std::result::Result<Vec<Pmf>, InstanceError> {
                if rows.len() != file.n {
                    return Err(InstanceError::Shape {
                        field: name.to_string(),
                        expected: file.n,
                        found: rows.len(),
                    });
                }
                rows.into_iter()
                    .enumerate()
                    .map(|(i, row)| {
                        let field = format!("{name}[{i}]");
                        if row.len() != file.m {
                            return Err(InstanceError::Shape {
                                field,
                                expected: file.m,
                                found: row.len(),
                            });
                        }
                        Pmf::new(row).map_err(|source| InstanceError::Pmf { field, source })
                    })
                    .collect()
            };
        let ps = convert("P", file.p.clone())?;
        let qs = convert("Q", file.q.clone())?;
        Ok(ProductInstance::new(ps, qs)?)
    }
}

impl From<ProductInstance> for InstanceFile {
    fn from(inst: ProductInstance) -> Self {
        InstanceFile {
            m: inst.m(),
            n: inst.n(),
            p: inst.ps.iter().map(|p| p.probs.clone()).collect(),
            q: inst.qs.iter().map(|q| q.probs.clone()).collect(),
        }
    }
}

impl ProductInstance {
    pub fn new(ps: Vec<Pmf>, qs: Vec<Pmf>) -> Result<Self> {
        if ps.is_empty() {
            return Err(Error::EmptyInput("product instance"));
        }
        if ps.len() != qs.len() {
            return Err(Error::AlphabetMismatch {
                left: ps.len(),
                right: qs.len(),
            });
        }
        let m = ps[0].len();
        for pmf in ps.iter().chain(&qs) {
            if pmf.len() != m {
                return Err(Error::AlphabetMismatch {
                    left: m,
                    right: pmf.len(),
                });
            }
        }
        Ok(Self { ps, qs })
    }

    /// `n` copies of the same pair.
    pub fn homogeneous(p: Pmf, q: Pmf, n: usize) -> Result<Self> {
        Self::new(vec![p; n], vec![q; n])
    }

    pub fn n(&self) -> usize {
        self.ps.len()
    }

    pub fn m(&self) -> usize {
        self.ps[0].len()
    }

    pub fn ps(&self) -> &[Pmf] {
        &self.ps
    }

    pub fn qs(&self) -> &[Pmf] {
        &self.qs
    }

    /// Encodings `η_i` of every coordinate pair.
    pub fn encodings(&self) -> Result<Vec<AtomicMeasure>> {
        self.ps
            .iter()
            .zip(&self.qs)
            .map(|(p, q)| encode_pair(p, q))
            .collect()
    }

    /// `(P̄, Q̄)`.
    pub fn homogenized(&self) -> Result<(Pmf, Pmf)> {
        Ok((homogenize(&self.ps)?, homogenize(&self.qs)?))
    }
}

/// `TV(⊗P_i, ⊗Q_i)` as `T(η_1 * ⋯ * η_n)`.
pub fn tv_product_exact(inst: &ProductInstance) -> Result<f64> {
    tv_product_exact_capped(inst, DEFAULT_ATOM_CAP)
}

pub fn tv_product_exact_capped(inst: &ProductInstance, cap: usize) -> Result<f64> {
    let etas = inst.encodings()?;
    Ok(AtomicMeasure::convolve_family_capped(&etas, cap)?.t_functional())
}

/// Number of outcomes in `Ω^n`, saturating.
pub fn product_space_size(m: usize, n: usize) -> u128 {
    (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX)
}

/// `½ Σ_{ω ∈ Ω^n} |Π P_i(ω_i) − Π Q_i(ω_i)|` by full enumeration.
pub fn tv_product_bruteforce(inst: &ProductInstance) -> Result<f64> {
    tv_product_bruteforce_capped(inst, DEFAULT_ENUMERATION_CAP)
}

pub fn tv_product_bruteforce_capped(inst: &ProductInstance, cap: usize) -> Result<f64> {
    let (n, m) = (inst.n(), inst.m());
    let requested = product_space_size(m, n);
    if requested > cap as u128 {
        return Err(Error::EnumerationBudgetExceeded { requested, cap });
    }
    // Odometer over Ω^n with prefix products, so each step re-multiplies only
    // the coordinates that changed.
    let mut digits = vec![0usize; n];
    let mut pref_p = vec![1.0; n + 1];
    let mut pref_q = vec![1.0; n + 1];
    let mut from = 0;
    let mut total = 0.0;
    loop {
        for i in from..n {
            pref_p[i + 1] = pref_p[i] * inst.ps[i].probs[digits[i]];
            pref_q[i + 1] = pref_q[i] * inst.qs[i].probs[digits[i]];
        }
        total += (pref_p[n] - pref_q[n]).abs();
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(0.5 * total);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < m {
                break;
            }
            digits[i] = 0;
        }
        from = i;
    }
}

/// Coordinatewise arithmetic mean of a family of pmfs.
pub fn homogenize(pmfs: &[Pmf]) -> Result<Pmf> {
    let first = pmfs.first().ok_or(Error::EmptyInput("homogenize"))?;
    let m = first.len();
    let mut acc = vec![0.0; m];
    for pmf in pmfs {
        if pmf.len() != m {
            return Err(Error::AlphabetMismatch {
                left: m,
                right: pmf.len(),
            });
        }
        for (a, p) in acc.iter_mut().zip(&pmf.probs) {
            *a += p;
        }
    }
    let n = pmfs.len() as f64;
    Ok(Pmf {
        probs: acc.into_iter().map(|a| a / n).collect(),
    })
}

/// `C(n + m − 1, m − 1)`, saturating.
pub fn composition_count(n: usize, m: usize) -> u128 {
    if m == 0 {
        return 0;
    }
    let k = (m - 1) as u128;
    let mut c: u128 = 1;
    for j in 1..=k {
        c = match c.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    c
}

/// Compositions of `n` into `m` non-negative parts in colexicographic order:
/// `(n,0,…,0), (n−1,1,0,…), …, (0,…,0,n)`.
pub struct Compositions {
    parts: Vec<usize>,
    done: bool,
}

impl Compositions {
    pub fn new(n: usize, m: usize) -> Self {
        let mut parts = vec![0; m];
        if m > 0 {
            parts[0] = n;
        }
        Self {
            parts,
            done: m == 0,
        }
    }

    fn advance(&mut self) {
        let m = self.parts.len();
        let Some(i) = self.parts.iter().position(|&k| k > 0) else {
            self.done = true;
            return;
        };
        if i + 1 >= m {
            self.done = true;
            return;
        }
        let v = self.parts[i];
        self.parts[i] = 0;
        self.parts[0] = v - 1;
        self.parts[i + 1] += 1;
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.parts.clone();
        self.advance();
        Some(out)
    }
}

/// `log Mult(n, p)(k)` via log-factorials.
pub fn multinomial_ln_pmf(counts: &[usize], ln_probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut acc = ln_factorial(n as u64);
    for (&k, &lp) in counts.iter().zip(ln_probs) {
        if k > 0 {
            acc += k as f64 * lp - ln_factorial(k as u64);
        }
    }
    acc
}

/// `|e^a − e^b|` evaluated as `e^{max}·|expm1(min − max)|`.
#[inline]
pub fn abs_exp_diff(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi.exp() * -(lo - hi).exp_m1()
}

/// `TV(P̄^{⊗n}, Q̄^{⊗n}) = TV(Mult(n, P̄), Mult(n, Q̄))`.
pub fn tv_homogenized_multinomial(pbar: &Pmf, qbar: &Pmf, n: usize) -> Result<f64> {
    tv_homogenized_multinomial_capped(pbar, qbar, n, DEFAULT_ENUMERATION_CAP)
}

pub fn tv_homogenized_multinomial_capped(
    pbar: &Pmf,
    qbar: &Pmf,
    n: usize,
    cap: usize,
) -> Result<f64> {
    check_alphabet(pbar, qbar)?;
    if n == 0 {
        return Err(Error::EmptyInput(
            "number of coordinates must be at least 1",
        ));
    }
    let m = pbar.len();
    let requested = composition_count(n, m);
    if requested > cap as u128 {
        return Err(Error::EnumerationBudgetExceeded { requested, cap });
    }
    let lp: Vec<f64> = pbar.probs.iter().map(|p| p.ln()).collect();
    let lq: Vec<f64> = qbar.probs.iter().map(|q| q.ln()).collect();
    let mut total = 0.0;
    for counts in Compositions::new(n, m) {
        total += abs_exp_diff(
            multinomial_ln_pmf(&counts, &lp),
            multinomial_ln_pmf(&counts, &lq),
        );
    }
    Ok(0.5 * total)
}

/// `(Λ_P, Λ_Q)` on `[n] × Ω`, flattened with `flat = i·m + ω` (0-based).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedPair {
    pub n: usize,
    pub m: usize,
    pub lambda_p: Pmf,
    pub lambda_q: Pmf,
}

impl LiftedPair {
    pub fn flat_index(&self, i: usize, omega: usize) -> usize {
        debug_assert!(i < self.n && omega < self.m);
        i * self.m + omega
    }

    pub fn unflatten(&self, flat: usize) -> (usize, usize) {
        (flat / self.m, flat % self.m)
    }

    /// The encoding of the lifted pair; equal to `(1/n) Σ η_i`.
    pub fn encode(&self) -> Result<AtomicMeasure> {
        encode_pair(&self.lambda_p, &self.lambda_q)
    }
}

/// `Λ_P(i, ω) = P_i(ω)/n`, `Λ_Q(i, ω) = Q_i(ω)/n`.
pub fn lift(inst: &ProductInstance) -> Result<LiftedPair> {
    let n = inst.n();
    let scale = 1.0 / n as f64;
    let flatten = |pmfs: &[Pmf]| -> Result<Pmf> {
        Pmf::new(
            pmfs.iter()
                .flat_map(|p| p.probs.iter().map(|x| x * scale))
                .collect(),
        )
    };
    Ok(LiftedPair {
        n,
        m: inst.m(),
        lambda_p: flatten(&inst.ps)?,
        lambda_q: flatten(&inst.qs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(p: &[f64]) -> Pmf {
        Pmf::new(p.to_vec()).unwrap()
    }

    fn pair_a() -> (Pmf, Pmf) {
        (pmf(&[0.5, 0.5]), pmf(&[0.75, 0.25]))
    }

    fn witness() -> ProductInstance {
        ProductInstance::new(
            vec![pmf(&[0.5, 0.5]), pmf(&[0.5, 0.5])],
            vec![pmf(&[0.7, 0.3]), pmf(&[0.3, 0.7])],
        )
        .unwrap()
    }

    #[test]
    fn pmf_validation() {
        assert!(matches!(
            Pmf::new(vec![0.5, 0.0, 0.5]),
            Err(Error::ZeroProbability { index: 1 })
        ));
        assert!(matches!(
            Pmf::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(Pmf::new(vec![]), Err(Error::EmptyInput(_))));
        assert!(matches!(
            Pmf::new(vec![1.5, -0.5]),
            Err(Error::NegativeWeight { .. })
        ));
        assert!(Pmf::new(vec![0.1, 0.2, 0.7]).is_ok());
    }

    #[test]
    fn tv_pmf_examples() {
        let (p, q) = pair_a();
        assert_eq!(tv_pmf(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_pmf(&p, &q).unwrap(), 0.25);
        assert!((tv_pmf(&p, &pmf(&[0.7, 0.3])).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            tv_pmf(&p, &pmf(&[0.2, 0.3, 0.5])),
            Err(Error::AlphabetMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn encode_pair_examples() {
        let (p, q) = pair_a();
        let same = encode_pair(&p, &p).unwrap();
        assert_eq!(same.len(), 1);
        assert_eq!(same.atoms()[0].position, 0.0);
        assert!((same.atoms()[0].weight - 1.0).abs() < 1e-15);

        let eta = encode_pair(&p, &q).unwrap();
        let a = eta.atoms();
        assert!((a[0].position + 0.2027325541).abs() < 1e-10);
        assert!((a[0].weight - 0.6123724357).abs() < 1e-10);
        assert!((a[1].position - 0.3465735903).abs() < 1e-10);
        assert!((a[1].weight - 0.3535533906).abs() < 1e-10);

        assert!(matches!(
            Pmf::new(vec![0.5, 0.0]),
            Err(Error::ZeroProbability { index: 1 })
        ));
    }

    #[test]
    fn equal_ratios_merge_in_encoding() {
        let p = pmf(&[0.2, 0.3, 0.5]);
        let q = pmf(&[0.1, 0.15, 0.75]);
        let eta = encode_pair(&p, &q).unwrap();
        assert_eq!(eta.len(), 2);
        assert!((eta.t_functional() - tv_pmf(&p, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn product_examples() {
        let (p, q) = pair_a();
        let one = ProductInstance::homogeneous(p.clone(), q.clone(), 1).unwrap();
        assert!((tv_product_exact(&one).unwrap() - 0.25).abs() < 1e-15);
        assert!((tv_product_bruteforce(&one).unwrap() - 0.25).abs() < 1e-15);

        let two = ProductInstance::homogeneous(p.clone(), q, 2).unwrap();
        assert!((tv_product_exact(&two).unwrap() - 0.3125).abs() < 1e-15);
        assert!((tv_product_bruteforce(&two).unwrap() - 0.3125).abs() < 1e-15);

        assert!((tv_product_exact(&witness()).unwrap() - 0.24).abs() < 1e-15);
        assert!((tv_product_bruteforce(&witness()).unwrap() - 0.24).abs() < 1e-15);

        let same = ProductInstance::homogeneous(p.clone(), p, 3).unwrap();
        assert_eq!(tv_product_bruteforce(&same).unwrap(), 0.0);
    }

    #[test]
    fn bruteforce_budget() {
        let (p, q) = pair_a();
        let inst = ProductInstance::homogeneous(p, q, 4).unwrap();
        assert_eq!(
            tv_product_bruteforce_capped(&inst, 15),
            Err(Error::EnumerationBudgetExceeded {
                requested: 16,
                cap: 15
            })
        );
        assert!(tv_product_bruteforce_capped(&inst, 16).is_ok());
    }

    #[test]
    fn homogenize_examples() {
        let h = homogenize(&[pmf(&[0.5, 0.5]), pmf(&[0.5, 0.5])]).unwrap();
        assert_eq!(h.probs(), &[0.5, 0.5]);
        let h = homogenize(&[pmf(&[0.7, 0.3]), pmf(&[0.3, 0.7])]).unwrap();
        assert!((h.probs()[0] - 0.5).abs() < 1e-15);
        let h = homogenize(&[pmf(&[0.75, 0.25]), pmf(&[0.5, 0.5])]).unwrap();
        assert_eq!(h.probs(), &[0.625, 0.375]);
        assert!(homogenize(&[pmf(&[0.5, 0.5]), pmf(&[0.2, 0.3, 0.5])]).is_err());
    }

    #[test]
    fn compositions_colex() {
        let all: Vec<Vec<usize>> = Compositions::new(2, 3).collect();
        assert_eq!(
            all,
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
        for (n, m) in [(0, 1), (1, 1), (3, 2), (5, 4), (6, 3)] {
            assert_eq!(
                Compositions::new(n, m).count() as u128,
                composition_count(n, m)
            );
        }
        assert_eq!(Compositions::new(3, 0).count(), 0);
    }

    #[test]
    fn multinomial_examples() {
        let (p, q) = pair_a();
        assert!((tv_homogenized_multinomial(&p, &q, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((tv_homogenized_multinomial(&p, &q, 2).unwrap() - 0.3125).abs() < 1e-14);
        assert!((tv_homogenized_multinomial(&p, &q, 3).unwrap() - 0.34375).abs() < 1e-14);
        assert!(matches!(
            tv_homogenized_multinomial_capped(&p, &q, 3, 3),
            Err(Error::EnumerationBudgetExceeded {
                requested: 4,
                cap: 3
            })
        ));
    }

    #[test]
    fn multinomial_handles_large_n() {
        // Binomial TV between Ber(0.5) and Ber(0.51) over 500 trials, cross-checked
        // with a direct sum of binomial differences in log space.
        let p = pmf(&[0.5, 0.5]);
        let q = pmf(&[0.51, 0.49]);
        let got = tv_homogenized_multinomial(&p, &q, 500).unwrap();
        let mut direct = 0.0;
        for k in 0..=500u64 {
            let c = ln_factorial(500) - ln_factorial(k) - ln_factorial(500 - k);
            let a = (c + k as f64 * 0.5f64.ln() + (500 - k) as f64 * 0.5f64.ln()).exp();
            let b = (c + k as f64 * 0.51f64.ln() + (500 - k) as f64 * 0.49f64.ln()).exp();
            direct += (a - b).abs();
        }
        assert!((got - 0.5 * direct).abs() < 1e-12);
        assert!(got > 0.0 && got < 1.0);
    }

    #[test]
    fn no_reverse_witness() {
        let (pbar, qbar) = witness().homogenized().unwrap();
        assert_eq!(tv_homogenized_multinomial(&pbar, &qbar, 2).unwrap(), 0.0);
    }

    #[test]
    fn lift_examples() {
        let (p, q) = pair_a();
        let one = ProductInstance::homogeneous(p.clone(), q.clone(), 1).unwrap();
        let l = lift(&one).unwrap();
        assert_eq!(l.lambda_p, p);
        assert_eq!(l.lambda_q, q);

        let l = lift(&witness()).unwrap();
        assert_eq!(l.lambda_p.probs(), &[0.25; 4]);
        let want = [0.35, 0.15, 0.15, 0.35];
        for (a, b) in l.lambda_q.probs().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(l.flat_index(1, 0), 2);
        assert_eq!(l.unflatten(3), (1, 1));
    }

    #[test]
    fn smoothing() {
        let s = Pmf::smooth(&[1.0, 0.0], 0.1).unwrap();
        assert!((s.probs()[0] - 0.95).abs() < 1e-15);
        assert!((s.probs()[1] - 0.05).abs() < 1e-15);
        assert_eq!(Pmf::smooth(&[1.0, 0.0], 1.0), Err(Error::BadDelta(1.0)));
        assert_eq!(Pmf::smooth(&[1.0, 0.0], 0.0), Err(Error::BadDelta(0.0)));

        let p = pmf(&[0.7, 0.2, 0.1]);
        let s = Pmf::smooth(p.probs(), 0.01).unwrap();
        let u = Pmf::uniform(3).unwrap();
        let lhs = tv_pmf(&s, &p).unwrap();
        let rhs = 0.01 * tv_pmf(&p, &u).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
    }

    #[test]
    fn instance_json_round_trip() {
        let s = r#"{"m": 2, "n": 2, "P": [[0.5, 0.5], [0.5, 0.5]], "Q": [[0.7, 0.3], [0.3, 0.7]]}"#;
        let inst: ProductInstance = serde_json::from_str(s).unwrap();
        assert_eq!(inst, witness());
        let back: ProductInstance =
            serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);

        let bad = r#"{"m": 2, "n": 2, "P": [[0.5, 0.5]], "Q": [[0.7, 0.3], [0.3, 0.7]]}"#;
        let err = serde_json::from_str::<ProductInstance>(bad)
            .unwrap_err()
            .to_string();
        assert!(err.contains("field P"), "{err}");
        let bad = r#"{"m": 2, "n": 1, "P": [[0.5, 0.5]], "Q": [[1.0, 0.0]]}"#;
        let err = serde_json::from_str::<ProductInstance>(bad)
            .unwrap_err()
            .to_string();
        assert!(err.contains("Q[0]"), "{err}");
    }
}
