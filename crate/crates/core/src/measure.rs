//! Finitely supported positive measures on the real line.
//!
//! An [`AtomicMeasure`] is kept in canonical form: atoms sorted strictly
//! ascending by position, positive weights, and no two atoms closer than the
//! merge tolerance. Positions live on the half-log-likelihood-ratio scale, so
//! the two integrals `∫e^x dη` and `∫e^{-x} dη` recover the masses of the two
//! underlying distributions and `∫|sinh x| dη` recovers their total variation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::json::fmt_f64;

/// Absolute tolerance under which two positions are treated as one atom.
pub const POSITION_TOL: f64 = 1e-12;

/// Default cap on `|a| * |b|` for a single convolution step.
pub const DEFAULT_ATOM_CAP: usize = 10_000_000;

/// Default tolerance for [`AtomicMeasure::is_admissible`]-style checks.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

/// Canonical finitely supported positive measure on ℝ.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

/// The two exponential moments of a measure and the resulting verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub integral_plus: f64,
    pub integral_minus: f64,
    pub admissible: bool,
}

impl AdmissibilityReport {
    /// Largest distance of either integral from 1.
    pub fn max_deviation(&self) -> f64 {
        (self.integral_plus - 1.0)
            .abs()
            .max((self.integral_minus - 1.0).abs())
    }
}

/// Merges a position-sorted stream into canonical atoms.
///
/// Merged atoms carry the weight sum and the weight-averaged position. The
/// comparison is made against the running average, so consecutive output
/// atoms are always more than `tol` apart.
struct Sweep {
    tol: f64,
    out: Vec<Atom>,
    current: Option<Atom>,
}

impl Sweep {
    fn new(tol: f64, capacity: usize) -> Self {
        Self {
            tol,
            out: Vec::with_capacity(capacity),
            current: None,
        }
    }

    #[inline]
    fn push(&mut self, position: f64, weight: f64) {
        match &mut self.current {
            Some(cur) if position - cur.position <= self.tol => {
                let total = cur.weight + weight;
                cur.position += (weight / total) * (position - cur.position);
                cur.weight = total;
            }
            _ => {
                if let Some(done) = self.current.take() {
                    self.out.push(done);
                }
                self.current = Some(Atom { position, weight });
            }
        }
    }

    fn finish(mut self) -> Vec<Atom> {
        if let Some(done) = self.current.take() {
            self.out.push(done);
        }
        self.out
    }
}

impl AtomicMeasure {
    /// Builds a canonical measure from raw `(position, weight)` pairs.
    ///
    /// Zero weights are dropped; if nothing remains the result is
    /// [`Error::EmptyMeasure`].
    pub fn new<I>(raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::with_tolerance(raw, POSITION_TOL)
    }

    pub fn with_tolerance<I>(raw: I, tol: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms = Vec::new();
        for (index, (position, weight)) in raw.into_iter().enumerate() {
            if !position.is_finite() {
                return Err(Error::NonFiniteInput {
                    index,
                    value: position,
                });
            }
            if !weight.is_finite() {
                return Err(Error::NonFiniteInput {
                    index,
                    value: weight,
                });
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight {
                    index,
                    value: weight,
                });
            }
            if weight > 0.0 {
                atoms.push(Atom { position, weight });
            }
        }
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        let mut sweep = Sweep::new(tol, atoms.len());
        for a in &atoms {
            sweep.push(a.position, a.weight);
        }
        Ok(Self {
            atoms: sweep.finish(),
        })
    }

    /// Point mass `weight · δ_position`.
    pub fn dirac(position: f64, weight: f64) -> Result<Self> {
        Self::new([(position, weight)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Computes `∫e^x dη` and `∫e^{-x} dη` and compares both to 1.
    pub fn admissibility(&self, tol: f64) -> AdmissibilityReport {
        let (plus, minus) = self.atoms.iter().fold((0.0, 0.0), |(p, m), a| {
            (
                p + a.weight * a.position.exp(),
                m + a.weight * (-a.position).exp(),
            )
        });
        AdmissibilityReport {
            integral_plus: plus,
            integral_minus: minus,
            admissible: (plus - 1.0).abs() <= tol && (minus - 1.0).abs() <= tol,
        }
    }

    pub fn is_admissible(&self, tol: f64) -> bool {
        self.admissibility(tol).admissible
    }

    /// `T(η) = ½∫|e^x − e^{−x}| dη = ∫|sinh x| dη`.
    pub fn t_functional(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * abs_sinh(a.position))
            .sum()
    }

    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.convolve_capped(other, DEFAULT_ATOM_CAP)
    }

    /// Pushforward of `self ⊗ other` under addition.
    ///
    /// Every row `a_i + b_·` is already sorted, so the rows are merged with a
    /// heap instead of sorting all `|a|·|b|` pairs.
    pub fn convolve_capped(&self, other: &Self, cap: usize) -> Result<Self> {
        let requested = self.len() as u128 * other.len() as u128;
        if requested > cap as u128 {
            return Err(Error::AtomBudgetExceeded { requested, cap });
        }
        let (rows, cols) = if self.len() <= other.len() {
            (&self.atoms, &other.atoms)
        } else {
            (&other.atoms, &self.atoms)
        };
        if rows.len() == 1 {
            let r = rows[0];
            let mut sweep = Sweep::new(POSITION_TOL, cols.len());
            for c in cols {
                sweep.push(r.position + c.position, r.weight * c.weight);
            }
            return Ok(Self {
                atoms: sweep.finish(),
            });
        }

        let mut heap: BinaryHeap<Cursor> = rows
            .iter()
            .enumerate()
            .map(|(row, r)| Cursor {
                position: r.position + cols[0].position,
                row,
                col: 0,
            })
            .collect();
        let mut sweep = Sweep::new(POSITION_TOL, cols.len() * 2);
        while let Some(mut top) = heap.peek_mut() {
            let r = rows[top.row];
            let c = cols[top.col];
            sweep.push(top.position, r.weight * c.weight);
            if top.col + 1 < cols.len() {
                top.col += 1;
                top.position = r.position + cols[top.col].position;
            } else {
                std::collections::binary_heap::PeekMut::pop(top);
            }
        }
        Ok(Self {
            atoms: sweep.finish(),
        })
    }

    /// Left fold of [`convolve`](Self::convolve) over a non-empty family.
    pub fn convolve_family(measures: &[Self]) -> Result<Self> {
        Self::convolve_family_capped(measures, DEFAULT_ATOM_CAP)
    }

    pub fn convolve_family_capped(measures: &[Self], cap: usize) -> Result<Self> {
        let (first, rest) = measures
            .split_first()
            .ok_or(Error::EmptyInput("convolution family"))?;
        rest.iter()
            .try_fold(first.clone(), |acc, m| acc.convolve_capped(m, cap))
    }

    /// `n`-fold self-convolution.
    pub fn power(&self, n: usize) -> Result<Self> {
        self.power_capped(n, DEFAULT_ATOM_CAP)
    }

    /// Enumerates the multisets of `n` atoms directly when there are at most
    /// `cap` of them (`C(n+k−1, k−1)` for `k` atoms), which is several times
    /// less work than folding. Otherwise folds one factor at a time, which
    /// stays polynomial when sums of positions collide.
    pub fn power_capped(&self, n: usize, cap: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("convolution power must be at least 1"));
        }
        if n == 1 {
            return Ok(self.clone());
        }
        if multiset_count(n, self.len()) <= cap as u128 {
            if let Some(p) = self.power_by_multisets(n) {
                return Ok(p);
            }
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve_capped(self, cap)?;
        }
        Ok(acc)
    }

    /// Atom `Σ c_j x_j` with weight `n!·Π w_j^{c_j}/c_j!` for every count
    /// vector `c` summing to `n`, then one canonical sweep. `None` if every
    /// weight underflows.
    fn power_by_multisets(&self, n: usize) -> Option<Self> {
        let k = self.len();
        // ln(w_j^c / c!) for c = 0..=n.
        let ln_terms: Vec<Vec<f64>> = self
            .atoms
            .iter()
            .map(|a| {
                let lw = a.weight.ln();
                (0..=n)
                    .map(|c| c as f64 * lw - ln_factorial(c as u64))
                    .collect()
            })
            .collect();
        let mut raw = Vec::with_capacity(multiset_count(n, k) as usize);
        let mut walk = MultisetWalk {
            atoms: &self.atoms,
            ln_terms: &ln_terms,
            ln_n_fact: ln_factorial(n as u64),
            out: &mut raw,
        };
        walk.visit(0, n, 0.0, 0.0);
        raw.sort_unstable_by(|a: &(f64, f64), b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut sweep = Sweep::new(POSITION_TOL, raw.len());
        for &(position, weight) in &raw {
            if weight > 0.0 {
                sweep.push(position, weight);
            }
        }
        let atoms = sweep.finish();
        (!atoms.is_empty()).then_some(Self { atoms })
    }

    /// Convex combination `Σ a_i η_i`.
    pub fn mixture(measures: &[Self], weights: &[f64]) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::EmptyInput("mixture"));
        }
        if measures.len() != weights.len() {
            return Err(Error::WeightMismatch(format!(
                "{} measures but {} weights",
                measures.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::WeightMismatch(format!("invalid weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::WeightMismatch(format!("weights sum to {sum}")));
        }
        let raw = measures
            .iter()
            .zip(weights)
            .flat_map(|(m, &w)| m.atoms.iter().map(move |a| (a.position, w * a.weight)));
        Self::new(raw)
    }

    /// Uniform mixture `(1/n) Σ η_i`.
    pub fn uniform_mixture(measures: &[Self]) -> Result<Self> {
        let w = vec![1.0 / measures.len() as f64; measures.len()];
        Self::mixture(measures, &w)
    }

    /// JSON array of `[position, weight]` pairs with 17-digit doubles.
    pub fn to_json(&self) -> String {
        let body: Vec<String> = self
            .atoms
            .iter()
            .map(|a| format!("[{}, {}]", fmt_f64(a.position), fmt_f64(a.weight)))
            .collect();
        format!("[{}]", body.join(", "))
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, FromJsonError> {
        let pairs: Vec<[f64; 2]> = serde_json::from_str(s)?;
        Ok(Self::new(pairs.into_iter().map(|[p, w]| (p, w)))?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FromJsonError {
    #[error(transparent)]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Measure(#[from] Error),
}

/// `|sinh x|` as `(expm1(|x|) − expm1(−|x|)) / 2`, a sum of two non-negative
/// terms.
#[inline]
pub fn abs_sinh(x: f64) -> f64 {
    let a = x.abs();
    0.5 * (a.exp_m1() - (-a).exp_m1())
}

/// `C(n + k − 1, k − 1)`, saturating.
fn multiset_count(n: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for j in 1..k as u128 {
        c = match c.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    c
}

struct MultisetWalk<'a> {
    atoms: &'a [Atom],
    ln_terms: &'a [Vec<f64>],
    ln_n_fact: f64,
    out: &'a mut Vec<(f64, f64)>,
}

impl MultisetWalk<'_> {
    fn visit(&mut self, j: usize, remaining: usize, position: f64, ln_weight: f64) {
        let x = self.atoms[j].position;
        if j + 1 == self.atoms.len() {
            let c = remaining;
            let lw = ln_weight + self.ln_terms[j][c] + self.ln_n_fact;
            self.out.push((position + c as f64 * x, lw.exp()));
            return;
        }
        for c in 0..=remaining {
            self.visit(
                j + 1,
                remaining - c,
                position + c as f64 * x,
                ln_weight + self.ln_terms[j][c],
            );
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cursor {
    position: f64,
    row: usize,
    col: usize,
}

impl PartialEq for Cursor {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Cursor {}

impl PartialOrd for Cursor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cursor {
    // Reversed: BinaryHeap is a max-heap and we want the smallest position.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .position
            .total_cmp(&self.position)
            .then_with(|| other.row.cmp(&self.row))
    }
}
