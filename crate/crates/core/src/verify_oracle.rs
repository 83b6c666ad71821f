//! Independent checks: a plain re-summation verifier for emitted index lists
//! and exhaustive subset-sum oracles for small magnitude lists.
//!
//! Nothing here uses `series_eval`. The verifier is a compensated f64 loop
//! with an explicit rounding slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targeter::kakeya_check;

/// Largest pool the subset oracle accepts.
pub const ORACLE_MAX: usize = 30;
/// Largest pool `achievement_profile` accepts.
pub const PROFILE_MAX: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCheck {
    pub alpha: f64,
    pub coeff: f64,
    pub target: f64,
    pub sum: f64,
    pub residual: f64,
    /// `n_terms * 4 * eps * max |partial sum|`.
    pub slack: f64,
    /// `Σ |coeff| n^{-α}` over the indices.
    pub abs_total: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n_terms: usize,
    pub tol: f64,
    /// Indices listed more than once (each reported once).
    pub duplicates: Vec<u64>,
    /// Entries that are not valid indices (zero).
    pub invalid: Vec<u64>,
    pub unsorted: bool,
    pub coordinates: Vec<CoordinateCheck>,
    pub pass: bool,
}

/// `(-1)^{n+1} n^{-alpha}`, computed as `1 / n^alpha`.
fn signed_term(n: u64, alpha: f64) -> f64 {
    let m = if n == 1 { 1.0 } else { 1.0 / (n as f64).powf(alpha) };
    if n % 2 == 1 {
        m
    } else {
        -m
    }
}

/// Kahan running sum that also tracks the largest partial sum seen.
#[derive(Debug, Default, Clone, Copy)]
pub struct Running {
    sum: f64,
    carry: f64,
    max_abs: f64,
}

impl Running {
    pub fn push(&mut self, t: f64) -> f64 {
        let y = t - self.carry;
        let s = self.sum + y;
        self.carry = (s - self.sum) - y;
        self.sum = s;
        self.max_abs = self.max_abs.max(s.abs());
        s
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }
}

/// One JSONL row: `terms[i] = coeffs[i] (-1)^{n+1} n^{-α_i}` and the running sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub n: u64,
    pub terms: Vec<f64>,
    pub partial: Vec<f64>,
}

/// Rows for an ascending index list, in order.
pub fn index_rows(indices: &[u64], alphas: &[f64], coeffs: &[f64]) -> Vec<IndexRow> {
    let mut acc = vec![Running::default(); alphas.len()];
    indices
        .iter()
        .map(|&n| {
            let terms: Vec<f64> = alphas
                .iter()
                .zip(coeffs)
                .map(|(&a, &c)| c * signed_term(n, a))
                .collect();
            let partial = terms.iter().zip(acc.iter_mut()).map(|(&t, r)| r.push(t)).collect();
            IndexRow { n, terms, partial }
        })
        .collect()
}

pub fn verify(indices: &[u64], alphas: &[f64], target: &[f64], tol: f64) -> Result<VerifyReport> {
    verify_with(indices, alphas, &vec![1.0; alphas.len()], target, tol)
}

/// Re-sums `Σ_{n} coeffs[i] (-1)^{n+1} n^{-α_i}` in ascending `n` and compares
/// each coordinate with `target[i]`. Malformed index lists are findings in the
/// report, not errors; only mismatched vector lengths are rejected.
pub fn verify_with(indices: &[u64], alphas: &[f64], coeffs: &[f64], target: &[f64], tol: f64) -> Result<VerifyReport> {
    let d = alphas.len();
    for len in [coeffs.len(), target.len()] {
        if len != d {
            return Err(Error::LengthMismatch { left: d, right: len });
        }
    }
    let unsorted = indices.windows(2).any(|w| w[0] > w[1]);
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut duplicates: Vec<u64> = sorted.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
    duplicates.dedup();
    let invalid: Vec<u64> = sorted.iter().copied().filter(|&n| n == 0).collect();

    let n_terms = sorted.len();
    let coordinates: Vec<CoordinateCheck> = (0..d)
        .map(|i| {
            let mut acc = Running::default();
            let mut abs_total = Running::default();
            for &n in sorted.iter().filter(|&&n| n > 0) {
                let t = coeffs[i] * signed_term(n, alphas[i]);
                acc.push(t);
                abs_total.push(t.abs());
            }
            let sum = acc.value();
            let residual = sum - target[i];
            let slack = n_terms as f64 * 4.0 * f64::EPSILON * acc.max_abs();
            CoordinateCheck {
                alpha: alphas[i],
                coeff: coeffs[i],
                target: target[i],
                sum,
                residual,
                slack,
                abs_total: abs_total.value(),
                pass: residual.abs() <= tol + slack,
            }
        })
        .collect();
    let pass = duplicates.is_empty() && invalid.is_empty() && coordinates.iter().all(|c| c.pass);
    Ok(VerifyReport {
        n_terms,
        tol,
        duplicates,
        invalid,
        unsorted,
        coordinates,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub target: f64,
    pub achieved: f64,
    pub residual: f64,
    /// Positions (into the input list) of the optimal subset, ascending.
    pub subset: Vec<usize>,
}

/// All subset sums of `mags`, tagged by bitmask, sorted by sum.
fn half_sums(mags: &[f64]) -> Vec<(f64, u32)> {
    let mut sums = vec![(0.0, 0u32)];
    for (i, &m) in mags.iter().enumerate() {
        let more: Vec<(f64, u32)> = sums.iter().map(|&(s, mask)| (s + m, mask | (1 << i))).collect();
        sums.extend(more);
    }
    sums.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    sums
}

fn check_magnitudes(mags: &[f64], cap: usize) -> Result<()> {
    if mags.len() > cap {
        return Err(Error::capacity(
            format!("oracle pool of {} elements", mags.len()),
            cap as u64,
        ));
    }
    if let Some(m) = mags.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "magnitudes must be positive and finite, got {m}"
        )));
    }
    Ok(())
}

struct Halves {
    split: usize,
    left: Vec<(f64, u32)>,
    right: Vec<(f64, u32)>,
}

impl Halves {
    fn new(mags: &[f64]) -> Self {
        let split = mags.len() / 2;
        Halves {
            split,
            left: half_sums(&mags[..split]),
            right: half_sums(&mags[split..]),
        }
    }

    /// Best `(residual, left mask, right mask)`; ties keep the first found.
    fn best(&self, target: f64) -> (f64, u32, u32) {
        let mut best = (f64::INFINITY, 0, 0);
        for &(s, lm) in &self.left {
            let want = target - s;
            let j = self.right.partition_point(|&(r, _)| r < want);
            for &(r, rm) in self.right[j.saturating_sub(1)..(j + 1).min(self.right.len())].iter() {
                let res = (s + r - target).abs();
                if res < best.0 {
                    best = (res, lm, rm);
                }
            }
        }
        best
    }
}

/// Optimal `|Σ_{i∈S} mags[i] - target|` over all subsets `S`, by meet in the
/// middle. Subset sums are formed in f64, so "optimal" is up to a few ulps of
/// the total.
pub fn brute_subset_oracle(mags: &[f64], target: f64) -> Result<OracleResult> {
    check_magnitudes(mags, ORACLE_MAX)?;
    let h = Halves::new(mags);
    let (residual, lm, rm) = h.best(target);
    let mut subset: Vec<usize> = (0..h.split).filter(|i| lm >> i & 1 == 1).collect();
    subset.extend((h.split..mags.len()).filter(|i| rm >> (i - h.split) & 1 == 1));
    let achieved = subset.iter().map(|&i| mags[i]).sum();
    Ok(OracleResult {
        target,
        achieved,
        residual,
        subset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub target: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub total: f64,
    pub rows: Vec<ProfileRow>,
    pub max_residual: f64,
    /// First violation of `m_k <= Σ_{j>k} m_j + m_last` over the magnitudes
    /// sorted descending.
    pub kakeya_violation: Option<usize>,
    /// Half the smallest magnitude: the largest residual such a list can
    /// leave on `[0, total]`. Present only when the check passes.
    pub kakeya_bound: Option<f64>,
}

/// Oracle residuals at `grid` evenly spaced targets `total * j / (grid - 1)`.
pub fn achievement_profile(mags: &[f64], grid: usize) -> Result<Profile> {
    check_magnitudes(mags, PROFILE_MAX)?;
    if mags.is_empty() {
        return Err(Error::InvalidInput("empty magnitude list".into()));
    }
    if grid < 2 {
        return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {grid}")));
    }
    let total: f64 = mags.iter().sum();
    let h = Halves::new(mags);
    let rows: Vec<ProfileRow> = (0..grid)
        .map(|j| {
            let target = total * j as f64 / (grid - 1) as f64;
            ProfileRow {
                target,
                residual: h.best(target).0,
            }
        })
        .collect();
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let mut desc = mags.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let last = desc[desc.len() - 1];
    let kakeya_violation = kakeya_check(&desc, last);
    Ok(Profile {
        total,
        rows,
        max_residual,
        kakeya_violation,
        kakeya_bound: kakeya_violation.is_none().then(|| last / 2.0),
    })
}
