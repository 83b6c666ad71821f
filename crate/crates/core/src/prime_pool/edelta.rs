//! Geometric-corridor subsequences: consecutive ratios in `(1 + delta/3, 1 + delta]`.

use serde::{Deserialize, Serialize};

use super::pool::PoolHandle;
use super::sieve::Sieve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeqSource {
    /// Elements drawn from a prime pool by the window rule.
    Pool { pool: PoolHandle },
    /// `start * ratio^k`, used for exact test sequences such as powers of two.
    Geometric { ratio: u64 },
}

/// Sign of the terms `(-1)^{n+1} n^{-alpha}` over some index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    /// Consecutive nonempty windows required before a start is accepted.
    pub windows: usize,
    /// Windows beyond this bound are not checked (the artifact never uses them).
    pub horizon: u64,
    pub max_restarts: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            windows: 64,
            horizon: 10_000_000,
            max_restarts: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EDeltaSeq {
    pub source: SeqSource,
    pub delta: f64,
    /// Enforced lower growth ratio: every consecutive pair has `a' > a (1 + eps_prime)`.
    pub eps_prime: f64,
    pub start: u64,
    /// Number of windows checked nonempty when the start was committed.
    pub windows_checked: usize,
}

impl EDeltaSeq {
    pub fn geometric(start: u64, ratio: u64) -> Result<Self> {
        if ratio != 2 || start == 0 {
            return Err(Error::Precondition(
                "geometric sequences need ratio 2 to stay inside delta <= 1".into(),
            ));
        }
        Ok(EDeltaSeq {
            source: SeqSource::Geometric { ratio },
            delta: 1.0,
            eps_prime: 1.0,
            start,
            windows_checked: usize::MAX,
        })
    }

    fn window(&self, a: u64) -> (f64, f64) {
        let a = a as f64;
        (a * (1.0 + self.eps_prime), a * (1.0 + self.delta))
    }

    /// Sign of all terms from enumeration index `from` onwards.
    pub fn sign_from(&self, from: usize) -> SignPattern {
        match &self.source {
            SeqSource::Pool { .. } => SignPattern::Positive,
            SeqSource::Geometric { ratio } => {
                let first_even = self.start.is_multiple_of(2) || (from > 0 && ratio % 2 == 0);
                let all_even_after = self.start.is_multiple_of(2) || ratio % 2 == 0;
                match (first_even, all_even_after) {
                    (true, _) => SignPattern::Negative,
                    (false, false) => SignPattern::Positive,
                    (false, true) => SignPattern::Mixed,
                }
            }
        }
    }

    /// Elements `<= bound`, ascending.
    pub fn elements_up_to(&self, sieve: &Sieve, bound: u64) -> Result<Vec<u64>> {
        match &self.source {
            SeqSource::Geometric { ratio } => {
                let mut out = Vec::new();
                let mut a = self.start;
                while a <= bound {
                    out.push(a);
                    match a.checked_mul(*ratio) {
                        Some(b) => a = b,
                        None => break,
                    }
                }
                Ok(out)
            }
            SeqSource::Pool { pool } => {
                if self.start > bound {
                    return Ok(Vec::new());
                }
                self.walk(sieve, pool, bound)
            }
        }
    }

    /// Streams the pool once, following the window rule from `start`.
    fn walk(&self, sieve: &Sieve, pool: &PoolHandle, bound: u64) -> Result<Vec<u64>> {
        let mut out = vec![self.start];
        let (mut lo, mut hi) = self.window(self.start);
        let mut gap = None;
        pool.for_each_up_to(sieve, bound, |q| {
            if q <= self.start || (q as f64) <= lo {
                return true;
            }
            if (q as f64) <= hi {
                out.push(q);
                (lo, hi) = self.window(q);
                true
            } else {
                gap = Some(*out.last().unwrap());
                false
            }
        })?;
        match gap {
            Some(after) => Err(Error::EmptyWindow { after, lo, hi }),
            None if hi.floor() as u64 > bound => Ok(out),
            None => Err(Error::EmptyWindow {
                after: *out.last().unwrap(),
                lo,
                hi,
            }),
        }
    }

    /// The `count` first elements.
    pub fn first_elements(&self, sieve: &Sieve, count: usize) -> Result<Vec<u64>> {
        let mut bound = self.start.saturating_mul(16).max(1024);
        loop {
            let els = self.elements_up_to(sieve, bound)?;
            if els.len() >= count {
                return Ok(els[..count].to_vec());
            }
            if bound >= sieve.hard_cap() {
                return Err(Error::capacity(format!("{count} sequence elements"), sieve.hard_cap()));
            }
            bound = bound.saturating_mul(4).min(sieve.hard_cap());
        }
    }
}

/// Extracts a corridor subsequence of `pool`: from element `a` the next element
/// is the smallest pool element in `(a (1 + delta/3), a (1 + delta)]`. The start
/// is the first pool element `>= start_hint` from which `opts.windows`
/// consecutive windows (up to the horizon) are nonempty.
pub fn extract_edelta(
    sieve: &Sieve,
    pool: &PoolHandle,
    delta: f64,
    start_hint: u64,
    opts: ExtractOptions,
) -> Result<EDeltaSeq> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Precondition(format!("delta must lie in (0, 1], got {delta}")));
    }
    let view = pool.view(sieve, opts.horizon)?;
    let els = view.elements();
    let mut idx = els.partition_point(|&e| e < start_hint);
    let mut seq = EDeltaSeq {
        source: SeqSource::Pool { pool: pool.clone() },
        delta,
        eps_prime: delta / 3.0,
        start: 0,
        windows_checked: 0,
    };
    let mut first_failure: Option<(u64, f64, f64)> = None;
    for _ in 0..=opts.max_restarts {
        let Some(&candidate) = els.get(idx) else {
            break;
        };
        seq.start = candidate;
        let mut a = candidate;
        let mut ok = 0usize;
        let mut failed = None;
        while ok < opts.windows {
            let (lo, hi) = seq.window(a);
            if hi > opts.horizon as f64 {
                break;
            }
            match view.first_above(lo) {
                Some(next) if (next as f64) <= hi => {
                    ok += 1;
                    a = next;
                }
                _ => {
                    failed = Some((a, lo, hi));
                    break;
                }
            }
        }
        match failed {
            None if ok == 0 => {
                return Err(Error::capacity(
                    format!("no window below horizon from start {candidate}"),
                    opts.horizon,
                ))
            }
            None => {
                seq.windows_checked = ok;
                return Ok(seq);
            }
            Some((after, lo, hi)) => {
                first_failure.get_or_insert((after, lo, hi));
                // restart past the empty window
                idx = els.partition_point(|&e| (e as f64) <= hi);
            }
        }
    }
    let (after, lo, hi) = first_failure.unwrap_or((start_hint, start_hint as f64, start_hint as f64));
    Err(Error::EmptyWindow { after, lo, hi })
}
