use serde::{Deserialize, Serialize};

use super::sieve::Sieve;
use crate::error::{Error, Result};

/// One derivation step applied to the parent enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PoolStep {
    /// Drop finitely many primes.
    Exclude { primes: Vec<u64> },
    /// Keep the parent's elements whose enumeration index is `residue` mod `parts`.
    Interleave { parts: u32, residue: u32 },
    /// Keep elements `>= above + 1`.
    Restrict { above: u64 },
}

/// A lazily enumerable set of odd primes, described by its derivation from
/// the full set of odd primes. Handles are plain values; enumeration goes
/// through a shared [`Sieve`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolHandle {
    steps: Vec<PoolStep>,
    marker: u64,
}

struct Cursor<'a> {
    steps: &'a [PoolStep],
    counters: Vec<u64>,
}

impl<'a> Cursor<'a> {
    fn new(steps: &'a [PoolStep]) -> Self {
        Cursor {
            steps,
            counters: vec![0; steps.len()],
        }
    }

    /// Feeds the next odd prime of the base enumeration; returns whether it
    /// survives every step.
    fn admit(&mut self, p: u64) -> bool {
        for (step, counter) in self.steps.iter().zip(self.counters.iter_mut()) {
            match step {
                PoolStep::Exclude { primes } => {
                    if primes.binary_search(&p).is_ok() {
                        return false;
                    }
                }
                PoolStep::Interleave { parts, residue } => {
                    let idx = *counter;
                    *counter += 1;
                    if idx % *parts as u64 != *residue as u64 {
                        return false;
                    }
                }
                PoolStep::Restrict { above } => {
                    if p <= *above {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl PoolHandle {
    /// All odd primes 3, 5, 7, 11, ...
    pub fn base() -> Self {
        PoolHandle {
            steps: Vec::new(),
            marker: 3,
        }
    }

    pub fn marker(&self) -> u64 {
        self.marker
    }

    pub fn steps(&self) -> &[PoolStep] {
        &self.steps
    }

    fn derive(&self, sieve: &Sieve, step: PoolStep) -> Result<PoolHandle> {
        let mut steps = self.steps.clone();
        steps.push(step);
        let mut h = PoolHandle { steps, marker: 0 };
        h.marker = h
            .first_elements(sieve, 1)?
            .first()
            .copied()
            .ok_or_else(|| Error::capacity("pool has no element below the sieve cap", sieve.hard_cap()))?;
        Ok(h)
    }

    /// Visits pool elements `<= bound` in ascending order until `f` returns false.
    pub fn for_each_up_to(&self, sieve: &Sieve, bound: u64, mut f: impl FnMut(u64) -> bool) -> Result<()> {
        let mut cursor = Cursor::new(&self.steps);
        sieve.for_each_odd_prime(3, bound, |p| if cursor.admit(p) { f(p) } else { true })
    }

    pub fn elements_up_to(&self, sieve: &Sieve, bound: u64) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        self.for_each_up_to(sieve, bound, |p| {
            out.push(p);
            true
        })?;
        Ok(out)
    }

    /// The first `count` elements, extending the sieve as needed.
    pub fn first_elements(&self, sieve: &Sieve, count: usize) -> Result<Vec<u64>> {
        let mut bound = sieve.limit().max(1024);
        loop {
            let mut out = Vec::with_capacity(count);
            self.for_each_up_to(sieve, bound, |p| {
                out.push(p);
                out.len() < count
            })?;
            if out.len() >= count || bound >= sieve.hard_cap() {
                return Ok(out);
            }
            bound = bound.saturating_mul(2).min(sieve.hard_cap());
        }
    }

    pub fn view(&self, sieve: &Sieve, bound: u64) -> Result<PoolView> {
        Ok(PoolView {
            elements: self.elements_up_to(sieve, bound)?,
            bound,
        })
    }

    pub fn contains(&self, sieve: &Sieve, n: u64) -> Result<bool> {
        if n < 3 || !sieve.is_prime(n)? {
            return Ok(false);
        }
        let mut last = 0;
        self.for_each_up_to(sieve, n, |p| {
            last = p;
            true
        })?;
        Ok(last == n)
    }

    /// Sum of reciprocals over the elements `<= bound`.
    pub fn reciprocal_sum(&self, sieve: &Sieve, bound: u64) -> Result<f64> {
        let mut s = 0.0;
        self.for_each_up_to(sieve, bound, |p| {
            s += 1.0 / p as f64;
            true
        })?;
        Ok(s)
    }

    /// Whether the two derivation paths share a prefix and then select
    /// different residues of the same interleave, which makes them disjoint.
    pub fn provably_disjoint(&self, other: &PoolHandle) -> bool {
        for (a, b) in self.steps.iter().zip(other.steps.iter()) {
            match (a, b) {
                (PoolStep::Interleave { parts: pa, residue: ra }, PoolStep::Interleave { parts: pb, residue: rb })
                    if pa == pb && ra != rb =>
                {
                    return true
                }
                _ if a == b => continue,
                _ => return false,
            }
        }
        false
    }
}

/// Splits a pool into `parts` disjoint pools by enumeration index residue.
/// Each part's marker is its first element.
pub fn split_pool(sieve: &Sieve, h: &PoolHandle, parts: u32) -> Result<Vec<PoolHandle>> {
    if parts == 0 {
        return Err(Error::Precondition("split_pool needs at least one part".into()));
    }
    if parts == 1 {
        return Ok(vec![h.clone()]);
    }
    (0..parts)
        .map(|residue| h.derive(sieve, PoolStep::Interleave { parts, residue }))
        .collect()
}

/// The pool restricted to elements `>= k + 1`.
pub fn restrict(sieve: &Sieve, h: &PoolHandle, k: u64) -> Result<PoolHandle> {
    if k == 0 {
        return Ok(h.clone());
    }
    h.derive(sieve, PoolStep::Restrict { above: k })
}

/// The pool with finitely many primes removed.
pub fn exclude(sieve: &Sieve, h: &PoolHandle, primes: &[u64]) -> Result<PoolHandle> {
    let mut primes = primes.to_vec();
    primes.sort_unstable();
    primes.dedup();
    h.derive(sieve, PoolStep::Exclude { primes })
}

/// Membership test over some set of odd primes.
pub trait PrimeSet {
    fn has(&self, q: u64) -> bool;
}

/// A pool materialised up to a bound, for fast repeated membership queries.
#[derive(Debug, Clone)]
pub struct PoolView {
    elements: Vec<u64>,
    bound: u64,
}

impl PoolView {
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn from_sorted(elements: Vec<u64>, bound: u64) -> Self {
        debug_assert!(elements.windows(2).all(|w| w[0] < w[1]));
        PoolView { elements, bound }
    }

    /// First element strictly greater than `x`.
    pub fn first_above(&self, x: f64) -> Option<u64> {
        let i = self.elements.partition_point(|&e| (e as f64) <= x);
        self.elements.get(i).copied()
    }
}

impl PrimeSet for PoolView {
    fn has(&self, q: u64) -> bool {
        self.elements.binary_search(&q).is_ok()
    }
}

/// Elements of `include` that are not in `exclude`.
pub struct Difference<'a, A: PrimeSet, B: PrimeSet> {
    pub include: &'a A,
    pub exclude: &'a B,
}

impl<A: PrimeSet, B: PrimeSet> PrimeSet for Difference<'_, A, B> {
    fn has(&self, q: u64) -> bool {
        self.include.has(q) && !self.exclude.has(q)
    }
}

impl PrimeSet for [u64] {
    fn has(&self, q: u64) -> bool {
        self.binary_search(&q).is_ok()
    }
}

/// True iff `p | n` and every odd prime divisor of `n` belongs to `pool`.
/// The factor 2 never disqualifies.
pub fn is_constructed_from<S: PrimeSet + ?Sized>(sieve: &Sieve, n: u64, pool: &S, p: u64) -> Result<bool> {
    if n == 0 || !n.is_multiple_of(p) {
        return Ok(false);
    }
    Ok(sieve.odd_prime_factors(n)?.into_iter().all(|q| pool.has(q)))
}
