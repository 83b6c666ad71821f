//! Odd-only segmented sieve of Eratosthenes with on-demand extension.

use std::sync::RwLock;

use crate::error::{Error, Result};

pub const DEFAULT_INITIAL_LIMIT: u64 = 10_000_000;
pub const DEFAULT_HARD_CAP: u64 = 2_000_000_000;

/// Odd numbers per sieving segment (bits). 2^21 bits = 256 KiB.
const SEGMENT_ODDS: u64 = 1 << 21;

struct Inner {
    limit: u64,
    /// bit i set <=> 2i+1 is composite (or 1).
    composite: Vec<u64>,
}

impl Inner {
    fn bit(&self, i: u64) -> bool {
        (self.composite[(i >> 6) as usize] >> (i & 63)) & 1 == 1
    }
}

/// Primality store shared by every pool. Extension happens behind a write
/// lock, so readers only ever observe a fully sieved prefix.
pub struct Sieve {
    inner: RwLock<Inner>,
    hard_cap: u64,
}

impl std::fmt::Debug for Sieve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sieve")
            .field("limit", &self.limit())
            .field("hard_cap", &self.hard_cap)
            .finish()
    }
}

impl Default for Sieve {
    fn default() -> Self {
        Self::new(DEFAULT_INITIAL_LIMIT, DEFAULT_HARD_CAP).expect("default sieve limits are consistent")
    }
}

impl Sieve {
    pub fn new(initial_limit: u64, hard_cap: u64) -> Result<Self> {
        if initial_limit > hard_cap {
            return Err(Error::capacity("initial sieve limit", hard_cap));
        }
        let sieve = Sieve {
            inner: RwLock::new(Inner {
                limit: 1,
                composite: vec![1],
            }),
            hard_cap,
        };
        sieve.ensure(initial_limit.max(2))?;
        Ok(sieve)
    }

    pub fn limit(&self) -> u64 {
        self.inner.read().unwrap().limit
    }

    pub fn hard_cap(&self) -> u64 {
        self.hard_cap
    }

    /// Extends the sieved range to at least `limit`.
    pub fn ensure(&self, limit: u64) -> Result<()> {
        if limit <= self.limit() {
            return Ok(());
        }
        if limit > self.hard_cap {
            return Err(Error::capacity(format!("sieve extension to {limit}"), self.hard_cap));
        }
        // grow geometrically so repeated small extensions stay cheap
        let target = limit.max(self.limit().saturating_mul(2)).min(self.hard_cap);
        let root = integer_sqrt(target);
        if root > self.limit() {
            self.ensure(root)?;
        }
        let base: Vec<u64> = self.odd_primes_up_to(root)?;
        let mut inner = self.inner.write().unwrap();
        if inner.limit >= target {
            return Ok(());
        }
        let old = inner.limit;
        let words = (target / 2 / 64 + 1) as usize;
        inner.composite.resize(words, 0);
        // odd-number index range (old, target]
        let mut seg_lo = old.div_ceil(2);
        let idx_hi = (target - 1) / 2; // index of the largest odd <= target
        while seg_lo <= idx_hi {
            let seg_hi = (seg_lo + SEGMENT_ODDS - 1).min(idx_hi);
            let n_lo = 2 * seg_lo + 1;
            let n_hi = 2 * seg_hi + 1;
            for &q in &base {
                let sq = q * q;
                if sq > n_hi {
                    break;
                }
                let mut m = if sq >= n_lo {
                    sq
                } else {
                    let k = n_lo.div_ceil(q);
                    let k = if k % 2 == 0 { k + 1 } else { k };
                    k * q
                };
                while m <= n_hi {
                    let i = m / 2;
                    inner.composite[(i >> 6) as usize] |= 1 << (i & 63);
                    m += 2 * q;
                }
            }
            seg_lo = seg_hi + 1;
        }
        inner.limit = target;
        Ok(())
    }

    pub fn is_prime(&self, n: u64) -> Result<bool> {
        if n < 2 {
            return Ok(false);
        }
        if n == 2 {
            return Ok(true);
        }
        if n.is_multiple_of(2) {
            return Ok(false);
        }
        self.ensure(n)?;
        Ok(!self.inner.read().unwrap().bit(n / 2))
    }

    /// Odd primes in `[lo, hi]`, ascending.
    pub fn odd_primes_in(&self, lo: u64, hi: u64) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        self.for_each_odd_prime(lo, hi, |p| {
            out.push(p);
            true
        })?;
        Ok(out)
    }

    pub fn odd_primes_up_to(&self, hi: u64) -> Result<Vec<u64>> {
        self.odd_primes_in(3, hi)
    }

    /// Visits odd primes in `[lo, hi]` ascending until `f` returns false.
    pub fn for_each_odd_prime(&self, lo: u64, hi: u64, mut f: impl FnMut(u64) -> bool) -> Result<()> {
        let lo = lo.max(3);
        if hi < lo {
            return Ok(());
        }
        self.ensure(hi)?;
        let inner = self.inner.read().unwrap();
        let i_lo = lo / 2;
        let i_hi = (hi - 1) / 2;
        let mut w = (i_lo >> 6) as usize;
        let w_hi = (i_hi >> 6) as usize;
        while w <= w_hi {
            let mut bits = !inner.composite[w];
            let base = (w as u64) << 6;
            if base < i_lo {
                bits &= !0u64 << (i_lo - base);
            }
            if base + 63 > i_hi {
                let keep = i_hi - base + 1;
                if keep < 64 {
                    bits &= (1u64 << keep) - 1;
                }
            }
            while bits != 0 {
                let t = bits.trailing_zeros() as u64;
                if !f(2 * (base + t) + 1) {
                    return Ok(());
                }
                bits &= bits - 1;
            }
            w += 1;
        }
        Ok(())
    }

    /// Number of primes (including 2) up to `n`.
    pub fn count_primes(&self, n: u64) -> Result<u64> {
        if n < 2 {
            return Ok(0);
        }
        let mut c = 1;
        self.for_each_odd_prime(3, n, |_| {
            c += 1;
            true
        })?;
        Ok(c)
    }

    /// Odd prime factorisation with multiplicity, by trial division over the
    /// sieved primes. Powers of two are stripped and not reported.
    pub fn odd_prime_factors(&self, mut n: u64) -> Result<Vec<u64>> {
        let mut out = Vec::new();
        if n == 0 {
            return Ok(out);
        }
        while n.is_multiple_of(2) {
            n /= 2;
        }
        let root = integer_sqrt(n);
        self.ensure(root.max(3))?;
        let mut done = false;
        self.for_each_odd_prime(3, root, |q| {
            if q * q > n {
                return false;
            }
            while n.is_multiple_of(q) {
                out.push(q);
                n /= q;
            }
            if n == 1 {
                done = true;
                return false;
            }
            true
        })?;
        if !done && n > 1 {
            out.push(n);
        }
        Ok(out)
    }
}

/// Every prime up to `limit`, ascending (2 included).
pub fn sieve_primes(sieve: &Sieve, limit: u64) -> Result<Vec<u64>> {
    if limit < 2 {
        return Err(Error::Precondition("sieve limit must be at least 2".into()));
    }
    let mut out = vec![2];
    out.extend(sieve.odd_primes_up_to(limit)?);
    Ok(out)
}

pub(crate) fn integer_sqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r.saturating_mul(r) > n {
        r -= 1;
    }
    while (r + 1).saturating_mul(r + 1) <= n {
        r += 1;
    }
    r
}
