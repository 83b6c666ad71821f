//! Prime pools: the sieve, disjoint divergent subsets of the odd primes,
//! corridor subsequences, and divisibility predicates.

mod edelta;
mod pool;
mod sieve;

pub use edelta::{extract_edelta, EDeltaSeq, ExtractOptions, SeqSource, SignPattern};
pub use pool::{
    exclude, is_constructed_from, restrict, split_pool, Difference, PoolHandle, PoolStep, PoolView, PrimeSet,
};
pub use sieve::{sieve_primes, Sieve, DEFAULT_HARD_CAP, DEFAULT_INITIAL_LIMIT};

pub(crate) use sieve::integer_sqrt;

use crate::error::{Error, Result};

/// Scans `n` in `[n_lo, n_hi]` for the first window `[n(1+eps), n(1+delta)]`
/// containing no odd prime.
pub fn gap_scan(sieve: &Sieve, eps: f64, delta: f64, n_lo: u64, n_hi: u64) -> Result<Option<u64>> {
    if !(eps > 0.0 && eps < delta && delta <= 1.0) {
        return Err(Error::Precondition(format!(
            "gap scan needs 0 < eps < delta <= 1, got eps={eps}, delta={delta}"
        )));
    }
    if n_hi < n_lo {
        return Ok(None);
    }
    let top = (n_hi as f64 * (1.0 + delta)).floor() as u64 + 1;
    let primes = sieve.odd_primes_up_to(top)?;
    for n in n_lo..=n_hi {
        let lo = n as f64 * (1.0 + eps);
        let hi = n as f64 * (1.0 + delta);
        let i = primes.partition_point(|&p| (p as f64) < lo);
        match primes.get(i) {
            Some(&p) if (p as f64) <= hi => {}
            _ => return Ok(Some(n)),
        }
    }
    Ok(None)
}
