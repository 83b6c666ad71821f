//! Certified evaluation of the signed power sums
//! `Φ(A, α) = Σ_{n∈A} (-1)^{n+1} n^{-α}` and their coordinate vectors.

mod enclosure;

pub use enclosure::Enclosure;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prime_pool::{EDeltaSeq, Sieve, SignPattern};
use crate::set_algebra::{enumerate, SetExpr};

/// Error allowance on each computed `n^{-α}`, in ulps.
pub const TERM_ULPS: f64 = 2.0;

const U: f64 = f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Mantissa bits assumed for term evaluation. At most 53.
    pub precision_bits: u32,
    /// Largest element ever generated from a corridor sequence.
    pub horizon: u64,
    /// Enumeration bound for the direct-summation fallback on products and
    /// unions without witnesses.
    pub enum_bound: u64,
    pub max_refinements: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            precision_bits: 53,
            horizon: 100_000_000,
            enum_bound: 100_000_000,
            max_refinements: 12,
        }
    }
}

impl EvalOptions {
    fn rel_allowance(&self) -> f64 {
        // one extra unit covers the conversion of n > 2^53 to f64
        (TERM_ULPS + 1.0) * 2f64.powi(1 - self.precision_bits.clamp(2, 53) as i32)
    }
}

/// `(-1)^{n+1} n^{-α}`: positive exactly when `n` is odd.
pub fn term(n: u64, alpha: f64) -> f64 {
    let m = magnitude_point(n, alpha);
    if n % 2 == 1 {
        m
    } else {
        -m
    }
}

fn magnitude_point(n: u64, alpha: f64) -> f64 {
    if n == 1 {
        1.0
    } else {
        (n as f64).powf(-alpha)
    }
}

/// Enclosure of `n^{-α}` for a real `x >= 1`.
fn pow_neg_real(x: f64, alpha: f64, rel: f64) -> Enclosure {
    if x == 1.0 {
        return Enclosure::point(1.0);
    }
    let v = x.powf(-alpha);
    Enclosure::around(v, v * rel)
}

/// Enclosure of `n^{-α}`.
pub fn magnitude_enclosure(n: u64, alpha: f64) -> Enclosure {
    pow_neg_real(n as f64, alpha, EvalOptions::default().rel_allowance())
}

pub fn term_enclosure(n: u64, alpha: f64) -> Enclosure {
    let m = magnitude_enclosure(n, alpha);
    if n % 2 == 1 {
        m
    } else {
        -m
    }
}

/// Φ over a finite list: compensated summation in ascending order, with the
/// term allowance and the summation error bound folded into the radius.
pub fn phi_finite(elems: &[u64], alpha: f64) -> Enclosure {
    phi_finite_with(elems, alpha, &EvalOptions::default())
}

pub fn phi_finite_with(elems: &[u64], alpha: f64, opts: &EvalOptions) -> Enclosure {
    finite_sum(elems, alpha, opts, false)
}

/// `Σ n^{-α}` over a finite list (all terms taken positive).
pub fn abs_sum_finite(elems: &[u64], alpha: f64) -> Enclosure {
    finite_sum(elems, alpha, &EvalOptions::default(), true)
}

fn finite_sum(elems: &[u64], alpha: f64, opts: &EvalOptions, absolute: bool) -> Enclosure {
    if elems.is_empty() {
        return Enclosure::ZERO;
    }
    debug_assert!(elems.windows(2).all(|w| w[0] <= w[1]), "summation order is ascending n");
    let rel = opts.rel_allowance();
    let (mut s, mut c) = (0.0f64, 0.0f64);
    let mut abs = 0.0f64;
    let mut allowance = 0.0f64;
    for &n in elems {
        let m = magnitude_point(n, alpha);
        let t = if absolute || n % 2 == 1 { m } else { -m };
        let next = s + t;
        c += if s.abs() >= t.abs() {
            (s - next) + t
        } else {
            (t - next) + s
        };
        s = next;
        abs += m;
        if n != 1 {
            allowance += m * rel;
        }
    }
    let k = elems.len() as f64;
    let summation = if elems.len() > 1 {
        abs * (3.0 * U + 8.0 * k * U * U)
    } else {
        0.0
    };
    let radius = (allowance + summation) * (1.0 + (k + 4.0) * U);
    Enclosure::around(s + c, radius)
}

/// Geometric bound on the magnitude sum of a corridor sequence from some
/// element on: `a^{-α} / (1 - (1+ε)^{-α})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// Lower bound on the first element covered by the bound.
    pub from_element: f64,
    pub eps: f64,
    pub alpha: f64,
    pub bound: f64,
}

impl TailBound {
    pub fn from_element(a: f64, eps: f64, alpha: f64) -> TailBound {
        let rel = EvalOptions::default().rel_allowance();
        let num = pow_neg_real(a.max(1.0), alpha, rel).hi();
        // the window rule compares in floating point, so shave the ratio a little
        let ratio = (1.0 + eps) * (1.0 - 4.0 * U);
        let q = pow_neg_real(ratio, alpha, rel).hi();
        let den = (Enclosure::point(1.0) - Enclosure::point(q)).lo();
        let bound = if den > 0.0 {
            (num / den).next_up().next_up()
        } else {
            f64::INFINITY
        };
        TailBound {
            from_element: a,
            eps,
            alpha,
            bound,
        }
    }
}

/// Tail bound covering the terms with enumeration index `>= from_index`.
pub fn tail_bound(sieve: &Sieve, seq: &EDeltaSeq, from_index: usize, alpha: f64) -> Result<TailBound> {
    let els = seq.first_elements(sieve, from_index + 1)?;
    Ok(TailBound::from_element(els[from_index] as f64, seq.eps_prime, alpha))
}

fn signed_tail(bound: f64, sign: SignPattern) -> Enclosure {
    match sign {
        SignPattern::Positive => Enclosure::new(0.0, bound),
        SignPattern::Negative => Enclosure::new(-bound, 0.0),
        SignPattern::Mixed => Enclosure::new(-bound, bound),
    }
}

fn phi_generated(
    sieve: &Sieve,
    seq: &EDeltaSeq,
    alpha: f64,
    width: f64,
    opts: &EvalOptions,
    absolute: bool,
) -> Result<Enclosure> {
    let mut bound = seq.start.saturating_mul(16).max(1024).min(opts.horizon.max(seq.start));
    let mut best: Option<Enclosure> = None;
    loop {
        let els = seq.elements_up_to(sieve, bound)?;
        let trunc = finite_sum(&els, alpha, opts, absolute);
        let next_lb = match els.last() {
            Some(&last) => ((bound + 1) as f64).max(last as f64 * (1.0 + seq.eps_prime) * (1.0 - 4.0 * U)),
            None => seq.start as f64,
        };
        let tb = TailBound::from_element(next_lb, seq.eps_prime, alpha).bound;
        let sign = if absolute {
            SignPattern::Positive
        } else {
            seq.sign_from(els.len())
        };
        let enc = trunc + signed_tail(tb, sign);
        let merged = match best {
            Some(b) => b.intersect(&enc).unwrap_or(enc),
            None => enc,
        };
        best = Some(merged);
        if merged.width() <= width {
            return Ok(merged);
        }
        if bound >= opts.horizon {
            return Err(Error::capacity_with(
                "enclosure width for a generated sequence",
                opts.horizon,
                merged.width(),
            ));
        }
        bound = bound.saturating_mul(16).min(opts.horizon);
    }
}

/// Certified enclosure of `Φ(e, α)` of width at most `target_width`.
pub fn phi(sieve: &Sieve, e: &SetExpr, alpha: f64, target_width: f64) -> Result<Enclosure> {
    phi_with(sieve, e, alpha, target_width, &EvalOptions::default())
}

pub fn phi_with(sieve: &Sieve, e: &SetExpr, alpha: f64, target_width: f64, opts: &EvalOptions) -> Result<Enclosure> {
    if opts.precision_bits > 53 {
        return Err(Error::InvalidInput(format!(
            "precision of {} bits is not available; the numeric substrate is 53-bit",
            opts.precision_bits
        )));
    }
    match e {
        SetExpr::Empty => Ok(Enclosure::ZERO),
        SetExpr::Finite { elements } => Ok(phi_finite_with(elements, alpha, opts)),
        SetExpr::Generated { seq } => phi_generated(sieve, seq, alpha, target_width, opts, false),
        SetExpr::Product {
            left,
            right,
            witness: Some(_),
        } if left.all_odd() || right.all_odd() => refine(target_width, opts, |w| {
            Ok(phi_with(sieve, left, alpha, w, opts)? * phi_with(sieve, right, alpha, w, opts)?)
        }),
        SetExpr::Union {
            left,
            right,
            witness: Some(_),
        } => refine(target_width, opts, |w| {
            Ok(phi_with(sieve, left, alpha, w, opts)? + phi_with(sieve, right, alpha, w, opts)?)
        }),
        _ => phi_direct(sieve, e, alpha, opts),
    }
}

/// Product/union without a usable decomposition: direct summation over the
/// bounded enumeration, padded by the magnitude mass that may lie beyond it.
pub fn phi_direct(sieve: &Sieve, e: &SetExpr, alpha: f64, opts: &EvalOptions) -> Result<Enclosure> {
    let els = enumerate(sieve, e, opts.enum_bound)?;
    let body = phi_finite_with(&els, alpha, opts);
    let complete = matches!(e.max_element(), Some(m) if m <= opts.enum_bound as u128);
    if complete {
        return Ok(body);
    }
    let upper = phi_abs_upper(sieve, e, alpha, opts)?;
    let seen = finite_sum(&els, alpha, opts, true).lo();
    let pad = (Enclosure::point(upper) - Enclosure::point(seen)).hi().max(0.0);
    Ok(body + Enclosure::new(-pad, pad))
}

fn refine(target_width: f64, opts: &EvalOptions, mut f: impl FnMut(f64) -> Result<Enclosure>) -> Result<Enclosure> {
    let mut w = target_width / 4.0;
    let mut best: Option<Enclosure> = None;
    for _ in 0..=opts.max_refinements {
        let enc = f(w)?;
        let merged = match best {
            Some(b) => b.intersect(&enc).unwrap_or(enc),
            None => enc,
        };
        if merged.width() <= target_width {
            return Ok(merged);
        }
        best = Some(merged);
        w /= 4.0;
    }
    let achieved = best.map_or(f64::INFINITY, |b| b.width());
    Err(Error::capacity_with(
        "enclosure width after refinement",
        opts.max_refinements as u64,
        achieved,
    ))
}

/// Upper bound on `Σ_{n∈e} n^{-α}` (products are bounded by the product of
/// the factor sums, with equality when the product map is injective).
pub fn phi_abs_upper(sieve: &Sieve, e: &SetExpr, alpha: f64, opts: &EvalOptions) -> Result<f64> {
    Ok(match e {
        SetExpr::Empty => 0.0,
        SetExpr::Finite { elements } => finite_sum(elements, alpha, opts, true).hi(),
        SetExpr::Generated { seq } => {
            // a coarse truncation is enough for a padding bound
            let coarse = EvalOptions {
                horizon: opts.horizon.min(seq.start.saturating_mul(1 << 20)),
                ..*opts
            };
            match phi_generated(sieve, seq, alpha, 0.0, &coarse, true) {
                Ok(enc) => enc.hi(),
                Err(Error::Capacity { .. }) => phi_generated(sieve, seq, alpha, f64::INFINITY, &coarse, true)?.hi(),
                Err(err) => return Err(err),
            }
        }
        SetExpr::Product { left, right, .. } => (Enclosure::point(phi_abs_upper(sieve, left, alpha, opts)?)
            * Enclosure::point(phi_abs_upper(sieve, right, alpha, opts)?))
        .hi(),
        SetExpr::Union { left, right, .. } => (Enclosure::point(phi_abs_upper(sieve, left, alpha, opts)?)
            + Enclosure::point(phi_abs_upper(sieve, right, alpha, opts)?))
        .hi(),
    })
}

/// `Ψ(e, α⃗) = (Φ(e, α_1), ..., Φ(e, α_d))`.
pub fn psi(sieve: &Sieve, e: &SetExpr, alphas: &[f64], widths: &[f64]) -> Result<Vec<Enclosure>> {
    psi_with(sieve, e, alphas, widths, &EvalOptions::default())
}

pub fn psi_with(
    sieve: &Sieve,
    e: &SetExpr,
    alphas: &[f64],
    widths: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<Enclosure>> {
    if alphas.len() != widths.len() {
        return Err(Error::LengthMismatch {
            left: alphas.len(),
            right: widths.len(),
        });
    }
    alphas
        .iter()
        .zip(widths)
        .map(|(&a, &w)| phi_with(sieve, e, a, w, opts))
        .collect()
}

/// Coordinate-wise product `⟨u, v⟩`.
pub fn coordwise_mul(u: &[Enclosure], v: &[Enclosure]) -> Result<Vec<Enclosure>> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| *a * *b).collect())
}
