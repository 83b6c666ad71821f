//! One-dimensional target hitting: the Kakeya-condition greedy, the depth-one
//! target construction `C ∪ D`, and the exponent-separating variant.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prime_pool::{extract_edelta, restrict, EDeltaSeq, ExtractOptions, PoolHandle, Sieve};
use crate::series_eval::{magnitude_enclosure, phi, phi_finite, Enclosure};
use crate::set_algebra::SetExpr;

/// Checks `m_k <= Σ_{j>k} m_j + tail` for every `k`. Returns the first
/// violating index. The suffix sums are rounded down.
pub fn kakeya_check(magnitudes: &[f64], tail: f64) -> Option<usize> {
    debug_assert!(
        magnitudes.windows(2).all(|w| w[0] >= w[1]),
        "magnitudes must be descending"
    );
    let mut suffix = Enclosure::point(tail.max(0.0));
    let mut first = None;
    for (k, &m) in magnitudes.iter().enumerate().rev() {
        if m > suffix.lo() {
            first = Some(k);
        }
        suffix = suffix + Enclosure::point(m);
    }
    first
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub n: u64,
    pub magnitude: f64,
    pub accepted: bool,
    pub residual: Enclosure,
    /// Lower bound on the magnitudes not yet considered.
    pub remaining: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub target: f64,
    pub tol: f64,
    pub steps: Vec<TraceStep>,
    pub residual: Option<Enclosure>,
}

impl GreedyTrace {
    /// One decision per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut w, step)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn accepted(&self) -> Vec<u64> {
        self.steps.iter().filter(|s| s.accepted).map(|s| s.n).collect()
    }
}

/// Greedy selection over `elements` (any order; scanned by increasing `n`,
/// i.e. decreasing magnitude `n^{-α}`): accept a term iff the certified
/// residual stays `>= -tol`; stop once the residual lies in `[-tol, tol]`.
///
/// Returns the selected indices (ascending) and the trace. The residual is
/// `x - Σ n^{-α}` over the selection.
pub fn greedy_select(elements: &[u64], alpha: f64, x: f64, tol: f64) -> Result<(Vec<u64>, GreedyTrace)> {
    let (chosen, trace, considered) = greedy_core(elements, alpha, x, tol)?;
    let certified = trace.residual.expect("greedy sets the final residual");
    if !certified.is_subset_of(-tol, tol) {
        return Err(Error::capacity_with(
            format!("greedy ran out of elements ({considered} considered)"),
            elements.iter().copied().max().unwrap_or(0),
            certified.mag(),
        ));
    }
    Ok((chosen, trace))
}

fn greedy_core(elements: &[u64], alpha: f64, x: f64, tol: f64) -> Result<(Vec<u64>, GreedyTrace, usize)> {
    if !(x >= 0.0) || !(tol > 0.0) {
        return Err(Error::Precondition(format!(
            "greedy needs x >= 0 and tol > 0, got x={x}, tol={tol}"
        )));
    }
    let mut elems = elements.to_vec();
    elems.sort_unstable();
    elems.dedup();
    let mags: Vec<Enclosure> = elems.iter().map(|&n| magnitude_enclosure(n, alpha)).collect();
    let mut remaining: Vec<f64> = vec![0.0; mags.len() + 1];
    for k in (0..mags.len()).rev() {
        remaining[k] = (Enclosure::point(remaining[k + 1]) + Enclosure::point(mags[k].lo())).lo();
    }
    let mut trace = GreedyTrace {
        target: x,
        tol,
        steps: Vec::new(),
        residual: None,
    };
    let mut residual = Enclosure::point(x);
    let mut chosen = Vec::new();
    for (k, (&n, m)) in elems.iter().zip(&mags).enumerate() {
        if residual.hi() <= tol {
            break;
        }
        let next = residual - *m;
        let accepted = next.lo() >= -tol;
        if accepted {
            residual = next;
            chosen.push(n);
        }
        trace.steps.push(TraceStep {
            n,
            magnitude: m.mid(),
            accepted,
            residual,
            remaining: remaining[k + 1],
        });
    }
    // re-certify with the summation error bound of the full selection
    let certified = Enclosure::point(x) - phi_magnitudes(&chosen, alpha);
    let certified = certified.intersect(&residual).unwrap_or(certified);
    trace.residual = Some(certified);
    Ok((chosen, trace, elems.len()))
}

/// `Σ n^{-α}` over ascending `elems`.
fn phi_magnitudes(elems: &[u64], alpha: f64) -> Enclosure {
    if elems.iter().all(|n| n % 2 == 1) {
        phi_finite(elems, alpha)
    } else {
        crate::series_eval::abs_sum_finite(elems, alpha)
    }
}

/// Greedy over a corridor sequence truncated at `bound`: a finite subset `C`
/// with `|Σ_{n∈C} n^{-α} - x| <= tol`.
pub fn greedy_interval(
    sieve: &Sieve,
    seq: &EDeltaSeq,
    alpha: f64,
    x: f64,
    tol: f64,
    bound: u64,
) -> Result<(SetExpr, GreedyTrace)> {
    if seq.delta > 1.0 {
        return Err(Error::Precondition(format!(
            "greedy needs delta <= 1, got {}",
            seq.delta
        )));
    }
    let elems = seq.elements_up_to(sieve, bound)?;
    let (chosen, trace) = greedy_select(&elems, alpha, x, tol)?;
    Ok((SetExpr::finite(chosen)?, trace))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetOptions {
    /// Largest element the selected set may contain.
    pub max_elem: u64,
    /// Elements inserted to repair Kakeya violations, at most.
    pub repair_budget: usize,
    /// Doublings of the cutoff in the separated variant before giving up.
    pub cutoff_doublings: usize,
}

impl Default for TargetOptions {
    fn default() -> Self {
        TargetOptions {
            max_elem: 10_000_000,
            repair_budget: 10_000,
            cutoff_doublings: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Targeted {
    /// Finite subset of the pool, depth one.
    pub set: SetExpr,
    /// Certified enclosure of `Φ(set, α)`.
    pub value: Enclosure,
    /// `value - x`.
    pub residual: Enclosure,
    pub c_len: usize,
    pub d_len: usize,
    pub repairs: usize,
    /// Local moves applied after the greedy.
    pub swaps: usize,
    pub trace: GreedyTrace,
}

/// Finite `B ⊂ pool` with `|Φ(B, α) - x| <= tol`: extract a corridor
/// subsequence `C`, accumulate `D ⊂ pool \ C` up to `[x - Φ(C), x)`, repair the
/// Kakeya condition on `C ∪ D` and run the greedy on it.
pub fn target_subset(
    sieve: &Sieve,
    pool: &PoolHandle,
    alpha: f64,
    x: f64,
    tol: f64,
    opts: TargetOptions,
) -> Result<Targeted> {
    if !(x > 0.0) {
        return Err(Error::Precondition(format!("target must be positive, got {x}")));
    }
    if !(tol > 0.0) || !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "need tol > 0 and alpha > 0, got {tol}, {alpha}"
        )));
    }
    let view = pool.view(sieve, opts.max_elem)?;
    let elems = view.elements();
    let Some(&first) = elems.first() else {
        return Err(Error::capacity(
            "pool has no element below the index cap",
            opts.max_elem,
        ));
    };
    let extract = ExtractOptions {
        horizon: opts.max_elem.max(ExtractOptions::default().horizon),
        ..ExtractOptions::default()
    };
    let c_seq = extract_edelta(sieve, pool, 1.0, first, extract)?;
    let c: Vec<u64> = c_seq.elements_up_to(sieve, opts.max_elem)?;
    let y = phi_finite(&c, alpha);

    // D: take the elements whose terms still fit below x
    let mut d = Vec::new();
    let mut sum = Enclosure::ZERO;
    let goal = x - y.hi();
    if sum.lo() < goal {
        for &n in elems {
            if c.binary_search(&n).is_ok() {
                continue;
            }
            let next = sum + magnitude_enclosure(n, alpha);
            if next.hi() < x {
                sum = next;
                d.push(n);
                if sum.lo() >= goal {
                    break;
                }
            }
        }
        if sum.lo() < goal {
            return Err(Error::capacity_with(
                "pool exhausted before the accumulated sum reached the target band",
                opts.max_elem,
                (sum + y).hi(),
            ));
        }
    }

    let mut merged: Vec<u64> = c.iter().chain(d.iter()).copied().collect();
    merged.sort_unstable();
    let repairs = repair_kakeya(elems, &mut merged, alpha, tol, opts.repair_budget);

    let (chosen, trace, _) = greedy_core(&merged, alpha, x, tol)?;
    // the greedy stalls at the granularity of the smallest term; swaps
    // between terms of nearby size reach much finer values
    let (chosen, swaps) = polish(elems, chosen, alpha, x, tol);
    let value = phi_finite(&chosen, alpha);
    let residual = value - Enclosure::point(x);
    if !residual.is_subset_of(-tol, tol) {
        return Err(Error::capacity_with(
            format!("target {x:e} not reached within {tol:e} after {swaps} swaps"),
            opts.max_elem,
            residual.mag(),
        ));
    }
    Ok(Targeted {
        set: SetExpr::finite(chosen)?,
        value,
        residual,
        c_len: c.len(),
        d_len: d.len(),
        repairs,
        swaps,
        trace,
    })
}

const POLISH_ROUNDS: usize = 64;
const SWAP_NEIGHBOURS: usize = 6;

#[derive(Debug, Clone, Copy)]
struct Move {
    delta: f64,
    drop: Option<u64>,
    add: Option<u64>,
}

impl Move {
    fn compatible(&self, other: &Move) -> bool {
        (self.drop.is_none() || self.drop != other.drop) && (self.add.is_none() || self.add != other.add)
    }
}

/// Local improvement of a selection: repeatedly applies the best single
/// move (add, drop or swap against nearby unselected pool elements) or pair
/// of moves while `|x - Σ n^{-α}|` decreases and exceeds `tol / 2`.
fn polish(pool: &[u64], mut chosen: Vec<u64>, alpha: f64, x: f64, tol: f64) -> (Vec<u64>, usize) {
    let mag = |n: u64| (n as f64).powf(-alpha);
    let mut swaps = 0;
    if (x - phi_finite(&chosen, alpha).mid()).abs() <= 0.999 * tol {
        return (chosen, 0);
    }
    for _ in 0..POLISH_ROUNDS {
        let r = x - phi_finite(&chosen, alpha).mid();
        if r.abs() <= tol / 2.0 {
            break;
        }
        // unselected pool elements, by increasing magnitude
        let free: Vec<u64> = pool
            .iter()
            .rev()
            .copied()
            .filter(|n| chosen.binary_search(n).is_err())
            .collect();
        let free_mags: Vec<f64> = free.iter().map(|&n| mag(n)).collect();
        let mut moves: Vec<Move> = free
            .iter()
            .zip(&free_mags)
            .map(|(&b, &m)| Move {
                delta: m,
                drop: None,
                add: Some(b),
            })
            .collect();
        for &a in &chosen {
            let ma = mag(a);
            moves.push(Move {
                delta: -ma,
                drop: Some(a),
                add: None,
            });
            let i = free_mags.partition_point(|&m| m < ma);
            let j = free_mags.partition_point(|&m| m < ma + r);
            let near = i.saturating_sub(SWAP_NEIGHBOURS)..(i + SWAP_NEIGHBOURS).min(free.len());
            let aimed = j.saturating_sub(1)..(j + 1).min(free.len());
            for b in near.chain(aimed) {
                moves.push(Move {
                    delta: free_mags[b] - ma,
                    drop: Some(a),
                    add: Some(free[b]),
                });
            }
        }
        moves.sort_by(|p, q| p.delta.total_cmp(&q.delta));
        let deltas: Vec<f64> = moves.iter().map(|m| m.delta).collect();
        let nearest = |want: f64| {
            let i = deltas.partition_point(|&d| d < want);
            i.saturating_sub(2)..(i + 2).min(deltas.len())
        };
        let mut best: (f64, Vec<Move>) = (r.abs(), Vec::new());
        for i in nearest(r) {
            let v = (r - deltas[i]).abs();
            if v < best.0 {
                best = (v, vec![moves[i]]);
            }
        }
        for (i, mi) in moves.iter().enumerate() {
            for j in nearest(r - mi.delta) {
                if i == j || !mi.compatible(&moves[j]) {
                    continue;
                }
                let v = (r - mi.delta - deltas[j]).abs();
                if v < best.0 {
                    best = (v, vec![*mi, moves[j]]);
                }
            }
        }
        if best.1.is_empty() {
            break;
        }
        for mv in &best.1 {
            if let Some(a) = mv.drop {
                chosen.retain(|&n| n != a);
            }
            if let Some(b) = mv.add {
                let at = chosen.partition_point(|&n| n < b);
                chosen.insert(at, b);
            }
        }
        swaps += best.1.len();
    }
    (chosen, swaps)
}

/// Inserts pool elements right after each violating position until the
/// Kakeya check passes, no candidate is left, or the budget is spent.
fn repair_kakeya(pool: &[u64], merged: &mut Vec<u64>, alpha: f64, tol: f64, budget: usize) -> usize {
    let mut used = 0;
    while used < budget {
        let mags: Vec<f64> = merged.iter().map(|&n| magnitude_enclosure(n, alpha).hi()).collect();
        let Some(k) = kakeya_check(&mags, tol) else {
            break;
        };
        let after = merged[k];
        let upto = merged.get(k + 1).copied().unwrap_or(u64::MAX);
        let start = pool.partition_point(|&e| e <= after);
        let candidate = pool[start..]
            .iter()
            .copied()
            .take_while(|&e| e < upto)
            .find(|e| merged.binary_search(e).is_err());
        match candidate {
            Some(e) => {
                let at = merged.partition_point(|&m| m < e);
                merged.insert(at, e);
                used += 1;
            }
            None => break,
        }
    }
    used
}

/// Cutoff `k` with `x k^{b-a} > z` and `x k^{b-g} < y`, made robust by `+1`.
pub fn separation_cutoff(a: f64, b: f64, g: f64, x: f64, z: f64, y: f64) -> u64 {
    let lower = (z / x).powf(1.0 / (b - a));
    let upper = (x / y).powf(1.0 / (g - b));
    let k = lower.max(upper).ceil();
    if k.is_finite() && k < 1e18 {
        (k as u64).max(1) + 1
    } else {
        u64::MAX
    }
}

#[derive(Debug, Clone)]
pub struct Separated {
    pub target: Targeted,
    pub cutoff: u64,
    pub phi_a: Enclosure,
    pub phi_b: Enclosure,
    pub phi_g: Enclosure,
}

/// Finite `A` drawn from `pool` past a cutoff with certified
/// `Φ(A, a) > z`, `|Φ(A, b) - x| <= tol` and `Φ(A, g) < y`.
#[allow(clippy::too_many_arguments)]
pub fn separated_target_subset(
    sieve: &Sieve,
    pool: &PoolHandle,
    (a, b, g): (f64, f64, f64),
    x: f64,
    z: f64,
    y: f64,
    tol: f64,
    opts: TargetOptions,
) -> Result<Separated> {
    if !(x > 0.0 && y > 0.0 && z > 0.0) {
        return Err(Error::Precondition(format!(
            "x, y, z must be positive, got {x}, {y}, {z}"
        )));
    }
    if !(0.0 < a && a < b && b < g && b <= 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < a < b < g and b <= 1, got {a}, {b}, {g}"
        )));
    }
    let mut cutoff = separation_cutoff(a, b, g, x, z, y);
    let mut last = None;
    for _ in 0..=opts.cutoff_doublings {
        if cutoff >= opts.max_elem {
            break;
        }
        let restricted = restrict(sieve, pool, cutoff)?;
        let target = target_subset(sieve, &restricted, b, x, tol, opts)?;
        let w = tol * 1e-3;
        let phi_a = phi(sieve, &target.set, a, w)?;
        let phi_g = phi(sieve, &target.set, g, w)?;
        let phi_b = target.value;
        if phi_a.lo() > z && phi_g.hi() < y && target.residual.is_subset_of(-tol, tol) {
            return Ok(Separated {
                target,
                cutoff,
                phi_a,
                phi_b,
                phi_g,
            });
        }
        last = Some(format!(
            "cutoff {cutoff}: phi_a={phi_a:?} vs z={z}, phi_g={phi_g:?} vs y={y}, residual={:?}",
            target.residual
        ));
        cutoff = cutoff.saturating_mul(2);
    }
    match last {
        Some(detail) => Err(Error::Postcondition(format!(
            "exponent separation not certified: {detail}"
        ))),
        None => Err(Error::capacity(
            format!("separation cutoff {cutoff} beyond the index cap"),
            opts.max_elem,
        )),
    }
}
