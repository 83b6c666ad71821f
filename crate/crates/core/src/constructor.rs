//! The d-dimensional construction: inductive cancellation stages per axis,
//! the final `K·W` step, and the combination of the per-axis sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prime_pool::{exclude, split_pool, PoolHandle, Sieve};
use crate::series_eval::{coordwise_mul, phi_finite, psi, Enclosure};
use crate::set_algebra::{class_depth, enumerate, SetExpr};
use crate::targeter::{separated_target_subset, target_subset, TargetOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Final tolerance per coordinate.
    pub tol: f64,
    /// Largest emitted index.
    pub max_index: u64,
    /// Geometric factor of the per-stage budget split.
    pub budget_split: f64,
    /// Mantissa bits assumed for term evaluation (at most 53).
    pub precision: u32,
    pub refinement_rounds: usize,
    /// Largest element of the depth-one sets built inside the stages.
    /// Defaults to `sqrt(max_index)`.
    pub stage_index_cap: Option<u64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-6,
            max_index: 10_000_000,
            budget_split: 0.5,
            precision: 53,
            refinement_rounds: 4,
            stage_index_cap: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_index < 1000 {
            return Err(Error::InvalidInput(format!(
                "max_index must be at least 1000, got {}",
                self.max_index
            )));
        }
        if !(self.budget_split > 0.0 && self.budget_split < 1.0) {
            return Err(Error::InvalidInput(format!(
                "budget split must lie in (0, 1), got {}",
                self.budget_split
            )));
        }
        if self.precision > 53 || self.precision < 8 {
            return Err(Error::InvalidInput(format!(
                "precision must lie in [8, 53] bits, got {}",
                self.precision
            )));
        }
        Ok(())
    }

    /// Index caps tried in turn for the stage sets: `√N`, `N^{2/3}`, `N/100`.
    /// Smaller caps leave more room for the final multiplier.
    fn stage_caps(&self) -> Vec<u64> {
        if let Some(c) = self.stage_index_cap {
            return vec![c.max(100)];
        }
        let n = self.max_index;
        let root = crate::prime_pool::integer_sqrt(n);
        let two_thirds = (n as f64).powf(2.0 / 3.0) as u64;
        let mut caps: Vec<u64> = [root, two_thirds, n / 100].iter().map(|&c| c.max(100)).collect();
        caps.dedup();
        caps
    }
}

/// Allowances: each axis gets `tol/(d+1)`; within an axis stage `i` gets
/// `axis (1-r) r^i` and the final step `axis (1-r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub axis: f64,
    pub stages: Vec<f64>,
    pub final_step: f64,
}

pub fn error_budget(cfg: &SolveConfig, d: usize, stage_count: usize) -> Budget {
    let axis = cfg.tol / (d as f64 + 1.0);
    let r = cfg.budget_split;
    Budget {
        axis,
        stages: (1..=stage_count).map(|i| axis * (1.0 - r) * r.powi(i as i32)).collect(),
        final_step: axis * (1.0 - r),
    }
}

/// Stage vectors `x⃗ = Ψ(W⁺)`, `y⃗ = Ψ(W⁻)`; coordinates in `zero_mask` are
/// budgeted ε-zeros, all others carry certified opposite signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantPair {
    pub x: Vec<Enclosure>,
    pub y: Vec<Enclosure>,
    pub zero_mask: Vec<bool>,
}

impl OrthantPair {
    /// Violations of the sign rule on live coordinates and of the allowances
    /// on masked ones.
    pub fn violations(&self, allow_x: &[f64], allow_y: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        for j in 0..self.x.len() {
            let (x, y) = (self.x[j], self.y[j]);
            if self.zero_mask[j] {
                if x.mag() > allow_x[j] || y.mag() > allow_y[j] {
                    out.push(format!(
                        "coordinate {j}: |x| {:e}, |y| {:e} over allowance {:e}, {:e}",
                        x.mag(),
                        y.mag(),
                        allow_x[j],
                        allow_y[j]
                    ));
                }
            } else {
                match (x.sign(), y.sign()) {
                    (Some(a), Some(b)) if a != b => {}
                    _ => out.push(format!("coordinate {j}: signs not certified opposite ({x:?}, {y:?})")),
                }
            }
        }
        out
    }
}

/// What one stage recorded, for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    /// Coordinate killed at this stage (sorted-exponent order, 0-based).
    pub l: usize,
    pub budget: f64,
    pub before: OrthantPair,
    pub after: OrthantPair,
    pub allow_x: Vec<f64>,
    pub allow_y: Vec<f64>,
    pub trivial: bool,
    pub a_len: usize,
    pub b_len: usize,
    pub cutoff_a: u64,
    pub cutoff_b: u64,
    pub violations: Vec<String>,
}

/// Live state between stages of one axis.
#[derive(Debug, Clone)]
pub struct StageState {
    pub i: usize,
    pub pair: OrthantPair,
    pub l: usize,
    pub m: PoolHandle,
    pub w_plus: SetExpr,
    pub w_minus: SetExpr,
    pub allow_x: Vec<f64>,
    pub allow_y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub a: SetExpr,
    pub b: SetExpr,
    pub c_pool: PoolHandle,
    pub z1: Vec<Enclosure>,
    pub z2: Vec<Enclosure>,
    pub cutoff_a: u64,
    pub cutoff_b: u64,
}

/// Exponent triple and bounds `(z, y)` for the separated target at `l`;
/// `swap` interchanges the roles of `x⃗` and `y⃗`.
fn separation_params(pair: &OrthantPair, l: usize, alphas: &[f64], swap: bool) -> ((f64, f64, f64), f64, f64) {
    let d = alphas.len();
    let (xs, ys) = if swap { (&pair.y, &pair.x) } else { (&pair.x, &pair.y) };
    let live = |r: std::ops::Range<usize>| r.filter(|&i| !pair.zero_mask[i]).collect::<Vec<_>>();
    let below = live(0..l);
    let above = live(l + 1..d);
    let z = if l == 0 {
        1.0
    } else {
        let num = below
            .iter()
            .map(|&i| ys[i].mag())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let den = below
            .iter()
            .map(|&i| xs[i].mig())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        num.unwrap_or(1.0) / den.unwrap_or(1.0)
    };
    let y = if l == d - 1 {
        1.0
    } else {
        let num = above
            .iter()
            .map(|&i| ys[i].mig())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
        let den = above
            .iter()
            .map(|&i| xs[i].mag())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        num.unwrap_or(1.0) / den.unwrap_or(1.0)
    };
    let a = if l == 0 { alphas[0] / 2.0 } else { alphas[l - 1] };
    let g = if l == d - 1 { 2.0 } else { alphas[l + 1] };
    ((a, alphas[l], g), z, y)
}

fn tiny_widths(d: usize) -> Vec<f64> {
    vec![1e-15; d]
}

/// One cancellation stage: sets `A, B` from two fresh thirds of `m` with
/// `z⃗₁ = ⟨Ψ(A), x⃗⟩ + y⃗` and `z⃗₂ = ⟨Ψ(B), y⃗⟩ + x⃗` both killing coordinate `l`
/// to within `budget` while keeping the other live signs opposite.
pub fn inductive_step(
    sieve: &Sieve,
    l: usize,
    pair: &OrthantPair,
    m: &PoolHandle,
    alphas: &[f64],
    budget: f64,
    opts: TargetOptions,
) -> Result<StepOutput> {
    let d = alphas.len();
    if pair.zero_mask[l] {
        return Ok(StepOutput {
            a: SetExpr::Empty,
            b: SetExpr::Empty,
            c_pool: m.clone(),
            z1: pair.y.clone(),
            z2: pair.x.clone(),
            cutoff_a: 0,
            cutoff_b: 0,
        });
    }
    let (xl, yl) = (pair.x[l], pair.y[l]);
    if xl.sign().is_none() || yl.sign().is_none() || xl.sign() == yl.sign() {
        return Err(Error::Precondition(format!(
            "coordinate {l} does not carry opposite certified signs: {xl:?}, {yl:?}"
        )));
    }
    let parts = split_pool(sieve, m, 3)?;
    let (pa, pb, pc) = (&parts[0], &parts[1], &parts[2]);

    let (exps, z, y) = separation_params(pair, l, alphas, false);
    let target = -yl.mid() / xl.mid();
    let tol = budget / (2.0 * xl.mag());
    let sa = separated_target_subset(sieve, pa, exps, target, z, y, tol, opts)?;

    let (exps_b, z_b, y_b) = separation_params(pair, l, alphas, true);
    let target_b = -xl.mid() / yl.mid();
    let tol_b = budget / (2.0 * yl.mag());
    let sb = separated_target_subset(sieve, pb, exps_b, target_b, z_b, y_b, tol_b, opts)?;

    let a = sa.target.set;
    let b = sb.target.set;
    let psi_a = psi(sieve, &a, alphas, &tiny_widths(d))?;
    let psi_b = psi(sieve, &b, alphas, &tiny_widths(d))?;
    let z1: Vec<Enclosure> = coordwise_mul(&psi_a, &pair.x)?
        .into_iter()
        .zip(&pair.y)
        .map(|(u, v)| u + *v)
        .collect();
    let z2: Vec<Enclosure> = coordwise_mul(&psi_b, &pair.y)?
        .into_iter()
        .zip(&pair.x)
        .map(|(u, v)| u + *v)
        .collect();

    if z1[l].mag() > budget || z2[l].mag() > budget {
        return Err(Error::Refinement {
            stage: 0,
            coordinate: l,
            detail: format!("killed coordinate left at {:?} / {:?}, budget {budget:e}", z1[l], z2[l]),
        });
    }
    for j in (0..d).filter(|&j| j != l && !pair.zero_mask[j]) {
        match (z1[j].sign(), z2[j].sign()) {
            (Some(s1), Some(s2)) if s1 != s2 => {}
            _ => {
                return Err(Error::Refinement {
                    stage: 0,
                    coordinate: j,
                    detail: format!("signs not certified opposite: {:?} / {:?}", z1[j], z2[j]),
                })
            }
        }
    }
    Ok(StepOutput {
        a,
        b,
        c_pool: pc.clone(),
        z1,
        z2,
        cutoff_a: sa.cutoff,
        cutoff_b: sb.cutoff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AxisStatus {
    Certified,
    BudgetExhausted { diagnostic: String },
}

/// Outcome of one axis: the set `W`, its emitted indices and audit data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxisReport {
    /// Coordinate (sorted-exponent order, 0-based).
    pub k: usize,
    /// Normalised target of this axis.
    pub x: f64,
    pub marker: u64,
    pub status: AxisStatus,
    pub budget: f64,
    /// Stages of the kept attempt, or of the last failed one.
    pub stages: Vec<StageRecord>,
    pub depth: usize,
    /// Ψ of the emitted indices of this axis.
    pub emitted: Vec<Enclosure>,
    /// Structural Ψ(W) (all of W, including products past the index cap).
    pub structural: Vec<Enclosure>,
    pub index_count: usize,
    pub attempts: usize,
    #[serde(skip)]
    pub indices: Vec<u64>,
    #[serde(skip)]
    pub set: Option<SetExpr>,
}

impl AxisReport {
    fn worst_excess(&self) -> f64 {
        self.emitted
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let t = if j == self.k { self.x } else { 0.0 };
                (*e - Enclosure::point(t)).mag()
            })
            .fold(0.0, f64::max)
    }
}

/// One attempt of the per-axis construction at the given stage-budget scale.
#[allow(clippy::too_many_arguments)]
fn axis_attempt(
    sieve: &Sieve,
    k: usize,
    x: f64,
    v: &PoolHandle,
    alphas: &[f64],
    cfg: &SolveConfig,
    budget: &Budget,
    scale: f64,
    stage_cap: u64,
    records: &mut Vec<StageRecord>,
) -> Result<SetExpr> {
    let d = alphas.len();
    let p = v.marker();
    let opts = TargetOptions {
        max_elem: cfg.max_index,
        ..TargetOptions::default()
    };
    if d == 1 {
        let alpha = alphas[0];
        let m = exclude(sieve, v, &[p])?;
        let factor = if x > 0.0 { p } else { 2 * p };
        let scaled = x.abs() * (factor as f64).powf(alpha);
        let tol = 0.9 * budget.axis * (factor as f64).powf(alpha);
        let opts = TargetOptions {
            max_elem: cfg.max_index / factor,
            ..opts
        };
        let t = target_subset(sieve, &m, alpha, scaled, tol, opts)?;
        let w = SetExpr::product_checked(sieve, SetExpr::singleton(factor), t.set, cfg.max_index)?;
        return Ok(w);
    }

    let mut state = StageState {
        i: 1,
        pair: OrthantPair {
            x: psi(sieve, &SetExpr::singleton(p), alphas, &tiny_widths(d))?,
            y: psi(sieve, &SetExpr::singleton(2 * p), alphas, &tiny_widths(d))?,
            zero_mask: vec![false; d],
        },
        l: 0,
        m: exclude(sieve, v, &[p])?,
        w_plus: SetExpr::singleton(p),
        w_minus: SetExpr::singleton(2 * p),
        allow_x: vec![0.0; d],
        allow_y: vec![0.0; d],
    };
    let order: Vec<usize> = (0..d).filter(|&j| j != k).collect();
    let stage_opts = TargetOptions {
        max_elem: stage_cap,
        ..opts
    };
    for (idx, &l) in order.iter().enumerate() {
        state.l = l;
        let e = budget.stages[idx] * scale;
        let step = inductive_step(sieve, l, &state.pair, &state.m, alphas, e, stage_opts).map_err(|err| match err {
            Error::Refinement { coordinate, detail, .. } => Error::Refinement {
                stage: state.i,
                coordinate,
                detail,
            },
            other => other,
        })?;
        let psi_a = psi(sieve, &step.a, alphas, &tiny_widths(d))?;
        let psi_b = psi(sieve, &step.b, alphas, &tiny_widths(d))?;
        let mut allow_x = vec![0.0; d];
        let mut allow_y = vec![0.0; d];
        for j in 0..d {
            if state.pair.zero_mask[j] {
                let grow = 1.0 + 1e-12;
                allow_x[j] = (psi_a[j].mag() * state.allow_x[j] + state.allow_y[j]) * grow;
                allow_y[j] = (psi_b[j].mag() * state.allow_y[j] + state.allow_x[j]) * grow;
            }
        }
        allow_x[l] = e;
        allow_y[l] = e;
        let mut mask = state.pair.zero_mask.clone();
        mask[l] = true;
        let after = OrthantPair {
            x: step.z1.clone(),
            y: step.z2.clone(),
            zero_mask: mask,
        };
        let violations = after.violations(&allow_x, &allow_y);
        records.push(StageRecord {
            stage: state.i,
            l,
            budget: e,
            before: state.pair.clone(),
            after: after.clone(),
            allow_x: allow_x.clone(),
            allow_y: allow_y.clone(),
            trivial: step.a.is_empty_expr() && step.b.is_empty_expr(),
            a_len: count(&step.a),
            b_len: count(&step.b),
            cutoff_a: step.cutoff_a,
            cutoff_b: step.cutoff_b,
            violations: violations.clone(),
        });
        if let Some(v) = violations.first() {
            return Err(Error::Refinement {
                stage: state.i,
                coordinate: l,
                detail: v.clone(),
            });
        }
        let w_plus = SetExpr::union_checked(
            sieve,
            SetExpr::product_checked(sieve, step.a, state.w_plus.clone(), cfg.max_index)?,
            state.w_minus.clone(),
            cfg.max_index,
        )?;
        let w_minus = SetExpr::union_checked(
            sieve,
            SetExpr::product_checked(sieve, step.b, state.w_minus.clone(), cfg.max_index)?,
            state.w_plus.clone(),
            cfg.max_index,
        )?;
        state = StageState {
            i: state.i + 1,
            pair: after,
            l,
            m: step.c_pool,
            w_plus,
            w_minus,
            allow_x,
            allow_y,
        };
    }

    // final step: pick the side whose k-th coordinate has the sign of x
    let (xk, yk) = (state.pair.x[k], state.pair.y[k]);
    let (chosen, val) = match (xk.sign(), yk.sign()) {
        (Some(s), _) if s == x.signum() => (state.w_plus.clone(), xk),
        (_, Some(s)) if s == x.signum() => (state.w_minus.clone(), yk),
        _ => {
            return Err(Error::Refinement {
                stage: state.i,
                coordinate: k,
                detail: format!("no side with the sign of the target: {xk:?}, {yk:?}"),
            })
        }
    };
    let target = x / val.mid();
    let tol = 0.9 * budget.final_step / (2.0 * val.mag());
    // every product k·w must stay below the index cap, so the emitted set is all of W
    let max_w = chosen.max_element().unwrap_or(1).max(1);
    let k_opts = TargetOptions {
        max_elem: (cfg.max_index as u128 / max_w) as u64,
        ..opts
    };
    let kset = target_subset(sieve, &state.m, alphas[k], target, tol, k_opts)?;
    let w = SetExpr::product_checked(sieve, kset.set, chosen, cfg.max_index)?;
    Ok(w)
}

fn count(e: &SetExpr) -> usize {
    match e {
        SetExpr::Finite { elements } => elements.len(),
        _ => 0,
    }
}

/// Per-axis solve: a set `W` built from `(V, p)` whose emitted indices give
/// `Ψ ≈ x e_k` within the axis budget. Refinement halves the stage budgets
/// and re-runs the axis; the best attempt is kept.
pub fn axis_solve(
    sieve: &Sieve,
    k: usize,
    x: f64,
    v: &PoolHandle,
    alphas: &[f64],
    cfg: &SolveConfig,
) -> Result<AxisReport> {
    let d = alphas.len();
    let budget = error_budget(cfg, d, d.saturating_sub(1));
    let mut report = AxisReport {
        k,
        x,
        marker: v.marker(),
        status: AxisStatus::Certified,
        budget: budget.axis,
        stages: Vec::new(),
        depth: 0,
        emitted: vec![Enclosure::ZERO; d],
        structural: vec![Enclosure::ZERO; d],
        index_count: 0,
        attempts: 0,
        indices: Vec::new(),
        set: Some(SetExpr::Empty),
    };
    if x == 0.0 {
        return Ok(report);
    }
    let mut best: Option<AxisReport> = None;
    let mut last_err: Option<String> = None;
    let mut scale = 1.0;
    let caps = cfg.stage_caps();
    let mut cap_at = 0;
    let mut failed_stages = Vec::new();
    let mut attempt = 0;
    while attempt <= cfg.refinement_rounds {
        attempt += 1;
        let mut stages = Vec::new();
        let outcome = axis_attempt(sieve, k, x, v, alphas, cfg, &budget, scale, caps[cap_at], &mut stages);
        if outcome.is_err() && best.is_none() {
            failed_stages = stages.clone();
        }
        match outcome {
            Ok(w) => {
                let indices = enumerate(sieve, &w, cfg.max_index)?;
                let emitted: Vec<Enclosure> = alphas.iter().map(|&a| phi_finite(&indices, a)).collect();
                let structural = psi(sieve, &w, alphas, &vec![budget.axis * 1e-3; d])?;
                let candidate = AxisReport {
                    stages,
                    depth: class_depth(&w),
                    emitted,
                    structural,
                    index_count: indices.len(),
                    attempts: attempt,
                    indices,
                    set: Some(w),
                    ..report.clone()
                };
                let excess = candidate.worst_excess();
                let better = best.as_ref().is_none_or(|b| excess < b.worst_excess());
                if better {
                    best = Some(candidate);
                }
                if excess <= budget.axis {
                    break;
                }
                last_err = Some(format!(
                    "emitted residual {excess:e} over axis budget {:e}",
                    budget.axis
                ));
            }
            Err(err @ Error::Refinement { .. }) => last_err = Some(err.to_string()),
            Err(err) if err.is_capacity() && cap_at + 1 < caps.len() && best.is_none() => {
                last_err = Some(err.to_string());
                cap_at += 1;
                continue;
            }
            Err(err) if err.is_capacity() || matches!(err, Error::Postcondition(_) | Error::EmptyWindow { .. }) => {
                last_err = Some(err.to_string());
                break;
            }
            Err(err) => return Err(err),
        }
        scale /= 2.0;
    }
    match best {
        Some(mut b) => {
            b.attempts = b.attempts.max(1);
            if b.worst_excess() > budget.axis {
                b.status = AxisStatus::BudgetExhausted {
                    diagnostic: last_err.unwrap_or_default(),
                };
            }
            Ok(b)
        }
        None => {
            report.status = AxisStatus::BudgetExhausted {
                diagnostic: last_err.unwrap_or_else(|| "no attempt completed".into()),
            };
            report.set = None;
            report.stages = failed_stages;
            report.attempts = cfg.refinement_rounds + 1;
            Ok(report)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SolveStatus {
    Certified,
    BudgetExhausted { diagnostic: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub index_count: usize,
    pub largest_index: u64,
    pub stage_executions: usize,
    pub attempts: usize,
    pub sieve_limit: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub alphas: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub target: Vec<f64>,
    pub tol: f64,
    pub max_index: u64,
    pub status: SolveStatus,
    /// `a_i Ψ(F)_i - target_i`, in input order.
    pub residuals: Vec<Enclosure>,
    /// Input coordinate of each sorted position.
    pub permutation: Vec<usize>,
    pub axes: Vec<AxisReport>,
    pub resources: Resources,
    pub indices: Vec<u64>,
}

impl SolveReport {
    pub fn is_certified(&self) -> bool {
        self.status == SolveStatus::Certified
    }
}

pub fn check_exponents(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidInput("at least one exponent is required".into()));
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidInput(format!("exponent {i} must lie in (0, 1], got {a}")));
        }
    }
    for i in 0..alphas.len() {
        for j in i + 1..alphas.len() {
            if alphas[i] == alphas[j] {
                return Err(Error::DuplicateExponent {
                    first: i,
                    second: j,
                    value: alphas[i],
                });
            }
        }
    }
    Ok(())
}

/// Finds a finite `F` with `|a_i Σ_{n∈F} (-1)^{n+1} n^{-α_i} - target_i| <= tol`
/// for all `i`.
pub fn solve(sieve: &Sieve, alphas: &[f64], coeffs: &[f64], target: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_exponents(alphas)?;
    let d = alphas.len();
    if coeffs.len() != d {
        return Err(Error::LengthMismatch {
            left: d,
            right: coeffs.len(),
        });
    }
    if target.len() != d {
        return Err(Error::LengthMismatch {
            left: d,
            right: target.len(),
        });
    }
    if let Some(c) = coeffs.iter().find(|c| !(c.is_finite() && **c != 0.0)) {
        return Err(Error::InvalidInput(format!(
            "coefficients must be finite and nonzero, got {c}"
        )));
    }
    if let Some(t) = target.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("target must be finite, got {t}")));
    }

    let mut perm: Vec<usize> = (0..d).collect();
    perm.sort_by(|&i, &j| alphas[i].total_cmp(&alphas[j]));
    let sorted: Vec<f64> = perm.iter().map(|&i| alphas[i]).collect();
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let inner = SolveConfig {
        tol: cfg.tol / scale,
        ..*cfg
    };
    let normalized: Vec<f64> = perm.iter().map(|&i| target[i] / coeffs[i]).collect();

    let pools = split_pool(sieve, &PoolHandle::base(), d as u32)?;
    let markers: Vec<u64> = pools.iter().map(|p| p.marker()).collect();
    let mut axes = Vec::with_capacity(d);
    for k in 0..d {
        axes.push(axis_solve(sieve, k, normalized[k], &pools[k], &sorted, &inner)?);
    }

    // the marker discipline makes the axis sets pairwise disjoint
    let mut indices = Vec::new();
    for (k, axis) in axes.iter().enumerate() {
        for &n in &axis.indices {
            let ok = n % markers[k] == 0 && markers.iter().enumerate().all(|(j, &q)| j == k || n % q != 0);
            if !ok {
                return Err(Error::Witness(format!(
                    "index {n} of axis {k} breaks the marker discipline"
                )));
            }
        }
        indices.extend_from_slice(&axis.indices);
    }
    indices.sort_unstable();
    if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Witness(format!("index {} emitted by two axes", w[0])));
    }

    let residuals: Vec<Enclosure> = (0..d)
        .map(|i| phi_finite(&indices, alphas[i]).scale(coeffs[i]) - Enclosure::point(target[i]))
        .collect();
    let certified = residuals.iter().all(|r| r.is_subset_of(-cfg.tol, cfg.tol));
    let status = if certified {
        SolveStatus::Certified
    } else {
        let mut parts: Vec<String> = axes
            .iter()
            .filter_map(|a| match &a.status {
                AxisStatus::BudgetExhausted { diagnostic } => Some(format!("axis {}: {diagnostic}", perm[a.k])),
                AxisStatus::Certified => None,
            })
            .collect();
        if parts.is_empty() {
            parts.push("combined residual exceeds tol".into());
        }
        SolveStatus::BudgetExhausted {
            diagnostic: parts.join("; "),
        }
    };
    let resources = Resources {
        index_count: indices.len(),
        largest_index: indices.last().copied().unwrap_or(0),
        stage_executions: axes.iter().map(|a| a.stages.len()).sum(),
        attempts: axes.iter().map(|a| a.attempts).sum(),
        sieve_limit: sieve.limit(),
    };
    Ok(SolveReport {
        alphas: alphas.to_vec(),
        coeffs: coeffs.to_vec(),
        target: target.to_vec(),
        tol: cfg.tol,
        max_index: cfg.max_index,
        status,
        residuals,
        permutation: perm,
        axes,
        resources,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sieve() -> Sieve {
        Sieve::new(10_000_000, 2_000_000_000).unwrap()
    }

    #[test]
    fn budget_examples() {
        let cfg = SolveConfig {
            tol: 1e-3,
            ..SolveConfig::default()
        };
        assert_eq!(error_budget(&cfg, 1, 0).axis, 0.5e-3);
        let b = error_budget(&cfg, 3, 3);
        let total: f64 = b.stages.iter().sum::<f64>() + b.final_step;
        assert!(total <= b.axis);
        assert!((b.stages[0] / b.stages[1] - 2.0).abs() < 1e-12);
        assert!((b.stages[1] / b.stages[2] - 2.0).abs() < 1e-12);
        assert!(3.0 * b.axis <= cfg.tol);
    }

    #[test]
    fn zero_target_is_empty() {
        let s = sieve();
        let r = solve(&s, &[0.5], &[1.0], &[0.0], &SolveConfig::default()).unwrap();
        assert!(r.indices.is_empty());
        assert!(r.is_certified());
        assert_eq!(r.residuals, vec![Enclosure::ZERO]);
    }

    #[test]
    fn duplicates_rejected() {
        let s = sieve();
        let err = solve(&s, &[0.5, 0.5], &[1.0, 1.0], &[1.0, 1.0], &SolveConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::DuplicateExponent {
                first: 0,
                second: 1,
                ..
            }
        ));
    }

    #[test]
    fn bad_inputs_rejected() {
        let s = sieve();
        let cfg = SolveConfig::default();
        assert!(solve(&s, &[1.5], &[1.0], &[0.1], &cfg).is_err());
        assert!(solve(&s, &[0.5], &[0.0], &[0.1], &cfg).is_err());
        assert!(solve(&s, &[0.5], &[1.0], &[0.1, 0.2], &cfg).is_err());
        let bad = SolveConfig { tol: 0.0, ..cfg };
        assert!(solve(&s, &[0.5], &[1.0], &[0.1], &bad).is_err());
        let bad = SolveConfig { precision: 64, ..cfg };
        assert!(matches!(
            solve(&s, &[0.5], &[1.0], &[0.1], &bad),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn one_dimensional_positive() {
        let s = sieve();
        let cfg = SolveConfig::default();
        let r = solve(&s, &[1.0], &[1.0], &[0.2], &cfg).unwrap();
        assert!(r.is_certified(), "{:?}", r.status);
        assert!(r.indices.iter().all(|n| n % 3 == 0 && n % 2 == 1));
        let direct: f64 = r.indices.iter().map(|&n| 1.0 / n as f64).sum();
        assert!((direct - 0.2).abs() <= 1e-6);
    }

    #[test]
    fn one_dimensional_negative_uses_even_indices() {
        let s = sieve();
        let r = solve(&s, &[1.0], &[1.0], &[-0.1], &SolveConfig::default()).unwrap();
        assert!(r.is_certified(), "{:?}", r.status);
        assert!(!r.indices.is_empty());
        assert!(r.indices.iter().all(|n| n % 6 == 0));
    }

    #[test]
    fn coefficients_rescale_the_target() {
        let s = sieve();
        let r = solve(&s, &[1.0], &[-2.0], &[0.2], &SolveConfig::default()).unwrap();
        assert!(r.is_certified(), "{:?}", r.status);
        assert!(r.residuals[0].is_subset_of(-1e-6, 1e-6));
    }

    #[test]
    fn orthant_violations() {
        let p = OrthantPair {
            x: vec![Enclosure::point(1.0), Enclosure::point(1e-9)],
            y: vec![Enclosure::point(-1.0), Enclosure::point(-1e-9)],
            zero_mask: vec![false, true],
        };
        assert!(p.violations(&[0.0, 1e-8], &[0.0, 1e-8]).is_empty());
        assert_eq!(p.violations(&[0.0, 1e-10], &[0.0, 1e-8]).len(), 1);
        let q = OrthantPair {
            x: vec![Enclosure::point(1.0)],
            y: vec![Enclosure::new(-1.0, 1.0)],
            zero_mask: vec![false],
        };
        assert_eq!(q.violations(&[0.0], &[0.0]).len(), 1);
    }
}
