//! The `achieve` command line: solve, verify, primes, oracle, selftest.
//!
//! Exit codes: 0 certified / pass, 1 input error, 2 capacity or budget
//! exhausted, 3 verification failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::constructor::{solve, SolveConfig};
use crate::error::Error;
use crate::prime_pool::{
    extract_edelta, gap_scan, split_pool, ExtractOptions, PoolHandle, Sieve, DEFAULT_HARD_CAP, DEFAULT_INITIAL_LIMIT,
};
use crate::series_eval::{phi, phi_finite, tail_bound, term, Enclosure};
use crate::set_algebra::{injectivity_check, SetExpr};
use crate::targeter::greedy_select;
use crate::verify_oracle::{achievement_profile, brute_subset_oracle, index_rows, verify_with};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_CAPACITY: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "achieve",
    version,
    about = "Certified finite subsums of alternating power series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find a finite index set hitting the target in every coordinate.
    Solve(SolveArgs),
    /// Re-sum an index JSONL file and compare with the target.
    Verify(VerifyArgs),
    /// Prime diagnostics: gap scan, corridor extraction, pool split.
    Primes(PrimesArgs),
    /// Exhaustive subset-sum profile of a small pool.
    Oracle(OracleArgs),
    /// Run the embedded invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Exponents in (0, 1], comma separated.
    #[arg(long, allow_hyphen_values = true)]
    alphas: Option<String>,
    /// Nonzero coefficients, comma separated (default all 1).
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    target: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_index: Option<u64>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    budget_split: Option<f64>,
    #[arg(long)]
    refinement_rounds: Option<usize>,
    /// Index cap for the stage sets (default: escalate from √max-index).
    #[arg(long)]
    stage_cap: Option<u64>,
    /// key=value file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Index JSONL, one `{"n", "terms", "partial"}` record per index.
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Timing metadata JSON (kept out of the report for byte-determinism).
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    alphas: String,
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    #[arg(long)]
    tol: f64,
    indices: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PrimesArgs {
    /// eps,delta,lo,hi
    #[arg(long)]
    gap_scan: Option<String>,
    /// delta,start,count
    #[arg(long)]
    edelta: Option<String>,
    /// Number of parts.
    #[arg(long)]
    split: Option<u32>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// One positive magnitude per line.
    #[arg(long, conflicts_with = "prefix")]
    pool_file: Option<PathBuf>,
    /// Use the first k elements of the corridor sequence with delta 1.
    #[arg(long)]
    prefix: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Single target: print the optimal subset instead of a profile.
    #[arg(long, allow_hyphen_values = true)]
    target: Option<f64>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    SignFlip,
}

/// Failure carrying its exit code.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Capacity { .. } | Error::EmptyWindow { .. } | Error::Refinement { .. } => EXIT_CAPACITY,
            Error::Witness(_) | Error::Postcondition(_) => EXIT_VERIFY,
            _ => EXIT_INPUT,
        };
        Fail(code, e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail(EXIT_INPUT, e.to_string())
    }
}

fn input(msg: impl Into<String>) -> Fail {
    Fail(EXIT_INPUT, msg.into())
}

type CmdResult = std::result::Result<u8, Fail>;

/// Runs the command line and returns the exit code. Output goes to `out`,
/// diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let sieve = match Sieve::new(DEFAULT_INITIAL_LIMIT, DEFAULT_HARD_CAP) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CAPACITY;
        }
    };
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(&sieve, a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Primes(a) => cmd_primes(&sieve, a, out),
        Command::Oracle(a) => cmd_oracle(&sieve, a, out),
        Command::Selftest(a) => cmd_selftest(&sieve, a.inject_fault, out),
    };
    match res {
        Ok(code) => code,
        Err(Fail(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn parse_list(what: &str, s: &str) -> Result<Vec<f64>, Fail> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| input(format!("{what}: cannot parse {t:?} as a number")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, Fail> {
    s.trim()
        .parse()
        .map_err(|_| input(format!("{key}: cannot parse {s:?}")))
}

/// Plain `key = value` lines; blank lines and `#` comments are skipped.
pub fn read_config(path: &Path) -> std::result::Result<BTreeMap<String, String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: [&str; 9] = [
    "alphas",
    "coeffs",
    "target",
    "tol",
    "max_index",
    "precision",
    "budget_split",
    "refinement_rounds",
    "stage_cap",
];

struct SolveInputs {
    alphas: Vec<f64>,
    coeffs: Vec<f64>,
    target: Vec<f64>,
    cfg: SolveConfig,
}

fn solve_inputs(a: &SolveArgs) -> Result<SolveInputs, Fail> {
    let file = match &a.config {
        Some(p) => read_config(p).map_err(input)?,
        None => BTreeMap::new(),
    };
    if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(input(format!("unknown config key {k:?}")));
    }
    let text = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());
    fn num<T: std::str::FromStr + Copy>(
        flag: Option<T>,
        file: &BTreeMap<String, String>,
        key: &str,
    ) -> Result<Option<T>, Fail> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => file.get(key).map(|s| parse_value(key, s)).transpose(),
        }
    }

    let alphas = parse_list(
        "alphas",
        &text(&a.alphas, "alphas").ok_or_else(|| input("--alphas is required"))?,
    )?;
    let target = parse_list(
        "target",
        &text(&a.target, "target").ok_or_else(|| input("--target is required"))?,
    )?;
    let coeffs = match text(&a.coeffs, "coeffs") {
        Some(s) => parse_list("coeffs", &s)?,
        None => vec![1.0; alphas.len()],
    };
    let d = SolveConfig::default();
    let cfg = SolveConfig {
        tol: num(a.tol, &file, "tol")?.unwrap_or(d.tol),
        max_index: num(a.max_index, &file, "max_index")?.unwrap_or(d.max_index),
        budget_split: num(a.budget_split, &file, "budget_split")?.unwrap_or(d.budget_split),
        precision: num(a.precision, &file, "precision")?.unwrap_or(d.precision),
        refinement_rounds: num(a.refinement_rounds, &file, "refinement_rounds")?.unwrap_or(d.refinement_rounds),
        stage_index_cap: num(a.stage_cap, &file, "stage_cap")?.or(d.stage_index_cap),
    };
    cfg.validate()?;
    Ok(SolveInputs {
        alphas,
        coeffs,
        target,
        cfg,
    })
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), Fail> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| input(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Index JSONL with field order `n, terms, partial`.
pub fn write_index_jsonl<W: Write>(mut w: W, indices: &[u64], alphas: &[f64], coeffs: &[f64]) -> std::io::Result<()> {
    for row in index_rows(indices, alphas, coeffs) {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[derive(Serialize)]
struct Meta {
    command: &'static str,
    elapsed_ms: f64,
    unix_time: u64,
    version: &'static str,
}

fn cmd_solve(sieve: &Sieve, a: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let inputs = solve_inputs(&a)?;
    let started = Instant::now();
    let report = solve(sieve, &inputs.alphas, &inputs.coeffs, &inputs.target, &inputs.cfg)?;
    let elapsed = started.elapsed();

    if let Some(p) = &a.indices {
        let f = fs::File::create(p)?;
        write_index_jsonl(
            std::io::BufWriter::new(f),
            &report.indices,
            &report.alphas,
            &report.coeffs,
        )?;
    }
    match &a.out {
        Some(p) => write_json_file(p, &report)?,
        None => {
            serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| input(e.to_string()))?;
            writeln!(out)?;
        }
    }
    if let Some(p) = &a.meta {
        let meta = Meta {
            command: "solve",
            elapsed_ms: elapsed.as_secs_f64() * 1e3,
            unix_time: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            version: env!("CARGO_PKG_VERSION"),
        };
        write_json_file(p, &meta)?;
    }
    if report.is_certified() {
        writeln!(err, "certified: {} indices", report.indices.len())?;
        Ok(EXIT_OK)
    } else {
        if let crate::constructor::SolveStatus::BudgetExhausted { diagnostic } = &report.status {
            writeln!(err, "budget exhausted: {diagnostic}")?;
        }
        Ok(EXIT_CAPACITY)
    }
}

/// Reads the `n` field of every non-blank JSONL line.
pub fn read_index_jsonl(path: &Path) -> std::result::Result<Vec<u64>, String> {
    let f = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| format!("{}: {e}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        let n = v
            .get("n")
            .and_then(|n| n.as_u64())
            .ok_or_else(|| format!("{}:{}: missing non-negative integer field \"n\"", path.display(), i + 1))?;
        out.push(n);
    }
    Ok(out)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let alphas = parse_list("alphas", &a.alphas)?;
    let target = parse_list("target", &a.target)?;
    let coeffs = match &a.coeffs {
        Some(s) => parse_list("coeffs", s)?,
        None => vec![1.0; alphas.len()],
    };
    if !(a.tol >= 0.0) {
        return Err(input(format!("tol must be non-negative, got {}", a.tol)));
    }
    let indices = read_index_jsonl(&a.indices).map_err(input)?;
    let report = verify_with(&indices, &alphas, &coeffs, &target, a.tol)?;
    serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| input(e.to_string()))?;
    writeln!(out)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
}

fn fields<const N: usize>(what: &str, s: &str) -> Result<[f64; N], Fail> {
    let v = parse_list(what, s)?;
    v.try_into()
        .map_err(|_| input(format!("{what} expects {N} comma separated values")))
}

fn as_index(what: &str, x: f64) -> Result<u64, Fail> {
    if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(63) {
        Ok(x as u64)
    } else {
        Err(input(format!("{what}: {x} is not a non-negative integer")))
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), Fail> {
    serde_json::to_writer(&mut *out, v).map_err(|e| input(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn cmd_primes(sieve: &Sieve, a: PrimesArgs, out: &mut dyn Write) -> CmdResult {
    if let Some(s) = a.gap_scan {
        let [eps, delta, lo, hi] = fields::<4>("gap-scan", &s)?;
        let (lo, hi) = (as_index("gap-scan lo", lo)?, as_index("gap-scan hi", hi)?);
        let found = gap_scan(sieve, eps, delta, lo, hi)?;
        emit(
            out,
            &serde_json::json!({
                "eps": eps, "delta": delta, "lo": lo, "hi": hi,
                "failure": found.map(|n| n.to_string()).unwrap_or_else(|| "none".into()),
            }),
        )?;
        return Ok(EXIT_OK);
    }
    if let Some(s) = a.edelta {
        let [delta, start, count] = fields::<3>("edelta", &s)?;
        let (start, count) = (
            as_index("edelta start", start)?,
            as_index("edelta count", count)? as usize,
        );
        let seq = extract_edelta(sieve, &PoolHandle::base(), delta, start, ExtractOptions::default())?;
        let els = seq.first_elements(sieve, count)?;
        for (i, &n) in els.iter().enumerate() {
            let (ratio, ok) = match i {
                0 => (None, true),
                _ => {
                    let r = n as f64 / els[i - 1] as f64;
                    (Some(r), r > 1.0 + seq.eps_prime && r <= 1.0 + delta)
                }
            };
            emit(
                out,
                &serde_json::json!({ "index": i, "n": n, "ratio": ratio, "in_corridor": ok }),
            )?;
        }
        return Ok(EXIT_OK);
    }
    if let Some(d) = a.split {
        let parts = split_pool(sieve, &PoolHandle::base(), d)?;
        for (i, p) in parts.iter().enumerate() {
            let first = p.first_elements(sieve, 5)?;
            emit(
                out,
                &serde_json::json!({ "part": i, "marker": p.marker(), "first": first }),
            )?;
        }
        return Ok(EXIT_OK);
    }
    Err(input("one of --gap-scan, --edelta, --split is required"))
}

fn read_magnitudes(path: &Path) -> Result<Vec<f64>, Fail> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    text.split_whitespace()
        .map(|t| parse_value::<f64>("pool-file", t))
        .collect()
}

fn corridor_prefix(sieve: &Sieve, k: usize) -> crate::Result<Vec<u64>> {
    let seq = extract_edelta(sieve, &PoolHandle::base(), 1.0, 3, ExtractOptions::default())?;
    seq.first_elements(sieve, k)
}

fn cmd_oracle(sieve: &Sieve, a: OracleArgs, out: &mut dyn Write) -> CmdResult {
    let mags: Vec<f64> = match (&a.pool_file, a.prefix) {
        (Some(p), _) => read_magnitudes(p)?,
        (None, Some(k)) => corridor_prefix(sieve, k)?
            .iter()
            .map(|&n| term(n, a.alpha).abs())
            .collect(),
        (None, None) => return Err(input("one of --pool-file, --prefix is required")),
    };
    if mags.is_empty() {
        return Err(input("empty pool"));
    }
    match a.target {
        Some(t) => emit(out, &brute_subset_oracle(&mags, t)?)?,
        None => emit(out, &achievement_profile(&mags, a.grid)?)?,
    }
    Ok(EXIT_OK)
}

/// One line of the self-test summary.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn signed(n: u64, alpha: f64, fault: Option<Fault>) -> f64 {
    let t = term(n, alpha);
    if fault == Some(Fault::SignFlip) && n.is_multiple_of(2) {
        -t
    } else {
        t
    }
}

/// The embedded invariant checks. `fault` perturbs the term signs, which
/// every check must then catch.
pub fn selftest(sieve: &Sieve, fault: Option<Fault>) -> crate::Result<Vec<Check>> {
    let mut checks = Vec::new();

    // the sign of (-1)^{n+1} n^{-α}
    let bad = (1..=200u64).find(|&n| {
        let t = signed(n, 0.5, fault);
        (t > 0.0) != (n % 2 == 1)
    });
    checks.push(Check {
        name: "sign rule",
        pass: bad.is_none(),
        detail: bad
            .map(|n| format!("wrong sign at n={n}"))
            .unwrap_or_else(|| "n = 1..200".into()),
    });

    // Φ(A·B) against the term-by-term sum and Φ(A)Φ(B) for odd supports
    let pairs: [(&[u64], &[u64]); 3] = [(&[3, 5], &[7, 11]), (&[3], &[5, 7, 13]), (&[17, 19, 23], &[29, 31])];
    let mut ok = true;
    let mut detail = String::from("48/385 and two more pairs");
    for (a, b) in pairs {
        let (ea, eb) = (SetExpr::finite(a.to_vec())?, SetExpr::finite(b.to_vec())?);
        if injectivity_check(sieve, &ea, &eb, u64::MAX)?.is_some() {
            ok = false;
            detail = format!("{a:?}·{b:?} not injective");
            break;
        }
        let prod = SetExpr::product_checked(sieve, ea.clone(), eb.clone(), u64::MAX)?;
        let structural = phi(sieve, &prod, 1.0, 1e-14)?;
        let direct: f64 = a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| x * y))
            .map(|n| signed(n, 1.0, fault))
            .sum();
        let factored = phi_finite(a, 1.0) * phi_finite(b, 1.0);
        if !structural.overlaps(&factored) || !structural.overlaps(&Enclosure::around(direct, 1e-14)) {
            ok = false;
            detail = format!("{a:?}·{b:?}: {structural:?} vs {factored:?} vs {direct}");
            break;
        }
    }
    let exact = phi_finite(&[21, 33, 35, 55], 1.0);
    let signed_exact =
        signed(21, 1.0, fault) + signed(33, 1.0, fault) + signed(35, 1.0, fault) + signed(55, 1.0, fault);
    if ok && !(exact.contains(48.0 / 385.0) && (signed_exact - 48.0 / 385.0).abs() < 1e-15) {
        ok = false;
        detail = format!("{{3,5}}·{{7,11}} gave {exact:?}");
    }
    checks.push(Check {
        name: "product identity",
        pass: ok,
        detail,
    });

    // tail bounds dominate deeper partial sums
    let mut ok = true;
    let mut detail = String::from("delta in {0.5, 1}, alpha in {0.25, 0.5, 1}");
    for delta in [0.5, 1.0] {
        let seq = extract_edelta(sieve, &PoolHandle::base(), delta, 3, ExtractOptions::default())?;
        let els = seq.first_elements(sieve, 40)?;
        for alpha in [0.25, 0.5, 1.0] {
            let tb = tail_bound(sieve, &seq, 10, alpha)?;
            let deep: f64 = els[10..].iter().map(|&n| signed(n, alpha, fault).abs()).sum();
            if deep > tb.bound {
                ok = false;
                detail = format!("delta={delta} alpha={alpha}: partial {deep} > bound {}", tb.bound);
            }
        }
    }
    checks.push(Check {
        name: "tail soundness",
        pass: ok,
        detail,
    });

    // greedy against the exhaustive oracle on a corridor prefix
    let els = corridor_prefix(sieve, 20)?;
    let mut ok = true;
    let mut detail = String::from("20-element prefix, alpha in {0.5, 1}, 16 targets");
    for alpha in [0.5, 1.0] {
        let mags: Vec<f64> = els.iter().map(|&n| signed(n, alpha, fault).abs()).collect();
        let tol = mags[mags.len() - 1];
        let total: f64 = mags.iter().sum();
        for j in 0..16 {
            let x = total * j as f64 / 15.0;
            let oracle = brute_subset_oracle(&mags, x)?.residual;
            let greedy = match greedy_select(&els, alpha, x, tol) {
                Ok((chosen, _)) => (phi_finite(&chosen, alpha).mid().abs() - x).abs(),
                Err(_) => f64::INFINITY,
            };
            if greedy > oracle + tol + 1e-12 {
                ok = false;
                detail = format!("alpha={alpha} x={x}: greedy {greedy} vs oracle {oracle}");
            }
        }
    }
    checks.push(Check {
        name: "greedy vs oracle",
        pass: ok,
        detail,
    });
    Ok(checks)
}

fn cmd_selftest(sieve: &Sieve, fault: Option<Fault>, out: &mut dyn Write) -> CmdResult {
    let checks = selftest(sieve, fault)?;
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(out, "{} of {} checks passed", checks.len() - failed, checks.len())?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("achieve").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn duplicate_exponents_exit_one() {
        let (code, _, err) = run_args(&["solve", "--alphas", "0.5,0.5", "--target", "1,1"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("pairwise distinct"), "{err}");
    }

    #[test]
    fn zero_target_is_certified() {
        let dir = tempfile::tempdir().unwrap();
        let idx = dir.path().join("i.jsonl");
        let (code, out, _) = run_args(&[
            "solve",
            "--alphas",
            "0.5",
            "--target",
            "0",
            "--indices",
            idx.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("\"certified\""));
        assert_eq!(fs::read_to_string(idx).unwrap(), "");
    }

    #[test]
    fn config_file_and_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(
            &cfg,
            "# pilot\nalphas = 1\ntarget = 0.2\ntol = 0.5\nmax_index = 100000\n",
        )
        .unwrap();
        let a = SolveArgs::try_from_cfg(&cfg, Some(1e-4));
        let inputs = solve_inputs(&a).ok().unwrap();
        assert_eq!(inputs.alphas, vec![1.0]);
        assert_eq!(inputs.cfg.tol, 1e-4);
        assert_eq!(inputs.cfg.max_index, 100000);
        fs::write(&cfg, "alpha = 1\n").unwrap();
        assert!(solve_inputs(&a).is_err());
    }

    impl SolveArgs {
        fn try_from_cfg(cfg: &Path, tol: Option<f64>) -> Self {
            SolveArgs {
                alphas: None,
                coeffs: None,
                target: None,
                tol,
                max_index: None,
                precision: None,
                budget_split: None,
                refinement_rounds: None,
                stage_cap: None,
                config: Some(cfg.to_path_buf()),
                out: None,
                indices: None,
                meta: None,
            }
        }
    }

    #[test]
    fn jsonl_field_order() {
        let mut buf = Vec::new();
        write_index_jsonl(&mut buf, &[1, 2], &[1.0], &[1.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "{\"n\":1,\"terms\":[1.0],\"partial\":[1.0]}\n{\"n\":2,\"terms\":[-0.5],\"partial\":[0.5]}\n"
        );
    }

    #[test]
    fn primes_split_and_scan() {
        let (code, out, _) = run_args(&["primes", "--split", "3"]);
        assert_eq!(code, EXIT_OK);
        let markers: Vec<u64> = out
            .lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["marker"]
                    .as_u64()
                    .unwrap()
            })
            .collect();
        assert_eq!(markers, vec![3, 5, 7]);
        let (code, out, _) = run_args(&["primes", "--gap-scan", "0.05,0.2,100,100000"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("\"failure\":\"none\""));
        let (code, _, _) = run_args(&["primes"]);
        assert_eq!(code, EXIT_INPUT);
    }

    #[test]
    fn oracle_needs_a_pool() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pool.txt");
        fs::write(&p, "").unwrap();
        let (code, _, _) = run_args(&["oracle", "--pool-file", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_INPUT);
        fs::write(&p, "0.5\n0.25\n0.125\n").unwrap();
        let (code, out, _) = run_args(&["oracle", "--pool-file", p.to_str().unwrap(), "--target", "0.625"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("\"subset\":[0,2]"), "{out}");
    }

    #[test]
    fn selftest_passes_and_catches_sign_flip() {
        let (code, out, _) = run_args(&["selftest"]);
        assert_eq!(code, EXIT_OK, "{out}");
        let (code, out, _) = run_args(&["selftest", "--inject-fault", "sign-flip"]);
        assert_eq!(code, EXIT_VERIFY, "{out}");
    }
}
