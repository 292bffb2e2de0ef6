//! Time sequences and the explicit lower-bound constructions for weighted
//! dyadic maximal averages.
//!
//! Everything here manufactures concrete witnesses: a rotation parameter α, a
//! step function f, and a weight w such that sup_t w_t·A_t f provably beats a
//! target weak-norm bound.  The common engine is the nested-interval residue
//! solver: given a sequence b_1 < b_2 < … with b_{i+1}/b_i > 2K and residue
//! targets r_i, it produces a rational α with
//!
//! ```text
//!   α·b_i mod 1 ∈ [r_i/K, (r_i+1)/K)   for every i,
//! ```
//!
//! by shrinking an interval of length 1/(K·b_i) at step i — the lacunarity
//! gap 2K is exactly what lets a full target subinterval survive each step.
//! On top of the solver sit two builders that pin orbit points inside the
//! support of f for entire dyadic blocks (one tuned for the weak (1,1) norm,
//! one for weak (p,p)), a base-k digit construction that infects circle
//! intervals block by block, and an integer sumset family whose dyadic
//! averages are large on disjoint sets.  All verification is exact: rational
//! endpoints, integer residue walks, and step-function measures.

use crate::dynsys::{average, AverageMode, DigitReal, MaximalEntry, MaximalReport, SystemModel};
use crate::measure::{pointwise_max, scale_add, weak1_norm, Domain, PowVal, StepFunction};
use crate::precise::{exp_rat, ln_u64, Ctx, Iv};
use crate::rat::{
    ceil_int, decimal_string, floor_int, pow_rat, rat, rat_int, serde_rat, Rat,
};
use crate::weights::WeightSequence;
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// Failures of a builder's stated preconditions or internal invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstructionError {
    /// Consecutive solver terms with ratio ≤ 2K.
    Lacunarity { index: usize, detail: String },
    /// The nested-interval step found no full subinterval (cannot happen when
    /// the lacunarity certificate holds; reported rather than trusted).
    Containment { index: usize },
    /// The weight never accumulates enough mass at this horizon.
    HorizonTooSmall { best_sum: Rat },
    /// Greedy subsequence refinement ran past its gap window.
    GapWindowExceeded { at_index: usize, window: usize },
    /// A desk-scale size guard tripped.
    SizeGuard { detail: String },
    /// The index set contains two consecutive integers.
    ConsecutiveIndices { a: u32, b: u32 },
    /// The requested combination is outside this builder's scope.
    Unsupported(String),
}

impl fmt::Display for ConstructionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstructionError::Lacunarity { index, detail } => {
                write!(f, "lacunarity violated at term {index}: {detail}")
            }
            ConstructionError::Containment { index } => {
                write!(f, "nested-interval containment failed at term {index}")
            }
            ConstructionError::HorizonTooSmall { best_sum } => {
                write!(f, "horizon too small: best qualifying sum {best_sum}")
            }
            ConstructionError::GapWindowExceeded { at_index, window } => {
                write!(f, "no acceptable term within {window} steps of index {at_index}")
            }
            ConstructionError::SizeGuard { detail } => write!(f, "size guard: {detail}"),
            ConstructionError::ConsecutiveIndices { a, b } => {
                write!(f, "index set contains consecutive integers {a}, {b}")
            }
            ConstructionError::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl std::error::Error for ConstructionError {}

// ---------------------------------------------------------------------------
// Time sequences
// ---------------------------------------------------------------------------

/// One term of a time sequence: an exact integer, or √radicand kept symbolic
/// with its integer square root for exact comparisons.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Int(BigInt),
    Sqrt { radicand: BigInt, isqrt: BigInt },
}

impl Term {
    /// The square of the term, always an exact rational.
    pub fn square(&self) -> BigInt {
        match self {
            Term::Int(n) => n * n,
            Term::Sqrt { radicand, .. } => radicand.clone(),
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Term::Int(n) => Some(n),
            Term::Sqrt { .. } => None,
        }
    }

    /// (self/other)², exact.
    pub fn ratio_squared(&self, other: &Term) -> Rat {
        Rat::new(self.square(), other.square())
    }
}

mod serde_bigint_vec {
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::str::FromStr;

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|n| n.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|t| BigInt::from_str(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeqKind {
    /// a_n = base^n.
    Power { base: u64 },
    /// a_n = n!.
    Factorial,
    /// a_n = √n.
    SqrtAll,
    /// √s over squarefree s ≥ 2 in increasing order.
    SqrtSquarefree,
    /// a_n = ⌊ln n⌋ (nondecreasing).
    FloorLog,
    Explicit {
        #[serde(with = "serde_bigint_vec")]
        terms: Vec<BigInt>,
    },
}

/// A time sequence with a cache of materialized terms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeSequence {
    pub kind: SeqKind,
    #[serde(skip)]
    cache: Vec<Term>,
}

impl TimeSequence {
    pub fn new(kind: SeqKind) -> TimeSequence {
        TimeSequence { kind, cache: Vec::new() }
    }

    /// First n terms, exact (integers, or symbolic square roots).
    pub fn materialize(&mut self, n: usize) -> &[Term] {
        assert!(n >= 1);
        while self.cache.len() < n {
            let next = self.cache.len() + 1;
            let term = match &self.kind {
                SeqKind::Power { base } => {
                    assert!(*base >= 2, "powers of a base below 2 do not increase");
                    Term::Int(BigInt::from(*base).pow(next as u32))
                }
                SeqKind::Factorial => {
                    let prev = match self.cache.last() {
                        Some(Term::Int(p)) => p.clone(),
                        _ => BigInt::one(),
                    };
                    Term::Int(prev * BigInt::from(next))
                }
                SeqKind::SqrtAll => {
                    let r = BigInt::from(next);
                    let s = r.sqrt();
                    Term::Sqrt { radicand: r, isqrt: s }
                }
                SeqKind::SqrtSquarefree => {
                    let mut cand = match self.cache.last() {
                        Some(Term::Sqrt { radicand, .. }) => radicand.to_u64().unwrap() + 1,
                        _ => 2,
                    };
                    while !is_squarefree(cand) {
                        cand += 1;
                    }
                    let r = BigInt::from(cand);
                    let s = r.sqrt();
                    Term::Sqrt { radicand: r, isqrt: s }
                }
                SeqKind::FloorLog => Term::Int(BigInt::from(floor_ln(next as u64))),
                SeqKind::Explicit { terms } => {
                    assert!(
                        next <= terms.len(),
                        "explicit sequence has {} terms, {next} requested",
                        terms.len()
                    );
                    Term::Int(terms[next - 1].clone())
                }
            };
            self.cache.push(term);
        }
        &self.cache[..n]
    }

    /// Integer prefixes for solver-backed builders; errors on symbolic kinds.
    pub fn integer_prefix(&mut self, n: usize) -> Result<Vec<BigInt>, ConstructionError> {
        let terms = self.materialize(n).to_vec();
        terms
            .iter()
            .map(|t| {
                t.as_int().cloned().ok_or_else(|| {
                    ConstructionError::Unsupported(
                        "symbolic square-root terms have no integer value".into(),
                    )
                })
            })
            .collect()
    }
}

fn is_squarefree(n: u64) -> bool {
    let mut m = n;
    let mut d = 2u64;
    while d * d <= m {
        if m % d == 0 {
            m /= d;
            if m % d == 0 {
                return false;
            }
        }
        d += 1;
    }
    true
}

/// ⌊ln n⌋ for n ≥ 1, decided by certified comparisons against e^k (never a
/// tie, since e^k is irrational for k ≥ 1).
fn floor_ln(n: u64) -> u64 {
    assert!(n >= 1);
    if n == 1 {
        return 0;
    }
    let target = rat_int(n as i64);
    let mut k = 0u64;
    loop {
        let mut bits = 64;
        loop {
            let ek = exp_rat(&rat_int((k + 1) as i64), Ctx { bits });
            if target < ek.lo {
                return k;
            }
            if target > ek.hi {
                break;
            }
            bits *= 2;
            assert!(bits <= 4096, "⌊ln n⌋ comparison failed to resolve");
        }
        k += 1;
    }
}

// ---------------------------------------------------------------------------
// Lacunarity diagnostics
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Growing,
    Failing,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LacunarityEntry {
    pub n: usize,
    /// (a_{n+1}/a_n)/n^ε, certified.
    pub over_power: PowVal,
    /// (a_{n+1}/a_n)/(ln n)^ε, certified (absent at n = 1 where ln n = 0).
    pub over_log: Option<PowVal>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LacunarityProfile {
    pub entries: Vec<LacunarityEntry>,
    pub power_trend: Trend,
    pub log_trend: Trend,
}

fn iv_pow(base: &Iv, expo: &Rat, ctx: Ctx) -> Iv {
    // base > 0; monotone in the base for positive exponents
    assert!(base.lo.is_positive() && expo.is_positive());
    let lo = crate::precise::pow_rr(&base.lo, expo, ctx).lo;
    let hi = crate::precise::pow_rr(&base.hi, expo, ctx).hi;
    Iv::new(lo, hi)
}

fn term_ratio_iv(next: &Term, cur: &Term, ctx: Ctx) -> Iv {
    match (next, cur) {
        (Term::Int(a), Term::Int(b)) => Iv::point(Rat::new(a.clone(), b.clone())),
        _ => {
            // √(next²/cur²), certified
            let sq = Rat::new(next.square(), cur.square());
            crate::precise::pow_rr(&sq, &rat(1, 2), ctx)
        }
    }
}

fn classify_trend(first: &Iv, last: &Iv) -> Trend {
    if last.lo > first.hi.clone() + first.hi.clone() {
        Trend::Growing
    } else if last.hi <= first.lo {
        Trend::Failing
    } else {
        Trend::Inconclusive
    }
}

/// Finite-horizon lacunarity profile: the ratios a_{n+1}/a_n measured against
/// n^ε and (ln n)^ε, with a coarse monotone-trend verdict for each gauge
/// (last entry at least double the first → growing; at most the first →
/// failing).
pub fn lacunarity_profile(seq: &mut TimeSequence, eps: &Rat, n: usize) -> LacunarityProfile {
    assert!(n >= 3);
    assert!(eps.is_positive());
    let ctx = Ctx::default();
    let terms = seq.materialize(n).to_vec();
    let mut entries = Vec::with_capacity(n - 1);
    let mut pow_first: Option<Iv> = None;
    let mut pow_last: Option<Iv> = None;
    let mut log_first: Option<Iv> = None;
    let mut log_last: Option<Iv> = None;
    for i in 0..n - 1 {
        let idx = i + 1; // n in the formulas, 1-based
        let ratio = term_ratio_iv(&terms[i + 1], &terms[i], ctx);
        let denom_pow = crate::precise::pow_rr(&rat_int(idx as i64), eps, ctx);
        let over_power = ratio.mul(&denom_pow.recip());
        let over_log = if idx >= 2 {
            let ln_n = ln_u64(idx as u64, ctx);
            let denom_log = iv_pow(&ln_n, eps, ctx);
            Some(ratio.mul(&denom_log.recip()))
        } else {
            None
        };
        if pow_first.is_none() {
            pow_first = Some(over_power.clone());
        }
        pow_last = Some(over_power.clone());
        if let Some(ol) = &over_log {
            if log_first.is_none() {
                log_first = Some(ol.clone());
            }
            log_last = Some(ol.clone());
        }
        entries.push(LacunarityEntry {
            n: idx,
            over_power: PowVal::from_iv(over_power),
            over_log: over_log.map(PowVal::from_iv),
        });
    }
    let power_trend = classify_trend(&pow_first.unwrap(), &pow_last.unwrap());
    let log_trend = classify_trend(&log_first.unwrap(), &log_last.unwrap());
    LacunarityProfile { entries, power_trend, log_trend }
}

/// Acceptance test for greedy refinement: the ratio a kept term must beat,
/// as a function of the count m of terms already kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthTest {
    /// target(m) = m^exponent.
    IndexPower { exponent: u32 },
    /// Constant target ratio.
    RatioAtLeast {
        #[serde(with = "serde_rat")]
        rho: Rat,
    },
}

impl GrowthTest {
    fn target(&self, m: usize) -> Rat {
        match self {
            GrowthTest::IndexPower { exponent } => pow_rat(&rat_int(m as i64), *exponent as i64),
            GrowthTest::RatioAtLeast { rho } => rho.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinedSubsequence {
    /// 0-based indices kept from the original sequence.
    pub kept_indices: Vec<usize>,
    pub max_gap: usize,
}

/// Greedy bounded-gap refinement: scan the sequence, keeping a term as soon
/// as its ratio to the last kept term beats target(m) (m = number already
/// kept).  Fails when no acceptable term appears within `window` steps.
pub fn refine_bounded_gaps(
    seq: &mut TimeSequence,
    test: &GrowthTest,
    n: usize,
    window: usize,
) -> Result<RefinedSubsequence, ConstructionError> {
    assert!(n >= 2 && window >= 1);
    let terms = seq.materialize(n).to_vec();
    for w in terms.windows(2) {
        assert!(
            w[1].square() > w[0].square(),
            "gap refinement needs a strictly increasing sequence"
        );
    }
    let mut kept = vec![0usize];
    let mut max_gap = 0usize;
    let mut last = 0usize;
    while last + 1 < n {
        let m = kept.len();
        let target_sq = {
            let t = test.target(m);
            &t * &t
        };
        let mut found = None;
        for i in last + 1..n.min(last + 1 + window) {
            if terms[i].ratio_squared(&terms[last]) > target_sq {
                found = Some(i);
                break;
            }
        }
        match found {
            Some(i) => {
                max_gap = max_gap.max(i - last);
                kept.push(i);
                last = i;
            }
            None => {
                if last + window >= n {
                    break; // horizon exhausted, not a window failure
                }
                return Err(ConstructionError::GapWindowExceeded { at_index: last, window });
            }
        }
    }
    Ok(RefinedSubsequence { kept_indices: kept, max_gap })
}

// ---------------------------------------------------------------------------
// Residue solver
// ---------------------------------------------------------------------------

/// Residue placement problem: find α with α·b_i mod 1 ∈ [r_i/K, (r_i+1)/K).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidueProblem {
    pub k_mod: u64,
    #[serde(with = "crate::rat::serde_rat_vec")]
    pub terms: Vec<Rat>,
    pub targets: Vec<u64>,
}

impl ResidueProblem {
    pub fn new(k_mod: u64, terms: Vec<Rat>, targets: Vec<u64>) -> Result<ResidueProblem, ConstructionError> {
        assert!(k_mod >= 1);
        assert!(!terms.is_empty() && terms.len() == targets.len());
        assert!(terms[0].is_positive());
        assert!(targets.iter().all(|&r| r < k_mod));
        let two_k = rat_int(2 * k_mod as i64);
        for i in 1..terms.len() {
            let ratio = &terms[i] / &terms[i - 1];
            if ratio <= two_k {
                return Err(ConstructionError::Lacunarity {
                    index: i,
                    detail: format!("ratio {ratio} ≤ 2K = {two_k}"),
                });
            }
        }
        Ok(ResidueProblem { k_mod, terms, targets })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidueSolution {
    #[serde(with = "serde_rat")]
    pub lo: Rat,
    #[serde(with = "serde_rat")]
    pub hi: Rat,
    /// Interval midpoint, the canonical witness.
    #[serde(with = "serde_rat")]
    pub alpha: Rat,
    /// α·b_i mod 1 for each i, all certified inside their target windows.
    #[serde(with = "crate::rat::serde_rat_vec")]
    pub residues: Vec<Rat>,
}

fn frac(r: &Rat) -> Rat {
    r - Rat::from_integer(floor_int(r))
}

/// Nested-interval solution of a residue problem.  Maintains the invariant
/// that every α in [lo, hi) places α·b_i mod 1 in its window for all handled
/// i; each step selects the leftmost full window-subinterval of the current
/// interval, whose existence the lacunarity gap guarantees (and which is
/// re-verified, never assumed).
pub fn solve_residues(prob: &ResidueProblem) -> Result<ResidueSolution, ConstructionError> {
    let k = rat_int(prob.k_mod as i64);
    let mut lo = rat(prob.targets[0] as i64, 1) / (&k * &prob.terms[0]);
    let mut hi = &lo + Rat::one() / (&k * &prob.terms[0]);
    for i in 1..prob.terms.len() {
        let b = &prob.terms[i];
        let r_over_k = rat(prob.targets[i] as i64, 1) / &k;
        // leftmost m with (m + r/K)/b ≥ lo
        let m = ceil_int(&(&lo * b - &r_over_k));
        let cand_lo = (Rat::from_integer(m) + &r_over_k) / b;
        let cand_hi = &cand_lo + Rat::one() / (&k * b);
        if cand_hi > hi {
            return Err(ConstructionError::Containment { index: i });
        }
        lo = cand_lo;
        hi = cand_hi;
    }
    let alpha = (&lo + &hi) / rat_int(2);
    let mut residues = Vec::with_capacity(prob.terms.len());
    for (i, b) in prob.terms.iter().enumerate() {
        let theta = frac(&(&alpha * b));
        let wlo = rat(prob.targets[i] as i64, 1) / &k;
        let whi = rat(prob.targets[i] as i64 + 1, 1) / &k;
        assert!(
            theta >= wlo && theta < whi,
            "residue certificate failed at term {i}: {theta} outside [{wlo}, {whi})"
        );
        residues.push(theta);
    }
    Ok(ResidueSolution { lo, hi, alpha, residues })
}

/// Prime factors of a u64 by trial division (complete for the small bases
/// used by the builders).
fn small_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// num/den with the common factors among `primes` removed; valid only when
/// den has no prime factors outside `primes`, which makes the result
/// canonical without a full gcd.
fn reduced_over(mut num: BigInt, mut den: BigInt, primes: &[u64]) -> Rat {
    for &p in primes {
        let pb = BigInt::from(p);
        while (&num % &pb).is_zero() && (&den % &pb).is_zero() {
            num /= &pb;
            den /= &pb;
        }
    }
    Rat::new_raw(num, den)
}

/// Solver output for constraints on a geometric sequence b_n = base^n; the
/// intermediate intervals are kept as integers over K·base^n so each step is
/// linear-time (no rational reductions on huge denominators).
struct ChainSolution {
    alpha: Rat,
    // The final nested interval; only inspected by tests.
    #[cfg_attr(not(test), allow(dead_code))]
    lo: Rat,
    #[cfg_attr(not(test), allow(dead_code))]
    hi: Rat,
}

/// Nested-interval solver specialized to terms base^n at the given exponents
/// (strictly increasing).  Identical output to [`solve_residues`] on the
/// corresponding problem, but linear in the constraint count.  Containment is
/// verified at every step, and the full residue walk re-checks every window
/// at the returned α in integer arithmetic.
fn solve_chain(
    base: u64,
    k_mod: u64,
    constraints: &[(u64, u64)],
) -> Result<ChainSolution, ConstructionError> {
    assert!(base >= 2 && k_mod >= 1 && !constraints.is_empty());
    assert!(base <= 1_000_000, "chain solver requires a small base");
    if base <= 2 * k_mod {
        return Err(ConstructionError::Lacunarity {
            index: 1,
            detail: format!("base {base} ≤ 2K = {}", 2 * k_mod),
        });
    }
    for w in constraints.windows(2) {
        assert!(w[1].0 > w[0].0, "chain exponents must increase");
    }
    assert!(constraints.iter().all(|&(_, r)| r < k_mod));
    let kb = BigInt::from(k_mod);
    let base_b = BigInt::from(base);
    // invariant: current interval = [a, a+1]/(K·base^{n_i})
    let mut a = BigInt::from(constraints[0].1);
    for (i, w) in constraints.windows(2).enumerate() {
        let d = base_b.pow((w[1].0 - w[0].0) as u32);
        let scaled = &a * &d;
        let bound = (&a + 1) * &d;
        let r = BigInt::from(w[1].1);
        // leftmost m·K + r ≥ scaled
        let m = crate::precise::dceil(&(&scaled - &r), &kb);
        let next = m * &kb + r;
        if &next + 1 > bound {
            return Err(ConstructionError::Containment { index: i + 1 });
        }
        a = next;
    }
    let last_n = constraints.last().unwrap().0;
    verify_chain_windows(base, k_mod, constraints, &(&a * 2 + 1), 2 * k_mod, last_n)?;
    let half_den = BigInt::from(k_mod) * base_b.pow(last_n as u32);
    let mut primes = small_prime_factors(2 * k_mod);
    primes.extend(small_prime_factors(base));
    primes.sort_unstable();
    primes.dedup();
    let alpha = reduced_over(&a * 2 + 1, &half_den * 2, &primes);
    let lo = reduced_over(a.clone(), half_den.clone(), &primes);
    let hi = reduced_over(&a + 1, half_den, &primes);
    Ok(ChainSolution { alpha, lo, hi })
}

/// Checks num/(scale·base^{last_n})·base^n mod 1 ∈ [r/K, (r+1)/K) for every
/// constraint by an incremental modular walk — one small multiplication and
/// reduction per step.
fn verify_chain_windows(
    base: u64,
    k_mod: u64,
    constraints: &[(u64, u64)],
    num: &BigInt,
    scale: u64,
    last_n: u64,
) -> Result<(), ConstructionError> {
    let base_b = BigInt::from(base);
    let den = BigInt::from(scale) * base_b.pow(last_n as u32);
    let kb = BigInt::from(k_mod);
    let mut residual = (num * base_b.modpow(&BigInt::from(constraints[0].0), &den)) % &den;
    let mut prev_n = constraints[0].0;
    for (i, &(n, r)) in constraints.iter().enumerate() {
        if n > prev_n {
            residual = (residual * base_b.pow((n - prev_n) as u32)) % &den;
            prev_n = n;
        }
        // r/K ≤ residual/den < (r+1)/K, cross-multiplied
        let lhs = &kb * &residual;
        let ok = BigInt::from(r) * &den <= lhs && lhs < BigInt::from(r + 1) * &den;
        if !ok {
            return Err(ConstructionError::Containment { index: i });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Construction plans
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfectedClass {
    /// Canonical (lexicographically least rotation) representative word.
    pub rep: Vec<u32>,
    /// Dyadic time 2^t at which the class's intervals became infected.
    pub t: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum PlanBook {
    WeakL1 {
        m_goal: u64,
        n_sel: u64,
        k_mod: u64,
        n_min: u64,
        u_levels: Vec<u32>,
        /// Residue classes per level t ∈ U (round-robin targets inside the
        /// dyadic block of t).
        classes: Vec<(u32, Vec<u64>)>,
        seq: SeqKind,
        #[serde(with = "serde_rat")]
        alpha: Rat,
    },
    WeakLp {
        j_set: Vec<u32>,
        #[serde(with = "serde_rat")]
        p: Rat,
        n0: u64,
        k_mod: u64,
        j_prime: Vec<u32>,
        seq: SeqKind,
        #[serde(with = "serde_rat")]
        alpha: Rat,
        constant_branch: bool,
    },
    Infection {
        k: u32,
        y: u32,
        t_horizon: u32,
        n_zero: u32,
        alpha: DigitReal,
        infected: Vec<InfectedClass>,
        saturated: bool,
    },
}

/// A fully materialized counterexample: the measure-preserving system, the
/// function, the weight, the bookkeeping needed to reproduce it, and the
/// exact bound it certifies.  Replaying the plan re-runs all verification and
/// must reproduce `claimed_bound` bit for bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstructionPlan {
    pub name: String,
    pub system: SystemModel,
    pub f: StepFunction,
    pub w: Option<WeightSequence>,
    pub book: PlanBook,
    #[serde(with = "serde_rat")]
    pub claimed_bound: Rat,
}

fn unit_circle() -> Domain {
    Domain::circle(Rat::one())
}

// ---------------------------------------------------------------------------
// Weak (1,1) builder
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakL1Report {
    pub n_sel: u64,
    pub k_mod: u64,
    pub u_levels: Vec<u32>,
    #[serde(with = "serde_rat")]
    pub u_sum: Rat,
    /// μ{sup_{t∈U} w_t·A_t f ≥ 1} (block-mean averages), exactly 1.
    #[serde(with = "serde_rat")]
    pub exceedance_measure: Rat,
    #[serde(with = "serde_rat")]
    pub f_l1: Rat,
    /// ‖sup w_t A_t f‖_{1,∞}/‖f‖₁, the certified weak (1,1) constant.
    #[serde(with = "serde_rat")]
    pub weak11_ratio: Rat,
}

/// Builds a rotation witness violating the weak (1,1) maximal bound at scale
/// M/4: selects the first N > n_min whose window sum
/// Σ_t [1/N < w_t < 2^t/(4N)]·w_t exceeds 3M, sets K = NM, spreads ⌊N·w_t⌋
/// residue classes per qualifying level to cover all residues mod K, and
/// solves for α so that each class's share of the dyadic block lands f's
/// support on the matching residue interval.  The resulting f = 2N·1_[0,2/K)
/// has ‖f‖₁ = 4/M exactly, while sup_t w_t·A_t f ≥ 1 on the whole circle.
pub fn build_weak_l1(
    w: &WeightSequence,
    m_goal: u64,
    seq: &mut TimeSequence,
    n_min: u64,
) -> Result<(ConstructionPlan, WeakL1Report), ConstructionError> {
    assert!(m_goal >= 1);
    let horizon = w.horizon;
    assert!(horizon >= 2);
    let three_m = rat_int(3 * m_goal as i64);
    let mut best_sum = Rat::zero();
    let mut chosen: Option<u64> = None;
    let n_cap = 1u64 << (horizon.min(40) - 1);
    for n in (n_min + 1)..=n_cap {
        let inv_n = rat(1, n as i64);
        let mut sum = Rat::zero();
        for t in 1..=horizon {
            let wt = w.at(t);
            let upper = pow_rat(&rat_int(2), t as i64) / rat_int(4 * n as i64);
            if *wt > inv_n && *wt < upper {
                sum += wt;
            }
        }
        if sum > best_sum {
            best_sum = sum.clone();
        }
        if sum > three_m {
            chosen = Some(n);
            break;
        }
    }
    let n_sel = chosen.ok_or(ConstructionError::HorizonTooSmall { best_sum })?;
    let k_mod = n_sel * m_goal;
    let inv_n = rat(1, n_sel as i64);

    // U: qualifying levels with 2^t > 2N
    let mut u_levels = Vec::new();
    let mut u_sum = Rat::zero();
    for t in 1..=horizon {
        if (1u128 << t) <= 2 * n_sel as u128 {
            continue;
        }
        let wt = w.at(t);
        let upper = pow_rat(&rat_int(2), t as i64) / rat_int(4 * n_sel as i64);
        if *wt > inv_n && *wt < upper {
            u_levels.push(t as u32);
            u_sum += wt;
        }
    }
    assert!(
        u_sum > rat_int(2 * m_goal as i64),
        "deep-level window sum {u_sum} failed to exceed 2M"
    );

    // residue classes per level, assigned cyclically so the union covers
    // all residues mod K
    let mut classes: Vec<(u32, Vec<u64>)> = Vec::new();
    let mut cursor = 0u64;
    let mut assigned = 0u64;
    for &t in &u_levels {
        let count_rat = rat_int(n_sel as i64) * w.at(t as usize);
        let count = floor_int(&count_rat).to_u64().unwrap().min(k_mod).max(1);
        let rs: Vec<u64> = (0..count).map(|i| (cursor + i) % k_mod).collect();
        cursor = (cursor + count) % k_mod;
        assigned += count;
        classes.push((t, rs));
    }
    assert!(assigned >= k_mod, "residue classes fail to cover all of Z/K");

    // residue targets per constrained time index (round-robin inside each
    // dyadic block)
    let mut constrained: Vec<(usize, u64)> = Vec::new();
    for (t, rs) in &classes {
        let lo = 1usize << (*t as usize - 1);
        let hi = 1usize << (*t as usize);
        for n in (lo + 1)..=hi {
            constrained.push((n, rs[(n - lo - 1) % rs.len()]));
        }
    }
    constrained.sort_unstable();
    let max_n = constrained.last().unwrap().0;
    let terms_int = seq.integer_prefix(max_n)?;
    let prob = ResidueProblem::new(
        k_mod,
        constrained
            .iter()
            .map(|&(n, _)| Rat::from_integer(terms_int[n - 1].clone()))
            .collect(),
        constrained.iter().map(|&(_, r)| r).collect(),
    )?;
    let sol = solve_residues(&prob)?;
    let alpha = sol.alpha.clone();

    // f = 2N·1_[0, 2/K) on the unit circle; ‖f‖₁ = 4/M exactly
    let f = StepFunction::indicator(
        unit_circle(),
        &Rat::zero(),
        &rat(2, k_mod as i64),
        rat_int(2 * n_sel as i64),
    );
    let f_l1 = f.mass();
    assert_eq!(f_l1, rat(4, m_goal as i64));

    let system = SystemModel::Flow { alpha_step: alpha.clone(), domain: unit_circle() };
    let times: Vec<BigInt> = terms_int.clone();
    let (exceedance_measure, weak11_ratio) =
        weak_l1_verify(&system, &f, &times, w, &u_levels, &f_l1);
    assert_eq!(exceedance_measure, Rat::one(), "infected residue intervals must cover the circle");
    assert!(
        weak11_ratio > rat(m_goal as i64, 4),
        "certified constant {weak11_ratio} failed to exceed M/4"
    );

    let report = WeakL1Report {
        n_sel,
        k_mod,
        u_levels: u_levels.clone(),
        u_sum,
        exceedance_measure,
        f_l1,
        weak11_ratio: weak11_ratio.clone(),
    };
    let plan = ConstructionPlan {
        name: format!("weak-l1-m{m_goal}"),
        system,
        f,
        w: Some(w.clone()),
        book: PlanBook::WeakL1 {
            m_goal,
            n_sel,
            k_mod,
            n_min,
            u_levels,
            classes,
            seq: seq.kind.clone(),
            alpha,
        },
        claimed_bound: weak11_ratio,
    };
    Ok((plan, report))
}

/// Exact profile sup_{t∈U} w_t·A_t^{block} f and its two certified facts:
/// the measure of {profile ≥ 1} and the weak (1,1) ratio.
fn weak_l1_verify(
    system: &SystemModel,
    f: &StepFunction,
    times: &[BigInt],
    w: &WeightSequence,
    u_levels: &[u32],
    f_l1: &Rat,
) -> (Rat, Rat) {
    let zero = StepFunction::constant(f.domain.clone(), Rat::zero());
    let mut parts = Vec::with_capacity(u_levels.len());
    for &t in u_levels {
        let avg = average(system, f, times, t, AverageMode::Block).expect("in-range level");
        parts.push(scale_add(w.at(t as usize), &avg, &Rat::zero(), &zero));
    }
    let profile = pointwise_max(&parts);
    let exceedance = profile.measure_above(&Rat::one(), false);
    let (weak, _) = weak1_norm(&profile);
    (exceedance, weak / f_l1)
}

// ---------------------------------------------------------------------------
// Weak (p,p) builder
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakLpReport {
    pub k_mod: u64,
    pub j_prime: Vec<u32>,
    pub constant_branch: bool,
    /// (‖f‖_p^p)^b for p = a/b, exact.
    #[serde(with = "serde_rat")]
    pub f_pow_b: Rat,
    /// (ratio^p)^b where ratio = ‖max_j A_j f‖_{p,∞}/‖f‖_p is certified from
    /// the full-measure exceedance at level 1, exact.
    #[serde(with = "serde_rat")]
    pub ratio_pow_b: Rat,
    /// (2^{−1−2/p}·|J|^{1/p})^{pb}, the target in the same power scale.
    #[serde(with = "serde_rat")]
    pub target_pow_b: Rat,
    /// Whether the full step-function profile was also materialized and
    /// cross-checked (done when Σ_{j∈J} 2^j is desk-scale).
    pub profile_checked: bool,
}

/// Builds a flow witness with ‖max_{j∈J} A_j f‖_{p,∞} ≥ 2^{−1−2/p}|J|^{1/p}‖f‖_p.
///
/// For |J| ≤ 2n₀ a constant f suffices.  Otherwise |J| must be even: with
/// K = |J|/2, the K smallest elements of J that are ≥ |J|/2 each get a full
/// dyadic block of residue constraints (block of j_ℓ ↦ class ℓ−1 mod K), and
/// f = 2·1_[0,2/K) on the unit circle gives ‖f‖_p = 2^{1+1/p}K^{−1/p} and
/// max_j A_j f ≥ 1 everywhere.  All comparisons run in the rational power
/// scale (p = a/b compared via b-th powers of p-th powers).
pub fn build_weak_lp(
    j_set: &[u32],
    p: &Rat,
    n0: u64,
    seq: &TimeSequence,
) -> Result<(ConstructionPlan, WeakLpReport), ConstructionError> {
    assert!(*p > Rat::one(), "the weak (p,p) builder needs p > 1");
    assert!(n0 >= 1);
    let mut j_sorted: Vec<u32> = j_set.to_vec();
    j_sorted.sort_unstable();
    j_sorted.dedup();
    assert_eq!(j_sorted.len(), j_set.len(), "index set has duplicates");
    assert!(!j_sorted.is_empty());
    assert!(j_sorted[0] >= 1, "dyadic indices must be ≥ 1");
    let size = j_sorted.len() as u64;
    let a = p.numer().to_i64().unwrap();
    let b = p.denom().to_i64().unwrap();

    if size <= 2 * n0 {
        // constant branch: f ≡ 1, every average ≡ 1, ratio 1 against the
        // target (2n₀)^{−1/p}|J|^{1/p} ≤ 1
        let f = StepFunction::constant(unit_circle(), Rat::one());
        let ratio_pow_b = Rat::one();
        let target_pow_b = pow_rat(&rat_int(size as i64), b) / pow_rat(&rat_int(2 * n0 as i64), b);
        assert!(ratio_pow_b >= target_pow_b);
        let report = WeakLpReport {
            k_mod: 0,
            j_prime: Vec::new(),
            constant_branch: true,
            f_pow_b: Rat::one(),
            ratio_pow_b: ratio_pow_b.clone(),
            target_pow_b,
            profile_checked: false,
        };
        let plan = ConstructionPlan {
            name: format!("weak-lp-j{size}-const"),
            system: SystemModel::Flow { alpha_step: Rat::zero(), domain: unit_circle() },
            f,
            w: None,
            book: PlanBook::WeakLp {
                j_set: j_sorted,
                p: p.clone(),
                n0,
                k_mod: 0,
                j_prime: Vec::new(),
                seq: seq.kind.clone(),
                alpha: Rat::zero(),
                constant_branch: true,
            },
            claimed_bound: ratio_pow_b,
        };
        return Ok((plan, report));
    }

    if size % 2 != 0 {
        return Err(ConstructionError::Unsupported(format!(
            "odd index-set size {size}: the exact bound needs |J| = 2K"
        )));
    }
    let k_mod = size / 2;
    // K smallest elements of J that are ≥ |J|/2
    let j_prime: Vec<u32> = j_sorted
        .iter()
        .copied()
        .filter(|&j| 2 * j as u64 >= size)
        .take(k_mod as usize)
        .collect();
    assert_eq!(j_prime.len(), k_mod as usize, "not enough large indices");

    // residue constraints: the whole block of j_ℓ gets class ℓ−1
    let mut constraints: Vec<(u64, u64)> = Vec::new();
    for (l, &j) in j_prime.iter().enumerate() {
        let lo = 1u64 << (j - 1);
        let hi = 1u64 << j;
        for n in (lo + 1)..=hi {
            constraints.push((n, l as u64));
        }
    }
    constraints.sort_unstable();
    let base = match &seq.kind {
        SeqKind::Power { base } => *base,
        _ => {
            return Err(ConstructionError::Unsupported(
                "block-residue placement needs a geometric sequence".into(),
            ))
        }
    };
    let sol = solve_chain(base, k_mod, &constraints)?;
    let alpha = sol.alpha.clone();

    // f = 2·1_[0, 2/K), flow x ↦ x − αt
    let f = StepFunction::indicator(unit_circle(), &Rat::zero(), &rat(2, k_mod as i64), rat_int(2));
    let system = SystemModel::Flow { alpha_step: -alpha.clone(), domain: unit_circle() };

    // exact power-scale facts: ‖f‖_p^p = 2^{p+1}/K, exceedance level 1 has
    // full measure, so ratio^p ≥ K/2^{p+1}
    let f_pow_b = pow_rat(&rat_int(2), a + b) / pow_rat(&rat_int(k_mod as i64), b);
    let ratio_pow_b = pow_rat(&rat_int(k_mod as i64), b) / pow_rat(&rat_int(2), a + b);
    let target_pow_b = pow_rat(&rat_int(size as i64), b) / pow_rat(&rat_int(2), a + 2 * b);
    assert!(
        ratio_pow_b >= target_pow_b,
        "power-scale ratio {ratio_pow_b} below target {target_pow_b}"
    );

    // cross-check with the fully materialized profile when affordable
    let profile_cost: u64 = j_sorted.iter().map(|&j| 1u64 << j).sum();
    let profile_checked = profile_cost <= 1 << 10;
    if profile_checked {
        let mut seq_local = TimeSequence::new(seq.kind.clone());
        let times = seq_local.integer_prefix(1usize << *j_sorted.last().unwrap())?;
        let mut parts = Vec::new();
        for &j in &j_sorted {
            parts.push(average(&system, &f, &times, j, AverageMode::Full).expect("level in range"));
        }
        let profile = pointwise_max(&parts);
        let exceed = profile.measure_above(&Rat::one(), false);
        assert_eq!(exceed, Rat::one(), "full profile lost the measure-one exceedance");
    }

    let report = WeakLpReport {
        k_mod,
        j_prime: j_prime.clone(),
        constant_branch: false,
        f_pow_b,
        ratio_pow_b: ratio_pow_b.clone(),
        target_pow_b,
        profile_checked,
    };
    let plan = ConstructionPlan {
        name: format!("weak-lp-j{size}"),
        system,
        f,
        w: None,
        book: PlanBook::WeakLp {
            j_set: j_sorted,
            p: p.clone(),
            n0,
            k_mod,
            j_prime,
            seq: seq.kind.clone(),
            alpha,
            constant_branch: false,
        },
        claimed_bound: ratio_pow_b,
    };
    Ok((plan, report))
}

// ---------------------------------------------------------------------------
// Infection builder
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfectionSums {
    /// Σ_t [2^{−y} < w_t < 2^{t−y}]·w_t.
    #[serde(with = "serde_rat")]
    pub m_y: Rat,
    /// Σ_t [8·n₀·2^{−y} < w_t < 2^{t−y}]·w_t at the y-scale.
    #[serde(with = "serde_rat")]
    pub l_y: Rat,
    /// The same sum at scale 2y (with its own n₀).
    #[serde(with = "serde_rat")]
    pub l_2y: Rat,
    /// l_y + l_{2y} > m_y − 9, decided exactly.
    pub identity_holds: bool,
}

/// n₀ = ⌊2y·log_k 2⌋, exact: integer arithmetic when k is a power of two,
/// certified logarithm enclosures otherwise (no ties — the ratio is then
/// irrational).
pub fn infection_block_length(k: u32, y: u32) -> u32 {
    assert!(k >= 2 && y >= 1);
    if k.is_power_of_two() {
        let s = k.trailing_zeros();
        return 2 * y / s;
    }
    let mut bits = 128;
    loop {
        let ctx = Ctx { bits };
        let ln2 = crate::precise::ln2(ctx);
        let lnk = ln_u64(k as u64, ctx);
        let v = ln2.scale(&rat_int(2 * y as i64)).mul(&lnk.recip());
        let flo = floor_int(&v.lo);
        let fhi = floor_int(&v.hi);
        if flo == fhi {
            return flo.to_u32().unwrap();
        }
        bits *= 2;
        assert!(bits <= 4096, "⌊2y·log_k 2⌋ failed to resolve");
    }
}

/// The three window sums governing the infection construction, computed
/// exactly over the weight's horizon.
pub fn infection_sums(w: &WeightSequence, k: u32, y: u32) -> InfectionSums {
    let window_sum = |lo: &Rat, y_scale: u32| {
        let mut sum = Rat::zero();
        for t in 1..=w.horizon {
            let wt = w.at(t);
            let upper = pow_rat(&rat_int(2), t as i64 - y_scale as i64);
            if wt > lo && *wt < upper {
                sum += wt;
            }
        }
        sum
    };
    let m_y = window_sum(&pow_rat(&rat_int(2), -(y as i64)), y);
    let n0 = infection_block_length(k, y);
    let l_y = window_sum(&(rat_int(8 * n0 as i64) * pow_rat(&rat_int(2), -(y as i64))), y);
    let n0_2 = infection_block_length(k, 2 * y);
    let l_2y = window_sum(&(rat_int(8 * n0_2 as i64) * pow_rat(&rat_int(2), -(2 * y as i64))), 2 * y);
    let identity_holds = &l_y + &l_2y > &m_y - rat_int(9);
    InfectionSums { m_y, l_y, l_2y, identity_holds }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntervalCheck {
    pub t: u32,
    #[serde(with = "serde_rat")]
    pub left: Rat,
    /// Block-mean values w_t·A_t f at the left endpoint, midpoint, and just
    /// inside the right endpoint — all required to exceed 2 (the block mean
    /// carries twice the full-average normalization).
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfectionReport {
    pub n_zero: u32,
    pub class_count: usize,
    pub infected: Vec<InfectedClass>,
    pub saturated: bool,
    /// Exact measure of the union of infected intervals.
    #[serde(with = "serde_rat")]
    pub infected_measure: Rat,
    #[serde(with = "serde_rat")]
    pub f_l1: Rat,
    pub sums: InfectionSums,
    pub checks: Vec<IntervalCheck>,
    /// Fraction of point checks that passed (must be 1).
    pub agreement: (usize, usize),
}

fn canonical_rotation(word: &[u32]) -> Vec<u32> {
    let n = word.len();
    let mut best = word.to_vec();
    for s in 1..n {
        let rot: Vec<u32> = (0..n).map(|i| word[(i + s) % n]).collect();
        if rot < best {
            best = rot;
        }
    }
    best
}

fn is_aperiodic(word: &[u32]) -> bool {
    let n = word.len();
    'outer: for d in 1..n {
        if n % d != 0 {
            continue;
        }
        for i in d..n {
            if word[i] != word[i - d] {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// All cyclic-equivalence classes of aperiodic length-n words over
/// {0,…,k−1}, as sorted canonical representatives.
fn aperiodic_classes(k: u32, n: usize) -> Vec<Vec<u32>> {
    let total = (k as u64).checked_pow(n as u32).expect("class space too large");
    let mut reps = Vec::new();
    for code in 0..total {
        let mut word = vec![0u32; n];
        let mut c = code;
        for slot in word.iter_mut().rev() {
            *slot = (c % k as u64) as u32;
            c /= k as u64;
        }
        if is_aperiodic(&word) && canonical_rotation(&word) == word {
            reps.push(word);
        }
    }
    reps
}

fn word_value(word: &[u32], k: u32) -> BigInt {
    let mut v = BigInt::zero();
    for &d in word {
        v = v * k + d;
    }
    v
}

/// Builds the base-k digit-infection rotation: the circle splits into
/// intervals of length 1/(k^{n₀}−1) labelled by period-n₀ digit words, and
/// α's digits are filled block by block with repeated class representatives
/// so that the block average at time 2^t pins f's support onto every
/// interval of the class.  f has height 2^y on an interval of length
/// 3/(k^{n₀}−1) starting at −1/(k^{n₀}−1).  Each marked interval is
/// re-verified against the exact step-function block average.
pub fn build_infection(
    k: u32,
    w: &WeightSequence,
    y: u32,
    t_horizon: u32,
) -> Result<(ConstructionPlan, InfectionReport), ConstructionError> {
    assert!(k >= 2 && y >= 1 && t_horizon >= 2);
    assert!(w.horizon >= t_horizon as usize);
    let n_zero = infection_block_length(k, y);
    if n_zero < 2 {
        return Err(ConstructionError::Unsupported(format!(
            "digit block length n₀ = {n_zero} too short; increase y"
        )));
    }
    let digit_ops = n_zero as u64 * (1u64 << t_horizon);
    if digit_ops > 100_000_000 {
        return Err(ConstructionError::SizeGuard {
            detail: format!("n₀·2^T = {digit_ops} exceeds 10^8 digit operations"),
        });
    }
    if (k as u64).checked_pow(n_zero).map_or(true, |v| v > 10_000_000) {
        return Err(ConstructionError::SizeGuard {
            detail: format!("k^{n_zero} intervals exceed the in-memory cap"),
        });
    }

    let unit_den = BigInt::from(k).pow(n_zero) - BigInt::one(); // k^{n₀} − 1
    let unit = Rat::new(BigInt::one(), unit_den.clone());
    let two_unit = &unit + &unit;
    assert!(two_unit < Rat::one() - &unit, "interval mesh too coarse");

    // f: height 2^y on [−u, 2u)
    let height = pow_rat(&rat_int(2), y as i64);
    let f = StepFunction {
        domain: unit_circle(),
        breakpoints: vec![Rat::zero(), two_unit.clone(), Rat::one() - &unit],
        values: vec![height.clone(), Rat::zero(), height.clone()],
    }
    .canonicalized();
    let f_l1 = f.mass();

    let classes = aperiodic_classes(k, n_zero as usize);
    let mut digits = vec![0u32; (1usize << t_horizon) + 2 * n_zero as usize];
    let mut infected: Vec<InfectedClass> = Vec::new();
    let mut next_class = 0usize;
    let mut saturated = false;
    let mut qualifying: Vec<u32> = Vec::new();
    for t in 1..=t_horizon {
        let wt = w.at(t as usize);
        let lower = rat_int(8 * n_zero as i64) * pow_rat(&rat_int(2), -(y as i64));
        let upper = pow_rat(&rat_int(2), t as i64 - y as i64);
        if !(*wt > lower && *wt < upper) {
            continue;
        }
        qualifying.push(t);
        // repetitions: one more than ⌊2^{t−y}/w_t⌋ + 1, so that the
        // guaranteed q−1 window hits per interval force a strict exceedance
        let reps = floor_int(&(pow_rat(&rat_int(2), t as i64 - y as i64) / wt))
            .to_u64()
            .unwrap()
            + 2;
        let seg = reps as usize * n_zero as usize;
        let block_start = 1usize << (t - 1); // 0-based index of position 2^{t−1}+1
        let capacity = 1usize << (t - 1);
        let seats = capacity / seg;
        let mut pos = block_start;
        for _ in 0..seats {
            if next_class >= classes.len() {
                saturated = true;
                break;
            }
            let rep = &classes[next_class];
            for r in 0..reps as usize {
                let base = pos + r * n_zero as usize;
                digits[base..base + n_zero as usize].copy_from_slice(rep);
            }
            infected.push(InfectedClass { rep: rep.clone(), t });
            next_class += 1;
            pos += seg;
        }
    }

    let alpha = DigitReal::new(k, digits, 2 * n_zero as usize);

    // cross-oracle: exact block-mean profiles per infection time, checked on
    // every marked interval (full containment and three probe points)
    let mut checks = Vec::new();
    let mut passed = 0usize;
    let mut total = 0usize;
    let mut by_time: HashMap<u32, Vec<&InfectedClass>> = HashMap::new();
    for ic in &infected {
        by_time.entry(ic.t).or_default().push(ic);
    }
    let mut times_sorted: Vec<u32> = by_time.keys().copied().collect();
    times_sorted.sort_unstable();
    let mut infected_count = 0usize;
    for t in times_sorted {
        let len = 1usize << t;
        let shifts: Vec<Rat> = (1..=len)
            .map(|n| -(alpha.shift_mod1(n).expect("digit horizon covers the block")))
            .collect();
        let system = SystemModel::MapFamily { shifts, domain: unit_circle() };
        let times: Vec<BigInt> = (1..=len as i64).map(BigInt::from).collect();
        let avg = average(&system, &f, &times, t, AverageMode::Block).expect("level in range");
        let cells = avg.cells();
        let wt = w.at(t as usize);
        // infected at 2^t ⟺ w_t·(2^{t−1}/2^t)·(block mean) > 1, so the block
        // mean must exceed 2/w_t
        let threshold = rat_int(2) / wt;
        for ic in &by_time[&t] {
            for s in 0..n_zero as usize {
                let rot: Vec<u32> = (0..n_zero as usize)
                    .map(|i| ic.rep[(i + s) % n_zero as usize])
                    .collect();
                let left = Rat::new(word_value(&rot, k), unit_den.clone());
                infected_count += 1;
                // full containment: every cell of the average meeting
                // [left, left+u) exceeds the threshold
                let right = &left + &unit;
                let mut ok = true;
                for (a, b, v) in &cells {
                    if *a < right && *b > left && *v <= threshold {
                        ok = false;
                        break;
                    }
                }
                // probe points: left endpoint, midpoint, just inside right
                let probes = [
                    left.clone(),
                    &left + &unit / rat_int(2),
                    &left + &unit * rat(255, 256),
                ];
                let mut point_ok = true;
                for px in &probes {
                    total += 1;
                    if avg.eval(px) > threshold {
                        passed += 1;
                    } else {
                        point_ok = false;
                    }
                }
                assert!(ok && point_ok, "marked interval at {left} failed the direct exceedance");
                checks.push(IntervalCheck { t, left, passed: ok && point_ok });
            }
        }
    }
    let infected_measure = rat_int(infected_count as i64) * &unit;

    let sums = infection_sums(&w.truncated(t_horizon as usize), k, y);
    assert!(
        &sums.l_y + &sums.l_2y > &sums.m_y - rat_int(9),
        "window-sum identity failed: {} + {} vs {} − 9",
        sums.l_y,
        sums.l_2y,
        sums.m_y
    );

    let claimed_bound = &infected_measure / &f_l1;
    let report = InfectionReport {
        n_zero,
        class_count: classes.len(),
        infected: infected.clone(),
        saturated,
        infected_measure,
        f_l1,
        sums,
        checks,
        agreement: (passed, total),
    };
    assert_eq!(report.agreement.0, report.agreement.1, "probe agreement below 100%");
    let plan = ConstructionPlan {
        name: format!("infection-k{k}-y{y}"),
        system: SystemModel::DigitRotation { alpha: alpha.clone(), domain: unit_circle() },
        f,
        w: Some(w.clone()),
        book: PlanBook::Infection {
            k,
            y,
            t_horizon,
            n_zero,
            alpha,
            infected,
            saturated,
        },
        claimed_bound,
    };
    Ok((plan, report))
}

// ---------------------------------------------------------------------------
// Sumset builder
// ---------------------------------------------------------------------------

/// Integer sumset family: B_j = (k−1)·k^{2^j}·{1,…,k^{2^{j+1}}} with its
/// truncation C_j, their sumsets B and C, and the verification results for
/// the indicator f = 1_B.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumsetInstance {
    pub k: u32,
    pub j_set: Vec<u32>,
    pub b_sizes: Vec<u64>,
    pub c_sizes: Vec<u64>,
    pub b_len: u64,
    pub c_len: u64,
    pub window_end: u64,
    pub unique_decomposition: bool,
    pub half_bound: bool,
    /// A_{j₀+1} f ≥ 1/2 on every point of C − k^{2^{j₀}}, all j₀ ∈ J.
    pub lower_half: bool,
    /// The translated sets C − k^{2^{j₀}} are pairwise disjoint.
    pub disjoint: bool,
}

/// Builds and exhaustively verifies the sumset family for k ≥ 3 and an index
/// set with no two consecutive integers.  The dyadic average at level j₀+1
/// of f = 1_B equals the hit count of {x + k^n: n ≤ 2^{j₀+1}} in B over
/// 2^{j₀+1}; the block m ∈ [2^{j₀}, 2^{j₀+1}) lands entirely in B for
/// x ∈ C − k^{2^{j₀}}, which drives the weak-norm lower bound
/// ‖sup_j A_j f‖_{p,∞} ≥ |J|^{1/p}·‖f‖_p/4 on counting measure.
pub fn build_sumset(
    k: u32,
    j_set: &[u32],
    p: &Rat,
) -> Result<(SumsetInstance, MaximalReport), ConstructionError> {
    if k == 2 {
        return Err(ConstructionError::Unsupported(
            "base 2 reduces to base 4 along the even-index subsequence; build with k = 4".into(),
        ));
    }
    assert!(k >= 3);
    assert!(*p >= Rat::one());
    let mut js: Vec<u32> = j_set.to_vec();
    js.sort_unstable();
    js.dedup();
    assert_eq!(js.len(), j_set.len(), "index set has duplicates");
    assert!(!js.is_empty());
    for w in js.windows(2) {
        if w[1] == w[0] + 1 {
            return Err(ConstructionError::ConsecutiveIndices { a: w[0], b: w[1] });
        }
    }
    let mut product: u64 = 1;
    for &j in &js {
        let span = (k as u64).checked_pow(1 << (j + 1)).ok_or_else(|| {
            ConstructionError::SizeGuard { detail: format!("k^(2^{}) overflows", j + 1) }
        })?;
        product = product.checked_mul(span).ok_or_else(|| ConstructionError::SizeGuard {
            detail: "sumset cardinality overflows".into(),
        })?;
        if product > 10_000_000 {
            return Err(ConstructionError::SizeGuard {
                detail: format!("Π k^(2^(j+1)) = {product} exceeds 10^7"),
            });
        }
    }

    // parts
    let mut b_parts: Vec<Vec<u64>> = Vec::new();
    let mut c_parts: Vec<Vec<u64>> = Vec::new();
    for &j in &js {
        let stride = (k as u64 - 1) * (k as u64).pow(1 << j);
        let span = (k as u64).pow(1 << (j + 1));
        let trunc = span - (k as u64).pow(1 << j);
        b_parts.push((1..=span).map(|m| stride * m).collect());
        c_parts.push((1..=trunc).map(|m| stride * m).collect());
    }

    // sumsets with decomposition multiplicity
    let mut b_counts: HashMap<u64, u32> = HashMap::new();
    b_counts.insert(0, 1);
    for part in &b_parts {
        let mut next: HashMap<u64, u32> = HashMap::with_capacity(b_counts.len() * part.len());
        for (&s, &c) in &b_counts {
            for &e in part {
                *next.entry(s + e).or_insert(0) += c;
            }
        }
        b_counts = next;
    }
    let unique_decomposition = b_counts.values().all(|&c| c == 1);
    let mut b_sorted: Vec<u64> = b_counts.keys().copied().collect();
    b_sorted.sort_unstable();
    let mut c_sorted: Vec<u64> = vec![0];
    for part in &c_parts {
        let mut next = Vec::with_capacity(c_sorted.len() * part.len());
        for &s in &c_sorted {
            for &e in part {
                next.push(s + e);
            }
        }
        c_sorted = next;
    }
    c_sorted.sort_unstable();
    c_sorted.dedup();
    let b_len = b_sorted.len() as u64;
    let c_len = c_sorted.len() as u64;
    let half_bound = 2 * c_len >= b_len;

    let j_max = *js.last().unwrap();
    let window_end = b_sorted.last().unwrap() + (k as u64).pow((1u32 << j_max) + 1);
    let b_set: HashSet<u64> = b_sorted.iter().copied().collect();
    let powers: Vec<u64> = (0..=(1u32 << (j_max + 1)))
        .map(|n| (k as u64).checked_pow(n).unwrap_or(u64::MAX))
        .collect();

    // A_{j₀+1} f ≥ 1/2 on C − k^{2^{j₀}}, exhaustively
    let mut lower_half = true;
    let mut translated: Vec<Vec<u64>> = Vec::new();
    for &j0 in &js {
        let shift = (k as u64).pow(1 << j0);
        let level = j0 + 1;
        let count_needed = 1u64 << j0; // half of 2^{j0+1}
        let mut set_j = Vec::with_capacity(c_sorted.len());
        for &c in &c_sorted {
            assert!(c >= shift, "translated point left the window");
            let x = c - shift;
            let mut hits = 0u64;
            for n in 1..=(1usize << level) {
                if let Some(pt) = x.checked_add(powers[n]) {
                    if b_set.contains(&pt) {
                        hits += 1;
                    }
                }
            }
            if hits < count_needed {
                lower_half = false;
            }
            set_j.push(x);
        }
        translated.push(set_j);
    }

    // pairwise disjointness of the translated sets
    let mut disjoint = true;
    for i in 0..translated.len() {
        for l in i + 1..translated.len() {
            let (mut a_i, mut b_i) = (0usize, 0usize);
            while a_i < translated[i].len() && b_i < translated[l].len() {
                match translated[i][a_i].cmp(&translated[l][b_i]) {
                    std::cmp::Ordering::Less => a_i += 1,
                    std::cmp::Ordering::Greater => b_i += 1,
                    std::cmp::Ordering::Equal => {
                        disjoint = false;
                        break;
                    }
                }
            }
        }
    }

    // exact maximal profile over the window on counting measure: sup_j of
    // hit-count/2^level, levels j₀+1; values lie on the 2^{−(j_max+1)} grid
    let levels: Vec<u32> = js.iter().map(|&j| j + 1).collect();
    let top = 1u64 << (j_max + 1);
    let mut histogram = vec![0u64; top as usize + 1]; // index = sup·top
    for x in 0..=window_end {
        let mut best: u64 = 0; // numerator over `top`
        for &level in &levels {
            let mut hits = 0u64;
            for n in 1..=(1usize << level) {
                if let Some(pt) = x.checked_add(powers[n]) {
                    if b_set.contains(&pt) {
                        hits += 1;
                    }
                }
            }
            best = best.max(hits * (top >> level));
        }
        histogram[best as usize] += 1;
    }
    // weak norm in the b-th power scale for p = a/b: the maximum over
    // attained values y of (y^p·#{sup ≥ y})^b = y^a·#{sup ≥ y}^b, exact
    let a = p.numer().to_i64().unwrap();
    let b = p.denom().to_i64().unwrap();
    let mut weak_pow_b = Rat::zero();
    let mut tail: u64 = 0;
    for m in (1..=top as usize).rev() {
        tail += histogram[m];
        if histogram[m] == 0 {
            continue;
        }
        let y = rat(m as i64, top as i64);
        let cand = pow_rat(&y, a) * pow_rat(&rat_int(tail as i64), b);
        if cand > weak_pow_b {
            weak_pow_b = cand;
        }
    }
    let f_strong = rat_int(b_len as i64); // ∫f^p = |B| for an indicator
    let ctx = Ctx::default();
    let weak_pow_val = if b == 1 {
        PowVal::Exact { value: weak_pow_b.clone() }
    } else {
        PowVal::from_iv(crate::precise::pow_rr(&weak_pow_b, &rat(1, b), ctx))
    };
    // ratio = (weak^p/‖f‖_p^p)^{1/p} = (weak_pow_b/|B|^b)^{1/(pb)} with pb = a
    let ratio_arg = &weak_pow_b / pow_rat(&f_strong, b);
    let ratio_iv = crate::precise::pow_rr(&ratio_arg, &rat(1, a), ctx);
    let report = MaximalReport {
        levels,
        entries: vec![MaximalEntry {
            p: p.clone(),
            profile_weak_pow: weak_pow_val,
            f_strong_pow: PowVal::Exact { value: f_strong.clone() },
            ratio: PowVal::from_iv(ratio_iv.clone()),
            ratio_decimal: decimal_string(&ratio_iv.lo, 30),
        }],
    };

    // target (|J|^{1/p}·‖f‖_p/4)^{pb} = |J|^b·|B|^b/4^a, compared exactly in
    // the same power scale
    let target_b = pow_rat(&rat_int(js.len() as i64), b) * pow_rat(&f_strong, b)
        / pow_rat(&rat_int(4), a);
    assert!(
        weak_pow_b >= target_b,
        "sumset weak norm {weak_pow_b} fell below the target {target_b} (power scale)"
    );

    let instance = SumsetInstance {
        k,
        j_set: js,
        b_sizes: b_parts.iter().map(|v| v.len() as u64).collect(),
        c_sizes: c_parts.iter().map(|v| v.len() as u64).collect(),
        b_len,
        c_len,
        window_end,
        unique_decomposition,
        half_bound,
        lower_half,
        disjoint,
    };
    assert!(instance.unique_decomposition, "sumset decomposition not unique");
    assert!(instance.half_bound, "|C| fell below |B|/2");
    assert!(instance.lower_half, "a translated point missed the 1/2 lower bound");
    assert!(instance.disjoint, "translated supports overlap");
    Ok((instance, report))
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Re-executes a plan's verification from its bookkeeping and returns the
/// recomputed bound; callers compare against `claimed_bound`.
pub fn replay_plan(plan: &ConstructionPlan) -> Result<Rat, ConstructionError> {
    match &plan.book {
        PlanBook::WeakL1 { m_goal, u_levels, classes, seq, alpha, k_mod, .. } => {
            let w = plan.w.as_ref().expect("weak (1,1) plans carry their weight");
            let mut constrained: Vec<(usize, u64)> = Vec::new();
            for (t, rs) in classes {
                let lo = 1usize << (*t as usize - 1);
                let hi = 1usize << (*t as usize);
                for n in (lo + 1)..=hi {
                    constrained.push((n, rs[(n - lo - 1) % rs.len()]));
                }
            }
            constrained.sort_unstable();
            let max_n = constrained.last().unwrap().0;
            let mut seq_local = TimeSequence::new(seq.clone());
            let times = seq_local.integer_prefix(max_n)?;
            // re-verify every residue window at the stored α
            for &(n, r) in &constrained {
                let theta = frac(&(alpha * Rat::from_integer(times[n - 1].clone())));
                assert!(
                    theta >= rat(r as i64, *k_mod as i64) && theta < rat(r as i64 + 1, *k_mod as i64),
                    "stored α lost residue window at n = {n}"
                );
            }
            let f_l1 = plan.f.mass();
            assert_eq!(f_l1, rat(4, *m_goal as i64));
            let (exceed, ratio) =
                weak_l1_verify(&plan.system, &plan.f, &times, w, u_levels, &f_l1);
            assert_eq!(exceed, Rat::one());
            Ok(ratio)
        }
        PlanBook::WeakLp { j_set, p, n0, k_mod, j_prime, seq, constant_branch, .. } => {
            let a = p.numer().to_i64().unwrap();
            let b = p.denom().to_i64().unwrap();
            if *constant_branch {
                let target = pow_rat(&rat_int(j_set.len() as i64), b)
                    / pow_rat(&rat_int(2 * *n0 as i64), b);
                assert!(Rat::one() >= target);
                return Ok(Rat::one());
            }
            let base = match seq {
                SeqKind::Power { base } => *base,
                _ => {
                    return Err(ConstructionError::Unsupported(
                        "stored plan lacks a geometric sequence".into(),
                    ))
                }
            };
            let mut constraints: Vec<(u64, u64)> = Vec::new();
            for (l, &j) in j_prime.iter().enumerate() {
                for n in ((1u64 << (j - 1)) + 1)..=(1u64 << j) {
                    constraints.push((n, l as u64));
                }
            }
            constraints.sort_unstable();
            let sol = solve_chain(base, *k_mod, &constraints)?;
            let stored_alpha = match &plan.book {
                PlanBook::WeakLp { alpha, .. } => alpha.clone(),
                _ => unreachable!(),
            };
            assert_eq!(sol.alpha, stored_alpha, "replayed α diverged");
            let ratio_pow_b =
                pow_rat(&rat_int(*k_mod as i64), b) / pow_rat(&rat_int(2), a + b);
            let target_pow_b =
                pow_rat(&rat_int(j_set.len() as i64), b) / pow_rat(&rat_int(2), a + 2 * b);
            assert!(ratio_pow_b >= target_pow_b);
            Ok(ratio_pow_b)
        }
        PlanBook::Infection { k, y, t_horizon, .. } => {
            let w = plan.w.as_ref().expect("infection plans carry their weight");
            let (_plan2, report) = build_infection(*k, w, *y, *t_horizon)?;
            Ok(&report.infected_measure / &report.f_l1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    #[test]
    fn materialize_basic_kinds() {
        let mut pow2 = TimeSequence::new(SeqKind::Power { base: 2 });
        let terms: Vec<i64> = pow2
            .materialize(4)
            .iter()
            .map(|t| t.as_int().unwrap().to_i64().unwrap())
            .collect();
        assert_eq!(terms, vec![2, 4, 8, 16]);
        let mut fact = TimeSequence::new(SeqKind::Factorial);
        let terms: Vec<i64> = fact
            .materialize(5)
            .iter()
            .map(|t| t.as_int().unwrap().to_i64().unwrap())
            .collect();
        assert_eq!(terms, vec![1, 2, 6, 24, 120]);
    }

    #[test]
    fn squarefree_roots_enumerate_in_order() {
        let mut seq = TimeSequence::new(SeqKind::SqrtSquarefree);
        let radicands: Vec<u64> = seq
            .materialize(5)
            .iter()
            .map(|t| t.square().to_u64().unwrap())
            .collect();
        assert_eq!(radicands, vec![2, 3, 5, 6, 7]);
    }

    #[test]
    fn floor_log_values() {
        let mut seq = TimeSequence::new(SeqKind::FloorLog);
        let vals: Vec<u64> = seq
            .materialize(10)
            .iter()
            .map(|t| t.as_int().unwrap().to_u64().unwrap())
            .collect();
        // e ≈ 2.718, e² ≈ 7.389
        assert_eq!(vals, vec![0, 0, 1, 1, 1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn lacunarity_trends() {
        let mut pow2 = TimeSequence::new(SeqKind::Power { base: 2 });
        let prof = lacunarity_profile(&mut pow2, &Rat::one(), 16);
        assert_eq!(prof.power_trend, Trend::Failing);
        assert_eq!(prof.log_trend, Trend::Failing);
        let mut fact = TimeSequence::new(SeqKind::Factorial);
        let prof = lacunarity_profile(&mut fact, &Rat::one(), 24);
        assert_eq!(prof.power_trend, Trend::Failing);
        let prof = lacunarity_profile(&mut fact, &rat(1, 2), 24);
        assert_eq!(prof.power_trend, Trend::Growing);
        assert_eq!(prof.log_trend, Trend::Growing);
    }

    #[test]
    fn refine_identity_and_failure() {
        let mut pow4 = TimeSequence::new(SeqKind::Power { base: 4 });
        let r = refine_bounded_gaps(&mut pow4, &GrowthTest::RatioAtLeast { rho: rat_int(3) }, 10, 4)
            .unwrap();
        assert_eq!(r.kept_indices, (0..10).collect::<Vec<_>>());
        assert_eq!(r.max_gap, 1);
        let ids = TimeSequence::new(SeqKind::Explicit {
            terms: (1..=30i64).map(BigInt::from).collect(),
        });
        let err = refine_bounded_gaps(
            &mut ids.clone(),
            &GrowthTest::IndexPower { exponent: 2 },
            30,
            5,
        );
        assert!(matches!(err, Err(ConstructionError::GapWindowExceeded { .. })));
    }

    #[test]
    fn refine_alternating_keeps_every_other() {
        // m! interleaved with 2·m! for odd m: ratios alternate 2 / large
        let mut terms = Vec::new();
        let mut f = BigInt::one();
        for m in 1..=8i64 {
            f *= m;
            if m % 2 == 1 {
                terms.push(f.clone());
                terms.push(&f * 2);
            }
        }
        let mut seq = TimeSequence::new(SeqKind::Explicit { terms });
        let r =
            refine_bounded_gaps(&mut seq, &GrowthTest::RatioAtLeast { rho: rat_int(2) }, 8, 3)
                .unwrap();
        assert_eq!(r.kept_indices, vec![0, 2, 4, 6]);
        assert_eq!(r.max_gap, 2);
    }

    #[test]
    fn solver_single_term() {
        let prob = ResidueProblem::new(3, vec![rat_int(5)], vec![2]).unwrap();
        let sol = solve_residues(&prob).unwrap();
        assert_eq!(sol.lo, rat(2, 15));
        assert_eq!(sol.hi, rat(2, 15) + rat(1, 15));
        assert_eq!(sol.residues.len(), 1);
    }

    #[test]
    fn solver_reference_instance() {
        let prob = ResidueProblem::new(
            2,
            vec![rat_int(1), rat_int(8), rat_int(64)],
            vec![0, 1, 0],
        )
        .unwrap();
        let sol = solve_residues(&prob).unwrap();
        assert_eq!(sol.alpha, rat(17, 256));
        assert_eq!(sol.residues, vec![rat(17, 256), rat(17, 32), rat(1, 4)]);
    }

    #[test]
    fn solver_rejects_slow_growth() {
        let err = ResidueProblem::new(2, vec![rat_int(1), rat_int(3)], vec![0, 1]);
        assert!(matches!(err, Err(ConstructionError::Lacunarity { .. })));
    }

    #[test]
    fn chain_matches_general_solver() {
        // terms 8^0, 8^1, 8^2 with K = 2
        let sol = solve_chain(8, 2, &[(0, 0), (1, 1), (2, 0)]).unwrap();
        assert_eq!(sol.alpha, rat(17, 256));
        assert_eq!(sol.lo, rat(1, 16));
        assert_eq!(sol.hi, rat(9, 128));
        // a second instance cross-checked against the rational path
        let cons = [(1u64, 2u64), (2, 0), (3, 4), (4, 1)];
        let chain = solve_chain(11, 5, &cons).unwrap();
        let prob = ResidueProblem::new(
            5,
            (1..=4).map(|n| pow_rat(&rat_int(11), n)).collect(),
            vec![2, 0, 4, 1],
        )
        .unwrap();
        let general = solve_residues(&prob).unwrap();
        assert_eq!(chain.alpha, general.alpha);
        assert_eq!(chain.lo, general.lo);
    }

    #[test]
    fn weak_l1_plan_certifies_m2() {
        let mut values = vec![rat(1, 100); 6];
        values[2] = rat(9, 10); // t = 3
        values[3] = rat(3, 2);
        values[4] = rat_int(3);
        values[5] = rat_int(2);
        let w = WeightSequence::explicit(values);
        let mut seq = TimeSequence::new(SeqKind::Power { base: 9 });
        let (plan, report) = build_weak_l1(&w, 2, &mut seq, 1).unwrap();
        assert_eq!(report.n_sel, 2);
        assert_eq!(report.k_mod, 4);
        assert_eq!(report.u_levels, vec![3, 4, 5, 6]);
        assert_eq!(report.exceedance_measure, Rat::one());
        assert_eq!(report.f_l1, rat_int(2));
        assert!(report.weak11_ratio > rat(1, 2));
        // replay reproduces the claimed bound exactly
        let replayed = replay_plan(&plan).unwrap();
        assert_eq!(replayed, plan.claimed_bound);
    }

    #[test]
    fn weak_l1_horizon_guard() {
        let w = WeightSequence::explicit(vec![rat(1, 100); 6]);
        let mut seq = TimeSequence::new(SeqKind::Power { base: 9 });
        let err = build_weak_l1(&w, 1, &mut seq, 1);
        assert!(matches!(err, Err(ConstructionError::HorizonTooSmall { .. })));
    }

    #[test]
    fn weak_lp_constant_branch() {
        let seq = TimeSequence::new(SeqKind::Power { base: 5 });
        let (plan, report) = build_weak_lp(&[1], &rat_int(2), 1, &seq).unwrap();
        assert!(report.constant_branch);
        assert_eq!(plan.claimed_bound, Rat::one());
        assert_eq!(report.target_pow_b, rat(1, 2)); // (|J|/2n₀)^b with b = 1
    }

    #[test]
    fn weak_lp_even_instance() {
        let seq = TimeSequence::new(SeqKind::Power { base: 5 });
        let (plan, report) = build_weak_lp(&[1, 2, 3, 4], &rat_int(2), 1, &seq).unwrap();
        assert_eq!(report.k_mod, 2);
        assert_eq!(report.j_prime, vec![2, 3]);
        assert!(report.profile_checked);
        assert!(report.ratio_pow_b >= report.target_pow_b);
        let replayed = replay_plan(&plan).unwrap();
        assert_eq!(replayed, plan.claimed_bound);
        // fractional exponent scale: p = 3/2 compares in 2nd powers
        let (_, report) = build_weak_lp(&[1, 2, 3, 4], &rat(3, 2), 1, &seq).unwrap();
        assert_eq!(report.f_pow_b, rat(32, 4)); // (2^{p+1}/K)^2 = 2^5/2^2
        assert!(report.ratio_pow_b >= report.target_pow_b);
    }

    #[test]
    fn weak_lp_rejects_odd_sets() {
        let seq = TimeSequence::new(SeqKind::Power { base: 7 });
        let err = build_weak_lp(&[1, 2, 3], &rat_int(2), 1, &seq);
        assert!(matches!(err, Err(ConstructionError::Unsupported(_))));
    }

    #[test]
    fn infection_block_lengths() {
        assert_eq!(infection_block_length(2, 4), 8);
        assert_eq!(infection_block_length(4, 4), 4);
        assert_eq!(infection_block_length(3, 4), 5); // 8·ln2/ln3 ≈ 5.047
    }

    #[test]
    fn infection_reciprocal_weight_sums() {
        let w = crate::weights::materialize(&crate::weights::WeightTag::ReciprocalT, 16);
        let sums = infection_sums(&w, 2, 4);
        let expected: Rat = (3..=15i64).map(|t| rat(1, t)).sum();
        assert_eq!(sums.m_y, expected);
        assert!(sums.l_y.is_zero());
        assert!(sums.l_2y.is_zero());
        assert!(sums.identity_holds); // 0 > m₄ − 9
    }

    #[test]
    fn infection_band_run() {
        let mut values = vec![rat(1, 10); 12];
        for v in values.iter_mut().skip(6) {
            *v = rat_int(5); // w_t = 5 on t ∈ {7,…,12}
        }
        let w = WeightSequence::explicit(values);
        let (plan, report) = build_infection(2, &w, 4, 12).unwrap();
        assert_eq!(report.n_zero, 8);
        assert_eq!(report.class_count, 30);
        assert_eq!(report.infected.len(), 21);
        assert!(!report.saturated);
        assert_eq!(report.infected_measure, rat(21 * 8, 255));
        assert_eq!(report.agreement.0, report.agreement.1);
        assert_eq!(report.f_l1, rat(48, 255));
        let replayed = replay_plan(&plan).unwrap();
        assert_eq!(replayed, plan.claimed_bound);
    }

    #[test]
    fn infection_size_guard() {
        let w = WeightSequence::explicit(vec![rat(1, 10); 30]);
        let err = build_infection(2, &w, 16, 30);
        assert!(matches!(err, Err(ConstructionError::SizeGuard { .. })));
    }

    #[test]
    fn sumset_single_block() {
        let (inst, _) = build_sumset(3, &[0], &rat_int(2)).unwrap();
        assert_eq!(inst.b_len, 9); // 2·3·{1,…,9}
        assert_eq!(inst.c_len, 6);
        assert!(inst.unique_decomposition && inst.half_bound);
        assert!(inst.lower_half && inst.disjoint);
    }

    #[test]
    fn sumset_two_blocks() {
        let (inst, report) = build_sumset(3, &[0, 2], &rat_int(2)).unwrap();
        assert_eq!(inst.b_len, 9 * 6561);
        assert_eq!(inst.c_len, 6 * 6480);
        assert!(inst.unique_decomposition);
        assert!(2 * inst.c_len >= inst.b_len);
        assert!(inst.lower_half && inst.disjoint);
        assert_eq!(report.levels, vec![1, 3]);
        // weak norm at least the 1/2-level witness: (1/2)²·|J||C|
        let entry = &report.entries[0];
        match &entry.profile_weak_pow {
            PowVal::Exact { value } => assert!(*value >= rat(2 * 38880, 4)),
            PowVal::Enclosure { .. } => panic!("integer p must give an exact weak norm"),
        }
    }

    #[test]
    fn sumset_guards() {
        assert!(matches!(
            build_sumset(3, &[0, 1], &rat_int(2)),
            Err(ConstructionError::ConsecutiveIndices { .. })
        ));
        assert!(matches!(
            build_sumset(2, &[0, 2], &rat_int(2)),
            Err(ConstructionError::Unsupported(_))
        ));
        assert!(matches!(
            build_sumset(3, &[0, 2, 4], &rat_int(2)),
            Err(ConstructionError::SizeGuard { .. })
        ));
    }

    #[test]
    fn plan_serde_round_trip() {
        let seq = TimeSequence::new(SeqKind::Power { base: 5 });
        let (plan, _) = build_weak_lp(&[1, 2, 3, 4], &rat_int(2), 1, &seq).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        let back: ConstructionPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(back.claimed_bound, plan.claimed_bound);
        assert_eq!(back.name, plan.name);
        let replayed = replay_plan(&back).unwrap();
        assert_eq!(replayed, plan.claimed_bound);
    }
}
