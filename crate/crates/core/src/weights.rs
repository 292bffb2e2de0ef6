//! Weight sequences (w_t) and their threshold functionals.
//!
//! The central object is the windowed functional
//! `c1(w) = sup_y Σ_t [y < w_t < 2^t·y]·w_t` together with the weak sequence
//! norms `‖w‖_{p,∞} = sup_y y·#{t : w_t ≥ y}^{1/p}`.  Both suprema are over a
//! continuum of thresholds but the summand is constant between consecutive
//! breakpoints drawn from {w_t} ∪ {w_t·2^{−t}}, so a finite midpoint scan is
//! exact.
//!
//! The scan itself is engineered around one fact: summing thousands of
//! rationals with pairwise-coprime denominators exactly at every sweep event
//! is quadratically expensive (the running denominator is an lcm).  The sweep
//! therefore maintains a certified fixed-point enclosure ([`crate::rat::FxSum`])
//! of the running sum, and only the gap(s) that could attain the supremum are
//! re-evaluated exactly by a balanced tree sum.  The reported value is exact;
//! the enclosure only decides which gaps can be skipped.
//!
//! Φ(t) is t multiplied by every iterated natural logarithm of t that is
//! defined and strictly exceeds 1.  For rational t an iterate can never equal
//! 1 exactly (that would force t to be a tower of e's), so the strictness is
//! decidable by escalating certified comparisons.

use crate::measure::PowVal;
use crate::precise::{dceil, dfloor, e_const, ln_iv, Ctx, Iv};
use crate::rat::{
    bit_len, ceil_int, decimal_string, floor_int, pow_rat, rat, rat_int, serde_rat,
    serde_rat_vec, tree_sum, DyadicPos, FxSum, Rat,
};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Generator descriptor; re-materializing a tagged sequence at the same
/// horizon reproduces the values bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightTag {
    /// Values supplied directly.
    Explicit,
    /// w_t = 2^−120-rounded 1/Φ(t) (exact for t ≤ 2 where Φ(t) = t).
    ReciprocalPhi,
    /// w_t = 1/t.
    ReciprocalT,
    /// w_t = 2^−160-rounded t^{−1/2}.
    ReciprocalSqrt,
    /// All-ones sequence (the indicator weight of a block of levels).
    Ones,
    /// Constant sequence.
    Constant {
        #[serde(with = "serde_rat")]
        level: Rat,
    },
    /// Height `height` on t ∈ [lo, hi], `filler` (tiny positive) elsewhere.
    Band {
        lo: usize,
        hi: usize,
        #[serde(with = "serde_rat")]
        height: Rat,
        #[serde(with = "serde_rat")]
        filler: Rat,
    },
    /// Output of [`dyadic_envelope`].
    DyadicEnvelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    pub tag: WeightTag,
    pub horizon: usize,
    #[serde(with = "serde_rat_vec")]
    pub values: Vec<Rat>,
}

impl WeightSequence {
    pub fn new(tag: WeightTag, values: Vec<Rat>) -> WeightSequence {
        assert!(!values.is_empty(), "weight sequence must be nonempty");
        for v in &values {
            assert!(v.is_positive(), "weights must be strictly positive");
        }
        WeightSequence {
            tag,
            horizon: values.len(),
            values,
        }
    }

    pub fn explicit(values: Vec<Rat>) -> WeightSequence {
        WeightSequence::new(WeightTag::Explicit, values)
    }

    /// w_t with 1-based t.
    pub fn at(&self, t: usize) -> &Rat {
        &self.values[t - 1]
    }

    /// Truncation to a smaller horizon (keeps the tag).
    pub fn truncated(&self, horizon: usize) -> WeightSequence {
        assert!(horizon >= 1 && horizon <= self.horizon);
        WeightSequence {
            tag: self.tag.clone(),
            horizon,
            values: self.values[..horizon].to_vec(),
        }
    }

    /// Pointwise scale by a positive rational.
    pub fn scaled(&self, lambda: &Rat) -> WeightSequence {
        assert!(lambda.is_positive());
        WeightSequence::new(
            WeightTag::Explicit,
            self.values.iter().map(|v| v * lambda).collect(),
        )
    }
}

/// Deterministic generator dispatch.
pub fn materialize(tag: &WeightTag, horizon: usize) -> WeightSequence {
    assert!(horizon >= 1);
    let values: Vec<Rat> = match tag {
        WeightTag::Explicit => panic!("explicit sequences carry their own values"),
        WeightTag::ReciprocalT => (1..=horizon as i64).map(|t| rat(1, t)).collect(),
        WeightTag::Ones => vec![Rat::one(); horizon],
        WeightTag::Constant { level } => {
            assert!(level.is_positive());
            vec![level.clone(); horizon]
        }
        WeightTag::Band {
            lo,
            hi,
            height,
            filler,
        } => {
            assert!(*lo >= 1 && lo <= hi && *hi <= horizon);
            assert!(height.is_positive() && filler.is_positive());
            (1..=horizon)
                .map(|t| {
                    if t >= *lo && t <= *hi {
                        height.clone()
                    } else {
                        filler.clone()
                    }
                })
                .collect()
        }
        WeightTag::ReciprocalSqrt => (1..=horizon)
            .map(|t| {
                // floor(2^160/√t)/2^160 = floor(√(2^320/t))/2^160
                let scaled = (BigInt::one() << 320u32) / BigInt::from(t);
                Rat::new(scaled.sqrt(), BigInt::one() << 160u32)
            })
            .collect(),
        WeightTag::ReciprocalPhi => {
            let table = PhiTable::build(horizon);
            (1..=horizon).map(|t| table.recip_phi_dyadic(t)).collect()
        }
        WeightTag::DyadicEnvelope => panic!("envelope sequences carry their own values"),
    };
    WeightSequence::new(tag.clone(), values)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Functional {
    C1,
    C1Prime,
    Cp {
        #[serde(with = "serde_rat")]
        p: Rat,
    },
    WeakNorm {
        #[serde(with = "serde_rat")]
        p: Rat,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightFunctionalReport {
    pub functional: Functional,
    /// The functional's value itself (exact when rational).
    pub value: PowVal,
    /// The p-th power of the value; exact rational for every functional with
    /// integer p, and in particular always for C1/C1′ (p = 1).
    pub value_pow: PowVal,
    /// 30-digit decimal rendering of the value for human consumption.
    pub value_decimal: String,
    /// The threshold attaining the supremum: a gap midpoint for C1, an
    /// attained sequence value for weak norms, the integer z for C1′.
    #[serde(with = "serde_rat")]
    pub argmax_threshold: Rat,
    /// 1-based indices t inside the attaining window.
    pub contributing_indices: Vec<usize>,
}

fn decimal_of(v: &PowVal) -> String {
    match v {
        PowVal::Exact { value } => decimal_string(value, 30),
        PowVal::Enclosure { lo, .. } => decimal_string(lo, 30),
    }
}

/// Magnitude-first rational comparison: decides by sign and bit-length
/// bracket before falling back to cross multiplication.
fn cmp_fast(a: &Rat, b: &Rat) -> Ordering {
    let sa = a.numer().sign();
    let sb = b.numer().sign();
    if sa != sb {
        return (sa as i8).cmp(&(sb as i8));
    }
    if a.numer().is_zero() {
        return Ordering::Equal;
    }
    // both same nonzero sign: compare floor-log2 magnitudes first
    let ma = bit_len(a.numer()) as i64 - bit_len(a.denom()) as i64;
    let mb = bit_len(b.numer()) as i64 - bit_len(b.denom()) as i64;
    let positive = sa == num_bigint::Sign::Plus;
    if (ma - mb).abs() >= 2 {
        let mag = ma.cmp(&mb);
        return if positive { mag } else { mag.reverse() };
    }
    a.cmp(b)
}

/// One sweep gap: thresholds strictly between the event at `floor_idx` (the
/// origin when `None`) and the event at `ceil_idx` all activate the same
/// window.  `hi` is the certified upper bound on the gap's window sum at
/// scale 2^−192, used to prune gaps that cannot attain the supremum.
struct Gap {
    ceil_idx: usize,
    floor_idx: Option<usize>,
    hi: BigInt,
}

const SWEEP_BITS: u32 = 192;

/// sup_y Σ_t [y < w_t < 2^t·y]·w_t, exactly.
///
/// Descending event sweep over {w_t} (activation) ∪ {w_t·2^{−t}}
/// (deactivation) with whole tie-groups applied before a gap is recorded —
/// with strict inequalities on both sides a threshold equal to an event value
/// never collects the adjacent windows.  Gap sums are tracked as certified
/// fixed-point enclosures; every gap whose upper bound reaches the best lower
/// bound is then re-evaluated exactly.
pub fn c1(w: &WeightSequence) -> WeightFunctionalReport {
    c1_labeled(w, Functional::C1)
}

fn c1_labeled(w: &WeightSequence, functional: Functional) -> WeightFunctionalReport {
    struct Event {
        /// position in factored dyadic form — deactivation events sit at
        /// w_t·2^{−t} and must never materialize that power of two
        pos: DyadicPos,
        /// ⌊log₂ pos⌋, a cheap primary sort key; ⌊log₂⌋ is monotone so the
        /// lexicographic order on (key, exact compare) is the value order
        key: i64,
        activate: bool,
        t: usize,
    }
    let mut events: Vec<Event> = Vec::with_capacity(2 * w.horizon);
    for (i, v) in w.values.iter().enumerate() {
        let t = i + 1;
        let up = DyadicPos::from_rat(v);
        let low = DyadicPos::from_rat_shifted(v, t as i64);
        events.push(Event {
            key: up.floor_log2(),
            pos: up,
            activate: true,
            t,
        });
        events.push(Event {
            key: low.floor_log2(),
            pos: low,
            activate: false,
            t,
        });
    }
    events.sort_by(|a, b| {
        b.key
            .cmp(&a.key)
            .then_with(|| b.pos.cmp(&a.pos))
    });

    let mut fx = FxSum::new(SWEEP_BITS);
    let mut gaps: Vec<Gap> = Vec::with_capacity(2 * w.horizon);
    let mut i = 0;
    let n = events.len();
    let mut best_lo = BigInt::zero();
    while i < n {
        let group_end = {
            let mut j = i + 1;
            while j < n
                && events[j].key == events[i].key
                && events[j].pos.cmp(&events[i].pos) == Ordering::Equal
            {
                j += 1;
            }
            j
        };
        for ev in &events[i..group_end] {
            if ev.activate {
                fx.add(w.at(ev.t));
            } else {
                fx.sub(w.at(ev.t));
            }
        }
        let (lo, hi) = fx.raw_bounds();
        if lo > best_lo {
            best_lo = lo;
        }
        gaps.push(Gap {
            ceil_idx: i,
            floor_idx: if group_end < n { Some(group_end) } else { None },
            hi,
        });
        i = group_end;
    }

    // exact re-evaluation of every gap that might attain the supremum; the
    // (few) candidate midpoints are materialized as exact rationals here
    let mut best: Option<(Rat, Rat, Vec<usize>)> = None; // (value, midpoint, indices)
    for g in &gaps {
        if g.hi < best_lo {
            continue;
        }
        let ceil_at = events[g.ceil_idx].pos.to_rat();
        let floor_at = match g.floor_idx {
            Some(j) => events[j].pos.to_rat(),
            None => Rat::zero(),
        };
        let mid = (ceil_at + floor_at) * rat(1, 2);
        let mid_pos = DyadicPos::from_rat(&mid);
        let mut idx = Vec::new();
        let mut terms = Vec::new();
        for (i, v) in w.values.iter().enumerate() {
            let t = i + 1;
            // y < w_t  and  w_t < 2^t·y  ⟺  w_t·2^{−t} < y, both strict
            if cmp_fast(&mid, v) == Ordering::Less
                && DyadicPos::from_rat_shifted(v, t as i64).cmp(&mid_pos) == Ordering::Less
            {
                idx.push(t);
                terms.push(v.clone());
            }
        }
        let value = tree_sum(terms);
        let better = match &best {
            None => true,
            Some((bv, bm, _)) => match cmp_fast(&value, bv) {
                Ordering::Greater => true,
                Ordering::Equal => cmp_fast(&mid, bm) == Ordering::Greater,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((value, mid, idx));
        }
    }
    let (value, mid, idx) = best.expect("nonempty sequence always yields a positive window");
    WeightFunctionalReport {
        functional,
        value_pow: PowVal::Exact {
            value: value.clone(),
        },
        value_decimal: decimal_string(&value, 30),
        value: PowVal::Exact { value },
        argmax_threshold: mid,
        contributing_indices: idx,
    }
}

/// Dense-grid brute-force evaluation of the c1 supremum, used as an oracle
/// against the breakpoint scan.  Evaluates Σ_t [y < w_t < 2^t·y]·w_t at
/// `grid_size` equally spaced thresholds spanning [min(w_t·2^{−t})/2,
/// 2·max(w_t)] by maintaining the two monotone partial sums
/// S₁(y) = Σ[w_t > y]·w_t and S₂(y) = Σ[w_t·2^{−t} ≥ y]·w_t and subtracting.
/// Also reports whether the grid met every breakpoint gap (index arithmetic,
/// no per-point comparisons), which is the exactness condition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridOracleReport {
    #[serde(with = "serde_rat")]
    pub grid_max: Rat,
    pub all_gaps_hit: bool,
    pub grid_size: usize,
}

pub fn c1_grid_oracle(w: &WeightSequence, grid_size: usize) -> GridOracleReport {
    assert!(grid_size >= 2);
    // Rescale every event to an integer at scale 2^{T+1}·lcm(denominators):
    // crossing indices then cost one integer div_rem each, instead of rational
    // divisions dragging 2^T-deep denominators through gcd reductions.
    let shift = (w.horizon + 1) as u64;
    let mut dlcm = BigInt::one();
    for v in &w.values {
        dlcm = num_integer::Integer::lcm(&dlcm, v.denom());
    }
    let highs: Vec<BigInt> = w
        .values
        .iter()
        .map(|v| (v.numer() * (&dlcm / v.denom())) << shift)
        .collect();
    // w_t·2^{−t} keeps ≥ 1 trailing zero at this scale, so the shift is exact
    let lows: Vec<BigInt> = highs
        .iter()
        .enumerate()
        .map(|(i, h)| h >> (i as u64 + 1))
        .collect();
    let lo: BigInt = lows.iter().min().unwrap() >> 1u32;
    let hi: BigInt = highs.iter().max().unwrap() << 1u32;
    let range = &hi - &lo;
    let gp = BigInt::from(grid_size as u64 - 1);
    // first grid index strictly above ev, and first at-or-above ev, from a
    // single division: i·range/(G−1) ⋛ ev − lo
    let cross = |ev: &BigInt| -> (i64, i64) {
        let (q, r) = num_integer::Integer::div_rem(&((ev - &lo) * &gp), &range);
        let q = q.to_i64().unwrap();
        (q + 1, if r.is_zero() { q } else { q + 1 })
    };

    // S1 drops w_t once y ≥ w_t (strict window y < w_t); S2 drops w_t once
    // y > w_t·2^{−t} (non-strict membership w_t·2^{−t} ≥ y).
    let mut s1_drops: Vec<(i64, usize)> = Vec::with_capacity(w.horizon);
    let mut s2_drops: Vec<(i64, usize)> = Vec::with_capacity(w.horizon);
    let mut tagged: Vec<(BigInt, i64, i64)> = Vec::with_capacity(2 * w.horizon);
    for i in 0..w.horizon {
        let t = i + 1;
        let (h_above, h_at) = cross(&highs[i]);
        let (l_above, l_at) = cross(&lows[i]);
        s1_drops.push((h_at, t));
        s2_drops.push((l_above, t));
        tagged.push((highs[i].clone(), h_above, h_at));
        tagged.push((lows[i].clone(), l_above, l_at));
    }
    s1_drops.sort_by_key(|&(c, _)| c);
    s2_drops.sort_by_key(|&(c, _)| c);

    let total: Rat = tree_sum(w.values.clone());
    let mut s1 = total.clone();
    let mut s2 = total;
    let (mut p1, mut p2) = (0usize, 0usize);
    let mut grid_max = Rat::zero();
    for i in 0..grid_size as i64 {
        while p1 < s1_drops.len() && s1_drops[p1].0 <= i {
            s1 -= w.at(s1_drops[p1].1);
            p1 += 1;
        }
        while p2 < s2_drops.len() && s2_drops[p2].0 <= i {
            s2 -= w.at(s2_drops[p2].1);
            p2 += 1;
        }
        let cur = &s1 - &s2;
        debug_assert!(!cur.is_negative());
        if cmp_fast(&cur, &grid_max) == Ordering::Greater {
            grid_max = cur;
        }
    }

    // gap coverage: between consecutive distinct events, is there a grid
    // point strictly inside?  Crossing indices were already computed above.
    tagged.sort_by(|a, b| a.0.cmp(&b.0));
    tagged.dedup_by(|a, b| a.0 == b.0);
    let mut all_gaps_hit = true;
    for pair in tagged.windows(2) {
        let enter = pair[0].1;
        let leave = pair[1].2;
        if enter >= leave || enter >= grid_size as i64 {
            all_gaps_hit = false;
            break;
        }
    }
    GridOracleReport {
        grid_max,
        all_gaps_hit,
        grid_size,
    }
}

/// sup over integer z ∈ {0,…,T} of Σ_t [t > z and w_t > 2^{−z}]·w_t.
///
/// Term t qualifies for z in the contiguous range [z_min(t), t−1] where
/// z_min(t) is the least z ≥ 0 with w_t·2^z > 1, so the whole profile is a
/// difference-array prefix sum over z — again enclosure-swept and exactly
/// re-evaluated at the candidate maximisers.
pub fn c1_prime(w: &WeightSequence) -> WeightFunctionalReport {
    let t_max = w.horizon;
    let mut add_at: Vec<Vec<usize>> = vec![Vec::new(); t_max + 2];
    let mut remove_at: Vec<Vec<usize>> = vec![Vec::new(); t_max + 2];
    for (i, v) in w.values.iter().enumerate() {
        let t = i + 1;
        // least z ≥ 0 with v·2^z > 1
        let mut z = (bit_len(v.denom()) as i64 - bit_len(v.numer()) as i64 - 1).max(0) as usize;
        while !(v * pow_rat(&rat_int(2), z as i64) > Rat::one()) {
            z += 1;
        }
        if z <= t - 1 {
            add_at[z].push(t);
            remove_at[t].push(t);
        }
    }
    let mut fx = FxSum::new(SWEEP_BITS);
    let mut profile: Vec<(BigInt, BigInt)> = Vec::with_capacity(t_max + 1);
    let mut best_lo = BigInt::zero();
    for z in 0..=t_max {
        for &t in &add_at[z] {
            fx.add(w.at(t));
        }
        for &t in &remove_at[z] {
            fx.sub(w.at(t));
        }
        let (lo, hi) = fx.raw_bounds();
        if lo > best_lo {
            best_lo = lo.clone();
        }
        profile.push((lo, hi));
    }
    let mut best: Option<(Rat, usize, Vec<usize>)> = None;
    for (z, (_, hi)) in profile.iter().enumerate() {
        if *hi < best_lo {
            continue;
        }
        let threshold = pow_rat(&rat(1, 2), z as i64);
        let mut idx = Vec::new();
        let mut terms = Vec::new();
        for (i, v) in w.values.iter().enumerate() {
            let t = i + 1;
            if t > z && cmp_fast(v, &threshold) == Ordering::Greater {
                idx.push(t);
                terms.push(v.clone());
            }
        }
        let value = tree_sum(terms);
        let better = match &best {
            None => true,
            Some((bv, bz, _)) => match cmp_fast(&value, bv) {
                Ordering::Greater => true,
                Ordering::Equal => z < *bz,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((value, z, idx));
        }
    }
    let (value, z, idx) = best.unwrap();
    WeightFunctionalReport {
        functional: Functional::C1Prime,
        value_pow: PowVal::Exact {
            value: value.clone(),
        },
        value_decimal: decimal_string(&value, 30),
        value: PowVal::Exact { value },
        argmax_threshold: rat_int(z as i64),
        contributing_indices: idx,
    }
}

/// sup_y y·#{t : w_t ≥ y}^{1/p}; the supremum is attained at some y ∈ {w_t}.
/// Candidate comparison y₁^p·c₁ ≷ y₂^p·c₂ is exact after raising to the
/// denominator of p.
pub fn weak_norm_seq(w: &WeightSequence, p: &Rat) -> WeightFunctionalReport {
    assert!(*p >= Rat::one(), "weak norm requires p ≥ 1");
    let a = p.numer().to_i64().expect("exponent numerator exceeds i64");
    let b = p.denom().to_i64().expect("exponent denominator exceeds i64");
    let mut sorted: Vec<Rat> = w.values.clone();
    sorted.sort_unstable_by(|x, y| cmp_fast(y, x)); // descending
    // candidates are the distinct values; #{w_t ≥ y} is a prefix length.
    // comparing y₁·c₁^{1/p} with y₂·c₂^{1/p} exactly: raise to p's numerator a
    // and compare y^a·c^b.
    let mut best: Option<(Rat, usize, Rat)> = None; // (y, count, score)
    let mut i = 0;
    while i < sorted.len() {
        let y = sorted[i].clone();
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == y {
            j += 1;
        }
        let count = j;
        let score = pow_rat(&y, a) * pow_rat(&rat_int(count as i64), b);
        let better = match &best {
            None => true,
            Some((_, _, bs)) => cmp_fast(&score, bs) == Ordering::Greater,
        };
        if better {
            best = Some((y, count, score));
        }
        i = j;
    }
    let (y, count, _) = best.expect("nonempty sequence");
    let ctx = Ctx::default();
    let count_r = rat_int(count as i64);
    // value = y·count^{1/p}; value^p = y^p·count
    let value_iv = crate::precise::pow_rr(&count_r, &p.recip(), ctx).scale(&y);
    let pow_iv = crate::precise::pow_rr(&y, p, ctx).scale(&count_r);
    let value = PowVal::from_iv(value_iv);
    WeightFunctionalReport {
        functional: Functional::WeakNorm { p: p.clone() },
        value_decimal: decimal_of(&value),
        value,
        value_pow: PowVal::from_iv(pow_iv),
        argmax_threshold: y.clone(),
        contributing_indices: w
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= y)
            .map(|(i, _)| i + 1)
            .collect(),
    }
}

/// The weight functional C_p: the windowed sum for p = 1, the weak sequence
/// norm for p > 1.
pub fn cp(w: &WeightSequence, p: &Rat) -> WeightFunctionalReport {
    assert!(*p >= Rat::one(), "cp requires p ≥ 1");
    if p.is_one() {
        c1_labeled(w, Functional::Cp { p: p.clone() })
    } else {
        let mut rep = weak_norm_seq(w, p);
        rep.functional = Functional::Cp { p: p.clone() };
        rep
    }
}

/// Φ(t) = t · Π log^{(k)}(t) over every iterate defined and strictly > 1.
/// Returns an exact point interval when no iterate qualifies (t small enough
/// that ln t ≤ 1, e.g. Φ(2) = 2).
pub fn phi(t: &Rat, ctx: Ctx) -> Iv {
    assert!(t.is_positive(), "phi requires t > 0");
    let mut bits = ctx.bits;
    loop {
        let c = Ctx { bits };
        let mut product = Iv::point(t.clone());
        let mut iterate = Iv::point(t.clone());
        let mut decided = true;
        // invariant: `iterate` is certified positive, so its log is defined
        loop {
            iterate = ln_iv(&iterate, c);
            if iterate.hi <= Rat::one() {
                break; // this iterate fails the bar, hence so do all deeper ones
            }
            if iterate.lo > Rat::one() {
                product = product.mul(&iterate).round(c);
                continue;
            }
            decided = false; // enclosure straddles 1 — retry sharper
            break;
        }
        if decided {
            return product.round(ctx);
        }
        bits *= 2;
        assert!(
            bits <= 1 << 15,
            "iterated log of {t} sits on the threshold 1 beyond 32768 bits"
        );
    }
}

/// Scaled-integer bracket of atanh(n/d) for positive n/d ≤ 1/2: returns
/// (lo, hi) with lo ≤ 2^bits·atanh(n/d) ≤ hi.  Same series engineering as the
/// rational front end in [`crate::precise`], kept in raw integers here
/// because the incremental log tables call it hundreds of thousands of times.
fn atanh_scaled(n: &BigInt, d: &BigInt, bits: u32) -> (BigInt, BigInt) {
    debug_assert!(n.is_positive() && &(n << 1u32) <= d);
    let n2 = n * n;
    let d2 = d * d;
    let shifted: BigInt = n << bits;
    let mut p_lo = dfloor(&shifted, d);
    let mut p_hi = dceil(&shifted, d);
    let mut s_lo = BigInt::zero();
    let mut s_hi = BigInt::zero();
    let mut k: u64 = 1;
    loop {
        let kb = BigInt::from(k);
        s_lo += dfloor(&p_lo, &kb);
        s_hi += dceil(&p_hi, &kb);
        p_lo = dfloor(&(p_lo * &n2), &d2);
        p_hi = dceil(&(p_hi * &n2), &d2);
        k += 2;
        if p_hi <= BigInt::from(k) {
            break; // tail ≤ (p_hi/k)·1/(1−u²) ≤ 4/3 < 2 scaled units
        }
    }
    (s_lo, s_hi + 2)
}

/// Shared incremental ln/ln∘ln tables for integer arguments 1..=T, used by
/// the 1/Φ generator so that materializing a 2^16 horizon costs seconds, not
/// minutes: ln t − ln(t−1) = 2·atanh(1/(2t−1)) with an exact tiny argument,
/// and ln ln t steps by 2·atanh((L_t − L_{t−1})/(L_t + L_{t−1})).
///
/// All table state is integer brackets at the fixed scale 2^−PHI_SCALE_BITS —
/// a pure bigint pipeline with no rational canonicalization on the hot path.
/// Widths grow by a few scaled units per step, so after 2^16 steps they are
/// still below 2^−120.
pub struct PhiTable {
    horizon: usize,
    /// scaled brackets of ln t (entries 0 and 1 are zero)
    ln_lo: Vec<BigInt>,
    ln_hi: Vec<BigInt>,
    /// scaled brackets of ln ln t for t ≥ 3 (earlier entries are dummies)
    lnln_lo: Vec<BigInt>,
    lnln_hi: Vec<BigInt>,
    /// index of the first t with ln ln t certified > 1
    third_factor_from: usize,
}

const PHI_SCALE_BITS: u32 = 144;
/// Publication quantum of the reciprocal-Φ weights.
const PHI_WEIGHT_BITS: u32 = 120;

impl PhiTable {
    pub fn build(horizon: usize) -> PhiTable {
        let s = PHI_SCALE_BITS;
        let one: BigInt = BigInt::one() << s;
        let mut ln_lo = vec![BigInt::zero(); 2.min(horizon + 1)];
        let mut ln_hi = vec![BigInt::zero(); 2.min(horizon + 1)];
        for t in 2..=horizon {
            let q = BigInt::from(2 * t as u64 - 1);
            let (alo, ahi) = atanh_scaled(&BigInt::one(), &q, s);
            ln_lo.push(&ln_lo[t - 1] + (alo << 1u32));
            ln_hi.push(&ln_hi[t - 1] + (ahi << 1u32));
        }
        let mut lnln_lo = vec![BigInt::zero(); (horizon + 1).min(3)];
        let mut lnln_hi = vec![BigInt::zero(); (horizon + 1).min(3)];
        let mut third_factor_from = usize::MAX;
        if horizon >= 3 {
            // seed: ln ln 3 via the rational front end, scaled in
            let c = Ctx { bits: s + 16 };
            let seed = ln_iv(
                &Iv::new(
                    Rat::new(ln_lo[3].clone(), BigInt::one() << s),
                    Rat::new(ln_hi[3].clone(), BigInt::one() << s),
                ),
                c,
            );
            lnln_lo.push(floor_int(&(&seed.lo * Rat::from_integer(BigInt::one() << s))));
            lnln_hi.push(ceil_int(&(&seed.hi * Rat::from_integer(BigInt::one() << s))));
            for t in 4..=horizon {
                let d_lo = &ln_lo[t] - &ln_hi[t - 1];
                let d_hi = &ln_hi[t] - &ln_lo[t - 1];
                let s_lo = &ln_lo[t] + &ln_lo[t - 1];
                let s_hi = &ln_hi[t] + &ln_hi[t - 1];
                assert!(d_lo.is_positive(), "log increment washed out at t = {t}");
                let (alo, _) = atanh_scaled(&d_lo, &s_hi, s);
                let (_, ahi) = atanh_scaled(&d_hi, &s_lo, s);
                lnln_lo.push(&lnln_lo[t - 1] + (alo << 1u32));
                lnln_hi.push(&lnln_hi[t - 1] + (ahi << 1u32));
            }
            // certify where the second iterate crosses 1 (t = 16 for every
            // horizon in range: lnln 15 < 1 < lnln 16 with ample margin)
            for t in 3..=horizon {
                if lnln_lo[t] > one {
                    third_factor_from = t;
                    break;
                }
                assert!(
                    lnln_hi[t] < one,
                    "ln ln {t} not separated from 1 at scale 2^{s}"
                );
            }
        }
        // certify the third iterate never qualifies inside the horizon:
        // ln ln T < e suffices (then ln ln ln T < 1)
        if horizon >= 16 {
            let e = e_const(Ctx { bits: s });
            let e_lo_scaled = floor_int(&(&e.lo * Rat::from_integer(BigInt::one() << s)));
            assert!(
                lnln_hi[horizon] < e_lo_scaled,
                "horizon too large for the two-factor fast path"
            );
        }
        PhiTable {
            horizon,
            ln_lo,
            ln_hi,
            lnln_lo,
            lnln_hi,
            third_factor_from,
        }
    }

    /// Scaled bracket of Φ(t); callers divide by 2^PHI_SCALE_BITS.
    fn phi_scaled(&self, t: usize) -> (BigInt, BigInt) {
        let s = PHI_SCALE_BITS;
        let one: BigInt = BigInt::one() << s;
        debug_assert!(t >= 3);
        // ln t > 1 ⟺ t ≥ 3, certified by the table entries themselves
        assert!(self.ln_lo[t] > one);
        let tb = BigInt::from(t as u64);
        let mut lo = &tb * &self.ln_lo[t];
        let mut hi = &tb * &self.ln_hi[t];
        if t >= self.third_factor_from {
            lo = (lo * &self.lnln_lo[t]) >> s;
            hi = dceil(&(hi * &self.lnln_hi[t]), &one);
        }
        (lo, hi)
    }

    /// Certified enclosure of Φ(t) for 1 ≤ t ≤ horizon.
    pub fn phi_int(&self, t: usize) -> Iv {
        assert!(t >= 1 && t <= self.horizon);
        if t <= 2 {
            return Iv::point(rat_int(t as i64)); // ln t ≤ ln 2 < 1
        }
        let (lo, hi) = self.phi_scaled(t);
        let den: BigInt = BigInt::one() << PHI_SCALE_BITS;
        Iv::new(Rat::new(lo, den.clone()), Rat::new(hi, den))
    }

    /// w_t = floor(2^120·lo(1/Φ(t)))/2^120, the deterministic dyadic
    /// rationalization used by the `ReciprocalPhi` generator.
    pub fn recip_phi_dyadic(&self, t: usize) -> Rat {
        if t <= 2 {
            return rat(1, t as i64); // Φ(t) = t exactly
        }
        let (_, phi_hi) = self.phi_scaled(t);
        // 1/Φ ≥ 2^s/phi_hi, floored onto the publication grid in one division
        let m = dfloor(
            &(BigInt::one() << (PHI_WEIGHT_BITS + PHI_SCALE_BITS)),
            &phi_hi,
        );
        assert!(m.is_positive());
        Rat::new(m, BigInt::one() << PHI_WEIGHT_BITS)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardyVerdict {
    BoundedSoFar,
    Growing,
    Inconclusive,
}

/// Finite-horizon growth diagnostic; see [`classify_hardy`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardyTrendReport {
    #[serde(with = "serde_rat")]
    pub p: Rat,
    pub first_half_max: PowVal,
    pub last_half_max: PowVal,
    pub verdict: HardyVerdict,
    /// (t, 30-digit decimal of the profile value) at log-spaced indices.
    pub samples: Vec<(usize, String)>,
    /// This is a finite-horizon heuristic about the observed profile, not a
    /// statement about the limit.
    pub heuristic_note: String,
}

/// Profiles w_t·Φ(t) (p = 1) or w_t·t^{1/p} (p > 1) and compares the running
/// max over the last half of the horizon with the one over the first half:
/// ratio > 2 → growing, ratio ≤ 5/4 → bounded-so-far, else inconclusive.
/// For p > 1 every comparison is exact; for p = 1 profile values separated by
/// less than the table enclosure width (≈ 2^−190) are treated as equal, which
/// cannot affect a verdict whose thresholds are 2 and 5/4.
pub fn classify_hardy(w: &WeightSequence, p: &Rat) -> HardyTrendReport {
    assert!(w.horizon >= 16, "classification needs horizon ≥ 16");
    assert!(*p >= Rat::one());
    let half = w.horizon / 2;

    // profile enclosures
    let profiles: Vec<Iv> = if p.is_one() {
        let table = PhiTable::build(w.horizon);
        (1..=w.horizon)
            .map(|t| table.phi_int(t).scale(w.at(t)))
            .collect()
    } else {
        let ctx = Ctx::default();
        let inv_p = p.recip();
        (1..=w.horizon)
            .map(|t| {
                crate::precise::pow_rr(&rat_int(t as i64), &inv_p, ctx).scale(w.at(t))
            })
            .collect()
    };

    // exact comparison for p > 1: with p = a/b the profile is w·t^{b/a}, and
    // raising to the a-th power turns w1·t1^{b/a} ≷ w2·t2^{b/a} into the
    // rational comparison w1^a·t1^b ≷ w2^a·t2^b
    let a = p.numer().to_i64().unwrap();
    let b = p.denom().to_i64().unwrap();
    let pow_a = |i: usize| pow_rat(w.at(i + 1), a) * pow_rat(&rat_int((i + 1) as i64), b);
    let cmp_profile = |i: usize, j: usize| -> Ordering {
        if p.is_one() {
            let (x, y) = (&profiles[i], &profiles[j]);
            if x.lo > y.hi {
                Ordering::Greater
            } else if x.hi < y.lo {
                Ordering::Less
            } else {
                Ordering::Equal
            }
        } else {
            cmp_fast(&pow_a(i), &pow_a(j))
        }
    };

    let argmax_over = |range: std::ops::Range<usize>| -> usize {
        let mut best = range.start;
        for i in range {
            if cmp_profile(i, best) == Ordering::Greater {
                best = i;
            }
        }
        best
    };
    let first_arg = argmax_over(0..half);
    let last_arg = argmax_over(half..w.horizon);
    let first_max = &profiles[first_arg];
    let last_max = &profiles[last_arg];

    // ratio tests with certified conservatism
    let verdict = if p.is_one() {
        if last_max.lo > &first_max.hi * rat_int(2) {
            HardyVerdict::Growing
        } else if last_max.hi <= &first_max.lo * rat(5, 4) {
            HardyVerdict::BoundedSoFar
        } else {
            HardyVerdict::Inconclusive
        }
    } else {
        // a-th powers again: v_l ≷ c·v_f becomes v_l^a ≷ c^a·v_f^a
        let lhs = pow_a(last_arg);
        let base = pow_a(first_arg);
        if lhs > pow_rat(&rat_int(2), a) * &base {
            HardyVerdict::Growing
        } else if lhs <= pow_rat(&rat(5, 4), a) * &base {
            HardyVerdict::BoundedSoFar
        } else {
            HardyVerdict::Inconclusive
        }
    };

    let mut samples = Vec::new();
    let mut t = 1usize;
    while t <= w.horizon {
        samples.push((t, decimal_string(&profiles[t - 1].lo, 30)));
        t *= 2;
    }

    HardyTrendReport {
        p: p.clone(),
        first_half_max: PowVal::from_iv(first_max.clone()),
        last_half_max: PowVal::from_iv(last_max.clone()),
        verdict,
        samples,
        heuristic_note:
            "finite-horizon profile comparison; not a statement about the limit".to_string(),
    }
}

/// v_t = max of u_n over the dyadic block 2^{t−1} < n ≤ 2^t, for t = 1..=T.
/// `u` is 1-based conceptually: u[0] is u_1.
pub fn dyadic_envelope(u: &[Rat], t_levels: usize) -> WeightSequence {
    assert!(t_levels >= 1);
    assert!(
        u.len() >= 1 << t_levels,
        "envelope needs at least 2^T input terms"
    );
    let values: Vec<Rat> = (1..=t_levels)
        .map(|t| {
            let lo = 1 << (t - 1); // n = 2^{t−1}+1 is u[2^{t−1}]
            let hi = 1 << t;
            u[lo..hi].iter().max().cloned().unwrap()
        })
        .collect();
    WeightSequence::new(WeightTag::DyadicEnvelope, values)
}

/// Rescale each sequence so its C_p equals the matching target exactly, then
/// sum pointwise.  Requires every current C_p value to be exactly rational
/// (always for p = 1; for p > 1 the attained count must be a perfect power
/// matching p's denominator) — otherwise no rational scaling can hit the
/// target exactly and the call panics.
pub fn scale_and_sum(
    ws: &[WeightSequence],
    targets: &[Rat],
    p: &Rat,
) -> (WeightSequence, WeightFunctionalReport) {
    assert!(!ws.is_empty() && ws.len() == targets.len());
    let horizon = ws[0].horizon;
    for w in ws {
        assert_eq!(w.horizon, horizon, "mismatched horizons");
    }
    for t in targets {
        assert!(t.is_positive(), "targets must be positive");
    }
    let mut sum = vec![Rat::zero(); horizon];
    for (w, target) in ws.iter().zip(targets) {
        let current = cp(w, p);
        let value = current
            .value
            .exact()
            .unwrap_or_else(|| {
                panic!("C_p value is irrational; the target cannot be hit exactly")
            })
            .clone();
        let lambda = target / value;
        for (acc, v) in sum.iter_mut().zip(&w.values) {
            *acc += v * &lambda;
        }
    }
    let v = WeightSequence::explicit(sum);
    let report = cp(&v, p);
    (v, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::parse_rat;
    use proptest::prelude::*;

    fn dec(s: &str) -> Rat {
        let (int, frac) = s.split_once('.').unwrap();
        let scale = pow_rat(&rat_int(10), frac.len() as i64);
        let joined: Rat = parse_rat(&format!("{int}{frac}")).unwrap();
        joined / scale
    }

    /// O(T²) reference: evaluate the window sum at every gap midpoint plus
    /// edge probes, entirely in exact arithmetic.  Used to validate the
    /// enclosure-assisted sweep on small instances.
    fn c1_brute(w: &WeightSequence) -> Rat {
        let mut evs: Vec<Rat> = Vec::new();
        for (i, v) in w.values.iter().enumerate() {
            evs.push(v.clone());
            evs.push(v * pow_rat(&rat(1, 2), (i + 1) as i64));
        }
        evs.sort();
        evs.dedup();
        let mut probes: Vec<Rat> = vec![&evs[0] * rat(1, 2), evs.last().unwrap() * rat_int(2)];
        for pair in evs.windows(2) {
            probes.push((&pair[0] + &pair[1]) * rat(1, 2));
        }
        let mut best = Rat::zero();
        for y in probes {
            let mut s = Rat::zero();
            for (i, v) in w.values.iter().enumerate() {
                let t = (i + 1) as i64;
                if *v > y && *v < &y * pow_rat(&rat_int(2), t) {
                    s += v;
                }
            }
            if s > best {
                best = s;
            }
        }
        best
    }

    #[test]
    fn c1_single_term() {
        let w = WeightSequence::explicit(vec![rat(7, 3)]);
        let r = c1(&w);
        assert_eq!(r.value.exact().unwrap(), &rat(7, 3));
        assert_eq!(r.contributing_indices, vec![1]);
        // re-evaluating at the reported threshold reproduces the value
        let y = &r.argmax_threshold;
        assert!(y < &rat(7, 3) && rat(7, 3) < y * rat_int(2));
    }

    #[test]
    fn c1_matches_brute_force_on_structured_cases() {
        let cases: Vec<WeightSequence> = vec![
            materialize(&WeightTag::ReciprocalT, 64),
            materialize(&WeightTag::Ones, 20),
            materialize(
                &WeightTag::Band {
                    lo: 3,
                    hi: 7,
                    height: rat_int(5),
                    filler: rat(1, 1000),
                },
                12,
            ),
            WeightSequence::explicit(vec![
                rat(1, 2),
                rat(1, 2),
                rat_int(1),
                rat(1, 4),
                rat(3, 4),
                rat(1, 2),
            ]),
        ];
        for w in cases {
            let r = c1(&w);
            assert_eq!(
                r.value.exact().unwrap(),
                &c1_brute(&w),
                "sweep disagrees with brute force on tag {:?}",
                w.tag
            );
        }
    }

    #[test]
    fn c1_tie_groups_never_mix_windows() {
        // w_1 = 1 deactivates at 1/2 exactly where w_2 = 1/2 activates;
        // with strict windows no threshold collects both.
        let w = WeightSequence::explicit(vec![rat_int(1), rat(1, 2)]);
        let r = c1(&w);
        assert_eq!(r.value.exact().unwrap(), &rat_int(1));
        assert_eq!(r.contributing_indices, vec![1]);
    }

    #[test]
    fn c1_prime_constant_two() {
        let w = WeightSequence::explicit(vec![rat_int(2); 3]);
        let r = c1_prime(&w);
        assert_eq!(r.value.exact().unwrap(), &rat_int(6));
        assert_eq!(r.argmax_threshold, rat_int(0));
        assert_eq!(r.contributing_indices, vec![1, 2, 3]);
    }

    #[test]
    fn c1_prime_brute_force_agreement() {
        let w = materialize(&WeightTag::ReciprocalT, 48);
        let r = c1_prime(&w);
        // direct O(T²) evaluation
        let mut best = Rat::zero();
        for z in 0..=48usize {
            let thr = pow_rat(&rat(1, 2), z as i64);
            let mut s = Rat::zero();
            for (i, v) in w.values.iter().enumerate() {
                if i + 1 > z && *v > thr {
                    s += v;
                }
            }
            if s > best {
                best = s;
            }
        }
        assert_eq!(r.value.exact().unwrap(), &best);
    }

    #[test]
    fn weak_norm_indicator_and_singleton() {
        let ones = materialize(&WeightTag::Ones, 8);
        let r = weak_norm_seq(&ones, &rat_int(2));
        assert_eq!(r.value_pow.exact().unwrap(), &rat_int(8));
        assert_eq!(r.argmax_threshold, rat_int(1));
        assert_eq!(r.contributing_indices.len(), 8);

        let single = WeightSequence::explicit(vec![rat_int(5)]);
        let r = weak_norm_seq(&single, &rat_int(1));
        assert_eq!(r.value.exact().unwrap(), &rat_int(5));

        // |J| = 9 at p = 2 → exactly 3
        let nine = materialize(&WeightTag::Ones, 9);
        let r = cp(&nine, &rat_int(2));
        assert_eq!(r.value.exact().unwrap(), &rat_int(3));
    }

    #[test]
    fn weak_norm_reciprocal_sqrt_near_one() {
        let w = materialize(&WeightTag::ReciprocalSqrt, 100);
        let r = weak_norm_seq(&w, &rat_int(2));
        // exact value for t^{-1/2} would be exactly 1; the 2^-160 dyadic
        // rounding loses at most ~2^-80 here
        let vp = r.value_pow.exact().unwrap();
        assert!(vp <= &rat_int(1));
        assert!(vp > &(rat_int(1) - pow_rat(&rat(1, 2), 80)));
    }

    #[test]
    fn grid_oracle_on_small_sequences() {
        let w = WeightSequence::explicit(vec![rat(1, 2), rat(3, 4), rat(1, 3), rat_int(2)]);
        let scan = c1(&w);
        let grid = c1_grid_oracle(&w, 10_000);
        let sv = scan.value.exact().unwrap();
        assert!(sv >= &grid.grid_max);
        if grid.all_gaps_hit {
            assert_eq!(sv, &grid.grid_max);
        }
    }

    #[test]
    fn phi_reference_values() {
        let c = Ctx::default();
        assert_eq!(phi(&rat_int(2), c), Iv::point(rat_int(2)));
        assert_eq!(phi(&rat_int(1), c), Iv::point(rat_int(1)));
        assert_eq!(phi(&rat(1, 2), c), Iv::point(rat(1, 2)));
        let p3 = phi(&rat_int(3), c);
        let truth3 = dec("3.2958368660043290741857357107675771139424716734682");
        assert!(p3.contains(&truth3) && p3.width() < dec("0.000000000000000000000000000001"));
        let p100 = phi(&rat_int(100), c);
        let truth100 = dec("703.29220814189957313116321644435719870325026217264");
        assert!(p100.contains(&truth100));
        assert!(p100.width() < dec("0.000000000000000000000000000001"));
    }

    #[test]
    fn phi_table_matches_direct_phi() {
        let table = PhiTable::build(300);
        let c = Ctx::with_bits(160);
        for t in [1usize, 2, 3, 4, 15, 16, 17, 100, 299] {
            let a = table.phi_int(t);
            let b = phi(&rat_int(t as i64), c);
            assert!(
                a.lo <= b.hi && b.lo <= a.hi,
                "phi table and direct phi disagree at t = {t}"
            );
        }
    }

    #[test]
    fn reciprocal_phi_materialization() {
        let w = materialize(&WeightTag::ReciprocalPhi, 32);
        assert_eq!(w.values[0], rat_int(1)); // Φ(1) = 1
        assert_eq!(w.values[1], rat(1, 2)); // Φ(2) = 2
        // 1/Φ(3) ≈ 0.30341307...
        let truth = dec("0.303413075542279131204746721912");
        assert!((&w.values[2] - truth).abs() < rat(1, 1_000_000_000));
        // deterministic re-materialization
        let w2 = materialize(&WeightTag::ReciprocalPhi, 32);
        assert_eq!(w, w2);
    }

    #[test]
    fn c1_of_reciprocal_phi_is_exactly_one() {
        // the single-term window {t = 1} with w_1 = 1 beats every deeper
        // window of this family at any horizon
        for horizon in [32usize, 256] {
            let w = materialize(&WeightTag::ReciprocalPhi, horizon);
            let r = c1(&w);
            assert_eq!(r.value.exact().unwrap(), &rat_int(1));
            assert_eq!(r.contributing_indices, vec![1]);
        }
    }

    #[test]
    fn c1_prime_of_reciprocal_phi_close_to_c1() {
        let w = materialize(&WeightTag::ReciprocalPhi, 256);
        let a = c1(&w);
        let b = c1_prime(&w);
        let diff = (a.value.exact().unwrap() - b.value.exact().unwrap()).abs();
        assert!(diff < rat_int(1), "|C1 − C1′| = {diff} unexpectedly large");
    }

    #[test]
    fn classify_hardy_profiles() {
        // w = 1/Φ: profile ≈ 1 identically → bounded-so-far
        let w = materialize(&WeightTag::ReciprocalPhi, 64);
        let r = classify_hardy(&w, &rat_int(1));
        assert_eq!(r.verdict, HardyVerdict::BoundedSoFar);

        // constant weights: profile = Φ(t), last/first ≈ 2.07 → growing
        let w = materialize(&WeightTag::Ones, 1 << 10);
        let r = classify_hardy(&w, &rat_int(1));
        assert_eq!(r.verdict, HardyVerdict::Growing);

        // w = t^{-1/2}: profile ≈ √t·(log factors) grows by ≈ √2·(1+ε) → inconclusive
        let w = materialize(&WeightTag::ReciprocalSqrt, 1 << 10);
        let r = classify_hardy(&w, &rat_int(1));
        assert_eq!(r.verdict, HardyVerdict::Inconclusive);

        // p = 2 with w = t^{-1/2}: profile ≈ 1 → bounded-so-far, exact path
        let r = classify_hardy(&w, &rat_int(2));
        assert_eq!(r.verdict, HardyVerdict::BoundedSoFar);
    }

    #[test]
    fn envelope_examples() {
        let u: Vec<Rat> = (1..=8).map(rat_int).collect();
        let v = dyadic_envelope(&u, 3);
        assert_eq!(v.values, vec![rat_int(2), rat_int(4), rat_int(8)]);

        let u: Vec<Rat> = (1..=8).map(|n| rat(1, n)).collect();
        let v = dyadic_envelope(&u, 3);
        assert_eq!(v.values, vec![rat(1, 2), rat(1, 3), rat(1, 5)]);

        let u = vec![rat(2, 7); 16];
        let v = dyadic_envelope(&u, 4);
        assert!(v.values.iter().all(|x| *x == rat(2, 7)));
    }

    #[test]
    fn scale_and_sum_examples() {
        // single sequence, target = current value → unchanged
        let w = materialize(&WeightTag::Ones, 4);
        let cur = c1(&w).value.exact().unwrap().clone();
        let (v, _) = scale_and_sum(std::slice::from_ref(&w), &[cur], &rat_int(1));
        assert_eq!(v.values, w.values);

        // two all-ones blocks of four, targets 1 and 2 at p = 1:
        // c1(ones₄) = 4, so v = (1/4 + 2/4)·ones = 3/4·ones and c1(v) = 3
        let (v, rep) = scale_and_sum(&[w.clone(), w.clone()], &[rat_int(1), rat_int(2)], &rat_int(1));
        assert!(v.values.iter().all(|x| *x == rat(3, 4)));
        assert_eq!(rep.value.exact().unwrap(), &rat_int(3));

        // p = 2 monotonicity: sum dominates each part, so C_p(sum) ≥ max target
        let a = materialize(&WeightTag::Ones, 9);
        let targets = [rat_int(2), rat_int(4), rat_int(8)];
        let (_, rep) = scale_and_sum(&[a.clone(), a.clone(), a], &targets, &rat_int(2));
        let vp = rep.value_pow.exact().unwrap();
        // value² ≥ 8² = 64
        assert!(vp >= &rat_int(64));
    }

    #[test]
    fn truncation_and_rematerialization() {
        let w = materialize(&WeightTag::ReciprocalT, 100);
        let t = w.truncated(40);
        assert_eq!(t.values, materialize(&WeightTag::ReciprocalT, 40).values);
    }

    #[test]
    fn serde_round_trip() {
        let w = materialize(
            &WeightTag::Band {
                lo: 2,
                hi: 5,
                height: rat_int(3),
                filler: rat(1, 100),
            },
            8,
        );
        let s = serde_json::to_string(&w).unwrap();
        let back: WeightSequence = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prop_sweep_equals_brute_force(seed in 0u64..2000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = rng.gen_range(1..40usize);
            let den = [2i64, 3, 8, 12, 60][rng.gen_range(0..5)];
            let values: Vec<Rat> = (0..len)
                .map(|_| rat(rng.gen_range(1..200), den))
                .collect();
            let w = WeightSequence::explicit(values);
            let sweep = c1(&w);
            prop_assert_eq!(sweep.value.exact().unwrap(), &c1_brute(&w));
            // re-evaluating at the reported midpoint reproduces the value
            let y = &sweep.argmax_threshold;
            let mut s = Rat::zero();
            for (i, v) in w.values.iter().enumerate() {
                if v > y && *v < y * pow_rat(&rat_int(2), (i + 1) as i64) {
                    s += v;
                }
            }
            prop_assert_eq!(&s, sweep.value.exact().unwrap());
        }

        #[test]
        fn prop_scan_dominates_grid(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = rng.gen_range(1..60usize);
            let values: Vec<Rat> = (0..len)
                .map(|_| rat(rng.gen_range(1..500), 24))
                .collect();
            let w = WeightSequence::explicit(values);
            let scan = c1(&w);
            let grid = c1_grid_oracle(&w, 2000);
            let sv = scan.value.exact().unwrap();
            prop_assert!(sv >= &grid.grid_max);
            if grid.all_gaps_hit {
                prop_assert_eq!(sv, &grid.grid_max);
            }
        }

        #[test]
        fn prop_weak_norm_homogeneity(seed in 0u64..500, lnum in 1i64..20, lden in 1i64..20) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = rng.gen_range(1..30usize);
            let values: Vec<Rat> = (0..len)
                .map(|_| rat(rng.gen_range(1..100), rng.gen_range(1..30)))
                .collect();
            let w = WeightSequence::explicit(values);
            let lambda = rat(lnum, lden);
            for p in [rat_int(1), rat_int(2), rat_int(3)] {
                let base = weak_norm_seq(&w, &p);
                let scaled = weak_norm_seq(&w.scaled(&lambda), &p);
                // value^p scales by λ^p; attaining level scales by λ
                let expect = base.value_pow.exact().unwrap()
                    * pow_rat(&lambda, p.numer().to_i64().unwrap());
                prop_assert_eq!(scaled.value_pow.exact().unwrap(), &expect);
                prop_assert_eq!(&scaled.argmax_threshold, &(&base.argmax_threshold * &lambda));
            }
        }

        #[test]
        fn prop_p_power_identity(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = rng.gen_range(1..30usize);
            let values: Vec<Rat> = (0..len)
                .map(|_| rat(rng.gen_range(1..60), rng.gen_range(1..15)))
                .collect();
            let w = WeightSequence::explicit(values.clone());
            for p in [2i64, 3] {
                let lhs = weak_norm_seq(&w, &rat_int(p));
                let wp = WeightSequence::explicit(
                    values.iter().map(|v| pow_rat(v, p)).collect(),
                );
                let rhs = weak_norm_seq(&wp, &rat_int(1));
                // ‖w‖_{p,∞}^p = ‖w^p‖_{1,∞} exactly
                prop_assert_eq!(
                    lhs.value_pow.exact().unwrap(),
                    rhs.value_pow.exact().unwrap()
                );
            }
        }

        #[test]
        fn prop_bound_chain(seed in 0u64..800) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // narrow-band sequences keep max(w) ≤ c1(w) likely
            let len = rng.gen_range(4..24usize);
            let values: Vec<Rat> = (0..len)
                .map(|_| rat(rng.gen_range(30..60), 60))
                .collect();
            let w = WeightSequence::explicit(values);
            let c = c1(&w).value.exact().unwrap().clone();
            let maxw = w.values.iter().max().unwrap().clone();
            if maxw <= c {
                let weak1 = weak_norm_seq(&w, &rat_int(1));
                prop_assert!(
                    weak1.value.exact().unwrap() <= &(&c * rat_int(2)),
                    "weak-1 norm exceeds 2·c1"
                );
            }
        }

        #[test]
        fn prop_envelope_dominates(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let levels = rng.gen_range(1..6usize);
            let u: Vec<Rat> = (0..(1 << levels))
                .map(|_| rat(rng.gen_range(1..100), rng.gen_range(1..10)))
                .collect();
            let v = dyadic_envelope(&u, levels);
            for t in 1..=levels {
                for n in (1 << (t - 1))..(1 << t) {
                    prop_assert!(v.at(t) >= &u[n]);
                }
            }
        }
    }
}
