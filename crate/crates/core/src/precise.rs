//! Certified enclosures for the handful of transcendental quantities the
//! crate cannot avoid: ln, exp, and real powers.
//!
//! Everything here follows one discipline: a computation returns an interval
//! `[lo, hi]` of dyadic rationals that provably contains the exact value.
//! Series are summed *exactly* in rational arithmetic, the truncation tail is
//! bounded analytically and added to the appropriate endpoint, and only then
//! are the endpoints rounded outward to the working precision.  Comparisons
//! against rationals are therefore decidable whenever the true value is not
//! itself rational, and [`LogReal`] supplements that with an exact zero test
//! for quantities of the form q₀ + Σ cᵢ·ln pᵢ (pᵢ prime): such a value is zero
//! iff every coefficient is zero, so ties are detected symbolically instead of
//! by running precision escalation forever.
//!
//! * `ln` uses the atanh series after range reduction x = 2ᵏ·z with
//!   z ∈ [2/3, 4/3], so the series argument u = (z−1)/(z+1) satisfies
//!   |u| ≤ 1/5 (and 1/3 for ln 2 itself).
//! * `exp` halves the argument m times until |x|/2ᵐ ≤ 1/2, sums the Taylor
//!   series exactly, then squares the enclosure m times.
//! * `pow(b, p/q)` first tries the exact path (integer exponent, or numerator
//!   and denominator of b perfect q-th powers) and falls back to exp(e·ln b).

use crate::rat::{bit_len, pow_rat, rat, rat_int, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Working precision. `bits` is the target mantissa length of interval
/// endpoints; enclosures are usually a few ulps wider than 2^−bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ctx {
    pub bits: u32,
}

impl Ctx {
    /// Precision from requested decimal digits, with a 32-bit guard.
    pub fn with_digits(digits: u32) -> Ctx {
        let bits = ((digits as f64) * std::f64::consts::LOG2_10).ceil() as u32 + 32;
        Ctx { bits }
    }

    pub fn with_bits(bits: u32) -> Ctx {
        Ctx { bits }
    }

    fn escalate(self) -> Ctx {
        Ctx { bits: self.bits * 2 }
    }
}

impl Default for Ctx {
    fn default() -> Self {
        Ctx::with_digits(30)
    }
}

/// Round down to a dyadic with ≈ `bits` significant bits.
fn dy_floor(r: &Rat, bits: u32) -> Rat {
    if r.is_zero() {
        return Rat::zero();
    }
    let s = bit_len(r.numer()) as i64 - bit_len(r.denom()) as i64;
    let t = bits as i64 - s;
    let m = if t >= 0 {
        num_integer::Integer::div_floor(&(r.numer() << t as u64), r.denom())
    } else {
        num_integer::Integer::div_floor(r.numer(), &(r.denom() << (-t) as u64))
    };
    if t >= 0 {
        Rat::new(m, BigInt::one() << t as u64)
    } else {
        Rat::from_integer(m << (-t) as u64)
    }
}

fn dy_ceil(r: &Rat, bits: u32) -> Rat {
    -dy_floor(&-r.clone(), bits)
}

/// A closed interval of rationals certified to contain one real number.
#[derive(Clone, Debug, PartialEq)]
pub struct Iv {
    pub lo: Rat,
    pub hi: Rat,
}

impl Iv {
    pub fn point(r: Rat) -> Iv {
        Iv {
            lo: r.clone(),
            hi: r,
        }
    }

    pub fn new(lo: Rat, hi: Rat) -> Iv {
        debug_assert!(lo <= hi);
        Iv { lo, hi }
    }

    pub fn width(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn contains(&self, r: &Rat) -> bool {
        self.lo <= *r && *r <= self.hi
    }

    /// Outward rounding of both endpoints to the working precision.
    pub fn round(&self, ctx: Ctx) -> Iv {
        Iv {
            lo: dy_floor(&self.lo, ctx.bits),
            hi: dy_ceil(&self.hi, ctx.bits),
        }
    }

    pub fn add(&self, o: &Iv) -> Iv {
        Iv {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    pub fn sub(&self, o: &Iv) -> Iv {
        Iv {
            lo: &self.lo - &o.hi,
            hi: &self.hi - &o.lo,
        }
    }

    pub fn neg(&self) -> Iv {
        Iv {
            lo: -self.hi.clone(),
            hi: -self.lo.clone(),
        }
    }

    /// Multiply by an exact rational scalar.
    pub fn scale(&self, c: &Rat) -> Iv {
        if c.is_negative() {
            Iv {
                lo: &self.hi * c,
                hi: &self.lo * c,
            }
        } else {
            Iv {
                lo: &self.lo * c,
                hi: &self.hi * c,
            }
        }
    }

    pub fn mul(&self, o: &Iv) -> Iv {
        let cands = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Iv { lo, hi }
    }

    /// Reciprocal of an interval not containing zero.
    pub fn recip(&self) -> Iv {
        assert!(
            self.lo.is_positive() || self.hi.is_negative(),
            "reciprocal of an interval containing zero"
        );
        Iv {
            lo: self.hi.recip(),
            hi: self.lo.recip(),
        }
    }

    /// Sign of every point in the interval, if that sign is uniform.
    pub fn definite_sign(&self) -> Option<Ordering> {
        if self.lo.is_positive() {
            Some(Ordering::Greater)
        } else if self.hi.is_negative() {
            Some(Ordering::Less)
        } else if self.lo.is_zero() && self.hi.is_zero() {
            Some(Ordering::Equal)
        } else {
            None
        }
    }
}

pub(crate) fn dfloor(n: &BigInt, d: &BigInt) -> BigInt {
    num_integer::Integer::div_floor(n, d)
}

pub(crate) fn dceil(n: &BigInt, d: &BigInt) -> BigInt {
    -num_integer::Integer::div_floor(&-n, d)
}

/// atanh(u) for rational |u| ≤ 1/2, as an enclosure at `bits` precision.
///
/// The series runs in scaled-integer arithmetic with directed rounding: the
/// power u^{2j+1} and the partial sum are tracked as integer brackets at
/// scale 2^{bits+16}, so each step costs one bigints multiply/divide
/// regardless of how fat the denominator of `u` is — exact rational partial
/// sums would compound the denominator with every term.  The truncation tail
/// is covered by the geometric envelope Σ_{j>N} |u|^{2j+1}/(2j+1) ≤
/// |u|^{2N+3}/((2N+3)(1−u²)), which is below one scaled unit at the stopping
/// point.
fn atanh_rat(u: &Rat, bits: u32) -> Iv {
    assert!(u.abs() <= rat(1, 2));
    if u.is_zero() {
        return Iv::point(Rat::zero());
    }
    let ua = u.abs();
    let b = bits + 16;
    let n = ua.numer();
    let d = ua.denom();
    let n2 = n * n;
    let d2 = d * d;
    let shifted = n << b;
    // brackets for 2^b·u^{2j+1} and the scaled partial sum
    let mut p_lo = dfloor(&shifted, d);
    let mut p_hi = dceil(&shifted, d);
    let mut s_lo = BigInt::zero();
    let mut s_hi = BigInt::zero();
    let mut k: u64 = 1; // 2j+1
    loop {
        let kb = BigInt::from(k);
        s_lo += dfloor(&p_lo, &kb);
        s_hi += dceil(&p_hi, &kb);
        p_lo = dfloor(&(p_lo * &n2), &d2);
        p_hi = dceil(&(p_hi * &n2), &d2);
        k += 2;
        if p_hi <= BigInt::from(k) {
            // every remaining term ≤ 1 scaled unit; the full tail is at most
            // (p_hi/k)·1/(1−u²) ≤ 4/3 < 2 scaled units
            break;
        }
    }
    s_hi += 2;
    let den = BigInt::one() << b;
    let enclosure = Iv::new(Rat::new(s_lo, den.clone()), Rat::new(s_hi, den));
    let enclosure = if u.is_negative() {
        enclosure.neg()
    } else {
        enclosure
    };
    enclosure.round(Ctx { bits })
}

thread_local! {
    static LN_CACHE: RefCell<BTreeMap<(u64, u32), Iv>> = RefCell::new(BTreeMap::new());
}

/// ln 2 = 2·atanh(1/3).
pub fn ln2(ctx: Ctx) -> Iv {
    ln_u64(2, ctx)
}

/// ln of a small positive integer, cached per (n, bits).
pub fn ln_u64(n: u64, ctx: Ctx) -> Iv {
    assert!(n >= 1);
    if n == 1 {
        return Iv::point(Rat::zero());
    }
    LN_CACHE.with(|c| {
        if let Some(iv) = c.borrow().get(&(n, ctx.bits)) {
            return iv.clone();
        }
        let iv = ln_rat_uncached(&rat_int(n as i64), ctx);
        c.borrow_mut().insert((n, ctx.bits), iv.clone());
        iv
    })
}

/// Natural logarithm of a positive rational.
pub fn ln_rat(r: &Rat, ctx: Ctx) -> Iv {
    assert!(r.is_positive(), "ln of a non-positive rational");
    if r.is_one() {
        return Iv::point(Rat::zero());
    }
    // go through the cache for integer arguments that fit u64
    if r.is_integer() {
        if let Some(n) = r.numer().to_u64() {
            return ln_u64(n, ctx);
        }
    }
    ln_rat_uncached(r, ctx)
}

fn ln_rat_uncached(r: &Rat, ctx: Ctx) -> Iv {
    // find k with z = r/2^k ∈ [2/3, 4/3)
    let mut k = bit_len(r.numer()) as i64 - bit_len(r.denom()) as i64;
    let mut z = r * pow_rat(&rat_int(2), -k);
    if z < rat(2, 3) {
        k -= 1;
        z *= rat_int(2);
    } else if z >= rat(4, 3) {
        k += 1;
        z /= rat_int(2);
    }
    debug_assert!(z >= rat(2, 3) && z < rat(4, 3));
    let u = (&z - Rat::one()) / (&z + Rat::one());
    let at = atanh_rat(&u, ctx.bits);
    let main = at.scale(&rat_int(2));
    if k == 0 {
        return main.round(ctx);
    }
    // k·ln2: compute ln2 at slightly higher precision to absorb the scaling
    let guard = Ctx {
        bits: ctx.bits + 16,
    };
    let l2 = if r == &rat_int(2) {
        // base case: ln 2 = 2·atanh(1/3) directly (k = 1, z = 1, u = 0)
        return atanh_rat(&rat(1, 3), ctx.bits + 4)
            .scale(&rat_int(2))
            .round(ctx);
    } else {
        ln2(guard)
    };
    main.add(&l2.scale(&rat_int(k))).round(ctx)
}

/// exp of a rational, via argument halving and a scaled-integer Taylor sum
/// with directed rounding (same engineering as [`atanh_rat`]: per-term cost
/// does not depend on the argument's denominator).  Negative arguments go
/// through exp(−x) = 1/exp(x), which is exact on interval endpoints.
pub fn exp_rat(r: &Rat, ctx: Ctx) -> Iv {
    if r.is_zero() {
        return Iv::point(Rat::one());
    }
    let ra = r.abs();
    let s = bit_len(ra.numer()) as i64 - bit_len(ra.denom()) as i64;
    let m = (s + 2).max(0) as u32; // |r|/2^m ≤ 1/2
    let b = ctx.bits + 16 + 2 * m;
    // x = |r|/2^m = n/d
    let n = ra.numer().clone();
    let d: BigInt = ra.denom() << m;
    let scale = BigInt::one() << b;
    let mut t_lo = scale.clone();
    let mut t_hi = scale.clone();
    let mut s_lo = scale.clone();
    let mut s_hi = scale.clone();
    let mut j: u64 = 1;
    loop {
        let dj = &d * BigInt::from(j);
        t_lo = dfloor(&(t_lo * &n), &dj);
        t_hi = dceil(&(t_hi * &n), &dj);
        s_lo += &t_lo;
        s_hi += &t_hi;
        j += 1;
        if t_hi <= BigInt::one() {
            // remaining terms ≤ t_hi·(x + x² + …) ≤ t_hi ≤ 1 scaled unit
            break;
        }
    }
    s_hi += 2;
    // m interval squarings at fixed scale; exp(x) ≥ 1 keeps everything
    // positive so directed squaring is monotone
    for _ in 0..m {
        s_lo = dfloor(&(&s_lo * &s_lo), &scale);
        s_hi = dceil(&(&s_hi * &s_hi), &scale);
    }
    let iv = Iv::new(
        Rat::new(s_lo, scale.clone()),
        Rat::new(s_hi, scale),
    );
    let iv = if r.is_negative() { iv.recip() } else { iv };
    iv.round(ctx)
}

/// exp extended to interval arguments by monotonicity.
pub fn exp_iv(x: &Iv, ctx: Ctx) -> Iv {
    let lo = exp_rat(&x.lo, ctx);
    let hi = exp_rat(&x.hi, ctx);
    Iv::new(lo.lo, hi.hi)
}

/// ln extended to positive interval arguments by monotonicity.
pub fn ln_iv(x: &Iv, ctx: Ctx) -> Iv {
    assert!(x.lo.is_positive(), "ln of an interval touching (−∞, 0]");
    let lo = ln_rat(&x.lo, ctx);
    let hi = ln_rat(&x.hi, ctx);
    Iv::new(lo.lo, hi.hi)
}

/// atanh on a thin interval with 0 ≤ lo ≤ hi ≤ 1/2, for incremental log
/// tables: atanh is increasing, so the hull of the endpoint series suffices,
/// but evaluating the exact series twice on fat endpoint rationals is wasted
/// work — instead the endpoints are rounded first and the series runs once per
/// endpoint at reduced cost.
pub fn atanh_iv(x: &Iv, ctx: Ctx) -> Iv {
    // 2/5 keeps the outward-rounded upper endpoint safely below 1/2
    assert!(!x.lo.is_negative() && x.hi <= rat(2, 5));
    let slim = Ctx {
        bits: ctx.bits + 8,
    };
    let lo = atanh_rat(&dy_floor(&x.lo, slim.bits), slim.bits);
    let hi = atanh_rat(&dy_ceil(&x.hi, slim.bits), slim.bits);
    Iv::new(lo.lo, hi.hi).round(ctx)
}

/// Euler's number as an enclosure.
pub fn e_const(ctx: Ctx) -> Iv {
    exp_rat(&Rat::one(), ctx)
}

/// If `n = m^k` for an integer m ≥ 0, return m.
pub fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    if n.is_zero() || n.is_one() || k == 1 {
        return Some(n.clone());
    }
    let r = n.nth_root(k);
    if r.pow(k) == *n {
        Some(r)
    } else {
        None
    }
}

/// b^e for rational b > 0 and rational e.  Returns an exact point interval
/// when e is an integer or b is a perfect power matching e's denominator;
/// otherwise a certified enclosure of exp(e·ln b).
pub fn pow_rr(base: &Rat, expo: &Rat, ctx: Ctx) -> Iv {
    assert!(base.is_positive(), "pow of a non-positive base");
    if expo.is_integer() {
        let k = expo
            .numer()
            .to_i64()
            .expect("integer exponent exceeds i64 range");
        return Iv::point(pow_rat(base, k));
    }
    let q = expo
        .denom()
        .to_u32()
        .expect("exponent denominator exceeds u32 range");
    if let (Some(rn), Some(rd)) = (exact_root(base.numer(), q), exact_root(base.denom(), q)) {
        let root = Rat::new(rn, rd);
        let p = expo
            .numer()
            .to_i64()
            .expect("exponent numerator exceeds i64 range");
        return Iv::point(pow_rat(&root, p));
    }
    let guard = Ctx {
        bits: ctx.bits + 16,
    };
    let l = ln_rat(base, guard).scale(expo);
    exp_iv(&l, ctx)
}

/// A real of the form q₀ + Σ_p c_p·ln p with p prime and rational c_p.
///
/// Since {ln p : p prime} is linearly independent over the rationals and
/// no nonzero rational equals a rational combination of logarithms of
/// integers, such a quantity is zero **iff** q₀ and every c_p vanish.  That
/// turns equality into bigint arithmetic and makes three-way comparisons
/// decidable: unequal values are separated by escalating interval precision,
/// which terminates because the difference is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct LogReal {
    pub q0: Rat,
    /// prime → coefficient, zero coefficients removed
    pub logs: BTreeMap<u64, Rat>,
}

pub(crate) fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl LogReal {
    pub fn zero() -> LogReal {
        LogReal {
            q0: Rat::zero(),
            logs: BTreeMap::new(),
        }
    }

    pub fn rational(q: Rat) -> LogReal {
        LogReal {
            q0: q,
            logs: BTreeMap::new(),
        }
    }

    /// c·ln n for an integer n ≥ 1 (factored into primes internally).
    pub fn ln_int(n: u64, c: Rat) -> LogReal {
        assert!(n >= 1);
        let mut logs = BTreeMap::new();
        if !c.is_zero() {
            for (p, e) in factorize(n) {
                logs.insert(p, &c * rat_int(e as i64));
            }
        }
        LogReal {
            q0: Rat::zero(),
            logs,
        }
    }

    /// c·ln r for a positive rational r.
    pub fn ln_of_rat(r: &Rat, c: Rat) -> LogReal {
        assert!(r.is_positive());
        let n = r
            .numer()
            .to_u64()
            .expect("LogReal base numerator exceeds u64");
        let d = r
            .denom()
            .to_u64()
            .expect("LogReal base denominator exceeds u64");
        LogReal::ln_int(n, c.clone()).add(&LogReal::ln_int(d, -c))
    }

    pub fn add(&self, o: &LogReal) -> LogReal {
        let mut logs = self.logs.clone();
        for (p, c) in &o.logs {
            let entry = logs.entry(*p).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                logs.remove(p);
            }
        }
        LogReal {
            q0: &self.q0 + &o.q0,
            logs,
        }
    }

    pub fn sub(&self, o: &LogReal) -> LogReal {
        self.add(&o.scale(&rat_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> LogReal {
        if c.is_zero() {
            return LogReal::zero();
        }
        LogReal {
            q0: &self.q0 * c,
            logs: self.logs.iter().map(|(p, v)| (*p, v * c)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.q0.is_zero() && self.logs.is_empty()
    }

    /// Certified enclosure at the given precision.
    pub fn eval(&self, ctx: Ctx) -> Iv {
        let guard = Ctx {
            bits: ctx.bits + 8,
        };
        let mut acc = Iv::point(self.q0.clone());
        for (p, c) in &self.logs {
            acc = acc.add(&ln_u64(*p, guard).scale(c));
        }
        acc.round(ctx)
    }

    /// Exact three-way comparison.  Ties are decided symbolically; distinct
    /// values by interval evaluation with escalating precision.
    pub fn cmp(&self, o: &LogReal) -> Ordering {
        let d = self.sub(o);
        if d.is_zero() {
            return Ordering::Equal;
        }
        let mut ctx = Ctx::default();
        loop {
            if let Some(s) = d.eval(ctx).definite_sign() {
                return s;
            }
            ctx = ctx.escalate();
            assert!(
                ctx.bits <= 1 << 15,
                "comparison undecided at 32768 bits; symbolic zero test missed a tie?"
            );
        }
    }

    pub fn cmp_rat(&self, r: &Rat) -> Ordering {
        self.cmp(&LogReal::rational(r.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::parse_rat;

    /// Parse a 50-digit decimal literal as an exact rational.
    fn dec(s: &str) -> Rat {
        let (int, frac) = s.split_once('.').unwrap();
        let scale = pow_rat(&rat_int(10), frac.len() as i64);
        let joined: Rat = parse_rat(&format!("{int}{frac}")).unwrap();
        joined / scale
    }

    fn assert_encloses(iv: &Iv, truth: &str, max_width_exp: i64) {
        let t = dec(truth);
        assert!(
            iv.contains(&t),
            "enclosure [{}, {}] misses {}",
            iv.lo,
            iv.hi,
            truth
        );
        assert!(
            iv.width() < pow_rat(&rat_int(10), max_width_exp),
            "enclosure too wide: {}",
            iv.width()
        );
    }

    #[test]
    fn ln2_against_reference_digits() {
        let iv = ln2(Ctx::default());
        assert_encloses(
            &iv,
            "0.69314718055994530941723212145817656807550013436025",
            -30,
        );
    }

    #[test]
    fn ln3_and_ln10() {
        let c = Ctx::default();
        assert_encloses(
            &ln_u64(3, c),
            "1.0986122886681096913952452369225257046474905578227",
            -30,
        );
        // ln 10 = ln 2 + ln 5 exercises k ≠ 0 reduction both ways
        let l10 = ln_rat(&rat_int(10), c);
        let l2 = ln2(c);
        let l5 = ln_rat(&rat_int(5), c);
        let sum = l2.add(&l5);
        assert!(l10.lo <= sum.hi && sum.lo <= l10.hi, "ln10 ≠ ln2+ln5");
    }

    #[test]
    fn ln_of_fractions() {
        let c = Ctx::default();
        // ln(1/2) = −ln2
        let a = ln_rat(&rat(1, 2), c);
        let b = ln2(c).neg();
        assert!(a.lo <= b.hi && b.lo <= a.hi);
        // ln(3/4) < 0 < ln(4/3)
        assert!(ln_rat(&rat(3, 4), c).hi.is_negative());
        assert!(ln_rat(&rat(4, 3), c).lo.is_positive());
    }

    #[test]
    fn exp_against_reference_digits() {
        let c = Ctx::default();
        assert_encloses(
            &e_const(c),
            "2.7182818284590452353602874713526624977572470937000",
            -28,
        );
        assert_encloses(
            &exp_rat(&rat_int(2), c),
            "7.3890560989306502272304274605750078131803155705518",
            -27,
        );
        assert_encloses(
            &exp_rat(&rat_int(3), c),
            "20.085536923187667740928529654581717896987907838554",
            -27,
        );
        assert_encloses(
            &exp_rat(&rat(1, 2), c),
            "1.6487212707001281468486507878141635716537761007101",
            -28,
        );
    }

    #[test]
    fn exp_of_negatives() {
        let c = Ctx::default();
        let a = exp_rat(&rat_int(-3), c);
        let b = exp_rat(&rat_int(3), c).recip();
        assert!(a.lo <= b.hi && b.lo <= a.hi, "exp(−3) ≠ 1/exp(3)");
        assert!(a.lo.is_positive());
    }

    #[test]
    fn exp_ln_round_trip() {
        let c = Ctx::default();
        for r in [rat(7, 3), rat_int(100), rat(1, 17), rat(65536, 3)] {
            let iv = exp_iv(&ln_rat(&r, c), c);
            assert!(iv.contains(&r), "exp(ln {r}) misses {r}");
            assert!(iv.width() < rat(1, 1_000_000_000) * &r);
        }
    }

    #[test]
    fn pow_exact_paths() {
        let c = Ctx::default();
        // integer exponent
        let p = pow_rr(&rat(2, 3), &rat_int(3), c);
        assert_eq!(p, Iv::point(rat(8, 27)));
        // perfect square root: 4^{3/2} = 8 exactly
        let p = pow_rr(&rat_int(4), &rat(3, 2), c);
        assert_eq!(p, Iv::point(rat_int(8)));
        // (8/27)^{2/3} = 4/9 exactly
        let p = pow_rr(&rat(8, 27), &rat(2, 3), c);
        assert_eq!(p, Iv::point(rat(4, 9)));
        // negative integer exponent
        let p = pow_rr(&rat_int(4), &rat_int(-2), c);
        assert_eq!(p, Iv::point(rat(1, 16)));
    }

    #[test]
    fn pow_certified_path() {
        let c = Ctx::default();
        let p = pow_rr(&rat_int(2), &rat(1, 2), c);
        assert_encloses(
            &p,
            "1.4142135623730950488016887242096980785696718753769",
            -28,
        );
        // 2^{1/2}·2^{1/2} encloses 2
        let sq = p.mul(&p);
        assert!(sq.contains(&rat_int(2)));
    }

    #[test]
    fn logreal_zero_detection() {
        // ln 4 − 2 ln 2 = 0 exactly
        let a = LogReal::ln_int(4, Rat::one());
        let b = LogReal::ln_int(2, rat_int(2));
        assert_eq!(a.cmp(&b), Ordering::Equal);
        // ln 6 = ln 2 + ln 3
        let l6 = LogReal::ln_int(6, Rat::one());
        let l23 = LogReal::ln_int(2, Rat::one()).add(&LogReal::ln_int(3, Rat::one()));
        assert!(l6.sub(&l23).is_zero());
        // ln(3/2) = ln 3 − ln 2
        let lr = LogReal::ln_of_rat(&rat(3, 2), Rat::one());
        let diff = LogReal::ln_int(3, Rat::one()).sub(&LogReal::ln_int(2, Rat::one()));
        assert!(lr.sub(&diff).is_zero());
    }

    #[test]
    fn logreal_comparisons() {
        // 8·ln2 = 5.5451774444795624753378569716654...
        let v = LogReal::ln_int(2, rat_int(8));
        assert_eq!(v.cmp_rat(&dec("5.5451774444795624")), Ordering::Greater);
        assert_eq!(v.cmp_rat(&dec("5.5451774444795625")), Ordering::Less);
        // ln 3 vs (11/10)·ln 2 + something: just check strict order ln2 < ln3
        let l2 = LogReal::ln_int(2, Rat::one());
        let l3 = LogReal::ln_int(3, Rat::one());
        assert_eq!(l2.cmp(&l3), Ordering::Less);
        // rational part participates: 1 − ln2 > 0, 1/2 − ln2 < 0
        let a = LogReal::rational(Rat::one()).sub(&LogReal::ln_int(2, Rat::one()));
        assert_eq!(a.cmp_rat(&Rat::zero()), Ordering::Greater);
        let b = LogReal::rational(rat(1, 2)).sub(&LogReal::ln_int(2, Rat::one()));
        assert_eq!(b.cmp_rat(&Rat::zero()), Ordering::Less);
    }

    #[test]
    fn logreal_eval_encloses() {
        let v = LogReal::ln_int(2, rat_int(8));
        let iv = v.eval(Ctx::default());
        assert_encloses(
            &iv,
            "5.5451774444795624753378569716654125446040010748820",
            -27,
        );
    }

    #[test]
    fn escalation_separates_close_values() {
        // compare ln 2 against a 40-digit rational approximation from below
        let l2 = LogReal::ln_int(2, Rat::one());
        let close_approx = dec("0.6931471805599453094172321214581765680755");
        assert_eq!(l2.cmp_rat(&close_approx), Ordering::Greater);
    }

    #[test]
    fn factorization() {
        assert_eq!(factorize(360), vec![(2, 3), (3, 2), (5, 1)]);
        assert_eq!(factorize(97), vec![(97, 1)]);
        assert_eq!(factorize(1), vec![]);
    }

    #[test]
    fn dyadic_rounding_brackets() {
        let r = rat(1, 3);
        let lo = dy_floor(&r, 64);
        let hi = dy_ceil(&r, 64);
        assert!(lo <= r && r <= hi);
        assert!(&hi - &lo < pow_rat(&rat(1, 2), 60));
        let n = rat(-1, 3);
        assert!(dy_floor(&n, 64) <= n && n <= dy_ceil(&n, 64));
    }
}
