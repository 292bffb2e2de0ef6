//! Exact rational scalars and the helpers the rest of the crate leans on.
//!
//! Everything quantitative in this crate is either a `Rat` (arbitrary-precision
//! rational) or a certified enclosure built from them (see [`crate::precise`]).
//! This module adds the small amount of glue that `num-rational` does not ship:
//!
//! * `"p/q"` string (de)serialization used by every JSON artifact,
//! * integer powers with negative exponents,
//! * balanced-tree summation (`tree_sum`) so that summing *n* terms costs
//!   O(log n) multiplication depth instead of a left fold whose intermediate
//!   denominators are reduced n times,
//! * [`FxSum`] — a directed-rounding fixed-point accumulator used by threshold
//!   sweeps.  Adding/removing 2·10⁵ harmonic-like terms exactly would drag
//!   lcm-sized denominators (tens of kilobits) through every event; `FxSum`
//!   instead tracks a lower and an upper dyadic bound at scale 2⁻ˢ and the
//!   caller falls back to one exact `tree_sum` per *candidate* maximiser.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;

pub type Rat = BigRational;

/// `n/d` as a reduced rational. Panics when `d = 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_big(n: BigInt) -> Rat {
    Rat::from_integer(n)
}

/// Largest integer ≤ r.
pub fn floor_int(r: &Rat) -> BigInt {
    r.floor().to_integer()
}

/// Smallest integer ≥ r.
pub fn ceil_int(r: &Rat) -> BigInt {
    r.ceil().to_integer()
}

/// r^k for any integer k (k < 0 requires r ≠ 0).
pub fn pow_rat(r: &Rat, k: i64) -> Rat {
    if k == 0 {
        return Rat::one();
    }
    let e = k.unsigned_abs() as u32;
    let p = Rat::new(r.numer().pow(e), r.denom().pow(e));
    if k < 0 {
        p.recip()
    } else {
        p
    }
}

/// Render as `"p"` for integers, `"p/q"` otherwise (canonical reduced form).
pub fn format_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Accepts `"p"`, `"p/q"`, optional leading `-`, arbitrary magnitude.
pub fn parse_rat(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| format!("bad numerator in rational literal {s:?}"))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| format!("bad denominator in rational literal {s:?}"))?;
    if d.is_zero() {
        return Err(format!("zero denominator in rational literal {s:?}"));
    }
    Ok(Rat::new(n, d))
}

/// Sum by pairwise balanced reduction.  Equivalent to `iter().sum()` but the
/// denominator lcm growth is shared across O(log n) levels, which matters when
/// the terms have pairwise-coprime denominators (harmonic-style families).
pub fn tree_sum(mut terms: Vec<Rat>) -> Rat {
    if terms.is_empty() {
        return Rat::zero();
    }
    while terms.len() > 1 {
        let mut next = Vec::with_capacity((terms.len() + 1) / 2);
        let mut it = terms.drain(..);
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        drop(it);
        terms = next;
    }
    terms.pop().unwrap()
}

/// Floor of `r·2^bits` plus an exactness flag (directed rounding toward −∞).
/// Power-of-two denominators take a pure-shift fast path.
fn fix_parts(r: &Rat, bits: u32) -> (BigInt, bool) {
    let d = r.denom();
    let tz = d.trailing_zeros().unwrap_or(0);
    if bit_len(d) == tz + 1 {
        // d = 2^tz: r·2^bits = numer·2^(bits−tz)
        let sh = bits as i64 - tz as i64;
        if sh >= 0 {
            (r.numer() << sh as usize, true)
        } else {
            let back = (-sh) as u64;
            let exact = r.numer().trailing_zeros().unwrap_or(back) >= back;
            (r.numer() >> back as usize, exact)
        }
    } else {
        let scaled: BigInt = r.numer() << bits;
        let f = num_integer::Integer::div_floor(&scaled, d);
        let exact = &f * d == scaled;
        (f, exact)
    }
}

/// Running sum with certified dyadic bounds at scale 2⁻ˢ.
///
/// `add`/`sub` keep the invariant `lo·2⁻ˢ ≤ exact running sum ≤ hi·2⁻ˢ`;
/// after n operations the width is at most `n·2¹⁻ˢ`.  Terms whose denominator
/// is a power of two dividing 2ˢ are accumulated exactly (`lo = hi` stays).
#[derive(Clone, Debug)]
pub struct FxSum {
    bits: u32,
    lo: BigInt,
    hi: BigInt,
}

impl FxSum {
    pub fn new(bits: u32) -> Self {
        FxSum {
            bits,
            lo: BigInt::zero(),
            hi: BigInt::zero(),
        }
    }

    pub fn add(&mut self, r: &Rat) {
        let (f, exact) = fix_parts(r, self.bits);
        self.lo += &f;
        self.hi += if exact { f } else { f + 1 };
    }

    pub fn sub(&mut self, r: &Rat) {
        let (f, exact) = fix_parts(r, self.bits);
        self.hi -= &f;
        self.lo -= if exact { f } else { f + 1 };
    }

    /// Certified enclosure of the current sum.
    pub fn bounds(&self) -> (Rat, Rat) {
        let d = BigInt::one() << self.bits;
        (
            Rat::new(self.lo.clone(), d.clone()),
            Rat::new(self.hi.clone(), d),
        )
    }

    /// True when the enclosure of `self` lies strictly above the enclosure of
    /// `other` — i.e. the comparison is certified.
    pub fn certainly_gt(&self, other: &FxSum) -> bool {
        debug_assert_eq!(self.bits, other.bits);
        self.lo > other.hi
    }

    /// The integer enclosure `(lo, hi)` at scale 2⁻ᵇⁱᵗˢ, avoiding the rational
    /// round trip of [`FxSum::bounds`] in hot sweeps.
    pub fn raw_bounds(&self) -> (BigInt, BigInt) {
        (self.lo.clone(), self.hi.clone())
    }
}

/// Exact ⌊log₂ r⌋ for positive r, by bit lengths plus one shift-compare.
pub fn floor_log2_rat(r: &Rat) -> i64 {
    assert!(r.is_positive(), "floor_log2 needs r > 0");
    let k = bit_len(r.numer()) as i64 - bit_len(r.denom()) as i64;
    // r ∈ (2^(k−1), 2^(k+1)); decide which side of 2^k
    let at_least = if k >= 0 {
        *r.numer() >= (r.denom() << k as usize)
    } else {
        (r.numer() << (-k) as usize) >= *r.denom()
    };
    if at_least {
        k
    } else {
        k - 1
    }
}

/// Compare `a` with `b·2^k` for positive integers a, b.  Bit lengths settle
/// every case except an exact tie of lengths, and in that case the required
/// shift is at most the bit length of `a` — so the power of two is never
/// materialized at full size, no matter how large `k` is.
pub fn cmp_shifted(a: &BigInt, b: &BigInt, k: i64) -> Ordering {
    debug_assert!(a.is_positive() && b.is_positive());
    if k < 0 {
        return cmp_shifted(b, a, -k).reverse();
    }
    let la = bit_len(a) as i64;
    let lb = bit_len(b) as i64 + k;
    match la.cmp(&lb) {
        Ordering::Equal => a.cmp(&(b << k as usize)),
        other => other,
    }
}

/// A positive rational kept in the factored form `n / (odd·2^e)`.
///
/// Threshold sweeps deal in positions like `w·2^{−t}` whose power-of-two part
/// can run to tens of thousands of bits; keeping that exponent symbolic makes
/// comparisons cheap (see [`cmp_shifted`]) where the reduced `Rat` form would
/// allocate kilobyte denominators per event.
#[derive(Clone, Debug)]
pub struct DyadicPos {
    pub n: BigInt,
    pub odd: BigInt,
    pub e: i64,
}

impl DyadicPos {
    /// `r·2^{−extra_pow2}` in factored form.
    pub fn from_rat_shifted(r: &Rat, extra_pow2: i64) -> DyadicPos {
        assert!(r.is_positive(), "factored positions must be positive");
        let d = r.denom();
        let tz = d.trailing_zeros().unwrap_or(0);
        DyadicPos {
            n: r.numer().clone(),
            odd: d >> tz as usize,
            e: tz as i64 + extra_pow2,
        }
    }

    pub fn from_rat(r: &Rat) -> DyadicPos {
        DyadicPos::from_rat_shifted(r, 0)
    }

    /// Materialize the exact rational (allocates the full power of two).
    pub fn to_rat(&self) -> Rat {
        if self.e >= 0 {
            Rat::new(self.n.clone(), &self.odd << self.e as usize)
        } else {
            Rat::new(&self.n << (-self.e) as usize, self.odd.clone())
        }
    }

    pub fn cmp(&self, o: &DyadicPos) -> Ordering {
        cmp_shifted(&(&self.n * &o.odd), &(&o.n * &self.odd), self.e - o.e)
    }

    /// Exact ⌊log₂·⌋ without materializing the value.
    pub fn floor_log2(&self) -> i64 {
        let k = bit_len(&self.n) as i64 - bit_len(&self.odd) as i64 - self.e;
        let at_least = cmp_shifted(&self.n, &self.odd, self.e + k) != Ordering::Less;
        if at_least {
            k
        } else {
            k - 1
        }
    }
}

/// Decimal rendering of a rational to `digits` fractional digits, truncated
/// toward zero.  Used only for human-facing report fields; never parsed back.
pub fn decimal_string(r: &Rat, digits: u32) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = num_integer::Integer::div_floor(&(a.numer() * &scale), a.denom());
    let (int_part, frac_part) = num_integer::Integer::div_rem(&scaled, &scale);
    let frac_digits = format!("{:0>width$}", frac_part.to_string(), width = digits as usize);
    let sign = if neg && !scaled.is_zero() { "-" } else { "" };
    format!("{sign}{int_part}.{frac_digits}")
}

/// Bit length of |n| (0 for n = 0); handy for magnitude heuristics.
pub fn bit_len(n: &BigInt) -> u64 {
    if n.is_zero() {
        0
    } else {
        n.bits()
    }
}

/// Sign as −1, 0, or 1.
pub fn sign_of(r: &Rat) -> i8 {
    match r.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

pub mod serde_rat {
    //! `#[serde(with = "serde_rat")]` — rational as `"p/q"` string.
    use super::{format_rat, parse_rat, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(de::Error::custom)
    }
}

pub mod serde_rat_vec {
    //! `#[serde(with = "serde_rat_vec")]` — vector of `"p/q"` strings.
    use super::{format_rat, parse_rat, Rat};
    use serde::{de, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rat(r))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter()
            .map(|s| parse_rat(s).map_err(de::Error::custom))
            .collect()
    }
}

pub mod serde_rat_opt {
    //! `#[serde(with = "serde_rat_opt")]` — optional rational.
    use super::{format_rat, parse_rat, Rat};
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_rat(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rat>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| parse_rat(&s).map_err(de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3/4", "-7/2", "5", "0", "-12", "1000000000000000000000/7"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(format_rat(&r), s);
        }
        // non-canonical input normalizes
        assert_eq!(format_rat(&parse_rat("6/8").unwrap()), "3/4");
        assert_eq!(format_rat(&parse_rat("4/-6").unwrap()), "-2/3");
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn pow_handles_negative_exponents() {
        let r = rat(2, 3);
        assert_eq!(pow_rat(&r, 3), rat(8, 27));
        assert_eq!(pow_rat(&r, -2), rat(9, 4));
        assert_eq!(pow_rat(&r, 0), rat_int(1));
    }

    #[test]
    fn tree_sum_matches_fold() {
        let terms: Vec<Rat> = (1..=200).map(|t| rat(1, t)).collect();
        let fold: Rat = terms.iter().cloned().sum();
        assert_eq!(tree_sum(terms), fold);
    }

    #[test]
    fn factored_positions_order_like_rationals() {
        use std::cmp::Ordering;
        // values: 3/4, 3/(4·2^1000), 5/(7·2^1000), 1, 2^−1000
        let probes: Vec<(Rat, i64)> = vec![
            (rat(3, 4), 0),
            (rat(3, 4), 1000),
            (rat(5, 7), 1000),
            (rat_int(1), 0),
            (rat_int(1), 1000),
        ];
        let facs: Vec<DyadicPos> = probes
            .iter()
            .map(|(r, sh)| DyadicPos::from_rat_shifted(r, *sh))
            .collect();
        let rats: Vec<Rat> = probes
            .iter()
            .map(|(r, sh)| r * pow_rat(&rat(1, 2), *sh))
            .collect();
        for i in 0..facs.len() {
            assert_eq!(facs[i].to_rat(), rats[i]);
            assert_eq!(
                floor_log2_rat(&rats[i]),
                facs[i].floor_log2(),
                "floor_log2 mismatch at probe {i}"
            );
            for j in 0..facs.len() {
                assert_eq!(
                    facs[i].cmp(&facs[j]),
                    rats[i].cmp(&rats[j]),
                    "order mismatch at probes {i},{j}"
                );
            }
        }
        assert_eq!(cmp_shifted(&BigInt::from(5), &BigInt::from(5), 0), Ordering::Equal);
        assert_eq!(cmp_shifted(&BigInt::from(9), &BigInt::from(5), 1), Ordering::Less);
        assert_eq!(cmp_shifted(&BigInt::from(11), &BigInt::from(5), 1), Ordering::Greater);
    }

    #[test]
    fn floor_log2_exact_on_powers_and_neighbors() {
        assert_eq!(floor_log2_rat(&rat_int(1)), 0);
        assert_eq!(floor_log2_rat(&rat_int(2)), 1);
        assert_eq!(floor_log2_rat(&rat(1, 2)), -1);
        assert_eq!(floor_log2_rat(&rat(3, 4)), -1);
        assert_eq!(floor_log2_rat(&rat(4, 3)), 0);
        assert_eq!(floor_log2_rat(&rat(1023, 1)), 9);
        assert_eq!(floor_log2_rat(&rat(1024, 1)), 10);
        assert_eq!(floor_log2_rat(&rat(1, 1024)), -10);
        assert_eq!(floor_log2_rat(&rat(1, 1023)), -10);
        assert_eq!(floor_log2_rat(&rat(7, 5)), 0);
        assert_eq!(floor_log2_rat(&rat(13, 3)), 2);
    }

    #[test]
    fn fxsum_encloses_exact_value() {
        let mut fx = FxSum::new(64);
        let mut exact = Rat::zero();
        for t in 1..=500i64 {
            let r = rat(1, t);
            fx.add(&r);
            exact += &r;
        }
        for t in 1..=100i64 {
            let r = rat(1, 2 * t + 1);
            fx.sub(&r);
            exact -= &r;
        }
        let (lo, hi) = fx.bounds();
        assert!(lo <= exact && exact <= hi);
        // width ≤ ops · 2^(1-64)
        assert!(&hi - &lo <= rat_int(600) * pow_rat(&rat(1, 2), 63));
    }

    #[test]
    fn fxsum_is_exact_on_dyadics() {
        let mut fx = FxSum::new(80);
        for e in 0..40 {
            fx.add(&pow_rat(&rat(1, 2), e));
        }
        let (lo, hi) = fx.bounds();
        assert_eq!(lo, hi);
        assert_eq!(lo, rat_int(2) - pow_rat(&rat(1, 2), 39));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_string(&rat(1, 3), 6), "0.333333");
        assert_eq!(decimal_string(&rat(-22, 7), 4), "-3.1428");
        assert_eq!(decimal_string(&rat_int(5), 2), "5.00");
        assert_eq!(decimal_string(&rat(1, 1000), 2), "0.00");
    }

    #[test]
    fn floor_ceil() {
        assert_eq!(floor_int(&rat(7, 2)), BigInt::from(3));
        assert_eq!(ceil_int(&rat(7, 2)), BigInt::from(4));
        assert_eq!(floor_int(&rat(-7, 2)), BigInt::from(-4));
        assert_eq!(ceil_int(&rat(-7, 2)), BigInt::from(-3));
    }
}
