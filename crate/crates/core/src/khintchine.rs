//! Multiplicative averaging operators and the geometry that controls their
//! divergence rates.
//!
//! The central object is the average `(1/|E|) Σ_{s∈E} f(sx mod 1)` of a step
//! function along a finite set of integer multipliers — most interestingly an
//! initial segment `S_N` of a multiplicative semigroup.  Everything here runs
//! on exact rationals; where a genuinely irrational quantity enters (`ln 2`,
//! `e^K`, fractional powers) it is handled through certified enclosures or the
//! symbolic `q₀ + Σ c_p ln p` representation from [`crate::precise`].
//!
//! Contents:
//!
//! * **Multiplicative averages.**  [`khintchine_sum`] and
//!   [`khintchine_average`] accumulate `f(nx mod 1)` exactly;
//!   [`scaled_sum_profile`] tabulates the sums against a chosen normalizer
//!   without passing judgment (useful for open-ended `L¹` experiments).
//! * **Additive models.**  Taking logarithms turns dilation into translation.
//!   [`LogStepFunction`] keeps the multiplicative picture (so cell endpoints
//!   stay rational) while exposing additive-side averages: exact at rational
//!   multiplicative probes, certified-interval at transcendental additive
//!   probes, with an explicit `widened` flag whenever a probe enclosure
//!   straddles a cell boundary — the evaluator never claims exactness it
//!   cannot prove.
//! * **A weak-type lower-bound construction.**  [`khintchine_lower`] builds
//!   the dilation averages of `2·1_[1,4)` over `n ≤ 2^j`, certifies that their
//!   maximum exceeds 1 on a union of octaves of total additive measure
//!   `|J|·ln 2`, and certifies the resulting weak-norm/strong-norm ratio
//!   against the target `2^{−1−1/p} (ln 2)^{1/p} |J|^{1/p}`.
//! * **Tower transfer.**  [`tower_transfer`] realizes the index-matching
//!   abstraction behind conjugating a product-of-primes action to a
//!   translation action: on a `d`-dimensional tower of side `N`, relabel the
//!   base by a permutation and verify cell-by-cell that averages over boxes of
//!   side `r` agree on the core `{r ≤ n_i < N}`, whose mass is
//!   `((N−r)/N)^d (1−ε)`.
//! * **Growth profiles.**  [`GrowthProfile`] turns a nondecreasing sequence
//!   `h` into its increment ratios `c_n = (h_n − h_{n−1})/h_n` and their weak
//!   `1`-norm `d = sup_k k·t_k`; [`weakbound_check`] certifies the companion
//!   upper bound `h_n ≤ e·K·n^d` with
//!   `K = h_1 Π_{j=2}^{2⌈d⌉−1} (1−t_j)^{−1}`, and [`growth_divergence`]
//!   certifies the matching lower bound: the averages of `1_[0,2)` along a
//!   nondecreasing time sequence exceed `c_n` on `[n, n+1)`.
//! * **Semigroup geometry.**  [`semigroup_enumerate`] lists
//!   `S_N = {s ≤ N}` for a finitely generated multiplicative semigroup,
//!   [`folner_check`] measures translation-invariance and difference-set
//!   growth in exponent coordinates, [`lattice_count`] counts lattice points
//!   under the hyperplane `Σ a_i ln p_i ≤ y` with certified comparisons, and
//!   [`dichotomy_report`] assembles the horizon-qualified verdict: stable
//!   prime support points toward the amenable (convergence) side, growing
//!   support toward super-polylogarithmic growth and divergence.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::measure::{pointwise_max, Domain, PowVal, StepFunction};
use crate::precise::{
    exp_iv, exp_rat, factorize, ln2, ln_iv, ln_rat, ln_u64, pow_rr, Ctx, Iv, LogReal,
};
use crate::rat::{
    bit_len, decimal_string, floor_int, pow_rat, rat, rat_big, rat_int, serde_rat, serde_rat_vec,
    Rat,
};

/// Errors for operations whose failure is part of the contract (as opposed to
/// caller mistakes, which panic).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KhintchineError {
    /// A Følner-type check was asked about a multiplier that is not an
    /// element of the sample it is supposed to translate.
    NotInSample { x: u64 },
    /// A tower transfer was requested with a power cap at least as large as
    /// the tower side, leaving no core to transfer on.
    DegenerateCore { power_cap: u32, side: u32 },
    /// A report over an empty family of samples.
    EmptySample,
    /// Anything else that makes the request unanswerable (overflow, broken
    /// closure, ...).
    Unsupported(String),
}

impl fmt::Display for KhintchineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KhintchineError::NotInSample { x } => {
                write!(f, "multiplier {x} is not an element of the sample")
            }
            KhintchineError::DegenerateCore { power_cap, side } => write!(
                f,
                "power cap {power_cap} leaves no core in a tower of side {side}"
            ),
            KhintchineError::EmptySample => write!(f, "no samples were provided"),
            KhintchineError::Unsupported(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for KhintchineError {}

// ─────────────────────── multiplicative averages ───────────────────────

fn frac(r: &Rat) -> Rat {
    r - rat_big(floor_int(r))
}

fn assert_unit_circle(f: &StepFunction) {
    match &f.domain {
        Domain::Circle { circumference } => assert!(
            circumference.is_one(),
            "multiplicative averages expect a circle of circumference 1"
        ),
        Domain::Window { .. } => panic!("multiplicative averages expect a circle domain"),
    }
}

/// `Σ_{n=1}^{N} f(nx mod 1)`, exactly.
pub fn khintchine_sum(f: &StepFunction, x: &Rat, n_max: u64) -> Rat {
    assert_unit_circle(f);
    assert!(n_max >= 1 && n_max <= 50_000_000, "sum horizon out of range");
    let mut y = Rat::zero();
    let mut total = Rat::zero();
    for _ in 0..n_max {
        y += x;
        if y >= Rat::one() {
            y = frac(&y);
        }
        total += f.eval(&y);
    }
    total
}

/// `(1/|E|) Σ_{s∈E} f(sx mod 1)` for an arbitrary finite multiplier set,
/// typically the elements of a semigroup sample.
pub fn khintchine_average(f: &StepFunction, x: &Rat, elements: &[u64]) -> Rat {
    assert_unit_circle(f);
    assert!(!elements.is_empty(), "average over an empty multiplier set");
    let mut total = Rat::zero();
    for &s in elements {
        let point = frac(&(x * rat_big(BigInt::from(s))));
        total += f.eval(&point);
    }
    total / rat_int(elements.len() as i64)
}

/// Normalizer for [`scaled_sum_profile`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumNormalizer {
    /// Divide the sum over `n ≤ N` by `N`.
    Linear,
    /// Divide by `N·max(1, ⌊log₂ N⌋)` — the scale at which the open question
    /// about ultimate badness of the averages in `L¹` lives.
    LinearLog2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaledSumRow {
    pub n: u64,
    #[serde(with = "serde_rat")]
    pub sum: Rat,
    #[serde(with = "serde_rat")]
    pub normalizer: Rat,
    #[serde(with = "serde_rat")]
    pub normalized: Rat,
}

/// Tabulate `Σ_{n≤N} f(nx mod 1)` against the chosen normalizer at the grid
/// points.  Purely observational: no inequality is asserted, because for the
/// interesting normalizer none is known.
pub fn scaled_sum_profile(
    f: &StepFunction,
    x: &Rat,
    grid: &[u64],
    normalizer: SumNormalizer,
) -> Vec<ScaledSumRow> {
    assert_unit_circle(f);
    assert!(!grid.is_empty(), "empty grid");
    assert!(
        grid.windows(2).all(|w| w[0] < w[1]),
        "grid must be strictly increasing"
    );
    let n_top = *grid.last().unwrap();
    assert!(n_top >= 1 && n_top <= 50_000_000, "grid out of range");
    let mut rows = Vec::with_capacity(grid.len());
    let mut y = Rat::zero();
    let mut sum = Rat::zero();
    let mut next = 0usize;
    for n in 1..=n_top {
        y += x;
        if y >= Rat::one() {
            y = frac(&y);
        }
        sum += f.eval(&y);
        if grid[next] == n {
            let normalizer = match normalizer {
                SumNormalizer::Linear => rat_int(n as i64),
                SumNormalizer::LinearLog2 => rat_int((n * u64::from(n.ilog2().max(1))) as i64),
            };
            rows.push(ScaledSumRow {
                n,
                sum: sum.clone(),
                normalized: &sum / &normalizer,
                normalizer,
            });
            next += 1;
            if next == grid.len() {
                break;
            }
        }
    }
    rows
}

// ───────────────────────── additive models ─────────────────────────

/// A step function of the additive variable `y`, stored in multiplicative
/// coordinates: `g(y) = mult(e^y)`.
///
/// `mult` lives on a window `[L, R)` with `L > 0`, so `g` is supported on
/// `[ln L, ln R)` and extended by zero outside.  Translating `g` by `−ln a`
/// is evaluation of `mult` at `u/a` — dilation — which keeps every cell
/// endpoint rational.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogStepFunction {
    pub mult: StepFunction,
}

impl LogStepFunction {
    pub fn new(mult: StepFunction) -> LogStepFunction {
        match &mult.domain {
            Domain::Window { left, .. } => assert!(
                left.is_positive(),
                "additive model needs a positive multiplicative window"
            ),
            Domain::Circle { .. } => panic!("additive model needs a window domain"),
        }
        LogStepFunction { mult }
    }

    fn window(&self) -> (&Rat, &Rat) {
        match &self.mult.domain {
            Domain::Window { left, right } => (left, right),
            Domain::Circle { .. } => unreachable!(),
        }
    }

    /// Value at the additive point `y = ln u`, i.e. `mult(u)`; zero outside
    /// the window.
    pub fn eval_mult(&self, u: &Rat) -> Rat {
        self.mult.eval(u)
    }
}

/// The average `(1/|I|) Σ_{a∈I} g(y − ln a)` at the additive point `y = ln u`,
/// evaluated exactly at the rational multiplicative probe `u`.
pub fn additive_average_at(g: &LogStepFunction, u: &Rat, times: &[u64]) -> Rat {
    assert!(!times.is_empty(), "average over an empty time set");
    let mut total = Rat::zero();
    for &a in times {
        assert!(a >= 1);
        total += g.mult.eval(&(u * rat(1, a as i64)));
    }
    total / rat_int(times.len() as i64)
}

/// Outcome of a certified additive-side evaluation.
#[derive(Clone, Debug)]
pub struct AdditiveValue {
    /// Enclosure of the average.
    pub value: Iv,
    /// True when some probe enclosure straddled a cell boundary across which
    /// the value actually changes, forcing the enclosure to widen.  A widened
    /// value is still correct — it just honestly reports the ambiguity.
    pub widened: bool,
    /// The exact value, when every probe landed provably inside one cell.
    pub exact: Option<Rat>,
}

/// The same average at an additive point given only as an enclosure `y`
/// (say `y = ln 2`).  Each translate is located against the cell structure of
/// `g`; probes that provably sit inside a single cell contribute exactly,
/// probes straddling a boundary contribute the span of the touched values.
pub fn additive_average(g: &LogStepFunction, y: &Iv, times: &[u64], ctx: Ctx) -> AdditiveValue {
    assert!(!times.is_empty(), "average over an empty time set");
    let u = exp_iv(y, ctx);
    let (left, right) = g.window();
    let cells = g.mult.cells();
    let mut total = Iv::point(Rat::zero());
    let mut widened = false;
    for &a in times {
        assert!(a >= 1);
        let inv = rat(1, a as i64);
        let lo = &u.lo * &inv;
        let hi = &u.hi * &inv;
        let mut vmin: Option<Rat> = None;
        let mut vmax: Option<Rat> = None;
        let mut push = |v: Rat| {
            if vmin.as_ref().is_none_or(|m| v < *m) {
                vmin = Some(v.clone());
            }
            if vmax.as_ref().is_none_or(|m| v > *m) {
                vmax = Some(v);
            }
        };
        if lo < *left || hi >= *right {
            push(Rat::zero());
        }
        for (cl, cr, v) in &cells {
            if *cl <= hi && *cr > lo {
                push(v.clone());
            }
        }
        let (vmin, vmax) = (vmin.unwrap(), vmax.unwrap());
        if vmin != vmax {
            widened = true;
        }
        total = total.add(&Iv::new(vmin, vmax));
    }
    let value = total.scale(&rat(1, times.len() as i64));
    let exact = if widened {
        None
    } else {
        Some(value.lo.clone())
    };
    AdditiveValue {
        value,
        widened,
        exact,
    }
}

/// The additive-side average `(1/|I|) Σ_{a∈I} g(y − ln a)` as a function:
/// in multiplicative coordinates `u ↦ (1/|I|) Σ_a mult(u/a)`, restricted to
/// the window `[left, right)`.  Mass dilated past `right` is clipped; the
/// callers below only certify values well inside the window.
pub fn dilated_average(
    g: &LogStepFunction,
    times: &[u64],
    left: &Rat,
    right: &Rat,
) -> LogStepFunction {
    assert!(!times.is_empty(), "average over an empty time set");
    assert!(left.is_positive() && left < right);
    let mut base = Rat::zero();
    let mut events: Vec<(Rat, Rat)> = Vec::new();
    for &a in times {
        assert!(a >= 1);
        let mult = rat_int(a as i64);
        for (cl, cr, v) in g.mult.cells() {
            if v.is_zero() {
                continue;
            }
            let s = cl * &mult;
            let e = cr * &mult;
            if s >= *right || e <= *left {
                continue;
            }
            if s <= *left {
                base += &v;
            } else {
                events.push((s, v.clone()));
            }
            if e < *right {
                events.push((e, -v));
            }
        }
    }
    events.sort_by(|a, b| a.0.cmp(&b.0));
    let mut breakpoints = Vec::new();
    let mut values = vec![base.clone()];
    let mut acc = base;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0.clone();
        let mut delta = Rat::zero();
        while i < events.len() && events[i].0 == pos {
            delta += &events[i].1;
            i += 1;
        }
        if delta.is_zero() {
            continue;
        }
        acc += delta;
        breakpoints.push(pos);
        values.push(acc.clone());
    }
    let coeff = rat(1, times.len() as i64);
    let f = StepFunction {
        domain: Domain::window(left.clone(), right.clone()),
        breakpoints,
        values: values.into_iter().map(|v| v * &coeff).collect(),
    };
    LogStepFunction::new(f.canonicalized())
}

// ─────────────────── weak-type lower-bound construction ───────────────────

/// One certified multiplicative interval `[lo, hi)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertifiedSpan {
    #[serde(with = "serde_rat")]
    pub lo: Rat,
    #[serde(with = "serde_rat")]
    pub hi: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KhintchineLowerReport {
    pub j_set: Vec<u32>,
    #[serde(with = "serde_rat")]
    pub p: Rat,
    /// `max_j B_j` in multiplicative coordinates, where `B_j` is the dilation
    /// average of `2·1_[1,4)` over `a ≤ 2^j`.
    pub profile: StepFunction,
    /// Octaves `[2^j, 2^{j+1})`, `j ∈ J`, on which the max is certified `≥ 1`.
    pub certified_spans: Vec<CertifiedSpan>,
    /// The certified set has additive measure exactly `ln2_multiple · ln 2`.
    #[serde(with = "serde_rat")]
    pub ln2_multiple: Rat,
    /// Numeric enclosure of that measure.
    pub certified_measure: PowVal,
    /// `‖g‖_p^p = 2^{p+1} ln 2`.
    pub strong_pow: PowVal,
    /// Certified lower bound `(|J| / 2^{p+1})^{1/p}` for the ratio
    /// `‖max_j B_j g‖_{p,∞} / ‖g‖_p`.
    pub ratio_lower: PowVal,
    /// The target `2^{−1−1/p} (ln 2)^{1/p} |J|^{1/p}` the ratio is certified
    /// to dominate.
    pub target: PowVal,
    pub ratio_decimal: String,
}

/// Build the averages `B_j g`, `g = 2·1_[0, 2 ln 2)` in additive coordinates
/// (`2·1_[1,4)` multiplicatively), over the times `{1, …, 2^j}` for `j ∈ J`;
/// certify that `max_j B_j g ≥ 1` on the disjoint octaves `[2^j, 2^{j+1})`,
/// whose total additive measure is exactly `|J| ln 2`; and certify the
/// weak-norm/strong-norm ratio against `2^{−1−1/p} (ln 2)^{1/p} |J|^{1/p}`.
///
/// The full exceedance set of the max is strictly larger than the certified
/// union (the average over `{1}` alone already exceeds 1 on `[1, 2)`); the
/// report quantifies exactly the part that carries the certificate.
pub fn khintchine_lower(j_set: &[u32], p: &Rat, ctx: Ctx) -> KhintchineLowerReport {
    assert!(!j_set.is_empty(), "empty exponent set");
    assert!(
        j_set.windows(2).all(|w| w[0] < w[1]),
        "exponent set must be strictly increasing"
    );
    let j_max = *j_set.last().unwrap();
    assert!(j_max <= 20, "exponent set out of range");
    assert!(*p >= Rat::one(), "exponent p must be at least 1");

    let one = Rat::one();
    let left = one.clone();
    let right = {
        let r = pow_rat(&rat_int(2), i64::from(j_max) + 1);
        if r < rat_int(4) {
            rat_int(4)
        } else {
            r
        }
    };
    let g = LogStepFunction::new(StepFunction::indicator(
        Domain::window(left.clone(), right.clone()),
        &one,
        &rat_int(3),
        rat_int(2),
    ));

    let averages: Vec<StepFunction> = j_set
        .iter()
        .map(|&j| {
            let times: Vec<u64> = (1..=(1u64 << j)).collect();
            dilated_average(&g, &times, &left, &right).mult
        })
        .collect();
    let profile = pointwise_max(&averages);

    // Certify exceedance octave by octave and account for the measure both
    // symbolically and numerically.
    let mut certified_spans = Vec::new();
    let mut measure = LogReal::zero();
    let cells = profile.cells();
    for &j in j_set {
        let olo = pow_rat(&rat_int(2), i64::from(j));
        let ohi = pow_rat(&rat_int(2), i64::from(j) + 1);
        let mut covered = Rat::zero();
        for (cl, cr, v) in &cells {
            let lo = if *cl > olo { cl.clone() } else { olo.clone() };
            let hi = if *cr < ohi { cr.clone() } else { ohi.clone() };
            if lo < hi {
                assert!(
                    *v >= one,
                    "average fell below 1 at a cell of the certified octave [{olo}, {ohi})"
                );
                covered += hi - lo;
            }
        }
        assert_eq!(covered, &ohi - &olo, "octave not fully covered by cells");
        measure = measure.add(&LogReal::ln_of_rat(&(&ohi / &olo), Rat::one()));
        certified_spans.push(CertifiedSpan { lo: olo, hi: ohi });
    }
    let count = rat_int(j_set.len() as i64);
    let ideal = LogReal::ln_int(2, count.clone());
    assert!(
        measure.sub(&ideal).is_zero(),
        "certified measure is not an exact multiple of ln 2"
    );
    let measure_iv = measure.eval(ctx);
    let ideal_iv = ln2(ctx).scale(&count);
    let diff = measure_iv.sub(&ideal_iv);
    let tol = pow_rat(&rat_int(10), -25);
    assert!(
        diff.lo.abs() <= tol && diff.hi.abs() <= tol,
        "certified measure drifted from |J|·ln 2 beyond 1e-25"
    );

    // Norm bookkeeping.  ‖g‖_p^p = 2^p · 2 ln 2.
    let p_plus_1 = p + &one;
    let inv_p = p.recip();
    let strong_iv = pow_rr(&rat_int(2), &p_plus_1, ctx).mul(&ln2(ctx));
    // Weak norm of the max is at least (level 1)·(measure)^{1/p}; dividing by
    // ‖g‖_p = (2^{p+1} ln 2)^{1/p} cancels the ln 2 and leaves the clean
    // rational-power lower bound (|J|/2^{p+1})^{1/p}.
    let ratio_iv = if p_plus_1.is_integer() {
        let base = &count * pow_rat(&rat(1, 2), p_plus_1.to_integer().to_i64().unwrap());
        pow_rr(&base, &inv_p, ctx)
    } else {
        let expo = -(&p_plus_1 * &inv_p);
        pow_rr(&count, &inv_p, ctx).mul(&pow_rr(&rat_int(2), &expo, ctx))
    };
    let ln2_pow = exp_iv(&ln_iv(&ln2(ctx), ctx).scale(&inv_p), ctx);
    let target_iv = pow_rr(&rat_int(2), &-(&one + &inv_p), ctx)
        .mul(&ln2_pow)
        .mul(&pow_rr(&count, &inv_p, ctx));
    assert!(
        ratio_iv.lo >= target_iv.hi,
        "failed to certify the weak/strong ratio against the target"
    );

    KhintchineLowerReport {
        j_set: j_set.to_vec(),
        p: p.clone(),
        profile,
        certified_spans,
        ln2_multiple: count,
        certified_measure: PowVal::from_iv(measure_iv),
        strong_pow: PowVal::from_iv(strong_iv),
        ratio_decimal: decimal_string(&ratio_iv.lo, 12),
        ratio_lower: PowVal::from_iv(ratio_iv),
        target: PowVal::from_iv(target_iv),
    }
}

// ───────────────────────── tower transfer ─────────────────────────

/// A `d`-dimensional tower: cells indexed by `{0, …, side−1}^d`, each cell a
/// list of `base_size` values (one per base atom), each carrying mass
/// `(1−error_mass)/side^d / base_size`-proportional weight; `error_mass` is
/// the part of the space outside the tower.
#[derive(Clone, Debug)]
pub struct TowerModel {
    pub dim: usize,
    pub side: u32,
    pub base_size: usize,
    /// Row-major over the index box: `flat = Σ idx[i]·side^{d−1−i}`.
    pub cells: Vec<Vec<Rat>>,
    pub error_mass: Rat,
}

impl TowerModel {
    pub fn new(dim: usize, side: u32, base_size: usize, error_mass: Rat) -> TowerModel {
        assert!(dim >= 1 && side >= 1 && base_size >= 1);
        assert!(!error_mass.is_negative() && error_mass < Rat::one());
        let count = (side as usize)
            .checked_pow(dim as u32)
            .filter(|&c| c.checked_mul(base_size).is_some_and(|t| t <= 1 << 24))
            .expect("tower too large");
        TowerModel {
            dim,
            side,
            base_size,
            cells: vec![vec![Rat::zero(); base_size]; count],
            error_mass,
        }
    }

    pub fn cell_count(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }

    /// Mass of one cell: the tower carries `1 − error_mass` spread uniformly.
    pub fn cell_mass(&self) -> Rat {
        (Rat::one() - &self.error_mass) / rat_int(self.cell_count() as i64)
    }

    pub fn flat_index(&self, idx: &[u32]) -> usize {
        assert_eq!(idx.len(), self.dim);
        let mut flat = 0usize;
        for &i in idx {
            assert!(i < self.side);
            flat = flat * self.side as usize + i as usize;
        }
        flat
    }

    fn coords(&self, mut flat: usize) -> Vec<u32> {
        let mut idx = vec![0u32; self.dim];
        for k in (0..self.dim).rev() {
            idx[k] = (flat % self.side as usize) as u32;
            flat /= self.side as usize;
        }
        idx
    }

    pub fn set_value(&mut self, idx: &[u32], atom: usize, v: Rat) {
        let flat = self.flat_index(idx);
        self.cells[flat][atom] = v;
    }
}

#[derive(Clone, Debug)]
pub struct TransferReport {
    /// Per flat cell index: does the cell lie in the core `{r ≤ n_i < N}`?
    pub core_mask: Vec<bool>,
    pub core_cells: u64,
    /// `((N−r)/N)^d (1−ε)`, asserted equal to `core_cells · cell_mass`.
    pub core_mass: Rat,
    pub probes_checked: u64,
}

/// Transfer a tower through a base relabelling.
///
/// The source models one system, the destination the conjugated one: atom `b`
/// of the destination base is atom `base_map[b]` of the source base, and every
/// cell keeps its height coordinates.  With values propagated that way, any
/// average over a power box `v ∈ {0,…,r}^d` taken at a core cell sees
/// literally identical summands in both towers — verified here exhaustively,
/// together with equality of the box maxima.  A power cap `r ≥ side` leaves
/// no core and is rejected.
pub fn tower_transfer(
    src: &TowerModel,
    power_cap: u32,
    base_map: &[usize],
) -> Result<(TowerModel, TransferReport), KhintchineError> {
    if power_cap >= src.side {
        return Err(KhintchineError::DegenerateCore {
            power_cap,
            side: src.side,
        });
    }
    assert_eq!(base_map.len(), src.base_size, "base map has the wrong size");
    let mut seen = base_map.to_vec();
    seen.sort_unstable();
    assert!(
        seen.iter().enumerate().all(|(i, &b)| i == b),
        "base map must be a permutation"
    );

    let count = src.cell_count();
    let mut dst = TowerModel::new(src.dim, src.side, src.base_size, src.error_mass.clone());
    for flat in 0..count {
        for b in 0..src.base_size {
            dst.cells[flat][b] = src.cells[flat][base_map[b]].clone();
        }
    }

    let r = power_cap as usize;
    let mut core_mask = vec![false; count];
    let mut core_cells = 0u64;
    for (flat, slot) in core_mask.iter_mut().enumerate() {
        if src.coords(flat).iter().all(|&i| i as usize >= r) {
            *slot = true;
            core_cells += 1;
        }
    }
    let box_size = (r + 1).pow(src.dim as u32) as u64;
    let budget = core_cells * box_size * src.base_size as u64;
    assert!(budget <= 1 << 24, "tower verification budget exceeded");

    // Exhaustive check: from every core cell, looking back v steps for every
    // v in the power box, the destination sees exactly the relabelled source.
    let mut probes_checked = 0u64;
    let mut offsets = vec![vec![0usize]; 0];
    {
        // Enumerate the box {0,…,r}^d as flat offsets via mixed-radix count.
        let mut v = vec![0usize; src.dim];
        loop {
            offsets.push(v.clone());
            let mut k = src.dim;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if v[k] < r {
                    v[k] += 1;
                    break;
                }
                v[k] = 0;
                if k == 0 {
                    v.clear();
                    break;
                }
            }
            if v.is_empty() {
                break;
            }
        }
    }
    for flat in 0..count {
        if !core_mask[flat] {
            continue;
        }
        let m = src.coords(flat);
        for b in 0..src.base_size {
            let mut max_dst: Option<&Rat> = None;
            let mut max_src: Option<&Rat> = None;
            for v in &offsets {
                let mut back = 0usize;
                for (mi, vi) in m.iter().zip(v) {
                    back = back * src.side as usize + (*mi as usize - *vi);
                }
                let dv = &dst.cells[back][b];
                let sv = &src.cells[back][base_map[b]];
                assert_eq!(dv, sv, "transfer mismatch at a core probe");
                if max_dst.is_none_or(|m| dv > m) {
                    max_dst = Some(dv);
                }
                if max_src.is_none_or(|m| sv > m) {
                    max_src = Some(sv);
                }
                probes_checked += 1;
            }
            assert_eq!(max_dst, max_src, "box maxima differ at a core cell");
        }
    }

    let n = rat_int(src.side as i64);
    let core_mass = pow_rat(&((&n - rat_int(r as i64)) / &n), src.dim as i64)
        * (Rat::one() - &src.error_mass);
    assert_eq!(
        core_mass,
        rat_int(core_cells as i64) * src.cell_mass(),
        "core mass bookkeeping is inconsistent"
    );

    Ok((
        dst,
        TransferReport {
            core_mask,
            core_cells,
            core_mass,
            probes_checked,
        },
    ))
}

// ───────────────────────── growth profiles ─────────────────────────

/// Weak 1-norm of a finite nonnegative sequence: `max_k k·t_k` over the
/// decreasing rearrangement `t`.
fn seq_weak1(values: &[Rat]) -> Rat {
    let mut t: Vec<Rat> = values.to_vec();
    t.sort_by(|a, b| b.cmp(a));
    let mut best = Rat::zero();
    for (k, v) in t.iter().enumerate() {
        let cand = rat_int((k + 1) as i64) * v;
        if cand > best {
            best = cand;
        }
    }
    best
}

/// A nondecreasing sequence `h` together with its increment ratios
/// `c_n = (h_n − h_{n−1})/h_n` (with `h_0 = 0`, so `c_1 = 1` whenever
/// `h_1 > 0`) and the weak 1-norm of `c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthProfile {
    #[serde(with = "serde_rat_vec")]
    pub h: Vec<Rat>,
    #[serde(with = "serde_rat_vec")]
    pub c: Vec<Rat>,
    #[serde(with = "serde_rat")]
    pub weak_norm_c: Rat,
    pub weak_norm_decimal: String,
}

impl GrowthProfile {
    pub fn new(h: Vec<Rat>) -> GrowthProfile {
        assert!(!h.is_empty(), "empty growth sequence");
        assert!(!h[0].is_negative(), "growth sequence must be nonnegative");
        assert!(
            h.windows(2).all(|w| w[0] <= w[1]),
            "growth sequence must be nondecreasing"
        );
        let mut c = Vec::with_capacity(h.len());
        let mut prev = Rat::zero();
        for v in &h {
            c.push(if v.is_zero() {
                Rat::zero()
            } else {
                (v - &prev) / v
            });
            prev = v.clone();
        }
        debug_assert!(c.iter().all(|v| !v.is_negative() && *v <= Rat::one()));
        let weak_norm_c = seq_weak1(&c);
        GrowthProfile {
            h,
            c,
            weak_norm_decimal: decimal_string(&weak_norm_c, 12),
            weak_norm_c,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakboundReport {
    pub horizon: usize,
    /// `d = ‖c‖_{1,∞}`.
    #[serde(with = "serde_rat")]
    pub d: Rat,
    /// `K = h_1 Π_{j=2}^{min(2⌈d⌉−1, T)} (1−t_j)^{−1}`, an exact rational.
    #[serde(with = "serde_rat")]
    pub k_const: Rat,
    /// Number of index segments the fast filter certified in one stroke.
    pub segments: u64,
    /// Number of indices that needed an escalating exact certification.
    pub exact_checks: u64,
}

fn ln_f64_big(n: &BigInt) -> f64 {
    let bits = bit_len(n);
    if bits <= 900 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a positive rational, good to ~1e-14 relative even when the
/// numerator and denominator are thousands of bits wide.
fn ln_f64_rat(r: &Rat) -> f64 {
    debug_assert!(r.is_positive());
    ln_f64_big(r.numer()) - ln_f64_big(r.denom())
}

/// Certify `h_n ≤ e·K·n^d` for every `n` up to the profile's horizon, with
/// `d` and `K` exactly as above.
///
/// The comparison happens in the log domain.  A float filter with a relative
/// safety margin dispatches whole index segments at once — certifying the
/// last index of a segment against the first index's right-hand side covers
/// the segment, since `h` and `n^d` are both nondecreasing (`d ≥ 1`).  Points
/// the filter cannot clear get an escalating interval certification; a
/// certified violation panics, because the bound is a theorem.
pub fn weakbound_check(profile: &GrowthProfile) -> WeakboundReport {
    let h = &profile.h;
    let horizon = h.len();
    assert!(h[0].is_positive(), "the growth bound needs h_1 > 0");
    let d = profile.weak_norm_c.clone();
    debug_assert!(d >= Rat::one());

    let mut t: Vec<Rat> = profile.c.clone();
    t.sort_by(|a, b| b.cmp(a));
    let two_ceil_d = 2 * floor_int(&d).to_usize().expect("norm out of range")
        + if d.is_integer() { 0 } else { 2 };
    let j_top = (two_ceil_d.max(2) - 1).min(horizon);
    let mut k_const = h[0].clone();
    for tj in t.iter().take(j_top).skip(1) {
        assert!(*tj < Rat::one(), "a repeated full increment is impossible");
        k_const /= Rat::one() - tj;
    }

    let ln_k = ln_f64_rat(&k_const);
    let d_f = f64::exp(ln_f64_rat(&d));
    let fast_ok = |h_val: &Rat, n_seg: usize| -> bool {
        let lhs = ln_f64_rat(h_val);
        let rhs = 1.0 + ln_k + d_f * (n_seg as f64).ln();
        if !lhs.is_finite() || !rhs.is_finite() {
            return false;
        }
        let margin = 1e-6 * (1.0 + lhs.abs().max(rhs.abs()));
        lhs <= rhs - margin
    };
    let certify_exact = |n: usize| {
        let mut ctx = Ctx::default();
        loop {
            let lhs = ln_rat(&h[n - 1], ctx);
            let rhs = Iv::point(Rat::one())
                .add(&ln_rat(&k_const, ctx))
                .add(&ln_u64(n as u64, ctx).scale(&d));
            if lhs.hi <= rhs.lo {
                return;
            }
            assert!(
                lhs.lo <= rhs.hi,
                "certified violation of the growth bound at n = {n}"
            );
            assert!(ctx.bits < 1 << 15, "precision exhausted certifying n = {n}");
            ctx = Ctx::with_bits(ctx.bits * 2);
        }
    };

    let mut segments = 0u64;
    let mut exact_checks = 0u64;
    let mut lo = 1usize;
    while lo <= horizon {
        if fast_ok(&h[horizon - 1], lo) {
            segments += 1;
            break;
        }
        if fast_ok(&h[lo - 1], lo) {
            // Largest hi with a passing filter; monotone, so binary search.
            let (mut a, mut b) = (lo, horizon);
            while a < b {
                let mid = (a + b + 1) / 2;
                if fast_ok(&h[mid - 1], lo) {
                    a = mid;
                } else {
                    b = mid - 1;
                }
            }
            segments += 1;
            lo = a + 1;
        } else {
            certify_exact(lo);
            exact_checks += 1;
            lo += 1;
        }
    }

    WeakboundReport {
        horizon,
        d,
        k_const,
        segments,
        exact_checks,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthDivergenceReport {
    pub horizon: u64,
    pub profile: GrowthProfile,
    /// Windows `[n, n+1)` with `h(n) > 0` on which the exceedance was
    /// certified.
    pub certified_windows: u64,
    pub probes_checked: u64,
}

/// Counting lower bound for divergence: given a nondecreasing time sequence
/// `t`, set `h(N) = #{n : t_n ≤ N}` and `g = 1_[0,2)`.  The average
/// `B_N g(x) = (1/h(N)) Σ_{t_n ≤ N} g(x − t_n)` counts times in `(x−2, x]`;
/// for `x ∈ [N, N+1)` the times in `(N−1, N]` always qualify, so
/// `B_N g ≥ c_N` there.  Verified at three rational probes per window, which
/// suffices: on `[N, N+1)` the count is piecewise monotone in the probe only
/// through which times enter and leave, and the certified inequality is
/// against the window-independent constant `c_N`.
pub fn growth_divergence(t_seq: &[Rat], horizon: u64) -> GrowthDivergenceReport {
    assert!(!t_seq.is_empty(), "empty time sequence");
    assert!(
        t_seq.windows(2).all(|w| w[0] <= w[1]),
        "time sequence must be nondecreasing"
    );
    assert!((1..=1_000_000).contains(&horizon), "horizon out of range");

    let mut h = Vec::with_capacity(horizon as usize);
    let mut ptr = 0usize;
    for n in 1..=horizon {
        let bound = rat_int(n as i64);
        while ptr < t_seq.len() && t_seq[ptr] <= bound {
            ptr += 1;
        }
        h.push(rat_int(ptr as i64));
    }
    let profile = GrowthProfile::new(h);

    let mut certified_windows = 0u64;
    let mut probes_checked = 0u64;
    let two = rat_int(2);
    for n in 1..=horizon as usize {
        if profile.h[n - 1].is_zero() {
            continue;
        }
        let base = rat_int(n as i64);
        for offset in [Rat::zero(), rat(1, 2), rat(1023, 1024)] {
            let x = &base + offset;
            let lo_cut = &x - &two;
            let below_lo = t_seq.partition_point(|v| *v <= lo_cut);
            let below_hi = t_seq.partition_point(|v| *v <= x);
            let value = rat_int((below_hi - below_lo) as i64) / &profile.h[n - 1];
            assert!(
                value >= profile.c[n - 1],
                "average fell below c_n at a probe of window [{n}, {n}+1)"
            );
            probes_checked += 1;
        }
        certified_windows += 1;
    }

    GrowthDivergenceReport {
        horizon,
        profile,
        certified_windows,
        probes_checked,
    }
}

// ───────────────────────── semigroup geometry ─────────────────────────

/// The elements `≤ bound` of a multiplicative semigroup of positive integers,
/// with their prime support and the dimension of the exponent lattice they
/// span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemigroupSample {
    /// Present when the sample came from a generator list.
    pub generators: Option<Vec<u64>>,
    pub bound: u64,
    /// Sorted ascending.
    pub elements: Vec<u64>,
    /// Primes dividing some element, sorted.
    pub prime_support: Vec<u64>,
    /// Rank over ℚ of the exponent vectors of the elements.
    pub lattice_dim: usize,
}

fn exponent_vector(n: u64, support: &[u64]) -> Vec<i64> {
    let mut v = vec![0i64; support.len()];
    for (p, e) in factorize(n) {
        let idx = support
            .binary_search(&p)
            .expect("element leaves the prime support");
        v[idx] = i64::from(e);
    }
    v
}

fn rational_rank(rows: &[Vec<i64>]) -> usize {
    let mut pivots: Vec<(usize, Vec<Rat>)> = Vec::new();
    for row in rows {
        let mut r: Vec<Rat> = row.iter().map(|&x| rat_int(x)).collect();
        for (col, pivot) in &pivots {
            if !r[*col].is_zero() {
                let factor = &r[*col] / &pivot[*col];
                for (cell, p) in r.iter_mut().zip(pivot) {
                    *cell -= &factor * p;
                }
            }
        }
        if let Some(col) = r.iter().position(|v| !v.is_zero()) {
            pivots.push((col, r));
        }
    }
    pivots.len()
}

fn verify_closure(elements: &[u64], bound: u64) {
    if elements.len().pow(2) > 40_000_000 {
        return;
    }
    for (i, &a) in elements.iter().enumerate() {
        for &b in &elements[i..] {
            match a.checked_mul(b) {
                Some(prod) if prod <= bound => {
                    assert!(
                        elements.binary_search(&prod).is_ok(),
                        "sample is not multiplicatively closed: {a}·{b} = {prod} is missing"
                    );
                }
                _ => {}
            }
        }
    }
}

/// Enumerate `S_N = {s ≤ n_max}` of the semigroup generated multiplicatively
/// by `generators`, in increasing order, by a min-heap walk.  The identity is
/// excluded unless `include_identity` is set: the empty product is a
/// convention, and counts like `|S_N|` are cleanest without it.
pub fn semigroup_enumerate(
    generators: &[u64],
    n_max: u64,
    include_identity: bool,
) -> SemigroupSample {
    assert!(!generators.is_empty(), "no generators");
    let mut gens = generators.to_vec();
    gens.sort_unstable();
    gens.dedup();
    assert!(gens[0] >= 2, "generators must be at least 2");
    assert!(n_max >= 1, "empty bound");

    let mut heap: BinaryHeap<Reverse<u64>> = gens
        .iter()
        .copied()
        .filter(|&g| g <= n_max)
        .map(Reverse)
        .collect();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut elements: Vec<u64> = Vec::new();
    while let Some(Reverse(m)) = heap.pop() {
        if !seen.insert(m) {
            continue;
        }
        elements.push(m);
        assert!(elements.len() <= 5_000_000, "semigroup sample too large");
        for &g in &gens {
            if let Some(next) = m.checked_mul(g) {
                if next <= n_max && !seen.contains(&next) {
                    heap.push(Reverse(next));
                }
            }
        }
    }
    if include_identity {
        elements.insert(0, 1);
    }

    let mut support: BTreeSet<u64> = BTreeSet::new();
    for &g in &gens {
        for (p, _) in factorize(g) {
            support.insert(p);
        }
    }
    let support: Vec<u64> = support.into_iter().collect();
    let vectors: Vec<Vec<i64>> = gens.iter().map(|&g| exponent_vector(g, &support)).collect();
    let lattice_dim = rational_rank(&vectors);
    verify_closure(&elements, n_max);

    SemigroupSample {
        generators: Some(gens),
        bound: n_max,
        elements,
        prime_support: support,
        lattice_dim,
    }
}

/// Package an explicitly listed element set (e.g. the perfect squares) as a
/// sample: filter to the bound, verify multiplicative closure, and compute
/// support and lattice rank from the elements themselves.
pub fn semigroup_from_elements(elements: &[u64], n_max: u64) -> SemigroupSample {
    let mut els: Vec<u64> = elements.iter().copied().filter(|&e| e <= n_max).collect();
    els.sort_unstable();
    els.dedup();
    assert!(!els.is_empty(), "no elements within the bound");
    assert!(els[0] >= 1);
    assert!(els.len() <= 5_000_000, "semigroup sample too large");

    let mut support: BTreeSet<u64> = BTreeSet::new();
    for &e in &els {
        for (p, _) in factorize(e) {
            support.insert(p);
        }
    }
    let support: Vec<u64> = support.into_iter().collect();
    let vectors: Vec<Vec<i64>> = els.iter().map(|&e| exponent_vector(e, &support)).collect();
    let lattice_dim = rational_rank(&vectors);
    verify_closure(&els, n_max);

    SemigroupSample {
        generators: None,
        bound: n_max,
        elements: els,
        prime_support: support,
        lattice_dim,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FolnerRow {
    pub n_max: u64,
    pub size: u64,
    /// `|x·S_N △ S_N|` with the translate not truncated at the bound.
    pub sym_diff: u64,
    #[serde(with = "serde_rat")]
    pub ratio: Rat,
    /// Same with the translate truncated to `≤ n_max`.
    pub sym_diff_truncated: u64,
    #[serde(with = "serde_rat")]
    pub ratio_truncated: Rat,
    /// `|S_N − S_N|` as a set of exponent-vector differences.
    pub diff_count: u64,
    #[serde(with = "serde_rat")]
    pub folner2_ratio: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FolnerReport {
    pub x: u64,
    pub include_identity: bool,
    pub rows: Vec<FolnerRow>,
}

/// Følner-style diagnostics along a grid of bounds: the relative symmetric
/// difference `|x·S_N △ S_N| / |S_N|` (both untruncated — the default, since
/// the semigroup itself is infinite — and truncated at the bound), and the
/// difference-set growth `|S_N − S_N| / |S_N|` measured on exponent vectors,
/// whose boundedness witnesses the small-doubling side of the dichotomy.
pub fn folner_check(
    generators: &[u64],
    x: u64,
    n_grid: &[u64],
    include_identity: bool,
) -> Result<FolnerReport, KhintchineError> {
    assert!(!n_grid.is_empty(), "empty grid");
    assert!(
        n_grid.windows(2).all(|w| w[0] < w[1]),
        "grid must be strictly increasing"
    );
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n_max in n_grid {
        let sample = semigroup_enumerate(generators, n_max, include_identity);
        if sample.elements.binary_search(&x).is_err() {
            return Err(KhintchineError::NotInSample { x });
        }
        let set: HashSet<u64> = sample.elements.iter().copied().collect();
        let mut moved: Vec<u64> = Vec::with_capacity(sample.elements.len());
        for &s in &sample.elements {
            moved.push(s.checked_mul(x).ok_or_else(|| {
                KhintchineError::Unsupported(format!("translate {x}·{s} overflows"))
            })?);
        }
        let moved_set: HashSet<u64> = moved.iter().copied().collect();
        let out = moved.iter().filter(|m| !set.contains(m)).count();
        let missing = sample
            .elements
            .iter()
            .filter(|s| !moved_set.contains(s))
            .count();
        let trunc_set: HashSet<u64> = moved.iter().copied().filter(|&m| m <= n_max).collect();
        let out_t = trunc_set.iter().filter(|m| !set.contains(m)).count();
        let missing_t = sample
            .elements
            .iter()
            .filter(|s| !trunc_set.contains(s))
            .count();

        assert!(
            sample.elements.len().pow(2) <= 40_000_000,
            "difference-set budget exceeded"
        );
        let vectors: Vec<Vec<i64>> = sample
            .elements
            .iter()
            .map(|&e| exponent_vector(e, &sample.prime_support))
            .collect();
        let mut diffs: BTreeSet<Vec<i64>> = BTreeSet::new();
        for a in &vectors {
            for b in &vectors {
                diffs.insert(a.iter().zip(b).map(|(x, y)| x - y).collect());
            }
        }

        let size = sample.elements.len() as u64;
        rows.push(FolnerRow {
            n_max,
            size,
            sym_diff: (out + missing) as u64,
            ratio: rat((out + missing) as i64, size as i64),
            sym_diff_truncated: (out_t + missing_t) as u64,
            ratio_truncated: rat((out_t + missing_t) as i64, size as i64),
            diff_count: diffs.len() as u64,
            folner2_ratio: rat(diffs.len() as i64, size as i64),
        });
    }
    Ok(FolnerReport {
        x,
        include_identity,
        rows,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeCountReport {
    pub primes: Vec<u64>,
    #[serde(with = "serde_rat")]
    pub y: Rat,
    pub dim: usize,
    /// `#{a ∈ ℤ_{≥0}^d : Σ a_i ln p_i ≤ y}`, zero vector included.
    pub count: u64,
    /// `y^d / (d! Π ln p_i)` — the simplex volume.
    pub asymptote: PowVal,
    /// `|count − asymptote|`.
    pub residual: PowVal,
    /// Residual divided by `y^{d−1}`, the scale of the boundary term.
    pub residual_normalized: PowVal,
    pub residual_decimal: String,
}

fn lattice_count_rec(primes: &[u64], idx: usize, acc: &LogReal, y: &Rat) -> u64 {
    if idx == primes.len() {
        return 1;
    }
    let mut total = 0u64;
    let mut a: i64 = 0;
    loop {
        let cand = acc.add(&LogReal::ln_int(primes[idx], rat_int(a)));
        if cand.cmp_rat(y) == Ordering::Greater {
            break;
        }
        total += lattice_count_rec(primes, idx + 1, &cand, y);
        a += 1;
        assert!(a <= 1 << 24, "lattice enumeration out of range");
    }
    total
}

/// Count nonnegative integer vectors under the hyperplane
/// `Σ a_i ln p_i ≤ y` with certified comparisons (ties against the rational
/// bound are decided symbolically), and compare against the simplex volume
/// `y^d / (d! Π ln p_i)`.  The residual is expected at the boundary scale
/// `y^{d−1}`.
pub fn lattice_count(primes: &[u64], y: &Rat) -> LatticeCountReport {
    let d = primes.len();
    assert!((1..=4).contains(&d), "dimension out of range");
    assert!(
        primes.windows(2).all(|w| w[0] < w[1]),
        "primes must be strictly increasing"
    );
    for &p in primes {
        assert_eq!(factorize(p), vec![(p, 1)], "{p} is not prime");
    }
    assert!(y.is_positive() && *y <= rat_int(200), "bound out of range");

    let count = lattice_count_rec(primes, 0, &LogReal::zero(), y);

    let ctx = Ctx::default();
    let mut log_prod = Iv::point(Rat::one());
    for &p in primes {
        log_prod = log_prod.mul(&ln_u64(p, ctx));
    }
    let factorial: i64 = (1..=d as i64).product();
    let asym = log_prod
        .recip()
        .scale(&(pow_rat(y, d as i64) / rat_int(factorial)));
    let raw = Iv::point(rat_int(count as i64)).sub(&asym);
    let residual = if !raw.lo.is_negative() {
        raw
    } else if !raw.hi.is_positive() {
        raw.neg()
    } else {
        let m = if -raw.lo.clone() > raw.hi {
            -raw.lo.clone()
        } else {
            raw.hi.clone()
        };
        Iv::new(Rat::zero(), m)
    };
    let normalized = residual.scale(&pow_rat(y, 1 - d as i64));

    LatticeCountReport {
        primes: primes.to_vec(),
        y: y.clone(),
        dim: d,
        count,
        asymptote: PowVal::from_iv(asym),
        residual: PowVal::from_iv(residual),
        residual_decimal: decimal_string(&normalized.hi, 6),
        residual_normalized: PowVal::from_iv(normalized),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DichotomyVerdict {
    /// Prime support stable across the horizons: the sample behaves like a
    /// finitely generated (virtually ℤ^d, amenable) semigroup — the side on
    /// which the averages converge.
    ConvergenceSide,
    /// Prime support still growing at the last horizon: the counting
    /// function outpaces every power of the logarithm and the averages
    /// diverge.
    DivergenceSide,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthCurve {
    pub log_power: u32,
    /// `(bound, |S_bound| / (ln bound)^k)`.
    pub points: Vec<(u64, PowVal)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountingNormRow {
    pub bound: u64,
    /// `⌊ln bound⌋`, the horizon of the counting profile.
    pub log_horizon: u32,
    /// Weak 1-norm of the increment ratios of `h(K) = #{s ≤ e^K}`.
    #[serde(with = "serde_rat")]
    pub weak_norm: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub horizons: Vec<u64>,
    pub support_sizes: Vec<usize>,
    pub lattice_dims: Vec<usize>,
    pub verdict: DichotomyVerdict,
    /// Følner diagnostics, on the convergence side with known generators.
    pub folner: Option<FolnerReport>,
    /// `|S_N|/(ln N)^k` curves, on the divergence side.
    pub growth_curves: Vec<GrowthCurve>,
    /// Counting profiles `h(K) = #{s ≤ e^K}` and their weak norms, both
    /// sides.
    pub counting_norms: Vec<CountingNormRow>,
}

fn certified_floor(f: impl Fn(Ctx) -> Iv) -> BigInt {
    let mut ctx = Ctx::default();
    loop {
        let iv = f(ctx);
        let (a, b) = (floor_int(&iv.lo), floor_int(&iv.hi));
        if a == b {
            return a;
        }
        assert!(ctx.bits < 1 << 15, "precision exhausted taking a floor");
        ctx = Ctx::with_bits(ctx.bits * 2);
    }
}

/// Assemble the horizon-qualified dichotomy verdict for a family of samples
/// of one semigroup at increasing bounds.
///
/// The verdict reports which side of the dichotomy the data is consistent
/// with *at these horizons* — it is a classification of the evidence, not a
/// limit theorem: stable prime support is read as the finitely generated
/// (convergence) side and is backed by Følner diagnostics; growing support
/// is read as the divergence side and is backed by `|S_N|/(ln N)^k` curves.
/// Counting profiles `h(K) = #{s ≤ e^K}` with certified integer thresholds
/// `⌊e^K⌋` accompany both verdicts.
pub fn dichotomy_report(samples: &[SemigroupSample]) -> Result<DichotomyReport, KhintchineError> {
    if samples.is_empty() || samples.iter().any(|s| s.elements.is_empty()) {
        return Err(KhintchineError::EmptySample);
    }
    let horizons: Vec<u64> = samples.iter().map(|s| s.bound).collect();
    assert!(
        horizons.windows(2).all(|w| w[0] < w[1]),
        "bounds must be strictly increasing"
    );
    assert!(horizons[0] >= 2, "bounds must be at least 2");
    let support_sizes: Vec<usize> = samples.iter().map(|s| s.prime_support.len()).collect();
    let lattice_dims: Vec<usize> = samples.iter().map(|s| s.lattice_dim).collect();
    let first = &samples[0];
    let last = samples.last().unwrap();
    let stable = first.prime_support == last.prime_support;
    let verdict = if stable {
        DichotomyVerdict::ConvergenceSide
    } else {
        DichotomyVerdict::DivergenceSide
    };

    let folner = if stable {
        if let Some(gens) = &first.generators {
            let x = *first.elements.first().unwrap();
            Some(folner_check(gens, x, &horizons, false)?)
        } else {
            None
        }
    } else {
        None
    };

    let growth_curves = if stable {
        Vec::new()
    } else {
        let ctx = Ctx::default();
        let k_cap = (last.lattice_dim as u32 + 1).min(3);
        (1..=k_cap)
            .map(|k| {
                let points = samples
                    .iter()
                    .map(|s| {
                        let inv_log = ln_u64(s.bound, ctx).recip();
                        let mut iv = Iv::point(rat_int(s.elements.len() as i64));
                        for _ in 0..k {
                            iv = iv.mul(&inv_log);
                        }
                        (s.bound, PowVal::from_iv(iv))
                    })
                    .collect();
                GrowthCurve {
                    log_power: k,
                    points,
                }
            })
            .collect()
    };

    let mut counting_norms = Vec::with_capacity(samples.len());
    for s in samples {
        let bound = s.bound;
        let k_max = certified_floor(|ctx| ln_u64(bound, ctx))
            .to_u32()
            .expect("log horizon out of range");
        let mut h = Vec::with_capacity(k_max as usize);
        for k in 1..=k_max {
            let threshold = certified_floor(|ctx| exp_rat(&rat_int(i64::from(k)), ctx))
                .to_u64()
                .expect("threshold out of range");
            let n = s.elements.partition_point(|&e| e <= threshold);
            h.push(rat_int(n as i64));
        }
        let weak_norm = if h.is_empty() {
            Rat::zero()
        } else {
            GrowthProfile::new(h).weak_norm_c
        };
        counting_norms.push(CountingNormRow {
            bound,
            log_horizon: k_max,
            weak_norm,
        });
    }

    Ok(DichotomyReport {
        horizons,
        support_sizes,
        lattice_dims,
        verdict,
        folner,
        growth_curves,
        counting_norms,
    })
}

// ───────────────────────────── tests ─────────────────────────────
