//! Exact step functions on circles and line windows.
//!
//! A [`StepFunction`] is a finitely-many-valued nonnegative function with
//! rational breakpoints, either on a circle ℝ/Mℤ (cells wrap) or on a window
//! [l, r) ⊂ ℝ (implicitly 0 outside).  Cells are left-closed right-open and a
//! function is kept in canonical form: no two adjacent cells share a value,
//! including the wrap-around adjacency on circles.
//!
//! Norms: ‖f‖_p^p = Σ v_c^p·|c| and ‖f‖_{p,∞}^p = max_y y^p·μ{f ≥ y}, the
//! max running over cell values.  For integer p these are exact rationals.
//! For fractional p = a/b the *comparisons* needed to locate the weak-norm
//! maximiser are still exact — y^p·m ≷ z^p·n iff y^a·m^b ≷ z^a·n^b — so the
//! attaining level is always found exactly, and only the reported scalar may
//! degrade to a certified enclosure ([`PowVal::Enclosure`]) when a p-th power
//! is irrational.

use crate::precise::{pow_rr, Ctx, Iv};
use crate::rat::{pow_rat, serde_rat, serde_rat_vec, Rat};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Circle {
        #[serde(with = "serde_rat")]
        circumference: Rat,
    },
    Window {
        #[serde(with = "serde_rat")]
        left: Rat,
        #[serde(with = "serde_rat")]
        right: Rat,
    },
}

impl Domain {
    pub fn circle(m: Rat) -> Domain {
        assert!(m.is_positive(), "circle circumference must be positive");
        Domain::Circle { circumference: m }
    }

    pub fn window(left: Rat, right: Rat) -> Domain {
        assert!(left < right, "window requires left < right");
        Domain::Window { left, right }
    }

    pub fn total_length(&self) -> Rat {
        match self {
            Domain::Circle { circumference } => circumference.clone(),
            Domain::Window { left, right } => right - left,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub domain: Domain,
    #[serde(with = "serde_rat_vec")]
    pub breakpoints: Vec<Rat>,
    #[serde(with = "serde_rat_vec")]
    pub values: Vec<Rat>,
}

/// A nonnegative real that is either exactly rational or certified to lie in
/// an interval.  Norm reports use this so that integer-exponent cases stay
/// bit-exact while fractional exponents remain honest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowVal {
    Exact {
        #[serde(with = "serde_rat")]
        value: Rat,
    },
    Enclosure {
        #[serde(with = "serde_rat")]
        lo: Rat,
        #[serde(with = "serde_rat")]
        hi: Rat,
    },
}

impl PowVal {
    pub fn from_iv(iv: Iv) -> PowVal {
        if iv.lo == iv.hi {
            PowVal::Exact { value: iv.lo }
        } else {
            PowVal::Enclosure {
                lo: iv.lo,
                hi: iv.hi,
            }
        }
    }

    pub fn as_iv(&self) -> Iv {
        match self {
            PowVal::Exact { value } => Iv::point(value.clone()),
            PowVal::Enclosure { lo, hi } => Iv::new(lo.clone(), hi.clone()),
        }
    }

    pub fn exact(&self) -> Option<&Rat> {
        match self {
            PowVal::Exact { value } => Some(value),
            PowVal::Enclosure { .. } => None,
        }
    }
}

/// Exact norm data for one function and one exponent. `strong_pow` and
/// `weak_pow` are the p-th powers ‖f‖_p^p and ‖f‖_{p,∞}^p.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormReport {
    #[serde(with = "serde_rat")]
    pub p: Rat,
    pub strong_pow: PowVal,
    pub weak_pow: PowVal,
    /// The level y (a cell value) attaining the weak-norm supremum; largest
    /// such y on ties.
    #[serde(with = "serde_rat")]
    pub attaining_level: Rat,
}

impl StepFunction {
    /// Constant function.
    pub fn constant(domain: Domain, c: Rat) -> StepFunction {
        assert!(!c.is_negative());
        let f = match &domain {
            Domain::Circle { .. } => StepFunction {
                domain,
                breakpoints: vec![Rat::zero()],
                values: vec![c],
            },
            Domain::Window { .. } => StepFunction {
                domain,
                breakpoints: vec![],
                values: vec![c],
            },
        };
        f.assert_valid();
        f
    }

    /// height·1_[start, start+len) with 0 elsewhere; wraps on circles.
    pub fn indicator(domain: Domain, start: &Rat, len: &Rat, height: Rat) -> StepFunction {
        assert!(!height.is_negative());
        assert!(len.is_positive(), "indicator needs positive length");
        match &domain {
            Domain::Circle { circumference } => {
                assert!(
                    len <= circumference,
                    "indicator longer than the whole circle"
                );
                if len == circumference {
                    return StepFunction::constant(domain, height);
                }
                let base = StepFunction {
                    domain: domain.clone(),
                    breakpoints: vec![Rat::zero(), len.clone()],
                    values: vec![height, Rat::zero()],
                };
                base.assert_valid();
                base.translate(start)
            }
            Domain::Window { left, right } => {
                let end = start + len;
                assert!(
                    *start >= *left && end <= *right,
                    "indicator support [{start}, {end}) escapes window [{left}, {right})"
                );
                let mut bps = Vec::new();
                let mut vals = Vec::new();
                vals.push(Rat::zero());
                if *start > *left {
                    bps.push(start.clone());
                    vals.push(height);
                } else {
                    vals[0] = height;
                }
                if end < *right {
                    bps.push(end.clone());
                    vals.push(Rat::zero());
                }
                let f = StepFunction {
                    domain: domain.clone(),
                    breakpoints: bps,
                    values: vals,
                };
                f.canonicalized()
            }
        }
    }

    fn assert_valid(&self) {
        match &self.domain {
            Domain::Circle { circumference } => {
                assert!(
                    !self.breakpoints.is_empty(),
                    "circle step function needs at least one breakpoint"
                );
                assert_eq!(self.breakpoints.len(), self.values.len());
                assert!(self.breakpoints[0] >= Rat::zero());
                assert!(self.breakpoints.last().unwrap() < circumference);
            }
            Domain::Window { left, right } => {
                assert_eq!(self.breakpoints.len() + 1, self.values.len());
                if let (Some(first), Some(last)) = (self.breakpoints.first(), self.breakpoints.last())
                {
                    assert!(first > left && last < right);
                }
            }
        }
        for w in self.breakpoints.windows(2) {
            assert!(w[0] < w[1], "breakpoints must be strictly increasing");
        }
        for v in &self.values {
            assert!(!v.is_negative(), "step functions are nonnegative");
        }
    }

    /// Merge adjacent equal-valued cells (including circle wrap-around).
    pub fn canonicalized(&self) -> StepFunction {
        self.assert_valid();
        let mut bps = Vec::with_capacity(self.breakpoints.len());
        let mut vals: Vec<Rat> = Vec::with_capacity(self.values.len());
        match &self.domain {
            Domain::Window { .. } => {
                vals.push(self.values[0].clone());
                for (b, v) in self.breakpoints.iter().zip(&self.values[1..]) {
                    if *v != *vals.last().unwrap() {
                        bps.push(b.clone());
                        vals.push(v.clone());
                    }
                }
            }
            Domain::Circle { .. } => {
                for (b, v) in self.breakpoints.iter().zip(&self.values) {
                    if vals.last() != Some(v) {
                        bps.push(b.clone());
                        vals.push(v.clone());
                    }
                }
                // wrap-around merge: drop the first breakpoint when the first
                // and last cells agree (keep one cell for constants)
                if vals.len() > 1 && vals.first() == vals.last() {
                    bps.remove(0);
                    vals.remove(0);
                }
            }
        }
        let f = StepFunction {
            domain: self.domain.clone(),
            breakpoints: bps,
            values: vals,
        };
        f.assert_valid();
        f
    }

    /// Cell walk as (start, end, value) with start < end covering the domain.
    /// The circle wrap cell is emitted split at 0 when it crosses 0.
    pub fn cells(&self) -> Vec<(Rat, Rat, Rat)> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        match &self.domain {
            Domain::Window { left, right } => {
                let mut cur = left.clone();
                for (b, v) in self
                    .breakpoints
                    .iter()
                    .chain(std::iter::once(right))
                    .zip(&self.values)
                {
                    out.push((cur.clone(), b.clone(), v.clone()));
                    cur = b.clone();
                }
            }
            Domain::Circle { circumference } => {
                let m = self.breakpoints.len();
                for i in 0..m {
                    let (start, end) = if i + 1 < m {
                        (self.breakpoints[i].clone(), self.breakpoints[i + 1].clone())
                    } else {
                        (
                            self.breakpoints[m - 1].clone(),
                            &self.breakpoints[0] + circumference,
                        )
                    };
                    let v = self.values[i].clone();
                    if end <= *circumference {
                        out.push((start, end, v));
                    } else {
                        // wrap cell [start, M) ∪ [0, end−M)
                        if start < *circumference {
                            out.push((start, circumference.clone(), v.clone()));
                        }
                        let tail_end = end - circumference;
                        if tail_end.is_positive() {
                            out.push((Rat::zero(), tail_end, v));
                        }
                    }
                }
            }
        }
        out
    }

    /// Point evaluation (breakpoint ties resolve into the cell starting there).
    pub fn eval(&self, x: &Rat) -> Rat {
        match &self.domain {
            Domain::Window { left, right } => {
                if x < left || x >= right {
                    return Rat::zero();
                }
                // index of last breakpoint ≤ x
                match self.breakpoints.binary_search_by(|b| b.cmp(x)) {
                    Ok(i) => self.values[i + 1].clone(),
                    Err(0) => self.values[0].clone(),
                    Err(i) => self.values[i].clone(),
                }
            }
            Domain::Circle { circumference } => {
                let xr = wrap(x, circumference);
                match self.breakpoints.binary_search_by(|b| b.cmp(&xr)) {
                    Ok(i) => self.values[i].clone(),
                    Err(0) => self.values.last().unwrap().clone(),
                    Err(i) => self.values[i - 1].clone(),
                }
            }
        }
    }

    /// x ↦ f(x − s); circles reduce s mod M, windows require the support to
    /// stay inside the window.
    pub fn translate(&self, s: &Rat) -> StepFunction {
        match &self.domain {
            Domain::Circle { circumference } => {
                let sr = wrap(s, circumference);
                if sr.is_zero() {
                    return self.clone();
                }
                let mut shifted: Vec<(Rat, Rat)> = self
                    .breakpoints
                    .iter()
                    .zip(&self.values)
                    .map(|(b, v)| (wrap(&(b + &sr), circumference), v.clone()))
                    .collect();
                shifted.sort_by(|a, b| a.0.cmp(&b.0));
                let (bps, vals) = shifted.into_iter().unzip();
                let f = StepFunction {
                    domain: self.domain.clone(),
                    breakpoints: bps,
                    values: vals,
                };
                f.canonicalized()
            }
            Domain::Window { left, right } => {
                if s.is_zero() {
                    return self.clone();
                }
                // every cell carrying mass must stay inside [left, right)
                for (a, b, v) in self.cells() {
                    if v.is_positive() {
                        let (na, nb) = (&a + s, &b + s);
                        assert!(
                            na >= *left && nb <= *right,
                            "translated support [{na}, {nb}) escapes window"
                        );
                    }
                }
                // g(x) = f(x − s); f evaluates to 0 outside its window, so
                // sampling each new cell at its left endpoint is exact
                let bps: Vec<Rat> = self
                    .breakpoints
                    .iter()
                    .map(|b| b + s)
                    .filter(|b| b > left && b < right)
                    .collect();
                let mut vals = Vec::with_capacity(bps.len() + 1);
                vals.push(self.eval(&(left - s)));
                for b in &bps {
                    vals.push(self.eval(&(b - s)));
                }
                StepFunction {
                    domain: self.domain.clone(),
                    breakpoints: bps,
                    values: vals,
                }
                .canonicalized()
            }
        }
    }

    /// ∫ f exactly.
    pub fn mass(&self) -> Rat {
        self.cells()
            .into_iter()
            .map(|(a, b, v)| (b - a) * v)
            .sum()
    }

    /// μ{f ≥ y} (strict = false) or μ{f > y} (strict = true), exactly.
    pub fn measure_above(&self, y: &Rat, strict: bool) -> Rat {
        self.cells()
            .into_iter()
            .filter(|(_, _, v)| if strict { v > y } else { v >= y })
            .map(|(a, b, _)| b - a)
            .sum()
    }

    pub fn sup_value(&self) -> Rat {
        self.values.iter().max().cloned().unwrap_or_else(Rat::zero)
    }
}

fn wrap(x: &Rat, m: &Rat) -> Rat {
    let q = (x / m).floor();
    x - q * m
}

/// Aligned cell sweep over two functions on the same domain.  Returns
/// (boundary list, paired values per cell) where the boundary list is the
/// sorted union of both breakpoint sets.
fn aligned_cells(f: &StepFunction, g: &StepFunction) -> (Vec<Rat>, Vec<(Rat, Rat)>) {
    assert_eq!(f.domain, g.domain, "domain mismatch");
    let mut bounds: Vec<Rat> = f
        .breakpoints
        .iter()
        .chain(g.breakpoints.iter())
        .cloned()
        .collect();
    bounds.sort();
    bounds.dedup();
    let pairs = bounds
        .iter()
        .map(|b| (f.eval(b), g.eval(b)))
        .collect();
    (bounds, pairs)
}

fn combine(f: &StepFunction, g: &StepFunction, op: impl Fn(&Rat, &Rat) -> Rat) -> StepFunction {
    match &f.domain {
        Domain::Circle { .. } => {
            let (bounds, pairs) = aligned_cells(f, g);
            let vals = pairs.iter().map(|(a, b)| op(a, b)).collect();
            StepFunction {
                domain: f.domain.clone(),
                breakpoints: bounds,
                values: vals,
            }
            .canonicalized()
        }
        Domain::Window { left, .. } => {
            assert_eq!(f.domain, g.domain, "domain mismatch");
            let mut bounds: Vec<Rat> = f
                .breakpoints
                .iter()
                .chain(g.breakpoints.iter())
                .cloned()
                .collect();
            bounds.sort();
            bounds.dedup();
            let mut vals = Vec::with_capacity(bounds.len() + 1);
            vals.push(op(&f.eval(left), &g.eval(left)));
            for b in &bounds {
                vals.push(op(&f.eval(b), &g.eval(b)));
            }
            StepFunction {
                domain: f.domain.clone(),
                breakpoints: bounds,
                values: vals,
            }
            .canonicalized()
        }
    }
}

/// Cellwise combination on the aligned breakpoint partition.  `op` receives
/// the two cell values and must return a nonnegative value.
pub fn pointwise_combine(
    f: &StepFunction,
    g: &StepFunction,
    op: impl Fn(&Rat, &Rat) -> Rat,
) -> StepFunction {
    combine(f, g, op)
}

/// Pointwise maximum of a nonempty family, by balanced binary merging.
pub fn pointwise_max(fs: &[StepFunction]) -> StepFunction {
    assert!(!fs.is_empty(), "pointwise_max of an empty family");
    let mut layer: Vec<StepFunction> = fs.to_vec();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity((layer.len() + 1) / 2);
        let mut it = layer.drain(..);
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(&a, &b, |x, y| if x >= y { x.clone() } else { y.clone() })),
                None => next.push(a),
            }
        }
        drop(it);
        layer = next;
    }
    layer.pop().unwrap()
}

/// Exact a·f + b·g.  Errors (panics) if any output cell would be negative.
pub fn scale_add(a: &Rat, f: &StepFunction, b: &Rat, g: &StepFunction) -> StepFunction {
    let out = combine(f, g, |x, y| {
        let v = a * x + b * y;
        assert!(
            !v.is_negative(),
            "scale_add produced a negative cell value {v}"
        );
        v
    });
    out
}

/// Balanced sum Σ fs, then scaled by `coeff ≥ 0`.
pub fn sum_scaled(fs: &[StepFunction], coeff: &Rat) -> StepFunction {
    assert!(!fs.is_empty());
    assert!(!coeff.is_negative());
    let one = Rat::from_integer(1.into());
    let mut layer: Vec<StepFunction> = fs.to_vec();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity((layer.len() + 1) / 2);
        let mut it = layer.drain(..);
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(scale_add(&one, &a, &one, &b)),
                None => next.push(a),
            }
        }
        drop(it);
        layer = next;
    }
    let total = layer.pop().unwrap();
    let zero = StepFunction::constant(total.domain.clone(), Rat::zero());
    scale_add(coeff, &total, &Rat::zero(), &zero)
}

/// (up, middle, down) = ([f ≥ hi]·f, [lo < f < hi]·f, [f ≤ lo]·f).
/// `hi = None` is the +∞ sentinel (up empty, middle = [f > lo]·f).
pub fn threshold_split(
    f: &StepFunction,
    lo: &Rat,
    hi: Option<&Rat>,
) -> (StepFunction, StepFunction, StepFunction) {
    assert!(!lo.is_negative(), "threshold_split needs 0 ≤ lo");
    if let Some(h) = hi {
        assert!(lo <= h, "threshold_split needs lo ≤ hi");
    }
    let part = |keep: &dyn Fn(&Rat) -> bool| {
        let g = StepFunction {
            domain: f.domain.clone(),
            breakpoints: f.breakpoints.clone(),
            values: f
                .values
                .iter()
                .map(|v| if keep(v) { v.clone() } else { Rat::zero() })
                .collect(),
        };
        g.canonicalized()
    };
    let up = part(&|v: &Rat| hi.is_some_and(|h| v >= h));
    let middle = part(&|v: &Rat| v > lo && hi.map_or(true, |h| v < h));
    let down = part(&|v: &Rat| v <= lo);
    (up, middle, down)
}

/// Compare y1^p·m1 with y2^p·m2 exactly for rational p = a/b and nonnegative
/// rational y, m: both sides are raised to the b-th power.
fn cmp_weighted_pow(y1: &Rat, m1: &Rat, y2: &Rat, m2: &Rat, p: &Rat) -> Ordering {
    let a = p
        .numer()
        .to_i64()
        .expect("norm exponent numerator exceeds i64");
    let b = p
        .denom()
        .to_i64()
        .expect("norm exponent denominator exceeds i64");
    let lhs = pow_rat(y1, a) * pow_rat(m1, b);
    let rhs = pow_rat(y2, a) * pow_rat(m2, b);
    lhs.cmp(&rhs)
}

/// v^p as an exact rational when possible, else a certified enclosure.
pub fn pow_val(v: &Rat, p: &Rat, ctx: Ctx) -> Iv {
    if v.is_zero() {
        return Iv::point(Rat::zero());
    }
    pow_rr(v, p, ctx)
}

/// Exact norm computation; see the module docs for the PowVal convention.
pub fn norms(f: &StepFunction, p: &Rat, ctx: Ctx) -> NormReport {
    assert!(*p >= Rat::from_integer(1.into()), "norms require p ≥ 1");
    let cells = f.cells();

    // strong^p = Σ v^p · |cell|
    let mut strong = Iv::point(Rat::zero());
    for (a, b, v) in &cells {
        if v.is_positive() {
            let len = b - a;
            strong = strong.add(&pow_val(v, p, ctx).scale(&len));
        }
    }

    // weak^p = max over levels y of y^p · μ{f ≥ y}; exact comparisons
    let mut levels: Vec<Rat> = f.values.iter().filter(|v| v.is_positive()).cloned().collect();
    levels.sort();
    levels.dedup();
    let mut best: Option<(Rat, Rat)> = None; // (y, μ{f ≥ y})
    for y in levels.iter().rev() {
        let m = f.measure_above(y, false);
        match &best {
            None => best = Some((y.clone(), m)),
            Some((by, bm)) => {
                if cmp_weighted_pow(y, &m, by, bm, p) == Ordering::Greater {
                    best = Some((y.clone(), m));
                }
            }
        }
    }
    let (ay, am) = best.unwrap_or((Rat::zero(), Rat::zero()));
    let weak = if ay.is_zero() {
        Iv::point(Rat::zero())
    } else {
        pow_val(&ay, p, ctx).scale(&am)
    };

    NormReport {
        p: p.clone(),
        strong_pow: PowVal::from_iv(strong),
        weak_pow: PowVal::from_iv(weak),
        attaining_level: ay,
    }
}

/// Exact weak-(1,∞) norm with its attaining level: max_y y·μ{f ≥ y}.
pub fn weak1_norm(f: &StepFunction) -> (Rat, Rat) {
    let mut levels: Vec<Rat> = f.values.iter().filter(|v| v.is_positive()).cloned().collect();
    levels.sort();
    levels.dedup();
    let mut best = (Rat::zero(), Rat::zero()); // (value, level)
    for y in levels.iter().rev() {
        let cand = y * f.measure_above(y, false);
        if cand > best.0 {
            best = (cand, y.clone());
        }
    }
    best
}

/// Structural equality after canonicalization.
pub fn same_function(f: &StepFunction, g: &StepFunction) -> bool {
    f.canonicalized() == g.canonicalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};
    use proptest::prelude::*;

    fn circle1() -> Domain {
        Domain::circle(rat_int(1))
    }

    fn ind(start: i64, den: i64, len_num: i64, len_den: i64, h: i64) -> StepFunction {
        StepFunction::indicator(circle1(), &rat(start, den), &rat(len_num, len_den), rat_int(h))
    }

    #[test]
    fn translate_identity_and_shift() {
        let f = ind(0, 1, 1, 4, 1);
        assert!(same_function(&f.translate(&Rat::zero()), &f));
        let g = f.translate(&rat(1, 2));
        assert!(same_function(&g, &ind(1, 2, 1, 4, 1)));
        // translation by 7/3 ≡ 1/3 mod 1
        let a = f.translate(&rat(7, 3));
        let b = f.translate(&rat(1, 3));
        assert!(same_function(&a, &b));
        // probe grid agreement
        for k in 0..60 {
            let x = rat(k, 60);
            assert_eq!(a.eval(&x), b.eval(&x));
        }
    }

    #[test]
    fn translate_wraps_mass() {
        let f = ind(3, 4, 1, 2, 2); // [3/4, 1) ∪ [0, 1/4) at height 2
        assert_eq!(f.mass(), rat_int(1));
        assert_eq!(f.eval(&rat(7, 8)), rat_int(2));
        assert_eq!(f.eval(&rat(1, 8)), rat_int(2));
        assert_eq!(f.eval(&rat(1, 2)), rat_int(0));
    }

    #[test]
    fn pointwise_max_overlapping_indicators() {
        let f = ind(0, 1, 1, 2, 1);
        let g = ind(1, 4, 1, 2, 1);
        let m = pointwise_max(&[f, g]);
        assert!(same_function(&m, &ind(0, 1, 3, 4, 1)));
    }

    #[test]
    fn pointwise_max_single() {
        let f = ind(1, 8, 1, 3, 5);
        assert!(same_function(&pointwise_max(&[f.clone()]), &f));
    }

    #[test]
    fn scale_add_recombination() {
        let f = ind(0, 1, 1, 2, 3);
        let g = ind(1, 4, 1, 2, 2);
        let h = scale_add(&rat(1, 2), &f, &rat_int(2), &g);
        assert_eq!(h.eval(&rat(1, 8)), rat(3, 2));
        assert_eq!(h.eval(&rat(3, 8)), rat(3, 2) + rat_int(4));
        assert_eq!(h.eval(&rat(5, 8)), rat_int(4));
        assert_eq!(h.eval(&rat(7, 8)), rat_int(0));
        assert_eq!(h.mass(), f.mass() * rat(1, 2) + g.mass() * rat_int(2));
    }

    #[test]
    #[should_panic(expected = "negative")]
    fn scale_add_rejects_negative_cells() {
        let f = ind(0, 1, 1, 2, 1);
        let g = ind(0, 1, 1, 4, 3);
        let _ = scale_add(&rat_int(1), &f, &rat_int(-1), &g);
    }

    #[test]
    fn threshold_split_partitions() {
        // staircase with values 1, 2, 3
        let d = circle1();
        let f = StepFunction {
            domain: d,
            breakpoints: vec![Rat::zero(), rat(1, 4), rat(1, 2)],
            values: vec![rat_int(1), rat_int(2), rat_int(3)],
        }
        .canonicalized();
        let (up, mid, down) = threshold_split(&f, &rat_int(1), Some(&rat_int(3)));
        assert_eq!(up.eval(&rat(5, 8)), rat_int(3));
        assert_eq!(mid.eval(&rat(3, 8)), rat_int(2));
        assert_eq!(down.eval(&rat(1, 8)), rat_int(1));
        let re = scale_add(
            &rat_int(1),
            &scale_add(&rat_int(1), &up, &rat_int(1), &mid),
            &rat_int(1),
            &down,
        );
        assert!(same_function(&re, &f));
        // infinity sentinel: strictly positive f → (0, f, 0) with lo = 0
        let (u2, m2, d2) = threshold_split(&f, &Rat::zero(), None);
        assert_eq!(u2.mass(), Rat::zero());
        assert!(same_function(&m2, &f));
        assert_eq!(d2.mass(), Rat::zero());
    }

    #[test]
    fn norms_single_level() {
        let f = ind(0, 1, 1, 3, 4); // 4·1_[0,1/3)
        for p in [rat_int(1), rat(3, 2), rat_int(2), rat_int(3)] {
            let r = norms(&f, &p, Ctx::default());
            // strong^p = weak^p = 4^p/3 — exact even at p = 3/2 (4 is a square)
            let expect = pow_rr(&rat_int(4), &p, Ctx::default())
                .scale(&rat(1, 3));
            assert_eq!(r.strong_pow, PowVal::from_iv(expect.clone()));
            assert_eq!(r.weak_pow, PowVal::from_iv(expect));
            assert_eq!(r.attaining_level, rat_int(4));
        }
    }

    #[test]
    fn norms_two_levels_weak_vs_strong() {
        // f = 2 on [0,1/8), 1 on [1/8,1/2)
        let f = StepFunction {
            domain: circle1(),
            breakpoints: vec![Rat::zero(), rat(1, 8), rat(1, 2)],
            values: vec![rat_int(2), rat_int(1), Rat::zero()],
        }
        .canonicalized();
        let r = norms(&f, &rat_int(1), Ctx::default());
        // strong = 2/8 + 3/8 = 5/8; weak = max(2·1/8, 1·1/2) = 1/2
        assert_eq!(r.strong_pow.exact().unwrap(), &rat(5, 8));
        assert_eq!(r.weak_pow.exact().unwrap(), &rat(1, 2));
        assert_eq!(r.attaining_level, rat_int(1));
        let (w1, lvl) = weak1_norm(&f);
        assert_eq!(w1, rat(1, 2));
        assert_eq!(lvl, rat_int(1));
    }

    #[test]
    fn norm_riemann_oracle() {
        // three-step staircase; compare strong^2 with a 10^4-point Riemann sum
        let f = StepFunction {
            domain: circle1(),
            breakpoints: vec![rat(1, 10), rat(1, 3), rat(4, 5)],
            values: vec![rat_int(3), rat(1, 2), rat_int(2)],
        }
        .canonicalized();
        let r = norms(&f, &rat_int(2), Ctx::default());
        let n = 10_000i64;
        let mut riemann = Rat::zero();
        for k in 0..n {
            let x = rat(k, n);
            let v = f.eval(&x);
            riemann += &v * &v * rat(1, n);
        }
        let exact = r.strong_pow.exact().unwrap();
        let diff = (exact - &riemann).abs();
        assert!(diff < rat(1, 100), "Riemann sum far from exact: {diff}");
    }

    #[test]
    fn window_domain_basics() {
        let d = Domain::window(rat_int(-1), rat_int(3));
        let f = StepFunction::indicator(d.clone(), &rat_int(0), &rat_int(1), rat_int(2));
        assert_eq!(f.mass(), rat_int(2));
        assert_eq!(f.eval(&rat(-1, 2)), Rat::zero());
        assert_eq!(f.eval(&rat(1, 2)), rat_int(2));
        assert_eq!(f.eval(&rat_int(2)), Rat::zero());
        let g = f.translate(&rat_int(1));
        assert_eq!(g.eval(&rat(1, 2)), Rat::zero());
        assert_eq!(g.eval(&rat(3, 2)), rat_int(2));
        assert_eq!(g.mass(), rat_int(2));
    }

    #[test]
    #[should_panic(expected = "escapes window")]
    fn window_translate_guards_support() {
        let d = Domain::window(rat_int(0), rat_int(2));
        let f = StepFunction::indicator(d, &rat_int(1), &rat_int(1), rat_int(1));
        let _ = f.translate(&rat_int(1));
    }

    #[test]
    fn canonicalization_idempotent_and_wrap_merge() {
        let f = StepFunction {
            domain: circle1(),
            breakpoints: vec![Rat::zero(), rat(1, 4), rat(1, 2)],
            values: vec![rat_int(1), rat_int(2), rat_int(1)],
        };
        let c = f.canonicalized();
        // wrap-around: cells [1/2,1) and [0,1/4) both value 1 → merged
        assert_eq!(c.breakpoints, vec![rat(1, 4), rat(1, 2)]);
        assert_eq!(c.values, vec![rat_int(2), rat_int(1)]);
        assert_eq!(c.canonicalized(), c);
    }

    #[test]
    fn serde_round_trip() {
        let f = ind(1, 3, 1, 6, 7);
        let s = serde_json::to_string(&f).unwrap();
        let back: StepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(s.contains("\"circle\""));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn prop_max_matches_probe_grid(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let fs: Vec<StepFunction> = (0..5)
                .map(|_| random_step(&mut rng))
                .collect();
            let m = pointwise_max(&fs);
            for k in 0..97 {
                let x = rat(k, 97);
                let expect = fs.iter().map(|f| f.eval(&x)).max().unwrap();
                prop_assert_eq!(m.eval(&x), expect);
            }
        }

        #[test]
        fn prop_split_recombines(seed in 0u64..1000) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = random_step(&mut rng);
            let lo = rat(1, 2);
            let hi = rat_int(3);
            let (u, m, d) = threshold_split(&f, &lo, Some(&hi));
            let re = scale_add(
                &rat_int(1),
                &scale_add(&rat_int(1), &u, &rat_int(1), &m),
                &rat_int(1),
                &d,
            );
            prop_assert!(same_function(&re, &f));
            // disjoint supports
            for k in 0..50 {
                let x = rat(k, 50);
                let nz = [&u, &m, &d]
                    .iter()
                    .filter(|g| g.eval(&x).is_positive())
                    .count();
                prop_assert!(nz <= 1);
            }
        }

        #[test]
        fn prop_chebyshev_all_p(seed in 0u64..400) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = random_step(&mut rng);
            for p in [rat_int(1), rat(3, 2), rat_int(2), rat_int(3)] {
                let r = norms(&f, &p, Ctx::default());
                let w = r.weak_pow.as_iv();
                let s = r.strong_pow.as_iv();
                // certified: weak^p ≤ strong^p must at least be consistent
                prop_assert!(w.lo <= s.hi, "Chebyshev violated: {:?} vs {:?}", w, s);
                // exact check when both rational
                if let (Some(we), Some(se)) = (r.weak_pow.exact(), r.strong_pow.exact()) {
                    prop_assert!(we <= se);
                }
            }
        }

        #[test]
        fn prop_translation_invariance_of_norms(seed in 0u64..400, num in 0i64..12, den in 1i64..13) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let f = random_step(&mut rng);
            let s = rat(num, den);
            let g = f.translate(&s);
            for p in [rat_int(1), rat_int(2)] {
                let rf = norms(&f, &p, Ctx::default());
                let rg = norms(&g, &p, Ctx::default());
                prop_assert_eq!(rf.strong_pow.exact(), rg.strong_pow.exact());
                prop_assert_eq!(rf.weak_pow.exact(), rg.weak_pow.exact());
            }
        }
    }

    fn random_step<R: rand::Rng>(rng: &mut R) -> StepFunction {
        let ncells = rng.gen_range(1..8usize);
        let mut bps: Vec<Rat> = (0..ncells)
            .map(|_| rat(rng.gen_range(0..120), 120))
            .collect();
        bps.sort();
        bps.dedup();
        let values = (0..bps.len())
            .map(|_| rat(rng.gen_range(0..9), 1 + rng.gen_range(0..3)))
            .collect();
        StepFunction {
            domain: Domain::circle(rat_int(1)),
            breakpoints: bps,
            values,
        }
        .canonicalized()
    }
}
