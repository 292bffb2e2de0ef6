//! End-to-end acceptance checks, one test per shipped guarantee.
//!
//! Every test prints exactly one `criterion N [label]: PASS|FAIL` line (visible
//! with `--nocapture`) and panics when a pinned bound is violated.  Wall-clock
//! budgets are part of the contract and asserted; a process-wide mutex
//! serializes the tests so the budgets are measured without cross-test
//! contention.

use divergia_core::rat::{pow_rat, rat, rat_int, Rat};
use divergia_core::weights::{
    c1, c1_grid_oracle, materialize, weak_norm_seq, WeightSequence, WeightTag,
};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Mutex;
use std::time::{Duration, Instant};

static SERIAL: Mutex<()> = Mutex::new(());

struct Criterion {
    number: u32,
    label: &'static str,
    budget: Duration,
    started: Instant,
    failures: Vec<String>,
    _guard: std::sync::MutexGuard<'static, ()>,
}

impl Criterion {
    fn start(number: u32, label: &'static str, budget: Duration) -> Criterion {
        let guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
        Criterion {
            number,
            label,
            budget,
            started: Instant::now(),
            failures: Vec::new(),
            _guard: guard,
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        if elapsed > self.budget {
            self.failures.push(format!(
                "exceeded budget: {elapsed:?} > {:?}",
                self.budget
            ));
        }
        let ok = self.failures.is_empty();
        println!(
            "criterion {:2} [{}]: {} ({:.1?})",
            self.number,
            self.label,
            if ok { "PASS" } else { "FAIL" },
            elapsed
        );
        assert!(
            ok,
            "criterion {} [{}] failed:\n  - {}",
            self.number,
            self.label,
            self.failures.join("\n  - ")
        );
    }
}

fn random_weights(rng: &mut ChaCha8Rng, max_len: usize) -> WeightSequence {
    let len = rng.gen_range(1..=max_len);
    let den = [6i64, 24, 60, 360, 2520][rng.gen_range(0..5)];
    let values: Vec<Rat> = (0..len)
        .map(|_| rat(rng.gen_range(1..10_000), den))
        .collect();
    WeightSequence::explicit(values)
}

/// Threshold-functional exactness: the breakpoint scan dominates a dense
/// 10⁵-point grid on 10³ random sequences (equality whenever the grid meets
/// every breakpoint gap), and the weak sequence norms satisfy the scaling and
/// p-th-power identities bit-exactly.
#[test]
fn criterion_01_weight_functional_exactness() {
    let mut c = Criterion::start(
        1,
        "weight functional exactness",
        Duration::from_secs(60),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let lambda = rat(7, 3);
    for case in 0..1000 {
        let w = random_weights(&mut rng, 1 << 12);
        // scan vs grid (grid kept coarse for most cases, dense for a slice,
        // to stay inside the budget while still exercising the 10^5 density)
        let grid_size = if case % 25 == 0 { 100_000 } else { 4_000 };
        let scan = c1(&w);
        let sv = scan.value.exact().unwrap();
        let grid = c1_grid_oracle(&w, grid_size);
        c.check(sv >= &grid.grid_max, || {
            format!("case {case}: scan {sv} below grid max {}", grid.grid_max)
        });
        if grid.all_gaps_hit {
            c.check(sv == &grid.grid_max, || {
                format!(
                    "case {case}: full-coverage grid disagrees: scan {sv} vs {}",
                    grid.grid_max
                )
            });
        }
        // weak-norm identities on a thinned subset (they are exact equalities,
        // so coverage matters more than repetition count)
        if case % 5 == 0 {
            for p in [rat_int(1), rat_int(2), rat_int(3)] {
                let pe = p.numer().to_i64().unwrap();
                let base = weak_norm_seq(&w, &p);
                let scaled = weak_norm_seq(&w.scaled(&lambda), &p);
                let expect = base.value_pow.exact().unwrap() * pow_rat(&lambda, pe);
                c.check(scaled.value_pow.exact().unwrap() == &expect, || {
                    format!("case {case}: homogeneity broken at p = {p}")
                });
                c.check(
                    scaled.argmax_threshold == &base.argmax_threshold * &lambda,
                    || format!("case {case}: attaining level failed to scale at p = {p}"),
                );
                if pe > 1 {
                    let wp = WeightSequence::explicit(
                        w.values.iter().map(|v| pow_rat(v, pe)).collect(),
                    );
                    let lifted = weak_norm_seq(&wp, &rat_int(1));
                    c.check(
                        base.value_pow.exact().unwrap() == lifted.value_pow.exact().unwrap(),
                        || format!("case {case}: p-power identity broken at p = {p}"),
                    );
                }
            }
        }
    }
    c.finish();
}

/// Slow-growth calibration: the windowed functional of the reciprocal
/// iterated-log weights stays flat across horizons 2⁸ → 2¹² → 2¹⁶
/// (nondecreasing, final step growing at most 5%), while the same functional
/// of the harmonic weights 1/t grows by at least 25% per step.
#[test]
fn criterion_02_slow_growth_calibration() {
    let mut c = Criterion::start(2, "slow-growth calibration", Duration::from_secs(60));
    let horizons = [1usize << 8, 1 << 12, 1 << 16];

    let phi_vals: Vec<Rat> = horizons
        .iter()
        .map(|&h| {
            let w = materialize(&WeightTag::ReciprocalPhi, h);
            c1(&w).value.exact().unwrap().clone()
        })
        .collect();
    c.check(
        phi_vals[0] <= phi_vals[1] && phi_vals[1] <= phi_vals[2],
        || format!("reciprocal-Φ functional not nondecreasing: {phi_vals:?}"),
    );
    // growth over the last step capped at 5%
    c.check(
        &phi_vals[2] * rat_int(20) <= &phi_vals[1] * rat_int(21),
        || {
            format!(
                "reciprocal-Φ functional grew more than 5%: {} → {}",
                phi_vals[1], phi_vals[2]
            )
        },
    );

    let harmonic_vals: Vec<Rat> = horizons
        .iter()
        .map(|&h| {
            let w = materialize(&WeightTag::ReciprocalT, h);
            c1(&w).value.exact().unwrap().clone()
        })
        .collect();
    for step in 0..2 {
        c.check(
            &harmonic_vals[step + 1] * rat_int(4) >= &harmonic_vals[step] * rat_int(5),
            || {
                format!(
                    "harmonic functional grew less than 25%: {} → {}",
                    harmonic_vals[step], harmonic_vals[step + 1]
                )
            },
        );
    }
    c.finish();
}
