//! Run-report plumbing: the JSON artifact every batch experiment emits.
//!
//! A report echoes the fully resolved configuration it ran under, carries the
//! experiment-specific payload, and lists every certified inequality as a
//! named assertion with both sides rendered exactly — rationals as `"p/q"`
//! strings — whenever exactness is available; certified enclosures render as
//! decimal endpoint pairs.  Timing lives in a single top-level field so the
//! rest of the payload can be compared byte for byte across runs.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::measure::PowVal;
use crate::rat::{decimal_string, format_rat, Rat};

/// One named inequality with both sides and the outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// The side the run had to meet.
    pub bound: String,
    /// The side the run produced.
    pub achieved: String,
    pub pass: bool,
}

impl Assertion {
    /// Both sides exact rationals.
    pub fn exact(name: &str, bound: &Rat, achieved: &Rat, pass: bool) -> Assertion {
        Assertion {
            name: name.to_string(),
            bound: format_rat(bound),
            achieved: format_rat(achieved),
            pass,
        }
    }

    /// Possibly-enclosed sides.
    pub fn pow(name: &str, bound: &PowVal, achieved: &PowVal, pass: bool) -> Assertion {
        Assertion {
            name: name.to_string(),
            bound: render_pow(bound),
            achieved: render_pow(achieved),
            pass,
        }
    }

    /// Free-form sides (counts, verdict words, ...).
    pub fn note(name: &str, bound: impl Into<String>, achieved: impl Into<String>, pass: bool) -> Assertion {
        Assertion {
            name: name.to_string(),
            bound: bound.into(),
            achieved: achieved.into(),
            pass,
        }
    }
}

/// Render an exact value as `"p/q"` and an enclosure as a decimal pair.
pub fn render_pow(v: &PowVal) -> String {
    match v.exact() {
        Some(r) => format_rat(r),
        None => {
            let iv = v.as_iv();
            format!(
                "[{}, {}]",
                decimal_string(&iv.lo, 30),
                decimal_string(&iv.hi, 30)
            )
        }
    }
}

/// The artifact of one experiment run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    /// Fully resolved configuration (seed and precision included), echoed so
    /// the run is reproducible from its own output.
    pub config: Value,
    /// Experiment-specific payload.
    pub results: Value,
    pub assertions: Vec<Assertion>,
    /// Wall-clock seconds; the only nondeterministic field.
    pub timing_seconds: f64,
}

impl RunReport {
    pub fn new(experiment: &str, config: Value, results: Value) -> RunReport {
        RunReport {
            experiment: experiment.to_string(),
            config,
            results,
            assertions: Vec::new(),
            timing_seconds: 0.0,
        }
    }

    pub fn push(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// The report serialized with the timing field zeroed — byte-identical
    /// across identical runs.
    pub fn deterministic_json(&self) -> String {
        let mut clone = self.clone();
        clone.timing_seconds = 0.0;
        serde_json::to_string_pretty(&clone).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precise::Iv;
    use crate::rat::{rat, rat_int};

    #[test]
    fn assertion_rendering() {
        let a = Assertion::exact("ratio-lower", &rat(1, 2), &rat(2, 3), true);
        assert_eq!(a.bound, "1/2");
        assert_eq!(a.achieved, "2/3");
        assert!(a.pass);

        let exact = PowVal::Exact { value: rat_int(4) };
        assert_eq!(render_pow(&exact), "4");
        let encl = PowVal::from_iv(Iv::new(rat(1, 3), rat(1, 2)));
        let rendered = render_pow(&encl);
        assert!(rendered.starts_with("[0.3333333333"));
        assert!(rendered.contains(", 0.5"));
    }

    #[test]
    fn report_outcome_and_determinism() {
        let mut report = RunReport::new(
            "khintchine",
            serde_json::json!({"j_set": [1, 2]}),
            serde_json::json!({"ok": true}),
        );
        report.push(Assertion::note("spans", "2", "2", true));
        assert!(report.passed());
        report.push(Assertion::exact("fails", &rat_int(1), &rat(1, 2), false));
        assert!(!report.passed());

        let mut other = report.clone();
        other.timing_seconds = 12.5;
        assert_eq!(report.deterministic_json(), other.deterministic_json());

        let back: RunReport = serde_json::from_str(&report.deterministic_json()).unwrap();
        assert_eq!(back.assertions.len(), 2);
        assert_eq!(back.experiment, "khintchine");
    }
}
