//! Experiment runners.
//!
//! Each submodule owns one subcommand: it parses its config, drives the
//! library, collects named assertions into a [`RunReport`], and writes its
//! plot-data files.  The report itself is written by the dispatcher.

pub mod audit;
pub mod infection;
pub mod khintchine;
pub mod replay;
pub mod semigroup;
pub mod sumset;
pub mod ubl1;
pub mod ublp;
pub mod weights;

use divergia_core::constructions::ConstructionError;
use divergia_core::khintchine::KhintchineError;
use divergia_core::measure::PowVal;
use divergia_core::rat::decimal_string;
use serde::Serialize;

use crate::CliError;

/// Runs a closure that may panic on a failed certification and converts the
/// panic into a classified error: resource-guard messages exit with code 3,
/// config-shaped complaints with 2, everything else is a genuine assertion
/// failure (code 1).
pub fn guarded<T>(f: impl FnOnce() -> T) -> Result<T, CliError> {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(v) => Ok(v),
        Err(payload) => {
            let msg = panic_text(payload.as_ref());
            if USAGE_MARKS.iter().any(|k| msg.contains(k)) {
                Err(CliError::Usage(msg))
            } else if GUARD_MARKS.iter().any(|k| msg.contains(k)) {
                Err(CliError::Guard(msg))
            } else {
                Err(CliError::Assertion(msg))
            }
        }
    }
}

const GUARD_MARKS: &[&str] = &[
    "budget",
    "out of range",
    "too large",
    "too coarse",
    "exceeds",
    "exceed",
    "failed to resolve",
    "precision exhausted",
    "guard",
];

const USAGE_MARKS: &[&str] = &["not multiplicatively closed", "must be", "needs "];

fn panic_text(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with non-text payload".to_string()
    }
}

pub fn construction_err(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::SizeGuard { .. } => CliError::Guard(e.to_string()),
        ConstructionError::Containment { .. } => CliError::Assertion(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn khintchine_err(e: KhintchineError) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn io_err(e: std::io::Error) -> CliError {
    CliError::Usage(format!("io: {e}"))
}

/// Serializes a config back into the report, tagging on the resolved
/// interval-arithmetic precision.
pub fn echo<T: Serialize>(cfg: &T, digits: u32) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("precision_digits".into(), digits.into());
    }
    v
}

pub fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report payload serializes")
}

/// Decimal rendering for CSV cells: exact values and enclosure lower ends.
pub fn pow_decimal(v: &PowVal, digits: u32) -> String {
    match v {
        PowVal::Exact { value } => decimal_string(value, digits),
        PowVal::Enclosure { lo, .. } => decimal_string(lo, digits),
    }
}
