//! `weights-analyze`: the threshold functional C₁ of one weight family
//! across a horizon grid, its growth trend, and optional weak-norm checks.

use divergia_core::rat::{decimal_string, format_rat, pow_rat, rat, rat_int};
use divergia_core::report::{Assertion, RunReport};
use divergia_core::weights::{c1, classify_hardy, weak_norm_seq, WeightTag};
use divergia_core::Rat;
use serde_json::json as jval;

use crate::config::{self, TrendExpect, WeightsConfig};
use crate::experiments::{echo, guarded, json};
use crate::{CliError, Session};

pub fn run(cfg_text: &str, sess: &Session) -> Result<RunReport, CliError> {
    let cfg: WeightsConfig = config::load(cfg_text)?;
    if cfg.horizons.is_empty() {
        return Err(CliError::Usage("`horizons` must be nonempty".into()));
    }
    if !cfg.horizons.windows(2).all(|w| w[0] < w[1]) {
        return Err(CliError::Usage(
            "`horizons` must be strictly increasing".into(),
        ));
    }
    let top = *cfg.horizons.last().unwrap();
    let needs_values = matches!(
        cfg.family,
        WeightTag::Explicit | WeightTag::DyadicEnvelope
    );
    let spec = config::WeightSpec {
        family: cfg.family.clone(),
        horizon: if needs_values { None } else { Some(top) },
        values: cfg.values.clone(),
    };
    let w_full = guarded(|| spec.resolve())??;
    if w_full.horizon < top {
        return Err(CliError::Usage(format!(
            "largest horizon {top} exceeds the {} explicit values",
            w_full.horizon
        )));
    }

    // C₁ along the horizon grid
    let mut vals: Vec<Rat> = Vec::with_capacity(cfg.horizons.len());
    let mut rows = Vec::new();
    for &h in &cfg.horizons {
        let w_h = w_full.truncated(h);
        let rep = guarded(move || c1(&w_h))?;
        let v = rep
            .value
            .exact()
            .cloned()
            .expect("C1 is an exact rational");
        rows.push(vec![
            h.to_string(),
            format_rat(&v),
            decimal_string(&v, 30),
        ]);
        vals.push(v);
    }
    sess.out
        .write_csv("c1_curve.csv", &["horizon", "c1", "c1_decimal"], &rows)
        .map_err(crate::experiments::io_err)?;

    let mut report = RunReport::new(
        "weights-analyze",
        echo(&cfg, sess.digits),
        serde_json::Value::Null,
    );

    let nondecreasing = vals.windows(2).all(|w| w[0] <= w[1]);
    let shown: Vec<String> = vals.iter().map(format_rat).collect();
    report.push(Assertion::note(
        "c1-nondecreasing-in-horizon",
        "nondecreasing over the horizon grid",
        shown.join(" , "),
        nondecreasing,
    ));

    if let Some(expect) = cfg.expect {
        if vals.len() < 2 {
            return Err(CliError::Usage(
                "`expect` needs at least two horizons".into(),
            ));
        }
        let prev = &vals[vals.len() - 2];
        let last = &vals[vals.len() - 1];
        match expect {
            TrendExpect::Bounded => {
                let cap = prev * rat(21, 20);
                report.push(Assertion::exact(
                    "c1-growth-within-5-percent",
                    &cap,
                    last,
                    *last <= cap,
                ));
            }
            TrendExpect::Growing => {
                let floor = prev * rat(5, 4);
                report.push(Assertion::exact(
                    "c1-growth-at-least-25-percent",
                    &floor,
                    last,
                    *last >= floor,
                ));
            }
        }
    }

    // growth-trend diagnostic at the largest horizon
    let trend = if let Some(ps) = &cfg.trend_p {
        if top < 16 {
            return Err(CliError::Usage(
                "trend classification needs a horizon ≥ 16".into(),
            ));
        }
        let p = config::positive_rat_field(ps, "trend_p")?;
        if p < rat_int(1) {
            return Err(CliError::Usage("`trend_p` must be ≥ 1".into()));
        }
        let w = w_full.clone();
        Some(guarded(move || classify_hardy(&w, &p))?)
    } else if top >= 16 {
        let w = w_full.clone();
        Some(guarded(move || classify_hardy(&w, &rat_int(1)))?)
    } else {
        None
    };

    // optional weak p-norm with its scaling identity
    let weak = if let Some(ps) = &cfg.weak_norm_p {
        let p = config::positive_rat_field(ps, "weak_norm_p")?;
        if p < rat_int(1) {
            return Err(CliError::Usage("`weak_norm_p` must be ≥ 1".into()));
        }
        let w = w_full.clone();
        let pc = p.clone();
        let rep = guarded(move || weak_norm_seq(&w, &pc))?;
        if p.denom() == &num_bigint_one() {
            // integer p: ‖3w‖^p = 3^p‖w‖^p, bit-exactly
            let w3 = w_full.scaled(&rat_int(3));
            let pc = p.clone();
            let rep3 = guarded(move || weak_norm_seq(&w3, &pc))?;
            let a = p.numer().clone();
            let lhs = rep3
                .value_pow
                .exact()
                .cloned()
                .expect("integer-p weak norm power is exact");
            let base = rep
                .value_pow
                .exact()
                .cloned()
                .expect("integer-p weak norm power is exact");
            let factor = pow_rat(&rat_int(3), int_to_i64(&a)?);
            let rhs = &factor * &base;
            report.push(Assertion::exact(
                "weak-norm-homogeneity",
                &rhs,
                &lhs,
                lhs == rhs,
            ));
        }
        Some(rep)
    } else {
        None
    };

    report.results = jval!({
        "c1_by_horizon": cfg.horizons.iter().zip(&vals).map(|(h, v)| {
            jval!({"horizon": h, "c1": format_rat(v), "c1_decimal": decimal_string(v, 30)})
        }).collect::<Vec<_>>(),
        "trend": trend.as_ref().map(json),
        "weak_norm": weak.as_ref().map(json),
    });
    Ok(report)
}

fn num_bigint_one() -> num_bigint::BigInt {
    num_bigint::BigInt::from(1)
}

fn int_to_i64(n: &num_bigint::BigInt) -> Result<i64, CliError> {
    use num_traits::ToPrimitive;
    n.to_i64()
        .ok_or_else(|| CliError::Usage("exponent too large".into()))
}
