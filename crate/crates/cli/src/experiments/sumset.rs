//! `sumset`: integer sumset family with exhaustive decomposition,
//! translate, and weak-norm verification.

use divergia_core::precise::pow_rr;
use divergia_core::rat::{format_rat, pow_rat, rat, rat_int};
use divergia_core::report::{render_pow, Assertion, RunReport};
use num_traits::ToPrimitive;
use serde_json::json as jval;

use crate::config::{self, SumsetConfig};
use crate::experiments::{construction_err, echo, guarded, json};
use crate::{CliError, Session};

pub fn run(cfg_text: &str, sess: &Session) -> Result<RunReport, CliError> {
    let cfg: SumsetConfig = config::load(cfg_text)?;
    if cfg.k < 2 {
        return Err(CliError::Usage("`k` must be ≥ 2".into()));
    }
    let p = config::positive_rat_field(&cfg.p, "p")?;
    if p < rat_int(1) {
        return Err(CliError::Usage("`p` must be ≥ 1".into()));
    }
    let mut js = cfg.j_set.clone();
    js.sort_unstable();
    js.dedup();
    if js.len() != cfg.j_set.len() || js.is_empty() {
        return Err(CliError::Usage(
            "`j_set` must be a nonempty duplicate-free list".into(),
        ));
    }

    let (inst, maximal) = {
        let (k, j_set, p) = (cfg.k, cfg.j_set.clone(), p.clone());
        guarded(move || divergia_core::constructions::build_sumset(k, &j_set, &p))?
            .map_err(construction_err)?
    };

    let mut report = RunReport::new("sumset", echo(&cfg, sess.digits), serde_json::Value::Null);
    report.push(Assertion::note(
        "decomposition-unique",
        "every sum splits uniquely into parts",
        inst.unique_decomposition.to_string(),
        inst.unique_decomposition,
    ));
    report.push(Assertion::exact(
        "truncation-keeps-half",
        &(rat(1, 2) * rat_int(inst.b_len as i64)),
        &rat_int(inst.c_len as i64),
        inst.half_bound,
    ));
    report.push(Assertion::note(
        "average-reaches-half-on-translates",
        "A_{j₀+1} f ≥ 1/2 on every translated point",
        inst.lower_half.to_string(),
        inst.lower_half,
    ));
    report.push(Assertion::note(
        "translates-pairwise-disjoint",
        "C − k^{2^{j₀}} disjoint over j₀ ∈ J",
        inst.disjoint.to_string(),
        inst.disjoint,
    ));

    // ‖sup_j A_j f‖_{p,∞} ≥ |J|^{1/p}·‖f‖_p/4, recomputed from the report
    let entry = maximal
        .entries
        .first()
        .ok_or_else(|| CliError::Assertion("maximal report carries no entry".into()))?;
    let size = inst.j_set.len() as i64;
    if p.is_integer() {
        let a = p.to_integer().to_i64().ok_or_else(|| {
            CliError::Usage("`p` too large".into())
        })?;
        // power scale: ‖sup‖^p ≥ |J|·|B|/4^p with ‖f‖_p^p = |B|
        let target = rat_int(size) * rat_int(inst.b_len as i64) / pow_rat(&rat_int(4), a);
        let achieved = entry
            .profile_weak_pow
            .exact()
            .cloned()
            .expect("integer-p weak norm power is exact");
        report.push(Assertion::exact(
            "weak-norm-power-dominates-target",
            &target,
            &achieved,
            achieved >= target,
        ));
    } else {
        let target = pow_rr(&rat_int(size), &p.recip(), sess.ctx).scale(&rat(1, 4));
        let ratio = entry.ratio.as_iv();
        report.push(Assertion::note(
            "weak-norm-ratio-dominates-target",
            format!("≥ [{}, {}]", format_rat(&target.lo), format_rat(&target.hi)),
            render_pow(&entry.ratio),
            ratio.lo >= target.hi,
        ));
    }

    report.results = jval!({
        "instance": json(&inst),
        "maximal": json(&maximal),
    });
    Ok(report)
}
