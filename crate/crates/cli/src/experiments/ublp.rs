//! `ublp`: builds a flow witness whose weak (p,p) maximal ratio dominates
//! 2^{−1−2/p}|J|^{1/p}, with the same plan artifact and replay round trip
//! as `ubl1`.

use divergia_core::constructions::{build_weak_lp, replay_plan, ConstructionPlan, TimeSequence};
use divergia_core::rat::{format_rat, pow_rat, rat_int};
use divergia_core::report::{Assertion, RunReport};
use num_traits::ToPrimitive;
use serde_json::json as jval;

use crate::config::{self, UblpConfig};
use crate::experiments::{construction_err, echo, guarded, io_err, json};
use crate::{CliError, Session};

pub fn run(cfg_text: &str, sess: &Session) -> Result<RunReport, CliError> {
    let cfg: UblpConfig = config::load(cfg_text)?;
    let p = config::positive_rat_field(&cfg.p, "p")?;
    if p <= rat_int(1) {
        return Err(CliError::Usage("`p` must be > 1".into()));
    }
    let mut js = cfg.j_set.clone();
    js.sort_unstable();
    js.dedup();
    if js.len() != cfg.j_set.len() || js.is_empty() {
        return Err(CliError::Usage(
            "`j_set` must be a nonempty duplicate-free list".into(),
        ));
    }
    if js[0] < 1 {
        return Err(CliError::Usage("dyadic indices must be ≥ 1".into()));
    }
    if cfg.n0 < 1 {
        return Err(CliError::Usage("`n0` must be ≥ 1".into()));
    }
    let (a, b) = (
        p.numer().to_i64().ok_or_else(too_big)?,
        p.denom().to_i64().ok_or_else(too_big)?,
    );

    let (plan, rep) = {
        let seq = TimeSequence::new(cfg.seq.clone());
        let (j_set, p, n0) = (cfg.j_set.clone(), p.clone(), cfg.n0);
        guarded(move || build_weak_lp(&j_set, &p, n0, &seq))?.map_err(construction_err)?
    };

    let mut report = RunReport::new("ublp", echo(&cfg, sess.digits), serde_json::Value::Null);
    report.push(Assertion::exact(
        "ratio-power-dominates-target",
        &rep.target_pow_b,
        &rep.ratio_pow_b,
        rep.ratio_pow_b >= rep.target_pow_b,
    ));
    if !rep.constant_branch {
        // ‖f‖_p = 2^{1+1/p}·K^{−1/p} in the b-th-power scale: (‖f‖_p^p)^b
        let expected = pow_rat(&rat_int(2), a + b) / pow_rat(&rat_int(rep.k_mod as i64), b);
        report.push(Assertion::exact(
            "f-norm-power-exact",
            &expected,
            &rep.f_pow_b,
            rep.f_pow_b == expected,
        ));
    }

    let plan_text = serde_json::to_string_pretty(&plan).expect("plan serializes");
    let plan_path = sess.out.write_json("plan.json", &plan_text).map_err(io_err)?;
    let reloaded: ConstructionPlan = serde_json::from_str(&plan_text)
        .map_err(|e| CliError::Assertion(format!("plan does not round-trip: {e}")))?;
    let replayed = guarded(move || replay_plan(&reloaded))?.map_err(construction_err)?;
    report.push(Assertion::exact(
        "replay-reproduces-claimed-bound",
        &plan.claimed_bound,
        &replayed,
        replayed == plan.claimed_bound,
    ));

    report.results = jval!({
        "plan_name": plan.name,
        "plan_path": plan_path.display().to_string(),
        "claimed_bound": format_rat(&plan.claimed_bound),
        "builder": json(&rep),
    });
    Ok(report)
}

fn too_big() -> CliError {
    CliError::Usage("`p` numerator/denominator too large".into())
}
