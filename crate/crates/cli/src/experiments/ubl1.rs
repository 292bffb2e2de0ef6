//! `ubl1`: builds a rotation witness whose weak (1,1) maximal constant
//! exceeds m_goal/4, writes the replayable plan, and re-asserts the bound
//! through a serialization round trip.

use divergia_core::constructions::{build_weak_l1, replay_plan, ConstructionPlan, TimeSequence};
use divergia_core::rat::{format_rat, rat, rat_int};
use divergia_core::report::{Assertion, RunReport};
use serde_json::json as jval;

use crate::config::{self, Ubl1Config};
use crate::experiments::{construction_err, echo, guarded, io_err, json};
use crate::{CliError, Session};

pub fn run(cfg_text: &str, sess: &Session) -> Result<RunReport, CliError> {
    let cfg: Ubl1Config = config::load(cfg_text)?;
    if cfg.m_goal < 1 {
        return Err(CliError::Usage("`m_goal` must be ≥ 1".into()));
    }
    let w = cfg.weight.resolve()?;
    if w.horizon < 2 {
        return Err(CliError::Usage(
            "the weak (1,1) builder needs a weight horizon ≥ 2".into(),
        ));
    }

    let (plan, rep) = {
        let w = w.clone();
        let seq_kind = cfg.seq.clone();
        let (m_goal, n_min) = (cfg.m_goal, cfg.n_min);
        guarded(move || {
            let mut seq = TimeSequence::new(seq_kind);
            build_weak_l1(&w, m_goal, &mut seq, n_min)
        })?
        .map_err(construction_err)?
    };

    let m = cfg.m_goal as i64;
    let mut report = RunReport::new("ubl1", echo(&cfg, sess.digits), serde_json::Value::Null);
    report.push(Assertion::exact(
        "exceedance-has-full-measure",
        &rat_int(1),
        &rep.exceedance_measure,
        rep.exceedance_measure == rat_int(1),
    ));
    report.push(Assertion::exact(
        "f-l1-equals-4-over-m",
        &rat(4, m),
        &rep.f_l1,
        rep.f_l1 == rat(4, m),
    ));
    report.push(Assertion::exact(
        "weak11-ratio-exceeds-m-over-4",
        &rat(m, 4),
        &rep.weak11_ratio,
        rep.weak11_ratio > rat(m, 4),
    ));

    // plan artifact + round-trip replay
    let plan_text =
        serde_json::to_string_pretty(&plan).expect("plan serializes");
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
