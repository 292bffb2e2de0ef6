//! `infection`: digit-infection rotation builder with the direct per-interval
//! exceedance cross-check and the window-sum identity.

use divergia_core::constructions::{build_infection, replay_plan, ConstructionPlan};
use divergia_core::rat::{format_rat, rat_int};
use divergia_core::report::{Assertion, RunReport};
use serde_json::json as jval;

use crate::config::{self, InfectionConfig};
use crate::experiments::{construction_err, echo, guarded, io_err, json};
use crate::{CliError, Session};

pub fn run(cfg_text: &str, sess: &Session) -> Result<RunReport, CliError> {
    let cfg: InfectionConfig = config::load(cfg_text)?;
    if cfg.k < 2 {
        return Err(CliError::Usage("`k` must be ≥ 2".into()));
    }
    if cfg.y < 1 {
        return Err(CliError::Usage("`y` must be ≥ 1".into()));
    }
    if cfg.t_horizon < 2 {
        return Err(CliError::Usage("`t_horizon` must be ≥ 2".into()));
    }
    let w = cfg.weight.resolve()?;
    if w.horizon < cfg.t_horizon as usize {
        return Err(CliError::Usage(format!(
            "weight horizon {} is shorter than t_horizon {}",
            w.horizon, cfg.t_horizon
        )));
    }

    let (plan, rep) = {
        let w = w.clone();
        let (k, y, t) = (cfg.k, cfg.y, cfg.t_horizon);
        guarded(move || build_infection(k, &w, y, t))?.map_err(construction_err)?
    };

    let mut report = RunReport::new(
        "infection",
        echo(&cfg, sess.digits),
        serde_json::Value::Null,
    );
    let (hits, total) = rep.agreement;
    report.push(Assertion::note(
        "point-checks-all-agree",
        format!("{total}/{total}"),
        format!("{hits}/{total}"),
        hits == total && total > 0,
    ));
    report.push(Assertion::note(
        "window-sum-identity",
        format!(
            "l_y + l_2y > m_y − 9 with m_y = {}",
            format_rat(&rep.sums.m_y)
        ),
        format!(
            "l_y = {}, l_2y = {}",
            format_rat(&rep.sums.l_y),
            format_rat(&rep.sums.l_2y)
        ),
        rep.sums.identity_holds,
    ));
    report.push(Assertion::exact(
        "infected-measure-positive",
        &rat_int(0),
        &rep.infected_measure,
        rep.infected_measure > rat_int(0),
    ));

    // per-interval point checks as plot data
    let rows: Vec<Vec<String>> = rep
        .checks
        .iter()
        .map(|c| {
            vec![
                c.t.to_string(),
                format_rat(&c.left),
                c.passed.to_string(),
            ]
        })
        .collect();
    sess.out
        .write_csv("intervals.csv", &["t", "left", "passed"], &rows)
        .map_err(io_err)?;

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
