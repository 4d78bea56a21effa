//! Prior-data conflict alarms: an environment change (v = 0.8, outside its
//! prior) raises a known unknown; a state-mislabelling sensor fault raises an
//! unknown unknown over the whole S1 row.

mod support;

use paraguard::monitor::Classification;
use paraguard::rational::ratio;
use paraguard::ratfunc::ParamId;
use paraguard::simulator::{showcase_mission, simulate_mission, simulate_with_mislabel, MislabelFault, Mission};
use support::{Setup, SimConfigExt};

/// Prints each step at which the conflict classification changes.
fn alarms(setup: &Setup, title: &str, mission: &Mission) -> Result<(), Box<dyn std::error::Error>> {
    println!("{title} (mission {}, {} events):", mission.id, mission.len());
    let mut monitor = setup.monitor()?;
    let mut last = Classification::None;
    for e in &mission.events {
        let r = monitor.ingest(e)?;
        if r.conflict.classification != last {
            println!("  step {:>4} in {}: {:?}", r.step, setup.model.state_names[&r.state], r.conflict.classification);
            last = r.conflict.classification;
        }
    }
    println!("  final: {last:?}");
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = Setup::uuv()?;
    let cfg = &setup.cfg;
    let dtmc = &setup.model.dtmc;
    let id = cfg.n_missions + 1;

    let mut muddy = setup.truth.clone();
    muddy.values.insert(ParamId::new("v"), ratio(4, 5));
    // the alarm needs evidence from S4, so take a mission that keeps returning there
    let s4 = setup.model.state_named("S4").expect("state");
    let mut muddy_id = id;
    let mission = loop {
        let m = simulate_mission(dtmc, &muddy, muddy_id, Some(&cfg.mission_gamma), &cfg.sim(), cfg.seed)?;
        if m.events.iter().filter(|e| e.from == s4).count() >= 3 * cfg.alarm.window as usize {
            break m;
        }
        muddy_id += 1;
    };
    alarms(&setup, "v = 0.8", &mission)?;

    let state = |n: &str| setup.model.state_named(n).expect("state");
    let fault = MislabelFault {
        believed: state("S1"),
        actual: state("S4"),
        duration: 2500,
    };
    let mission = simulate_with_mislabel(dtmc, &setup.truth, id, Some(&cfg.mission_gamma), &fault, &cfg.sim(), cfg.seed)?;
    alarms(&setup, "S4 mislabelled as S1", &mission)?;

    let mission = showcase_mission(dtmc, &setup.truth, &cfg.mission_gamma, id, cfg.candidates, &cfg.sim(), cfg.seed)?;
    alarms(&setup, "nominal", &mission)?;
    Ok(())
}
