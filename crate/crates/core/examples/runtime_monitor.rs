//! Replays a showcase mission through the runtime monitor and prints how the
//! R3/R4 bounds evolve as evidence accumulates.

mod support;

use paraguard::monitor::Classification;
use paraguard::simulator::showcase_mission;
use support::{Setup, SimConfigExt};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = Setup::uuv()?;
    let cfg = &setup.cfg;
    let mission = showcase_mission(
        &setup.model.dtmc,
        &setup.truth,
        &cfg.mission_gamma,
        cfg.n_missions + 1,
        cfg.candidates,
        &cfg.sim(),
        cfg.seed,
    )?;
    println!("mission {}: {} events", mission.id, mission.len());

    let mut monitor = setup.monitor()?;
    let mut alarms = 0;
    for e in &mission.events {
        let r = monitor.ingest(e)?;
        if r.conflict.classification != Classification::None {
            alarms += 1;
        }
        if r.step % 25 == 0 || r.step == mission.len() as u64 {
            let verdicts: Vec<String> = r
                .verdicts
                .iter()
                .map(|v| format!("{} {} {:?}", v.query, v.interval, v.status))
                .collect();
            println!("step {:>4} in {}: {}", r.step, setup.model.state_names[&r.state], verdicts.join("; "));
        }
    }
    println!("steps with a conflict alarm: {alarms}");
    Ok(())
}
