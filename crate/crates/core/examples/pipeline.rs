//! The command-line workflow end to end, driven through the library: simulate
//! a campaign, verify pre-mission, then monitor the last mission.

use std::path::Path;

use paraguard::shell::commands::{cmd_monitor, cmd_premission, cmd_simulate, SimulateOptions};
use paraguard::shell::{load_model, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/models/uuv-fig1.toml"))?;
    let cfg = RunConfig::default();
    let dir = std::env::temp_dir().join(format!("paraguard-pipeline-{}", std::process::id()));

    let campaign = dir.join("campaign.jsonl");
    print!("{}", cmd_simulate(&model, &cfg, &SimulateOptions::default(), &campaign)?.stdout);
    print!("{}", cmd_premission(&model, &campaign, &cfg, &dir)?.stdout);

    let showcase = dir.join("showcase.jsonl");
    let opts = SimulateOptions {
        showcase: true,
        ..Default::default()
    };
    print!("{}", cmd_simulate(&model, &cfg, &opts, &showcase)?.stdout);
    let outcome = cmd_monitor(
        &model,
        &dir.join("cache.json"),
        &dir.join("premission.json"),
        &showcase,
        None,
        &cfg,
        &dir.join("monitor"),
    )?;
    print!("{}", outcome.stdout);
    println!("outputs in {}", dir.display());
    Ok(())
}
