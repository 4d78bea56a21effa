//! A seeded 49-mission campaign on the UUV model and its pooled counts.

use std::path::Path;

use paraguard::shell::{load_model, RunConfig};
use paraguard::simulator::{count_transitions, generate_campaign, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/models/uuv-fig1.toml"))?;
    let truth = model.truth.clone().expect("model has a [truth] block");
    let cfg = RunConfig::default();
    let sim = SimConfig { step_cap: cfg.step_cap };
    let missions = generate_campaign(&model.dtmc, &truth, cfg.n_missions, &cfg.gamma_range, &sim, cfg.seed)?;

    let events: usize = missions.iter().map(|m| m.len()).sum();
    let longest = missions.iter().map(|m| m.len()).max().unwrap_or(0);
    println!("{} missions, {events} events, longest {longest}", missions.len());

    let tallies = count_transitions(&missions)?;
    for ((state, action), counts) in &tallies.per_action {
        let name = &model.state_names[state];
        let dests: Vec<String> = counts
            .to
            .iter()
            .map(|(to, n)| format!("{}:{n}", model.state_names[to]))
            .collect();
        println!("{name}/{action}: {} transitions -> {}", counts.total, dests.join(" "));
    }
    Ok(())
}
