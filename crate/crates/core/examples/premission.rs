//! Pre-mission verification: learn posteriors from a campaign and bound the
//! pre-mission requirements over the resulting parameter box.

use std::path::Path;

use paraguard::monitor::{premission_verify, ClosedFormCache};
use paraguard::paramcheck::BoundOptions;
use paraguard::shell::commands::render_table;
use paraguard::shell::{load_model, RunConfig};
use paraguard::simulator::{count_transitions, generate_campaign, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/models/uuv-fig1.toml"))?;
    let truth = model.truth.clone().expect("model has a [truth] block");
    let cfg = RunConfig::default();
    let sim = SimConfig { step_cap: cfg.step_cap };
    let missions = generate_campaign(&model.dtmc, &truth, cfg.n_missions, &cfg.gamma_range, &sim, cfg.seed)?;
    let tallies = count_transitions(&missions)?;

    let opts = BoundOptions::default();
    let cache = ClosedFormCache::build(&model.dtmc, &model.queries, &model.hash, &opts)?;
    let report = premission_verify(&model.dtmc, &model.priors, &model.queries, &cache, &tallies, cfg.cbi_box, &opts)?;
    print!("{}", render_table(&report));
    for b in &report.bounds {
        println!("{}: {}{}", b.id, b.interval, if b.conservative { " (conservative)" } else { "" });
    }
    Ok(())
}
