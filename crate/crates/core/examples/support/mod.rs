//! Campaign + pre-mission setup shared by the runtime examples.

use std::path::Path;

use paraguard::monitor::{premission_verify, ClosedFormCache, Monitor, MonitorConfig, PremissionReport};
use paraguard::paramcheck::BoundOptions;
use paraguard::shell::{load_model, LoadedModel, RunConfig};
use paraguard::simulator::{count_transitions, generate_campaign, GroundTruth, SimConfig};

pub struct Setup {
    pub model: LoadedModel,
    pub truth: GroundTruth,
    pub cfg: RunConfig,
    pub cache: ClosedFormCache,
    pub report: PremissionReport,
}

impl Setup {
    pub fn uuv() -> Result<Self, Box<dyn std::error::Error>> {
        let model = load_model(&Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/models/uuv-fig1.toml"))?;
        let truth = model.truth.clone().expect("model has a [truth] block");
        let cfg = RunConfig::default();
        let missions = generate_campaign(&model.dtmc, &truth, cfg.n_missions, &cfg.gamma_range, &cfg.sim(), cfg.seed)?;
        let opts = BoundOptions::default();
        let cache = ClosedFormCache::build(&model.dtmc, &model.queries, &model.hash, &opts)?;
        let report = premission_verify(
            &model.dtmc,
            &model.priors,
            &model.queries,
            &cache,
            &count_transitions(&missions)?,
            cfg.cbi_box,
            &opts,
        )?;
        Ok(Setup {
            model,
            truth,
            cfg,
            cache,
            report,
        })
    }

    pub fn monitor(&self) -> Result<Monitor, Box<dyn std::error::Error>> {
        let config = MonitorConfig {
            alarm: self.cfg.alarm.clone(),
            cbi_box: self.cfg.cbi_box,
        };
        Ok(Monitor::new(&self.model.dtmc, &self.model.queries, &self.cache, &self.report, config, BoundOptions::default())?)
    }
}

pub trait SimConfigExt {
    fn sim(&self) -> SimConfig;
}

impl SimConfigExt for RunConfig {
    fn sim(&self) -> SimConfig {
        SimConfig { step_cap: self.step_cap }
    }
}
