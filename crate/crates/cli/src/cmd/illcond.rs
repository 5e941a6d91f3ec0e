use serde::Serialize;
use simco::experiments::{illcond_search, IllcondConfig, Signature};

use crate::{load_config, CliResult, Common, Finished, Run};

#[derive(Debug, Serialize)]
pub struct IllcondReport {
    pub seeds_tried: u64,
    pub found: bool,
    pub seed: Option<u64>,
    pub signature: Option<Signature>,
    /// Initial `‖Y‖_F²` of the instance, for rescaling the gradient threshold.
    pub y_norm_sq: Option<f64>,
}

pub fn run(common: &Common) -> CliResult<Finished> {
    let mut cfg: IllcondConfig = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.first_seed = seed;
    }
    cfg.update.validate()?;
    let mut run = Run::start("illcond", common, &cfg, cfg.first_seed)?;
    let search = illcond_search(&cfg)?;
    let report = match &search.found {
        Some(hit) => {
            for (method, trace) in &hit.traces {
                run.out.write(&format!("illcond_{}.csv", method.name()), trace.to_csv().as_bytes())?;
            }
            IllcondReport {
                seeds_tried: search.seeds_tried,
                found: true,
                seed: Some(hit.seed),
                signature: Some(hit.signature),
                y_norm_sq: Some(hit.instance.y.frobenius_norm_sq()),
            }
        }
        None => IllcondReport { seeds_tried: search.seeds_tried, found: false, seed: None, signature: None, y_norm_sq: None },
    };
    run.out.write_json("illcond_report.json", &report)?;
    run.finish(0)
}
