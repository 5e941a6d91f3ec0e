use std::time::Instant;

use serde::{Deserialize, Serialize};
use simco::experiments::{gen_synthetic, SyntheticSpec};
use simco::learner::{initial_dictionary, learn, LearnConfig, Method};
use simco::RngState;

use super::four_methods;
use crate::{load_config, CliError, CliResult, Common, Finished, Run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub spec: SyntheticSpec,
    pub learners: Vec<LearnConfig>,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut learners = four_methods(20, 4, &[]);
        learners[3] = learners[3].clone().with_mu(0.01);
        Self { spec: SyntheticSpec::standard(1000, 0), learners, repetitions: 3 }
    }
}

pub const BENCH_HEADER: &str = "method,repetitions,min_s,median_s,max_s,final_f_per_n";

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub min_s: f64,
    pub median_s: f64,
    pub max_s: f64,
    pub final_f_per_n: f64,
}

/// Observed orderings, reported but never enforced.
#[derive(Debug, Clone, Serialize)]
pub struct BenchFlags {
    pub simco_primitive_faster_than_ksvd: Option<bool>,
    pub simco_primitive_slower_than_mod: Option<bool>,
    pub simco_regularized_faster_than_ksvd: Option<bool>,
    pub simco_regularized_slower_than_mod: Option<bool>,
}

fn flags(rows: &[BenchRow]) -> BenchFlags {
    let t = |m: Method| rows.iter().find(|r| r.method == m).map(|r| r.median_s);
    let cmp = |a: Method, b: Method| Some(t(a)? < t(b)?);
    BenchFlags {
        simco_primitive_faster_than_ksvd: cmp(Method::SimcoPrimitive, Method::Ksvd),
        simco_primitive_slower_than_mod: cmp(Method::Mod, Method::SimcoPrimitive),
        simco_regularized_faster_than_ksvd: cmp(Method::SimcoRegularized, Method::Ksvd),
        simco_regularized_slower_than_mod: cmp(Method::Mod, Method::SimcoRegularized),
    }
}

pub fn run(common: &Common) -> CliResult<Finished> {
    let mut cfg: BenchConfig = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.spec.seed = seed;
    }
    cfg.spec.validate()?;
    if cfg.repetitions == 0 {
        return Err(CliError::Config("repetitions: must be at least 1".into()));
    }
    for (k, l) in cfg.learners.iter().enumerate() {
        l.validate().map_err(|e| CliError::Config(format!("learners[{k}]: {e}")))?;
    }
    let mut run = Run::start("bench", common, &cfg, cfg.spec.seed)?;
    let mut rng = RngState::new(cfg.spec.seed);
    let inst = gen_synthetic(&cfg.spec, &mut rng)?;
    let d0 = initial_dictionary(&inst.y, cfg.spec.d, &mut rng)?;

    let mut rows = Vec::new();
    for learner in &cfg.learners {
        let lcfg = LearnConfig { track_kappa: false, timing: false, ..learner.clone() };
        let mut times = Vec::with_capacity(cfg.repetitions);
        let mut final_f = f64::NAN;
        for _ in 0..cfg.repetitions {
            let start = Instant::now();
            let out = learn(&inst.y, cfg.spec.d, &lcfg, Some(&d0))?;
            times.push(start.elapsed().as_secs_f64());
            final_f = out.trace.last().map_or(f64::NAN, |r| r.f);
        }
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            method: lcfg.method,
            min_s: times[0],
            median_s: times[times.len() / 2],
            max_s: times[times.len() - 1],
            final_f_per_n: final_f / cfg.spec.n as f64,
        });
    }
    let mut table = String::from(BENCH_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, cfg.repetitions, r.min_s, r.median_s, r.max_s, r.final_f_per_n
        ));
    }
    run.out.write("bench.csv", table.as_bytes())?;
    run.out.write_json("bench_flags.json", &flags(&rows))?;
    run.finish(0)
}
