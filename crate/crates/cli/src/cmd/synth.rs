use serde::{Deserialize, Serialize};
use simco::experiments::{gen_synthetic, SyntheticSpec};
use simco::learner::{initial_dictionary, learn_with, ConvergenceTrace, LearnConfig, Method, SparseCoder};
use simco::sparse_coding::OmpStop;
use simco::{par, RngState};

use super::{decade_schedule, four_methods};
use crate::{load_config, CliError, CliResult, Common, Finished, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coder {
    /// OMP with each learner's stopping rule.
    Omp,
    /// The generating pattern, fixed throughout.
    #[default]
    TruePattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// `spec.seed` is the first seed; run `k` uses `spec.seed + k`.
    pub spec: SyntheticSpec,
    #[serde(default = "twenty")]
    pub seeds: u64,
    pub learners: Vec<LearnConfig>,
    #[serde(default)]
    pub coder: Coder,
    /// Record wall-clock ms in traces; off keeps traces byte-stable.
    #[serde(default)]
    pub timing: bool,
    /// Also write each instance as MTX files.
    #[serde(default)]
    pub write_instances: bool,
}

fn twenty() -> u64 {
    20
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            spec: SyntheticSpec::standard(100, 0),
            seeds: 20,
            learners: four_methods(400, 4, &decade_schedule(100)),
            coder: Coder::TruePattern,
            timing: false,
            write_instances: false,
        }
    }
}

pub const SUMMARY_HEADER: &str = "method,seed,n,iters,final_f,final_f_per_n,final_kappa";

pub fn trace_path(method: Method, seed: u64) -> String {
    format!("traces/{}_seed{seed}.csv", method.name())
}

struct SeedRun {
    seed: u64,
    traces: Vec<(Method, ConvergenceTrace)>,
    files: Vec<(String, String)>,
}

fn run_seed(cfg: &SynthConfig, seed: u64) -> CliResult<SeedRun> {
    let spec = SyntheticSpec { seed, ..cfg.spec };
    let mut rng = RngState::new(seed);
    let inst = gen_synthetic(&spec, &mut rng)?;
    let d0 = initial_dictionary(&inst.y, spec.d, &mut rng)?;
    let mut traces = Vec::new();
    for learner in &cfg.learners {
        let lcfg = LearnConfig { timing: cfg.timing, seed, ..learner.clone() };
        let coder = match cfg.coder {
            Coder::Omp => SparseCoder::Omp(lcfg.omp_stop.unwrap_or(OmpStop::Sparsity { s: lcfg.s })),
            Coder::TruePattern => SparseCoder::Fixed(inst.x_true.pattern().clone()),
        };
        let out = learn_with(&inst.y, spec.d, &lcfg, Some(&d0), &coder)?;
        traces.push((lcfg.method, out.trace));
    }
    let mut files = Vec::new();
    if cfg.write_instances {
        let dir = format!("instances/seed{seed}");
        files.push((format!("{dir}/Y.mtx"), inst.y.to_mtx_string()));
        files.push((format!("{dir}/D_true.mtx"), inst.d_true.matrix().to_mtx_string()));
        files.push((format!("{dir}/X_true.mtx"), inst.x_true.to_dense().to_mtx_string()));
        let sidecar = serde_json::to_string_pretty(&spec).map_err(|e| CliError::Io(e.to_string()))?;
        files.push((format!("{dir}/spec.json"), sidecar + "\n"));
    }
    Ok(SeedRun { seed, traces, files })
}

pub fn validate(cfg: &SynthConfig) -> CliResult<()> {
    cfg.spec.validate()?;
    if cfg.learners.is_empty() {
        return Err(CliError::Config("learners: at least one learner is required".into()));
    }
    let mut seen = Vec::new();
    for (k, l) in cfg.learners.iter().enumerate() {
        l.validate().map_err(|e| CliError::Config(format!("learners[{k}]: {e}")))?;
        if seen.contains(&l.method) {
            return Err(CliError::Config(format!("learners[{k}]: method {} listed twice", l.method)));
        }
        seen.push(l.method);
    }
    Ok(())
}

pub fn run(common: &Common) -> CliResult<Finished> {
    let mut cfg: SynthConfig = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.spec.seed = seed;
    }
    validate(&cfg)?;
    let first = cfg.spec.seed;
    let mut run = Run::start("synth", common, &cfg, first)?;
    let results = par::map_indexed(cfg.seeds as usize, |k| run_seed(&cfg, first + k as u64));

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for r in results {
        let r = r?;
        for (method, trace) in &r.traces {
            run.out.write(&trace_path(*method, r.seed), trace.to_csv().as_bytes())?;
            let last = trace.last().expect("initial record");
            let kappa = last.kappa.map_or(String::new(), |k| k.to_string());
            let n = cfg.spec.n as f64;
            summary.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                method,
                r.seed,
                cfg.spec.n,
                last.iter,
                last.f,
                last.f / n,
                kappa
            ));
        }
        for (path, text) in &r.files {
            run.out.write(path, text.as_bytes())?;
        }
    }
    run.out.write("summary.csv", summary.as_bytes())?;
    run.finish(0)
}
