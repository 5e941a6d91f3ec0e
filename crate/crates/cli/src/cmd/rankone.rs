use serde::{Deserialize, Serialize};
use simco::rankone::{descend_rank1, random_gapped_matrix, random_start, DescentConfig, RankOneProblem};
use simco::{par, RngState};

use crate::{load_config, CliError, CliResult, Common, Finished, Run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankoneConfig {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    /// Matrices are redrawn until `λ1/λ2` reaches this.
    pub min_ratio: f64,
    /// Success: final `f` within `gap_tol · ‖A‖_F²` of the optimum.
    pub gap_tol: f64,
    /// Allowed per-step increase of θ.
    pub theta_tol: f64,
    pub seed: u64,
    pub step_eps: f64,
    pub max_steps: usize,
    pub grad_tol: f64,
    pub min_step: f64,
    /// Write `trajectories/trial<k>.csv` for every trial.
    pub write_trajectories: bool,
}

impl Default for RankoneConfig {
    fn default() -> Self {
        let d = DescentConfig::default();
        Self {
            m: 5,
            n: 8,
            trials: 100,
            min_ratio: 1.02,
            gap_tol: 1e-8,
            theta_tol: 1e-10,
            seed: 0,
            step_eps: d.step_eps,
            max_steps: d.max_steps,
            grad_tol: d.grad_tol,
            min_step: d.min_step,
            write_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankoneReport {
    pub trials: usize,
    pub successes: usize,
    /// Largest `|f_final − optimum| / ‖A‖_F²` over good starts.
    pub max_final_gap: f64,
    /// Starts orthogonal to the top singular vector, excluded from `trials`.
    pub bad_start: usize,
    pub theta_violations: usize,
}

pub struct Trial {
    pub bad_start: bool,
    pub steps: usize,
    pub final_gap: f64,
    pub theta_start: f64,
    pub theta_final: f64,
    pub theta_monotone: bool,
    pub trajectory: String,
}

pub const TRIALS_HEADER: &str = "trial,bad_start,steps,final_gap,theta_start,theta_final,theta_monotone,success";

impl Trial {
    pub fn success(&self, cfg: &RankoneConfig) -> bool {
        !self.bad_start && self.final_gap <= cfg.gap_tol && self.theta_monotone
    }
}

pub fn run_trial(cfg: &RankoneConfig, k: usize) -> CliResult<Trial> {
    let mut rng = RngState::new(cfg.seed).fork(k as u64);
    let a = random_gapped_matrix(cfg.m, cfg.n, cfg.min_ratio, &mut rng);
    let u0 = random_start(cfg.m, &mut rng);
    let problem = RankOneProblem::new(a)?;
    let dcfg = DescentConfig { step_eps: cfg.step_eps, max_steps: cfg.max_steps, grad_tol: cfg.grad_tol, min_step: cfg.min_step };
    let res = descend_rank1(&problem, &u0, &dcfg)?;
    let scale = problem.matrix().frobenius_norm_sq();
    let traj = &res.trajectory;
    Ok(Trial {
        bad_start: res.bad_start,
        steps: res.steps(),
        final_gap: (res.final_point().f - problem.optimum()) / scale,
        theta_start: traj[0].theta,
        theta_final: res.final_point().theta,
        theta_monotone: traj.windows(2).all(|w| w[1].theta <= w[0].theta + cfg.theta_tol),
        trajectory: if cfg.write_trajectories { res.trajectory_csv() } else { String::new() },
    })
}

pub fn validate(cfg: &RankoneConfig) -> CliResult<()> {
    if cfg.m < 2 || cfg.n < 2 {
        return Err(CliError::Config("m, n: both must be at least 2".into()));
    }
    if !(cfg.min_ratio > 1.0) {
        return Err(CliError::Config("min_ratio: must exceed 1".into()));
    }
    if !(cfg.step_eps > 0.0 && cfg.min_step > 0.0 && cfg.gap_tol >= 0.0 && cfg.theta_tol >= 0.0) {
        return Err(CliError::Config("step_eps, min_step must be > 0 and gap_tol, theta_tol >= 0".into()));
    }
    Ok(())
}

pub fn run(common: &Common) -> CliResult<Finished> {
    let mut cfg: RankoneConfig = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    validate(&cfg)?;
    let mut run = Run::start("rankone", common, &cfg, cfg.seed)?;
    let trials = par::map_indexed(cfg.trials, |k| run_trial(&cfg, k));

    let mut report = RankoneReport { trials: 0, successes: 0, max_final_gap: 0.0, bad_start: 0, theta_violations: 0 };
    let mut table = String::from(TRIALS_HEADER);
    table.push('\n');
    for (k, t) in trials.into_iter().enumerate() {
        let t = t?;
        let ok = t.success(&cfg);
        table.push_str(&format!(
            "{k},{},{},{},{},{},{},{ok}\n",
            t.bad_start, t.steps, t.final_gap, t.theta_start, t.theta_final, t.theta_monotone
        ));
        if t.bad_start {
            report.bad_start += 1;
        } else {
            report.trials += 1;
            report.successes += usize::from(ok);
            report.max_final_gap = report.max_final_gap.max(t.final_gap.abs());
            report.theta_violations += usize::from(!t.theta_monotone);
        }
        if cfg.write_trajectories {
            run.out.write(&format!("trajectories/trial{k}.csv"), t.trajectory.as_bytes())?;
        }
    }
    run.out.write("rankone_trials.csv", table.as_bytes())?;
    run.out.write_json("rankone_report.json", &report)?;
    let code = if report.successes == report.trials { 0 } else { 3 };
    if code != 0 {
        eprintln!("simco: {}", CliError::Property(format!("{} of {} trials failed", report.trials - report.successes, report.trials)));
    }
    run.finish(code)
}
