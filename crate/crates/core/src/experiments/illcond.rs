use serde::{Deserialize, Serialize};

use super::synthetic::{gen_synthetic, SyntheticInstance, SyntheticSpec};
use crate::dict_update::UpdateConfig;
use crate::dictionary::Dictionary;
use crate::error::Result;
use crate::learner::{initial_dictionary, learn_with, ConvergenceTrace, LearnConfig, Method, SparseCoder};
use crate::numerics::RngState;

/// Search for an instance on which primitive SimCO stalls at an
/// ill-conditioned dictionary while regularized SimCO does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllcondConfig {
    pub m: usize,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub mu: f64,
    pub iters: usize,
    pub first_seed: u64,
    pub max_seeds: u64,
    /// Plateau: relative decrease of `f` over the last `window` iterations below `plateau_rel`.
    pub window: usize,
    pub plateau_rel: f64,
    pub kappa_threshold: f64,
    /// Gradient counts as non-vanishing above `grad_factor · g_min · ‖Y‖_F²`.
    pub grad_factor: f64,
    pub update: UpdateConfig,
}

impl Default for IllcondConfig {
    fn default() -> Self {
        Self {
            m: 16,
            d: 32,
            n: 78,
            s: 4,
            mu: 0.01,
            iters: 3000,
            first_seed: 0,
            max_seeds: 200,
            window: 20,
            plateau_rel: 1e-4,
            kappa_threshold: 10.0,
            grad_factor: 10.0,
            update: UpdateConfig::default(),
        }
    }
}

/// Which parts of the signature an instance shows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub primitive_plateau: bool,
    pub primitive_grad_large: bool,
    pub primitive_kappa_large: bool,
    pub regularized_kappa_ok: bool,
    pub primitive_final_kappa: f64,
    pub regularized_final_kappa: Option<f64>,
}

impl Signature {
    pub fn found(&self) -> bool {
        self.primitive_plateau && self.primitive_grad_large && self.primitive_kappa_large && self.regularized_kappa_ok
    }
}

#[derive(Debug, Clone)]
pub struct IllcondRun {
    pub seed: u64,
    pub instance: SyntheticInstance,
    pub d0: Dictionary,
    pub traces: Vec<(Method, ConvergenceTrace)>,
    pub signature: Signature,
}

impl IllcondRun {
    pub fn trace(&self, method: Method) -> Option<&ConvergenceTrace> {
        self.traces.iter().find(|(m, _)| *m == method).map(|(_, t)| t)
    }
}

#[derive(Debug, Clone)]
pub struct IllcondSearch {
    pub seeds_tried: u64,
    pub found: Option<IllcondRun>,
}

fn run(cfg: &IllcondConfig, inst: &SyntheticInstance, d0: &Dictionary, method: Method) -> Result<ConvergenceTrace> {
    let lcfg = LearnConfig { update: cfg.update, timing: false, ..LearnConfig::new(method, cfg.iters, cfg.s).with_mu(cfg.mu) };
    let coder = SparseCoder::Fixed(inst.x_true.pattern().clone());
    Ok(learn_with(&inst.y, cfg.d, &lcfg, Some(d0), &coder)?.trace)
}

/// Runs primitive SimCO on the instance for `seed`, then (when it stalls)
/// the other three methods from the same initial dictionary. `all_methods`
/// forces all four runs.
pub fn illcond_instance(cfg: &IllcondConfig, seed: u64, all_methods: bool) -> Result<IllcondRun> {
    let spec = SyntheticSpec { m: cfg.m, d: cfg.d, n: cfg.n, s: cfg.s, snr_db: None, seed };
    let mut rng = RngState::new(seed);
    let instance = gen_synthetic(&spec, &mut rng)?;
    let d0 = initial_dictionary(&instance.y, cfg.d, &mut rng)?;
    let y_sq = instance.y.frobenius_norm_sq();

    let prim = run(cfg, &instance, &d0, Method::SimcoPrimitive)?;
    let recs = &prim.records;
    let last = recs.last().expect("initial record");
    let back = &recs[recs.len().saturating_sub(cfg.window + 1)];
    let plateau = recs.len() > cfg.window && back.f > 0.0 && (back.f - last.f) / back.f < cfg.plateau_rel;
    let grad_large = last.grad_max > cfg.grad_factor * cfg.update.g_min * y_sq;
    let kappa = last.kappa.unwrap_or(f64::NAN);
    let mut signature = Signature {
        primitive_plateau: plateau,
        primitive_grad_large: grad_large,
        primitive_kappa_large: kappa > cfg.kappa_threshold,
        regularized_kappa_ok: false,
        primitive_final_kappa: kappa,
        regularized_final_kappa: None,
    };
    let mut traces = vec![(Method::SimcoPrimitive, prim)];
    let stalled = plateau && grad_large && signature.primitive_kappa_large;
    if stalled || all_methods {
        let reg = run(cfg, &instance, &d0, Method::SimcoRegularized)?;
        let k = reg.last().and_then(|r| r.kappa).unwrap_or(f64::NAN);
        signature.regularized_final_kappa = Some(k);
        signature.regularized_kappa_ok = k < cfg.kappa_threshold;
        traces.push((Method::SimcoRegularized, reg));
    }
    if signature.found() || all_methods {
        for method in [Method::Mod, Method::Ksvd] {
            traces.push((method, run(cfg, &instance, &d0, method)?));
        }
    }
    traces.sort_by_key(|(m, _)| Method::ALL.iter().position(|x| x == m));
    Ok(IllcondRun { seed, instance, d0, traces, signature })
}

/// Tries seeds `first_seed, first_seed + 1, …` until the signature appears.
pub fn illcond_search(cfg: &IllcondConfig) -> Result<IllcondSearch> {
    for k in 0..cfg.max_seeds {
        let run = illcond_instance(cfg, cfg.first_seed + k, false)?;
        if run.signature.found() {
            return Ok(IllcondSearch { seeds_tried: k + 1, found: Some(run) });
        }
    }
    Ok(IllcondSearch { seeds_tried: cfg.max_seeds, found: None })
}
