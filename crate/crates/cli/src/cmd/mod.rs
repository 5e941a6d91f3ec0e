pub mod bench;
pub mod denoise;
pub mod illcond;
pub mod rankone;
pub mod synth;
pub mod verify;

use simco::learner::{LearnConfig, Method, MuStage};

/// The μ schedule 1e-1, 1e-2, 1e-3, 1e-4, switching every `every` iterations.
pub fn decade_schedule(every: usize) -> Vec<MuStage> {
    [1e-1, 1e-2, 1e-3, 1e-4]
        .iter()
        .enumerate()
        .map(|(k, &mu)| MuStage { start_iter: k * every, mu })
        .collect()
}

/// One learner per method; regularized SimCO gets `schedule`.
pub fn four_methods(outer_iters: usize, s: usize, schedule: &[MuStage]) -> Vec<LearnConfig> {
    Method::ALL
        .iter()
        .map(|&m| {
            let mut cfg = LearnConfig::new(m, outer_iters, s);
            if m == Method::SimcoRegularized {
                cfg.mu_schedule = schedule.to_vec();
            }
            cfg
        })
        .collect()
}
