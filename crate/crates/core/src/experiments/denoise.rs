use serde::{Deserialize, Serialize};

use super::image::{extract_all_patches, extract_patches, psnr, reassemble, GrayImage, PATCH_EDGE};
use crate::dictionary::Dictionary;
use crate::error::{Result, SimcoError};
use crate::learner::{initial_dictionary, learn, ConvergenceTrace, LearnConfig, Method, MuStage};
use crate::numerics::RngState;
use crate::sparse_coding::{omp_encode_with, OmpStop};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseConfig {
    pub method: Method,
    pub d: usize,
    pub mu: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub train_patches: usize,
    /// Noise standard deviation assumed by the OMP stopping rule.
    pub sigma: f64,
    /// OMP stops once `‖r‖ ≤ omp_c · sigma · 8`.
    pub omp_c: f64,
    pub max_atoms: usize,
    /// Replaces the residual-threshold rule when set.
    pub omp_stop: Option<OmpStop>,
    pub seed: u64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            method: Method::SimcoRegularized,
            d: 256,
            mu: 0.05,
            outer_iters: 10,
            inner_iters: 1,
            train_patches: 1000,
            sigma: 25.0,
            omp_c: 1.15,
            max_atoms: 10,
            omp_stop: None,
            seed: 0,
        }
    }
}

impl DenoiseConfig {
    pub fn stop_rule(&self) -> OmpStop {
        self.omp_stop.unwrap_or(OmpStop::ResidualThreshold {
            epsilon: self.omp_c * self.sigma * PATCH_EDGE as f64,
            max_atoms: self.max_atoms,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.train_patches == 0 || self.max_atoms == 0 {
            return Err(SimcoError::Precondition("d, train_patches and max_atoms must be >= 1".into()));
        }
        if !(self.sigma >= 0.0 && self.mu >= 0.0 && self.omp_c >= 0.0) {
            return Err(SimcoError::Precondition("sigma, mu and omp_c must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub image: GrayImage,
    pub psnr_in: Option<f64>,
    pub psnr_out: Option<f64>,
    pub dict: Dictionary,
    pub trace: ConvergenceTrace,
}

/// Learns a dictionary on random 8×8 patches of `noisy`, codes every
/// overlapping patch against it and averages the estimates per pixel.
pub fn denoise(noisy: &GrayImage, clean: Option<&GrayImage>, cfg: &DenoiseConfig) -> Result<DenoiseResult> {
    cfg.validate()?;
    let mut rng = RngState::new(cfg.seed);
    let train = extract_patches(noisy, cfg.train_patches, &mut rng)?;
    let d0 = initial_dictionary(&train.patches, cfg.d, &mut rng)?;
    let stop = cfg.stop_rule();
    let lcfg = LearnConfig {
        inner_iters: cfg.inner_iters,
        mu_schedule: vec![MuStage { start_iter: 0, mu: cfg.mu }],
        seed: cfg.seed,
        omp_stop: Some(stop),
        track_kappa: false,
        timing: false,
        ..LearnConfig::new(cfg.method, cfg.outer_iters, cfg.max_atoms.min(PATCH_EDGE * PATCH_EDGE))
    };
    let learned = learn(&train.patches, cfg.d, &lcfg, Some(&d0))?;

    let all = extract_all_patches(noisy)?;
    let x = omp_encode_with(&learned.dict, &all.patches, stop)?;
    let image = reassemble(&all, &x.reconstruct(&learned.dict), None)?.clamped();
    let (psnr_in, psnr_out) = match clean {
        Some(c) => (Some(psnr(c, noisy)?), Some(psnr(c, &image)?)),
        None => (None, None),
    };
    Ok(DenoiseResult { image, psnr_in, psnr_out, dict: learned.dict, trace: learned.trace })
}
