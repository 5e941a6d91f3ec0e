//! Data generation and end-to-end pipelines: synthetic ground-truth
//! instances, 8×8 patch denoising, and the search for ill-conditioned runs.

mod denoise;
mod illcond;
mod image;
mod synthetic;

pub use denoise::{denoise, DenoiseConfig, DenoiseResult};
pub use illcond::{illcond_instance, illcond_search, IllcondConfig, IllcondRun, IllcondSearch, Signature};
pub use image::{
    add_noise, extract_all_patches, extract_grid_patches, extract_patches, psnr, reassemble, smooth_test_image,
    test_image, GrayImage, PatchSet, PATCH_EDGE,
};
pub use synthetic::{gen_synthetic, measured_snr_db, SyntheticInstance, SyntheticSpec};
