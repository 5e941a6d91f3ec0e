use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use simco::experiments::{add_noise, denoise, test_image, DenoiseConfig, GrayImage};
use simco::RngState;

use crate::{load_config, CliError, CliResult, Common, Finished, Run};

#[derive(Debug, Serialize)]
pub struct DenoiseReport {
    pub psnr_in: Option<f64>,
    pub psnr_out: Option<f64>,
    pub runtime_ms: f64,
}

fn read_image(path: &Path) -> CliResult<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    GrayImage::read_pgm(&bytes).map_err(|e| CliError::io(path, e))
}

fn quantized(img: &GrayImage) -> GrayImage {
    let pixels = img.to_u8().into_iter().map(f64::from).collect();
    GrayImage::new(img.width, img.height, pixels).expect("same shape")
}

/// Built-in test image plus Gaussian noise of the configured σ, both rounded
/// to 8 bits exactly as they are written to `clean.pgm` and `noisy.pgm`.
pub fn synthetic_pair(size: usize, cfg: &DenoiseConfig) -> (GrayImage, GrayImage) {
    let clean = test_image(size);
    let noisy = add_noise(&clean, cfg.sigma, &mut RngState::new(cfg.seed).fork(1));
    (quantized(&clean), quantized(&noisy))
}

pub fn run(common: &Common, input: Option<&Path>, clean: Option<&Path>, test_size: Option<usize>) -> CliResult<Finished> {
    let mut cfg: DenoiseConfig = load_config(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if test_size.is_some_and(|s| s < 8) {
        return Err(CliError::Config("test_image: size must be at least 8".into()));
    }
    let mut run = Run::start("denoise", common, &cfg, cfg.seed)?;
    let (noisy, reference) = match (input, test_size) {
        (Some(path), _) => (read_image(path)?, clean.map(read_image).transpose()?),
        (None, Some(size)) => {
            let (c, n) = synthetic_pair(size, &cfg);
            run.out.write("clean.pgm", &c.to_pgm_bytes())?;
            run.out.write("noisy.pgm", &n.to_pgm_bytes())?;
            let reference = match clean {
                Some(path) => Some(read_image(path)?),
                None => Some(c),
            };
            (n, reference)
        }
        (None, None) => return Err(CliError::Config("input: either --input or --test-image is required".into())),
    };
    let start = Instant::now();
    let result = denoise(&noisy, reference.as_ref(), &cfg)?;
    let report = DenoiseReport {
        psnr_in: result.psnr_in,
        psnr_out: result.psnr_out,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    run.out.write("denoised.pgm", &result.image.to_pgm_bytes())?;
    run.out.write("trace.csv", result.trace.to_csv().as_bytes())?;
    run.out.write_json("report.json", &report)?;
    run.finish(0)
}
