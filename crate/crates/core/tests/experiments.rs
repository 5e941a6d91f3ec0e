mod common;

use common::oracle;
use simco::dict_update::{objective, UpdateSelection};
use simco::experiments::*;
use simco::learner::{Method, TRACE_HEADER};
use simco::numerics::RngState;

fn image_rows(img: &GrayImage) -> oracle::Mat {
    img.pixels.chunks(img.width).map(<[f64]>::to_vec).collect()
}

#[test]
fn noiseless_instance_fits_exactly_on_true_pattern() {
    let spec = SyntheticSpec::standard(78, 1);
    let inst = gen_synthetic(&spec, &mut RngState::new(1)).unwrap();
    assert_eq!(inst.y.shape(), (16, 78));
    let sel = UpdateSelection::all(&inst.y, inst.x_true.pattern()).unwrap();
    assert!(objective(&inst.d_true, &sel, 0.0).unwrap().f <= 1e-20 * inst.y.frobenius_norm_sq());
    assert!(inst.d_true.max_norm_deviation() < 1e-12);
}

#[test]
fn requested_snr_is_met() {
    for seed in 0..5 {
        let spec = SyntheticSpec { snr_db: Some(20.0), ..SyntheticSpec::standard(200, seed) };
        let inst = gen_synthetic(&spec, &mut RngState::new(seed)).unwrap();
        assert!((measured_snr_db(&inst.clean, &inst.y).unwrap() - 20.0).abs() <= 0.01);
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = SyntheticSpec::standard(50, 3);
    let a = gen_synthetic(&spec, &mut RngState::new(3)).unwrap();
    let b = gen_synthetic(&spec, &mut RngState::new(3)).unwrap();
    assert_eq!(a.y, b.y);
    assert_eq!(a.x_true, b.x_true);
    assert!((0..50).all(|j| a.x_true.pattern().column(j).len() == 4));
}

#[test]
fn supports_are_uniform() {
    // Individual atoms over d = 32: χ²(31) at p = 0.001 is 61.098.
    let inst = gen_synthetic(&SyntheticSpec::standard(10_000, 4), &mut RngState::new(4)).unwrap();
    let mut counts = [0usize; 32];
    for j in 0..10_000 {
        for &i in inst.x_true.pattern().column(j) {
            counts[i] += 1;
        }
    }
    let expected = 40_000.0 / 32.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 61.098, "atoms chi2 {chi2}");

    // Whole supports over C(6, 2) = 15 cells: χ²(14) at p = 0.001 is 36.123.
    let spec = SyntheticSpec { m: 4, d: 6, n: 10_000, s: 2, snr_db: None, seed: 5 };
    let inst = gen_synthetic(&spec, &mut RngState::new(5)).unwrap();
    let cells = oracle::subsets(6, 2);
    let mut counts = vec![0usize; cells.len()];
    for j in 0..10_000 {
        let k = cells.iter().position(|c| c.as_slice() == inst.x_true.pattern().column(j)).unwrap();
        counts[k] += 1;
    }
    let expected = 10_000.0 / 15.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 36.123, "supports chi2 {chi2}");
}

#[test]
fn invalid_specs_are_rejected() {
    let mut rng = RngState::new(6);
    for (m, d, s) in [(16, 8, 4), (4, 8, 5), (4, 8, 0)] {
        let spec = SyntheticSpec { m, d, n: 5, s, snr_db: None, seed: 0 };
        assert!(gen_synthetic(&spec, &mut rng).is_err());
    }
}

#[test]
fn constant_image_patches_are_zero() {
    let img = GrayImage::new(20, 12, vec![90.0; 240]).unwrap();
    let set = extract_patches(&img, 1000, &mut RngState::new(7)).unwrap();
    assert_eq!(set.len(), 1000);
    assert_eq!(set.patches.shape(), (64, 1000));
    assert!(set.patches.data().iter().all(|&v| v == 0.0));
}

#[test]
fn minimal_image_has_one_patch() {
    let img = GrayImage::new(8, 8, (0..64).map(|v| f64::from(v) * 3.0).collect()).unwrap();
    let set = extract_patches(&img, 1, &mut RngState::new(8)).unwrap();
    let restored: Vec<f64> = set.patches.column(0).iter().map(|v| v + set.means[0]).collect();
    assert!(common::max_abs_diff(&restored, &img.pixels) < 1e-12);
}

#[test]
fn random_patches_round_trip_where_sampled() {
    let img = test_image(40);
    let set = extract_patches(&img, 30, &mut RngState::new(9)).unwrap();
    let back = reassemble(&set, &set.patches, None).unwrap();
    let mut covered = vec![false; img.pixels.len()];
    for &(r, c) in &set.anchors {
        for dr in 0..8 {
            for dc in 0..8 {
                covered[(r + dr) * 40 + c + dc] = true;
            }
        }
    }
    for (i, &cov) in covered.iter().enumerate() {
        if cov {
            assert!((back.pixels[i] - img.pixels[i]).abs() < 1e-10);
        } else {
            assert_eq!(back.pixels[i], 0.0);
        }
    }
}

#[test]
fn grid_patches_are_lossless() {
    let img = test_image(35);
    let set = extract_grid_patches(&img).unwrap();
    assert_eq!(set.len(), 16);
    let back = reassemble(&set, &set.patches, Some(&img)).unwrap();
    assert!(common::max_abs_diff(&back.pixels, &img.pixels) < 1e-10);
    let all = extract_all_patches(&img).unwrap();
    assert_eq!(all.len(), 28 * 28);
    let back = reassemble(&all, &all.patches, None).unwrap();
    assert!(common::max_abs_diff(&back.pixels, &img.pixels) < 1e-10);
}

#[test]
fn psnr_matches_double_loop() {
    let clean = test_image(32);
    let noisy = add_noise(&clean, 12.0, &mut RngState::new(10));
    let expected = oracle::psnr(&image_rows(&clean), &image_rows(&noisy));
    assert!((psnr(&clean, &noisy).unwrap() - expected).abs() <= 1e-9);
    assert!(psnr(&clean, &test_image(16)).is_err());
}

#[test]
fn pgm_round_trip() {
    let img = test_image(24);
    let rounded = GrayImage::new(24, 24, img.to_u8().iter().map(|&v| f64::from(v)).collect()).unwrap();
    assert_eq!(GrayImage::read_pgm(&img.to_pgm_bytes()).unwrap(), rounded);
    let mut ascii = Vec::new();
    img.write_pgm_ascii(&mut ascii).unwrap();
    assert!(ascii.starts_with(b"P2\n"));
    assert_eq!(GrayImage::read_pgm(&ascii).unwrap(), rounded);
}

#[test]
fn clean_smooth_image_is_reproduced() {
    let clean = smooth_test_image(64);
    let cfg = DenoiseConfig { outer_iters: 3, ..Default::default() };
    let out = denoise(&clean, Some(&clean), &cfg).unwrap();
    assert!(out.psnr_out.unwrap() >= 40.0, "{:?}", out.psnr_out);
}

#[test]
fn noisy_image_improves() {
    let clean = test_image(128);
    let noisy = add_noise(&clean, 25.0, &mut RngState::new(0).fork(1));
    let out = denoise(&noisy, Some(&clean), &DenoiseConfig::default()).unwrap();
    let (pin, pout) = (out.psnr_in.unwrap(), out.psnr_out.unwrap());
    assert!(pout - pin >= 1.0, "{pin} -> {pout}");
    assert_eq!(out.image.width, 128);
    assert!(out.image.pixels.iter().all(|v| (0.0..=255.0).contains(v)));
    assert_eq!(out.trace.records.len(), 11);
}

#[test]
fn denoise_without_reference() {
    let clean = test_image(32);
    let cfg = DenoiseConfig { outer_iters: 1, d: 64, train_patches: 200, ..Default::default() };
    let out = denoise(&clean, None, &cfg).unwrap();
    assert!(out.psnr_in.is_none() && out.psnr_out.is_none());
    let again = denoise(&clean, None, &cfg).unwrap();
    assert_eq!(out.image.to_pgm_bytes(), again.image.to_pgm_bytes());
}

#[test]
fn illcond_instance_runs_all_methods() {
    let cfg = IllcondConfig { iters: 30, ..Default::default() };
    let run = illcond_instance(&cfg, 0, true).unwrap();
    assert_eq!(run.traces.len(), 4);
    for (method, trace) in &run.traces {
        assert_eq!(trace.records.len(), 31, "{method}");
        assert!(trace.to_csv().starts_with(TRACE_HEADER));
        assert!(trace.records.iter().all(|r| r.kappa.is_some()));
    }
    assert!(run.trace(Method::SimcoRegularized).is_some());
    let again = illcond_instance(&cfg, 0, true).unwrap();
    for ((_, a), (_, b)) in run.traces.iter().zip(&again.traces) {
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
