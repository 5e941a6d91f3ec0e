use std::path::Path;
use std::process::{Command, Output};

use simco_cli::output::{read_manifest, sha256_hex};

fn simco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simco")).args(args).env_remove("SIMCO_THREADS").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out.sort();
    out
}

const FOUR: &str = r#"[{"method": "MOD", "outer_iters": 2, "S": 2}, {"method": "KSVD", "outer_iters": 2, "S": 2},
    {"method": "SimCO-primitive", "outer_iters": 2, "S": 2},
    {"method": "SimCO-regularized", "outer_iters": 2, "S": 2, "mu_schedule": [{"start_iter": 0, "mu": 0.1}]}]"#;

#[test]
fn synth_writes_one_trace_per_method_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"spec": {{"m": 6, "d": 10, "n": 20, "S": 2}}, "seeds": 20, "learners": {FOUR}}}"#);
    let cfg = write_config(dir.path(), "s.json", &cfg);
    let out = dir.path().join("out");
    let res = simco(&["synth", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let traces: Vec<String> = files_under(&out).into_iter().filter(|f| f.starts_with("traces/")).collect();
    assert_eq!(traces.len(), 80);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().next(), Some("method,seed,n,iters,final_f,final_f_per_n,final_kappa"));
    assert_eq!(summary.lines().count(), 81);
    let trace = std::fs::read_to_string(out.join("traces/KSVD_seed7.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn zero_outer_iterations_leave_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"spec": {"m": 6, "d": 10, "n": 20, "S": 2}, "seeds": 1,
        "learners": [{"method": "SimCO-primitive", "outer_iters": 0, "S": 2}]}"#;
    let cfg = write_config(dir.path(), "s.json", cfg);
    let out = dir.path().join("out");
    assert!(simco(&["synth", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let trace = std::fs::read_to_string(out.join("traces/SimCO-primitive_seed0.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn missing_sparsity_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", r#"{"spec": {"m": 16, "d": 32, "n": 78}, "learners": []}"#);
    let res = simco(&["synth", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains('S'));

    let cfg = write_config(dir.path(), "l.json", r#"{"spec": {"m": 16, "d": 32, "n": 78, "S": 4}, "learners": [{"method": "MOD", "outer_iters": 1}]}"#);
    let res = simco(&["synth", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("`S`"), "{}", stderr(&res));
}

#[test]
fn bad_configs_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(dir.path(), "r.json", r#"{"trails": 3}"#);
    let res = simco(&["rankone", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("trails"));

    let cfg = write_config(dir.path(), "d.json", r#"{"d": "many"}"#);
    let res = simco(&["denoise", "--test-image", "16", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));

    let cfg = write_config(dir.path(), "b.json", r#"{"spec": {"m": 8, "d": 4, "n": 10, "S": 2}}"#);
    let res = simco(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("S <= m <= d"), "{}", stderr(&res));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = simco(&["synth", "--config", dir.path().join("none.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    let res = simco(&["denoise", "--input", dir.path().join("none.pgm").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    assert_eq!(simco(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn rankone_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let res = simco(&["rankone", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let report = json(&out.join("rankone_report.json"));
    assert_eq!(report["trials"], 100);
    assert_eq!(report["successes"], 100);
    assert_eq!(report["bad_start"], 0);

    let cfg = write_config(dir.path(), "zero.json", r#"{"trials": 0}"#);
    let out = dir.path().join("z");
    assert_eq!(simco(&["rankone", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let report = json(&out.join("rankone_report.json"));
    assert_eq!(report, serde_json::json!({"trials": 0, "successes": 0, "max_final_gap": 0.0, "bad_start": 0, "theta_violations": 0}));

    let cfg = write_config(dir.path(), "short.json", r#"{"trials": 5, "max_steps": 3}"#);
    let out = dir.path().join("s");
    let res = simco(&["rankone", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(json(&out.join("rankone_report.json"))["successes"], 0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn denoise_with_and_without_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.json", r#"{"d": 64, "outer_iters": 2, "train_patches": 300}"#);
    let first = dir.path().join("a");
    let res = simco(&["denoise", "--test-image", "32", "--config", &cfg, "--seed", "5", "--out", first.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let report = json(&first.join("report.json"));
    assert!(report["psnr_in"].is_f64() && report["psnr_out"].is_f64() && report["runtime_ms"].is_f64());

    let noisy = first.join("noisy.pgm");
    let clean = first.join("clean.pgm");
    let with_ref = dir.path().join("b");
    let args = ["--config", &cfg, "--seed", "5", "--input", noisy.to_str().unwrap()];
    assert!(simco(&[&["denoise"][..], &args, &["--clean", clean.to_str().unwrap(), "--out", with_ref.to_str().unwrap()]].concat())
        .status
        .success());
    let report_b = json(&with_ref.join("report.json"));
    assert_eq!(report_b["psnr_out"], report["psnr_out"]);

    let no_ref = dir.path().join("c");
    assert!(simco(&[&["denoise"][..], &args, &["--out", no_ref.to_str().unwrap()]].concat()).status.success());
    let report_c = json(&no_ref.join("report.json"));
    assert!(report_c["psnr_in"].is_null() && report_c["psnr_out"].is_null());
    let image = |d: &Path| std::fs::read(d.join("denoised.pgm")).unwrap();
    assert_eq!(image(&no_ref), image(&first));
    assert_eq!(image(&with_ref), image(&first));
}

#[test]
fn bench_has_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"spec": {{"m": 6, "d": 10, "n": 40, "S": 2}}, "learners": {FOUR}}}"#);
    let cfg = write_config(dir.path(), "b.json", &cfg);
    let out = dir.path().join("b");
    assert!(simco(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let csv = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,repetitions,min_s,median_s,max_s,final_f_per_n");
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        let cells: Vec<f64> = line.split(',').skip(2).take(3).map(|v| v.parse().unwrap()).collect();
        assert_eq!(line.split(',').nth(1), Some("3"));
        assert!(cells[0] <= cells[1] && cells[1] <= cells[2]);
    }
    let flags = json(&out.join("bench_flags.json"));
    assert!(flags["simco_primitive_faster_than_ksvd"].is_boolean());
    assert!(flags["simco_regularized_slower_than_mod"].is_boolean());
}

#[test]
fn illcond_without_a_hit_reports_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "i.json", r#"{"m": 6, "d": 10, "n": 20, "S": 2, "iters": 10, "max_seeds": 2}"#);
    let out = dir.path().join("i");
    assert!(simco(&["illcond", "--config", &cfg, "--seed", "40", "--out", out.to_str().unwrap()]).status.success());
    let report = json(&out.join("illcond_report.json"));
    assert_eq!(report["found"], false);
    assert_eq!(report["seeds_tried"], 2);
    assert_eq!(read_manifest(&out).unwrap().config["first_seed"], 40);
}

#[test]
fn manifest_covers_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.json", r#"{"trials": 4, "write_trajectories": true}"#);
    let out = dir.path().join("r");
    assert!(simco(&["rankone", "--config", &cfg, "--seed", "11", "--out", out.to_str().unwrap()]).status.success());
    let manifest = read_manifest(&out).unwrap();
    assert_eq!(manifest.subcommand, "rankone");
    assert_eq!(manifest.seed, 11);
    assert_eq!(manifest.config["seed"], 11);
    assert_eq!(manifest.config["m"], 5);
    let mut listed: Vec<String> = manifest.artifacts.iter().map(|a| a.path.clone()).collect();
    listed.push("manifest.json".into());
    listed.sort();
    assert_eq!(listed, files_under(&out));
    for a in &manifest.artifacts {
        let bytes = std::fs::read(out.join(&a.path)).unwrap();
        assert_eq!(a.sha256, sha256_hex(&bytes));
        assert_eq!(a.bytes, bytes.len() as u64);
    }
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "r.json", r#"{"trials": 3}"#);
    let out = dir.path().join("r");
    assert!(simco(&["rankone", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(simco(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let path = out.join("rankone_trials.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    assert_eq!(simco(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(3));
    std::fs::remove_file(&path).unwrap();
    assert_eq!(simco(&["verify", "--out", out.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"spec": {{"m": 6, "d": 10, "n": 30, "S": 2}}, "seeds": 3, "coder": "omp", "learners": {FOUR}}}"#);
    let cfg = write_config(dir.path(), "s.json", &cfg);
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    let res = Command::new(env!("CARGO_BIN_EXE_simco"))
        .args(["synth", "--config", &cfg, "--out", one.to_str().unwrap()])
        .env("SIMCO_THREADS", "1")
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(simco(&["synth", "--config", &cfg, "--threads", "3", "--out", many.to_str().unwrap()]).status.success());
    let (m1, m3) = (read_manifest(&one).unwrap(), read_manifest(&many).unwrap());
    assert_eq!(m1.threads, 1);
    assert_eq!(m3.threads, 3);
    assert_eq!(m1.artifacts, m3.artifacts);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(simco(&["denoise"]).status.code(), Some(2));
    assert_eq!(simco(&["frobnicate"]).status.code(), Some(2));
    assert!(simco(&["--help"]).status.success());
}
