use std::fs;
use std::path::Path;
use std::process::Command as Process;

use clap::Parser;
use warpcurv::cli::{run, Cli, CSV_HEADER, EXIT_FAIL, EXIT_IO, EXIT_PARAMETER, EXIT_PASS};
use warpcurv::curvature::{coordinate_curvatures, WarpState};
use warpcurv::profiles::{EpsilonParams, HProfile, ProfileDocument, VProfile, WarpProfile};
use warpcurv::search::{PlaneSearch, SearchSpec};

fn invoke(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["warpcurv", "--out-dir", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).unwrap())
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_chn_writes_pinching_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), &["verify-chn", "--rmin", "0.01", "--rmax", "10", "--grid", "50", "--pairs", "500"]), EXIT_PASS);
    let json = report(&dir.path().join("chn_report.json"));
    let min = json["report"]["pinching"]["min"].as_f64().unwrap();
    let max = json["report"]["pinching"]["max"].as_f64().unwrap();
    assert!(min >= -1.0 - 1e-9 && max <= -0.25 + 1e-9);
    assert_eq!(json["config"]["settings"]["grid"], "50");
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().ends_with(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_warpcurv");
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| Process::new(bin).args(args).current_dir(dir.path()).output().unwrap().status.code();
    assert_eq!(code(&["verify-chn", "--grid", "0"]), Some(2));
    assert_eq!(code(&["scan", "--eps", "0.45"]), Some(EXIT_PARAMETER));
    assert_eq!(code(&["aregular", "--kmax", "9"]), Some(EXIT_PARAMETER));
    assert_eq!(code(&["--config", "missing.cfg", "verify-chn"]), Some(EXIT_IO));
    let out = Process::new(bin)
        .args(["verify-chn", "--grid", "5", "--pairs", "10"])
        .env("WARPCURV_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_PASS));
    let bad = Process::new(bin).args(["verify-chn"]).env("WARPCURV_THREADS", "zero").current_dir(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_PARAMETER));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# smoothing demo\ncurvature = 1.5\nbound = 1\nsigma=0.2\n").unwrap();
    let code = invoke(dir.path(), &["--config", cfg.to_str().unwrap(), "smooth-demo", "--bound", "0.5"]);
    assert_eq!(code, EXIT_PASS);
    let json = report(&dir.path().join("smooth_report.json"));
    assert_eq!(json["config"]["settings"]["curvature"], "1.5");
    assert_eq!(json["config"]["settings"]["bound"], "0.5");
    assert_eq!(json["config"]["settings"]["sigma"], "0.2");
    assert_eq!(json["report"]["exact_outside_window"], true);
    let csv = fs::read_to_string(dir.path().join("smooth.csv")).unwrap();
    assert!(csv.starts_with("r,base,smoothed,d1,d2\n"));

    fs::write(&cfg, "curvature = lots\n").unwrap();
    assert_eq!(invoke(dir.path(), &["--config", cfg.to_str().unwrap(), "smooth-demo"]), EXIT_PARAMETER);
    fs::write(&cfg, "just words\n").unwrap();
    assert_eq!(invoke(dir.path(), &["--config", cfg.to_str().unwrap(), "smooth-demo"]), EXIT_PARAMETER);
}

#[test]
fn smooth_demo_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    // a mollifier as wide as the window destroys the bound
    assert_eq!(invoke(dir.path(), &["smooth-demo", "--curvature", "0.26", "--bound", "0.25", "--delta", "0.02"]), EXIT_FAIL);
    assert_eq!(invoke(dir.path(), &["smooth-demo", "--left-slope", "1", "--right-slope", "-1"]), EXIT_PARAMETER);
}

#[test]
fn scan_csv_schema_and_tail_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), &["scan", "--eps", "0.1", "--grid", "40", "--window-points", "8"]), EXIT_PASS);
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 10));
    let first = csv.lines().nth(1).unwrap().split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
    assert_eq!(mantissa.len(), 17);

    let params = EpsilonParams::practical(0.1).unwrap();
    let v = VProfile::build(&params).unwrap();
    let h = HProfile::build(&params, &v).unwrap();
    let search = PlaneSearch::new(&SearchSpec::default());
    let tail: Vec<&Vec<f64>> = rows.iter().filter(|row| row[0] < h.n - params.sigma).collect();
    assert!(tail.len() >= 30);
    for row in tail {
        let r = row[0];
        let e = 0.1 * r.exp();
        let x = (0.5 * r).exp();
        let ws = WarpState::new(r, [e, e, e], [x, 0.5 * x, 0.25 * x]).unwrap();
        let closed = (0..=10)
            .map(|i| search.sup(&coordinate_curvatures(&ws, i as f64 * 0.05).unwrap()).value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((row[9] - closed).abs() < 1e-8, "r = {r}: {} vs {closed}", row[9]);
    }

    let json = report(&dir.path().join("scan_report.json"));
    let global = json["report"]["global_max"].as_f64().unwrap();
    let intervals = json["report"]["intervals"].as_array().unwrap();
    let top = intervals.iter().map(|i| i["max_k"].as_f64().unwrap()).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(global, top);
    assert_eq!(intervals.len(), 6);
}

#[test]
fn scan_threshold_turns_into_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), &["scan", "--grid", "20", "--window-points", "4", "--threshold", "-0.5"]), EXIT_FAIL);
}

#[test]
fn exported_profiles_reload_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["v", "h", "g"] {
        assert_eq!(invoke(dir.path(), &["export-profile", "--eps", "0.1", "--name", name, "--csv-points", "20"]), EXIT_PASS);
        let text = fs::read_to_string(dir.path().join(format!("profile_{name}.json"))).unwrap();
        let loaded = ProfileDocument::from_json(&text).unwrap();
        let params = EpsilonParams::practical(0.1).unwrap();
        let v = VProfile::build(&params).unwrap();
        let h = HProfile::build(&params, &v).unwrap();
        let original: Box<dyn WarpProfile> = match name {
            "v" => Box::new(v),
            "h" => Box::new(h),
            _ => Box::new(warpcurv::profiles::GProfile::build(&params, &h).unwrap()),
        };
        assert_eq!(loaded.breakpoints(), original.breakpoints());
        let bps: Vec<f64> = original.breakpoints().values().copied().collect();
        for &b in &bps {
            for dx in [-1e-3, -1e-7, 0.0, 1e-7, 1e-3] {
                assert_eq!(loaded.log_function().eval(b + dx), original.log_function().eval(b + dx));
            }
        }
    }
    assert_eq!(invoke(dir.path(), &["export-profile", "--name", "w"]), EXIT_PARAMETER);
}

#[test]
fn aregular_lists_symbolic_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke(dir.path(), &["aregular", "--eps", "0.1", "--kmax", "2", "--grid", "60"]), EXIT_PASS);
    let table = fs::read_to_string(dir.path().join("closure_table.txt")).unwrap();
    assert!(table.lines().any(|l| l == "k=0 kr2: -1/2 F"));
    let json = report(&dir.path().join("aregular_report.json"));
    assert_eq!(json["report"]["pass"], true);
    // ε = 0.05 pushes 1/g² past the f64 range
    assert_eq!(invoke(dir.path(), &["aregular", "--eps", "0.05"]), EXIT_PARAMETER);
}
