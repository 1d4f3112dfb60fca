use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smforge_cli::{read_summary, Summary};
use smforge_core::explicit::MappingSet;
use smforge_core::rrsm::RunReport;
use smforge_core::OptReport;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn smforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smforge")).args(args).output().unwrap()
}

fn run(engine: &str, config: &Path, out: &Path) -> Output {
    smforge(&[
        engine,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn case_config() -> PathBuf {
    configs().join("paper_case.json")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn coarse_optimization_descends_from_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run("coarse-opt", &case_config(), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let opt: OptReport = serde_json::from_str(&fs::read_to_string(out.join("coarse_optimum.json")).unwrap()).unwrap();
    assert!(out.join("coarse_optimum.csv").is_file());
    let summary = read_summary(&out).unwrap();
    assert_eq!(summary.fine_evals, 0);
    assert_eq!(summary.final_design.as_deref(), Some(opt.minimizer.as_slice()));
    let log = fs::read_to_string(out.join("run.log")).unwrap();
    let start: f64 = log
        .lines()
        .find_map(|l| l.strip_prefix("start objective="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(opt.objective_value <= start);
}

#[test]
fn explicit_run_on_affine_fine_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = configs().join("synthetic_affine.json");
    let o = run("explicit-sm", &config, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("fine_evals=18"), "{stdout}");

    let mapping: MappingSet = serde_json::from_str(&fs::read_to_string(out.join("mapping.json")).unwrap()).unwrap();
    assert_eq!(mapping.a.len(), 17);
    let tests = csv_rows(&out.join("test_errors.csv"));
    assert_eq!(tests.len(), 4);
    let col = |rows: &[Vec<String>], back: usize| -> f64 {
        rows.iter()
            .map(|r| r[r.len() - back].parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    };
    assert!(col(&tests, 1) <= 0.01 * col(&tests, 2));
    assert_eq!(csv_rows(&out.join("base_errors.csv")).len(), 13);
    assert_eq!(fs::read(out.join("config.json")).unwrap(), fs::read(&config).unwrap());
}

#[test]
fn corners_flag_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = configs().join("synthetic_affine.json");
    let o = smforge(&[
        "explicit-sm",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--corners",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_summary(&out).unwrap();
    assert_eq!(s.seed, 7);
    assert_eq!(s.fine_evals, 77 + 4 + 1);
    assert_eq!(csv_rows(&out.join("base_errors.csv")).len(), 77);
}

#[test]
fn ism_rrsm_on_default_emulator() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run("ism-rrsm", &case_config(), &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = read_summary(&out).unwrap();
    assert_eq!(s.outcome, "spec-satisfied");
    assert!(s.fine_evals <= 6);
    assert_eq!(s.fine_files.len(), s.fine_evals);
    let report: RunReport = serde_json::from_str(&fs::read_to_string(out.join("rrsm_report.json")).unwrap()).unwrap();
    assert_eq!(report.fine_evals, s.fine_evals);
    assert!(report.anchors.iter().all(|a| a.full_weight_error <= 1e-12));

    let text = smforge(&["report", out.to_str().unwrap()]);
    assert!(text.status.success());
    let text = String::from_utf8_lossy(&text.stdout);
    let margin: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("final margin "))
        .and_then(|l| l.strip_suffix(" dB"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(margin <= 0.0, "{text}");
}

#[test]
fn every_json_artifact_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run("ism-rrsm", &case_config(), &out);
    let s = read_summary(&out).unwrap();
    for name in s.files.iter().filter(|n| n.ends_with(".json")) {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(v, again, "{name}");
    }
    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    let again: Summary = serde_json::from_str(&text).unwrap();
    assert_eq!(again, s);
}

#[test]
fn single_evaluation_report_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run("eval", &case_config(), &out);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&smforge(&["report", out.to_str().unwrap()]).stdout).to_string();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("eval ")).collect();
    assert_eq!(rows.len(), 1, "{text}");
    assert_eq!(read_summary(&out).unwrap().fine_files.len(), 1);
}

#[test]
fn tampered_artifact_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run("eval", &case_config(), &out);
    fs::remove_file(out.join("fine_000_eval.csv")).unwrap();
    let o = smforge(&["report", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fine_000_eval.csv"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(case_config())
        .unwrap()
        .replace("\"seed\"", "\"sead\"");
    fs::write(&bad, text).unwrap();
    let o = run("eval", &bad, &dir.path().join("a"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));
    assert!(!dir.path().join("a").exists());

    let o = run(
        "ism-rrsm",
        &configs().join("synthetic_affine.json"),
        &dir.path().join("b"),
    );
    assert_eq!(o.status.code(), Some(2));

    let used = dir.path().join("used");
    fs::create_dir(&used).unwrap();
    fs::write(used.join("x"), "x").unwrap();
    assert_eq!(run("eval", &case_config(), &used).status.code(), Some(2));
}

#[test]
fn missing_touchstone_file_is_an_engine_failure() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fine");
    fs::create_dir(&data).unwrap();
    let config = dir.path().join("ts.json");
    let text = fs::read_to_string(case_config()).unwrap();
    let start = text.find("\"fine\"").unwrap();
    let end = start + text[start..].find("\"region\"").unwrap();
    let text = format!(
        "{}\"fine\": {{\"touchstone_dir\": \"fine\"}},\n  {}",
        &text[..start],
        &text[end..]
    );
    fs::write(&config, text).unwrap();

    let out = dir.path().join("run");
    let o = run("eval", &config, &out);
    assert_eq!(o.status.code(), Some(1));
    let s = read_summary(&out).unwrap();
    assert!(s.error.unwrap().contains("fine_000.s2p"));
    assert_eq!(s.fine_evals, 0);
}

#[test]
fn touchstone_source_serves_the_eval_engine() {
    use smforge_core::circuit::{write_touchstone, CoarseModel, DesignVector, FilterGeometry, TouchstoneSequence};
    use smforge_core::{EvalCounter, FrequencyGrid};

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fine");
    fs::create_dir(&data).unwrap();
    let coarse = CoarseModel::new(FilterGeometry::default(), std::sync::Arc::new(EvalCounter::new())).unwrap();
    let grid = FrequencyGrid::new(8.0, 12.0, 0.25).unwrap();
    let r = coarse
        .eval(
            &DesignVector::reference(),
            &FilterGeometry::default().nominal_aux(),
            &grid,
        )
        .unwrap();
    write_touchstone(&r, 50.0, &data.join(TouchstoneSequence::file_name(0))).unwrap();

    let config = dir.path().join("ts.json");
    let text = fs::read_to_string(case_config()).unwrap();
    let start = text.find("\"fine\"").unwrap();
    let end = start + text[start..].find("\"region\"").unwrap();
    let text = format!(
        "{}\"fine\": {{\"touchstone_dir\": \"fine\"}},\n  {}",
        &text[..start],
        &text[end..]
    );
    fs::write(&config, text).unwrap();

    let out = dir.path().join("run");
    let o = run("eval", &config, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fine = fs::read_to_string(out.join("fine_000_eval.csv")).unwrap();
    let coarse_csv = fs::read_to_string(out.join("coarse.csv")).unwrap();
    let parse = |t: &str| -> Vec<f64> {
        t.lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
            .collect::<Vec<_>>()
    };
    for (a, b) in parse(&fine).iter().zip(parse(&coarse_csv)) {
        assert!((a - b).abs() <= 1e-12);
    }
}
