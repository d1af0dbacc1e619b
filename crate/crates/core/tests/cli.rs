mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use advseg::cli::run;
use common::tiny_config;

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn write_config(dir: &Path, out: &Path, data: &Path, epochs: u64) -> std::path::PathBuf {
    let mut cfg = tiny_config();
    cfg.train.epochs = epochs;
    cfg.train.checkpoint_dir = out.to_path_buf();
    cfg.data.input_dir = Some(data.to_path_buf());
    let path = dir.join("run.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn generate(out: &Path) -> i32 {
    run(["advseg", "generate", "--out", &s(out), "--cases", "4", "--size", "16", "--seed", "42"])
}

#[test]
fn generate_is_reproducible_and_lists_cases() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(generate(&a), 0);
    assert_eq!(generate(&b), 0);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cases"].as_array().unwrap().len(), 4);
    let dirs = advseg::volume_io::case_dirs(&a).unwrap();
    assert_eq!(dirs.len(), 4);
    for d in dirs {
        for f in fs::read_dir(&d).unwrap() {
            let f = f.unwrap().path();
            let twin = b.join(d.file_name().unwrap()).join(f.file_name().unwrap());
            assert_eq!(fs::read(&f).unwrap(), fs::read(&twin).unwrap(), "{}", f.display());
        }
    }
    let code = run(["advseg", "generate", "--out", &s(&dir.path().join("c")), "--size", "8"]);
    assert_eq!(code, 1);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[loss]\nlambda_c = -1.0\n").unwrap();
    assert_eq!(run(["advseg", "train", "--config", &s(&bad)]), 2);
    fs::write(&bad, "[train]\nbatch = 3\n").unwrap();
    assert_eq!(run(["advseg", "train", "--config", &s(&bad)]), 2);
    let err = advseg::RunConfig::from_file(&bad).unwrap_err().to_string();
    assert!(err.contains("batch"), "{err}");
    let missing = dir.path().join("nothing.ckpt");
    let code = run(["advseg", "infer", "--checkpoint", &s(&missing), "--input", "x", "--output", "y"]);
    assert_eq!(code, 2);
}

#[test]
fn generate_train_infer_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    let out = root.join("run");
    assert_eq!(generate(&data), 0);
    let cfg = write_config(root, &out, &data, 2);
    assert_eq!(run(["advseg", "train", "--config", &s(&cfg), "--seed", "3"]), 0);
    for f in ["best.ckpt", "last.ckpt", "train_log.csv", "curve.csv", "val_metrics.csv", "val_metrics_summary.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let preds = root.join("pred");
    let ckpt = s(&out.join("best.ckpt"));
    let code = run(["advseg", "infer", "--checkpoint", &ckpt, "--input", &s(&data), "--output", &s(&preds), "--probabilities"]);
    assert_eq!(code, 0);
    let names: Vec<String> = fs::read_dir(&preds).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert_eq!(names.iter().filter(|n| n.ends_with("_pred.nii.gz")).count(), 4);
    assert_eq!(names.iter().filter(|n| n.ends_with("_prob.f32")).count(), 4);

    let report = root.join("report.csv");
    let code = run(["advseg", "evaluate", "--pred", &s(&preds), "--gt", &s(&data), "--report", &s(&report)]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().next().unwrap(), "case_id,region,dice,hd95,sensitivity,specificity");
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    let summary = fs::read_to_string(root.join("report_summary.csv")).unwrap();
    assert_eq!(summary.lines().next().unwrap(), "region,metric,mean,min,q1,median,q3,max,n");

    // a config whose model differs from the checkpoint
    let mut other = tiny_config();
    other.model.base_features = 2;
    let other_path = root.join("other.toml");
    fs::write(&other_path, other.to_toml_string()).unwrap();
    let code = run(["advseg", "infer", "--checkpoint", &ckpt, "--input", &s(&data), "--output", &s(&preds), "--config", &s(&other_path)]);
    assert_eq!(code, 2);
}

#[test]
fn evaluate_identity_and_unmatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(generate(&data), 0);
    let report = dir.path().join("r.csv");
    let summary = advseg::cli::cmd_evaluate(&data, &data, &report, [1.0; 3]).unwrap();
    for region in advseg::volume_io::REGIONS {
        let row = summary.get(region, "dice").unwrap();
        assert_eq!((row.min, row.max, row.n), (Some(1.0), Some(1.0), 4));
    }

    let other = dir.path().join("other");
    fs::create_dir_all(other.join("someone_else")).unwrap();
    let lm = advseg::volume_io::LabelMap::zeros([16; 3], "someone_else");
    advseg::volume_io::save_labelmap(&lm, &other.join("someone_else/someone_else_seg.nii.gz")).unwrap();
    let code = run(["advseg", "evaluate", "--pred", &s(&other), "--gt", &s(&data), "--report", &s(&report)]);
    assert_eq!(code, 2);
}

#[test]
fn resumed_cli_run_reproduces_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let data = root.join("data");
    assert_eq!(generate(&data), 0);

    let full = root.join("full");
    let cfg = write_config(root, &full, &data, 2);
    assert_eq!(run(["advseg", "train", "--config", &s(&cfg)]), 0);

    let part = root.join("part");
    let cfg = write_config(root, &part, &data, 2);
    assert_eq!(run(["advseg", "train", "--config", &s(&cfg), "--max-steps", "1"]), 0);
    let last = s(&part.join("last.ckpt"));
    assert_eq!(run(["advseg", "train", "--config", &s(&cfg), "--resume", &last]), 0);

    let a = fs::read_to_string(full.join("train_log.csv")).unwrap();
    let b = fs::read_to_string(part.join("train_log.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_advseg");
    let status = Command::new(exe).arg("no-such-command").output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(exe).args(["generate", "--out", &s(dir.path()), "--size", "8"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phantom too small"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[phantom]"), "resolved config is printed first");
}
