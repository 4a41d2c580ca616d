use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesture-sig"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "synth",
        "--classes",
        "3",
        "--per-class",
        "8",
        "--test-per-class",
        "4",
        "--seed",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = gs(&args);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    synth(&a, &[]);
    synth(&b, &[]);
    for f in ["sequences.jsonl", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let lines = fs::read_to_string(a.join("sequences.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 3 * (8 + 4));
}

#[test]
fn usage_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().to_str().unwrap();
    assert_eq!(gs(&["synth", "--classes", "9", "--out", out]).status.code(), Some(2));
    assert_eq!(gs(&["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(gs(&["featurize", "--report-dims", "--m-t", "0"]).status.code(), Some(2));
    assert_eq!(gs(&["gradcheck", "--arch", "4s"]).status.code(), Some(2));
}

#[test]
fn report_dims() {
    let o = gs(&["featurize", "--report-dims"]);
    assert!(o.status.success());
    let s = stdout(&o);
    for want in ["rc           702", "s_ps        6084", "t_ps       30600", "t_s_ps     15288"] {
        assert!(s.contains(want), "missing {want:?} in\n{s}");
    }
    let s = stdout(&gs(&["featurize", "--report-dims", "--m-t", "2"]));
    // 6 joints x 15 pieces x (4 + 16) coefficients.
    assert!(s.contains("t_ps        1800"), "{s}");
}

#[test]
fn corrupt_record_names_its_id() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("d");
    synth(&dir, &[]);
    let path = dir.join("sequences.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let rec: serde_json::Value = serde_json::from_str(&lines[4]).unwrap();
    let id = rec["id"].as_str().unwrap().to_string();
    lines[4] = serde_json::json!({
        "id": id, "label": 0, "fps": 30.0,
        "frames": [[[0.0, 0.0, 0.0]], [[0.0, 0.0]]],
    })
    .to_string();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = gs(&["featurize", "--data", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&id) && err.contains("line 5"), "{err}");
}

#[test]
fn featurize_writes_one_record_per_sequence() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().join("d");
    synth(&dir, &[]);
    let out = t.path().join("f.jsonl");
    let o = gs(&[
        "featurize",
        "--data",
        dir.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--m-t",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    let head: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(head["dims"]["t_ps"], 1800);
    assert!(head["run_config"].is_object());
    let recs: Vec<serde_json::Value> =
        lines.map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 36);
    assert_eq!(recs[0]["t_ps"].as_array().unwrap().len(), 1800);
}

#[test]
fn train_eval_dump_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("d");
    synth(&data, &[]);
    let run = t.path().join("run");
    let common = ["--data", data.to_str().unwrap(), "--arch", "1s", "--inputs", "rc", "--ttm", "on"];
    let mut args = vec!["train", "--out", run.to_str().unwrap(), "--epochs", "4", "--batch", "8"];
    args.extend_from_slice(&common);
    let o = gs(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("# run_config {"));
    assert!(metrics.contains("\n# config_hash "));
    assert!(metrics.contains("epoch,loss,train_acc,val_acc,lr,mean_delta\n"));
    assert_eq!(metrics.lines().filter(|l| !l.starts_with('#')).count(), 5);

    let ckpt = run.join("model.ckpt");
    let mut args = vec!["eval", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend_from_slice(&common);
    let o = gs(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("split test (12 sequences)"), "{s}");
    let acc = s.lines().find_map(|l| l.strip_prefix("accuracy ")).unwrap();
    assert_eq!(acc.len(), 4, "two decimals: {acc}");
    assert!(s.contains("mean |delta|"));

    // Different feature settings than at training time are refused.
    args.extend_from_slice(&["--frames", "30"]);
    let o = gs(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("does not match"), "{}", stderr(&o));

    let csv = t.path().join("w.csv");
    let o = gs(&[
        "dump-weights",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = fs::read_to_string(csv)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r.split(',').count() == 702));
    let o = gs(&[
        "dump-weights",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--stream",
        "3",
        "--out",
        t.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn count_ops_lists_layers() {
    let o = gs(&["count-ops", "--arch", "1s", "--inputs", "rc", "--ttm", "off"]);
    assert!(o.status.success());
    let s = stdout(&o);
    // 702 x 64 + 64 x 5; no fusion layer in a one-stream net.
    assert!(s.contains("44928") && s.contains("320"), "{s}");
    assert!(s.lines().any(|l| l.trim_start().starts_with("total") && l.ends_with(" 45248")), "{s}");
}

#[test]
fn gradcheck_passes() {
    let o = gs(&["gradcheck"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("ttm.w1"));
}
