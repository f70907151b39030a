use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mamaf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mamaf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, pos: usize, neg: usize, frames: usize, hw: usize) {
    let o = mamaf(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--pos",
        &pos.to_string(),
        "--neg",
        &neg.to_string(),
        "--frames",
        &frames.to_string(),
        "--hw",
        &hw.to_string(),
        "--seed",
        "7",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_the_cohort_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, 20, 20, 40, 32);
    synth(&b, 20, 20, 40, 32);
    let manifest = fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 40);
    assert_eq!(fs::read_dir(a.join("views")).unwrap().count(), 160);
    assert_eq!(dir_bytes(&a), dir_bytes(&b));
}

#[test]
fn synth_without_positives_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mamaf(&["synth", "--out", tmp.path().to_str().unwrap(), "--pos", "0"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn help_exits_zero_and_bad_flags_exit_one() {
    assert_eq!(code(&mamaf(&["--help"])), 0);
    assert_eq!(code(&mamaf(&["cv", "--no-such-flag"])), 1);
    assert_eq!(code(&mamaf(&[])), 1);
}

#[test]
fn seq_len_not_a_multiple_of_25_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 2, 2, 25, 16);
    let out = tmp.path().join("run");
    let o = mamaf(&[
        "cv",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seq-len",
        "30",
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("seq_len"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    fs::write(&cfg, r#"{"train": {"epochs": 1, "learning_rate": 0.1}}"#).unwrap();
    let o = mamaf(&["cv", "--config", cfg.to_str().unwrap(), "--data", "x", "--out", "y"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mamaf(&[
        "cv",
        "--data",
        tmp.path().join("nothing").to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
        "--epochs",
        "1",
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

/// A two-fold run of one epoch at 16×16, then evaluation of its
/// checkpoints.
#[test]
fn cv_then_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, 4, 4, 25, 16);
    let run = tmp.path().join("run");
    let o = mamaf(&[
        "cv",
        "--data",
        data.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--hw",
        "16",
        "--epochs",
        "1",
        "--folds",
        "2",
        "--val-fraction",
        "0.34",
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    for key in ["sensitivity", "specificity", "precision", "f1", "accuracy", "auc"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }
    let c = &metrics["counts"];
    let total: u64 = ["tp", "fn", "fp", "tn"].iter().map(|k| c[k].as_u64().unwrap()).sum();
    assert_eq!(total, 8);

    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed["model"]["input_hw"], 16);
    assert_eq!(echoed["train"]["epochs"], 1);
    assert!(Path::new(echoed["data"].as_str().unwrap()).is_absolute());
    for f in ["folds.json", "roc.csv", "roc.svg", "loss.svg", "cv_summary.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }

    for fold in 0..2 {
        let ckpt = run.join(format!("fold-{fold}")).join("checkpoint.mamf");
        let out = tmp.path().join(format!("eval-{fold}"));
        let o = mamaf(&[
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--split",
            &fold.to_string(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let logged = fs::read(run.join(format!("fold-{fold}")).join("metrics.json")).unwrap();
        assert_eq!(fs::read(out.join("metrics.json")).unwrap(), logged);
        assert_eq!(o.stdout, logged);
        let preds = fs::read(run.join(format!("fold-{fold}")).join("predictions.json")).unwrap();
        assert_eq!(fs::read(out.join("predictions.json")).unwrap(), preds);
    }

    let ckpt = run.join("fold-0").join("checkpoint.mamf");
    let unknown = mamaf(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--split",
        "9",
    ]);
    assert_eq!(code(&unknown), 1, "{}", stderr(&unknown));

    let missing = mamaf(&[
        "eval",
        "--checkpoint",
        run.join("fold-0").join("nope.mamf").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--split",
        "0",
        "--folds",
        run.join("folds.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&missing), 2, "{}", stderr(&missing));
}

#[test]
fn gradcheck_layer_scope_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("g.json");
    let o = mamaf(&["gradcheck", "--scope", "layer", "--seed", "3", "--out", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn gradcheck_wrong_sign_fails_with_the_parameter_name() {
    let o = mamaf(&[
        "gradcheck",
        "--scope",
        "motion",
        "--inject-wrong-sign",
        "motion.gate.weight",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("motion.gate.weight"), "{}", stderr(&o));
}

#[test]
fn gradcheck_unknown_scope_is_usage_error() {
    assert_eq!(code(&mamaf(&["gradcheck", "--scope", "everything"])), 1);
}
