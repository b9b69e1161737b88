use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use vcn::cli::{run, RunManifest, TrainSummary};
use vcn::training::EpochRecord;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tiny.jsonl")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_fixture(out: &Path, extra: &[&str]) -> i32 {
    let data = fixture();
    let mut args = vec![
        "vcn",
        "train",
        "--data",
        s(&data),
        "--out",
        s(out),
        "--seed",
        "3",
        "--steps",
        "3",
        "--dh",
        "4",
        "--dv",
        "4",
        "--batch",
        "4",
        "--max-epochs",
        "15",
    ];
    args.extend_from_slice(extra);
    run(args)
}

fn read_history(path: &Path) -> Vec<EpochRecord> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(vcn::training::HISTORY_HEADER));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            EpochRecord {
                epoch: f[0].parse().unwrap(),
                lr: f[1].parse().unwrap(),
                train_loss: f[2].parse().unwrap(),
                val_auc: f[3].parse().unwrap(),
                val_f1: f[4].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn train_writes_four_artifacts_and_eval_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(train_fixture(&out, &["--task", "fixture"]), 0);
    for f in ["model.ckpt", "history.csv", "metrics.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.task.as_deref(), Some("fixture"));
    assert_eq!(manifest.config.model.d_h, 4);

    let summary: TrainSummary =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let history = read_history(&out.join("history.csv"));
    assert_eq!(history.len(), summary.epochs);
    let best = &history[summary.best_epoch - 1];
    assert_eq!(summary.val.auc, best.val_auc);

    let scores = dir.path().join("scores.csv");
    let exe = env!("CARGO_BIN_EXE_vcn");
    let output = Command::new(exe)
        .args([
            "eval",
            "--checkpoint",
            s(&out.join("model.ckpt")),
            "--data",
            s(&fixture()),
        ])
        .args(["--scores", s(&scores)])
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: vcn::metrics::MetricsReport = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report.auc, best.val_auc);
    assert_eq!(report.f1, best.val_f1);
    let lines: Vec<String> = fs::read_to_string(&scores)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with("g0,"));
}

#[test]
fn seeded_training_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(train_fixture(&a, &[]), 0);
    assert_eq!(train_fixture(&b, &[]), 0);
    for f in ["metrics.json", "history.csv", "model.ckpt"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "data = {:?}\nreadout = \"mean\"\ndh = 5\nmax_epochs = 3\nsteps = 2\n",
            s(&fixture())
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = run([
        "vcn",
        "train",
        "--config",
        s(&cfg),
        "--dh",
        "3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 0);
    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.config.model.d_h, 3);
    assert_eq!(manifest.config.model.readout, vcn::Readout::Mean);
    assert!(!manifest.config.model.use_virtual);
    assert_eq!(manifest.config.max_epochs, 3);

    fs::write(&cfg, "learning_rate = 0.1\n").unwrap();
    assert_eq!(
        run(["vcn", "train", "--config", s(&cfg), "--out", s(&out)]),
        1
    );
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    // missing --data
    let output = Command::new(env!("CARGO_BIN_EXE_vcn"))
        .args(["train", "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(output.stdout.is_empty());
    // bad flag value
    assert_eq!(train_fixture(&out, &["--lr=-1"]), 1);
    assert_eq!(train_fixture(&out, &["--optimizer", "sgd"]), 1);
    // unreadable data
    let missing = dir.path().join("none.jsonl");
    assert_eq!(
        run(["vcn", "train", "--data", s(&missing), "--out", s(&out)]),
        2
    );
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"id\":\"a\"}\n").unwrap();
    assert_eq!(
        run(["vcn", "train", "--data", s(&bad), "--out", s(&out)]),
        2
    );

    // corrupt checkpoint
    assert_eq!(train_fixture(&out, &[]), 0);
    let ckpt = out.join("model.ckpt");
    let text = fs::read_to_string(&ckpt).unwrap();
    fs::write(&ckpt, &text[..text.len() / 2]).unwrap();
    assert_eq!(
        run([
            "vcn",
            "eval",
            "--checkpoint",
            s(&ckpt),
            "--data",
            s(&fixture())
        ]),
        2
    );

    // checkpoint that does not fit the data
    let other = dir.path().join("parity.jsonl");
    assert_eq!(
        run([
            "vcn",
            "gen",
            "--task",
            "parity",
            "--n",
            "20",
            "--out",
            s(&other)
        ]),
        0
    );
    let parity_run = dir.path().join("p");
    let code = run([
        "vcn",
        "train",
        "--data",
        s(&other),
        "--out",
        s(&parity_run),
        "--max-epochs",
        "1",
        "--steps",
        "2",
        "--dh",
        "3",
        "--dv",
        "3",
    ]);
    assert_eq!(code, 0);
    let code = run([
        "vcn",
        "eval",
        "--checkpoint",
        s(&parity_run.join("model.ckpt")),
        "--data",
        s(&fixture()),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn gen_is_deterministic_and_rejects_unknown_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for p in [&a, &b] {
        assert_eq!(
            run([
                "vcn",
                "gen",
                "--task",
                "triangle",
                "--n",
                "100",
                "--seed",
                "4",
                "--out",
                s(p)
            ]),
            0
        );
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(
        run(["vcn", "gen", "--task", "cycles", "--n", "5", "--out", s(&a)]),
        1
    );
}

#[test]
fn gradcheck_command() {
    let exe = env!("CARGO_BIN_EXE_vcn");
    let ok = Command::new(exe)
        .args(["gradcheck", "--graphs", "5"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-4);

    let seeded = Command::new(exe)
        .args(["gradcheck", "--graphs", "5", "--seed", "77"])
        .output()
        .unwrap();
    assert_eq!(seeded.status.code(), Some(0));
    assert_ne!(seeded.stdout, ok.stdout);

    let bad = Command::new(exe)
        .args([
            "gradcheck",
            "--graphs",
            "3",
            "--inject-fault",
            "node.cand.w",
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("node.cand.w"));
}
