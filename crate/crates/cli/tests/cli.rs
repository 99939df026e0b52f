use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"network = "FC16-DP-VotingC2P4"

[train]
epochs = 2
batch_size = 8
eta0 = 0.01
initial_threshold = 1.0

[dataset]
kind = "synthetic"
source = "images"
train_samples = 32
test_samples = 16
classes = 2
height = 4
width = 4
"#;

fn stlsnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stlsnn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = stlsnn(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn gradcheck_passes_on_random_net() {
    let out = ok(&["gradcheck", "--seed", "1"]);
    assert!(out.contains("max relative error"), "{out}");
}

#[test]
fn zero_epoch_run_writes_initial_state() {
    let (dir, cfg) = setup(&CONFIG.replace("epochs = 2", "epochs = 0"));
    let out = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(files(&out), ["config.toml", "final.ckpt", "init.ckpt", "metrics.csv"]);
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv, "epoch,split,loss,top1,afr,lr,seed,mode\n");
    assert_eq!(
        std::fs::read(out.join("init.ckpt")).unwrap(),
        std::fs::read(out.join("final.ckpt")).unwrap()
    );
}

#[test]
fn training_twice_gives_identical_files() {
    let (dir, cfg) = setup(CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["train", "--config", s(&cfg), "--out", s(&a), "--seed", "3"]);
    ok(&["train", "--config", s(&cfg), "--out", s(&b), "--seed", "3"]);
    assert_eq!(files(&a), files(&b));
    for f in files(&a) {
        assert_eq!(
            std::fs::read(a.join(&f)).unwrap(),
            std::fs::read(b.join(&f)).unwrap(),
            "{f} differs"
        );
    }
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    assert!(csv.lines().nth(1).unwrap().ends_with(",3,stl"));
}

#[test]
fn resume_reproduces_the_full_run() {
    let (dir, cfg) = setup(CONFIG);
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    ok(&["train", "--config", s(&cfg), "--out", s(&full)]);
    std::fs::write(&cfg, CONFIG.replace("epochs = 2", "epochs = 1")).unwrap();
    ok(&["train", "--config", s(&cfg), "--out", s(&part)]);
    let ckpt = part.join("last.ckpt");
    let resumed = dir.path().join("resumed");
    // The checkpoint carries the 1-epoch config; ask for the second epoch explicitly.
    let err = stlsnn(&["train", "--resume", s(&ckpt), "--config", s(&cfg), "--out", s(&resumed)]);
    assert!(!err.status.success());
    std::fs::write(&cfg, CONFIG).unwrap();
    let two = dir.path().join("two");
    ok(&["train", "--config", s(&cfg), "--out", s(&two), "--keep-every", "1"]);
    ok(&[
        "train",
        "--resume",
        s(&two.join("epoch-001.ckpt")),
        "--out",
        s(&resumed),
    ]);
    assert_eq!(
        std::fs::read(full.join("metrics.csv")).unwrap(),
        std::fs::read(resumed.join("metrics.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(full.join("final.ckpt")).unwrap(),
        std::fs::read(resumed.join("final.ckpt")).unwrap()
    );
}

#[test]
fn ensemble_of_one_checkpoint_twice_matches_eval() {
    let (dir, cfg) = setup(CONFIG);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let ck = run.join("final.ckpt");
    let single = ok(&["eval", "--checkpoint", s(&ck)]);
    let top1: f64 = single.split_whitespace().nth(1).unwrap().parse().unwrap();
    let jdf = ok(&["jdf-eval", "--checkpoints", s(&ck), s(&ck)]);
    let ens: f64 = jdf.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert_eq!(ens, top1);
}

#[test]
fn auxiliary_commands_write_their_outputs() {
    let (dir, cfg) = setup(CONFIG);
    let run = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--out", s(&run)]);
    let aux = dir.path().join("aux");
    ok(&["encode", "--config", s(&cfg), "--out", s(&aux)]);
    ok(&["noise", "--config", s(&cfg), "--out", s(&aux), "--level", "0.2"]);
    ok(&[
        "shuffle-thresholds",
        "--checkpoint",
        s(&run.join("final.ckpt")),
        "--out",
        s(&aux),
        "--seed",
        "5",
    ]);
    ok(&[
        "track-thresholds",
        "--checkpoints",
        s(&run.join("init.ckpt")),
        s(&run.join("final.ckpt")),
        "--out",
        s(&aux),
    ]);
    let got = files(&aux);
    for f in [
        "hete-init.ckpt",
        "test-noisy.tensor",
        "test.tensor",
        "thresholds.csv",
        "threshold_stats.csv",
    ] {
        assert!(got.contains(&f.to_string()), "missing {f} in {got:?}");
    }
    ok(&["eval", "--checkpoint", s(&aux.join("hete-init.ckpt"))]);
}

#[test]
fn unknown_subcommand_fails() {
    assert!(!stlsnn(&["fly"]).status.success());
    assert!(!stlsnn(&[]).status.success());
}

#[test]
fn errors_leave_no_output_behind() {
    let (dir, cfg) = setup(&CONFIG.replace("FC16-DP-VotingC2P4", "FC16-VotingC2P4-FC3"));
    let out = dir.path().join("run");
    let r = stlsnn(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
    assert!(!out.exists() || files(&out).is_empty());

    let (dir, cfg) = setup(&CONFIG.replace("VotingC2P4", "VotingC1P4"));
    let out = dir.path().join("run");
    let r = stlsnn(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("label 1"));
    assert!(!out.exists());

    let (dir, cfg) = setup(&format!("{CONFIG}\nbogus = 1\n"));
    let out = dir.path().join("run");
    let r = stlsnn(&["train", "--config", s(&cfg), "--out", s(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("bogus"));
    assert!(!out.exists());

    let r = stlsnn(&[
        "eval",
        "--checkpoint",
        s(&dir.path().join("missing.ckpt")),
        "--out",
        s(&out),
    ]);
    assert!(!r.status.success());
    assert!(!out.exists());
}
