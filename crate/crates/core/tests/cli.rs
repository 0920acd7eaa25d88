use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 4
checkpoint_every = 2

[model]
kind = "cs1d"
extent = 5.0
g = 5.0
mu = 46.0

[ansatz]
embed_dim = 8
blocks = 1
heads = 2
ffn_width = 8
n_max = 8
embedding = "fourier"
grid_points = 4

[sampler]
chains = 4
samples_per_chain = 8
sweep = 4
burn_in = 1
warmup = 10

[optimizer]
method = "minsr"
learning_rate = 0.01
schedule = "constant"
iterations = 4

[evaluation]
samples_per_chain = 8
density_bins = 10
obdm_points = 8
"#;

fn bosefock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bosefock"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn optimize(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["optimize", "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = bosefock(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn same_seed_gives_identical_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    optimize(&cfg, &a, &[]);
    optimize(&cfg, &b, &[]);
    for f in ["trajectory.csv", "checkpoint.ckpt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = dir.path().join("c");
    optimize(&cfg, &c, &["--seed", "5"]);
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (full, split) = (dir.path().join("full"), dir.path().join("split"));
    optimize(&cfg, &full, &[]);
    optimize(&cfg, &split, &["--iterations-override", "2"]);
    let ckpt = split.join("checkpoint.ckpt");
    optimize(&cfg, &split, &["--checkpoint", ckpt.to_str().unwrap()]);
    let a = bosefock::runner::Checkpoint::load(&full.join("checkpoint.ckpt")).unwrap();
    let b = bosefock::runner::Checkpoint::load(&ckpt).unwrap();
    assert_eq!(a.header.iteration, 4);
    assert!(a.header == b.header, "headers differ");
    assert!(a.params == b.params, "parameters differ");
    assert_eq!(
        fs::read_to_string(full.join("trajectory.csv")).unwrap(),
        fs::read_to_string(split.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn evaluate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let run = dir.path().join("run");
    optimize(&cfg, &run, &["--iterations-override", "1"]);
    let o = bosefock(&[
        "evaluate",
        "--checkpoint",
        run.join("checkpoint.ckpt").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["density.csv", "obdm.csv", "summary.json"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert!(summary["energy"].as_f64().unwrap().is_finite());
}

#[test]
fn missing_checkpoint_is_an_error() {
    let o = bosefock(&["evaluate", "--checkpoint", "/nonexistent/run/checkpoint.ckpt"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint not found"));
}

#[test]
fn corrupt_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ckpt");
    fs::write(&p, b"BFCK\x01\x00\x00\x00garbage").unwrap();
    let o = bosefock(&["evaluate", "--checkpoint", p.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("corrupt"));
}

#[test]
fn unknown_config_key_is_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("sweep = 4", "sweep = 4\nsweeep = 5"));
    let o = bosefock(&["optimize", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sweeep") && err.contains("line"), "{err}");
}

#[test]
fn bench_check_passes() {
    let o = bosefock(&["bench", "check"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("cs1d-g5") && out.contains("PASS") && !out.contains("FAIL"), "{out}");
    let o = bosefock(&["bench", "check", "nothing-like-this"]);
    assert!(!o.status.success());
}
