use std::path::Path;
use std::process::{Command, Output};

use eventdistill::format::Tensor;
use eventdistill::trainer::{Checkpoint, TrainConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_eventdistill"));
    c.env("EVENTDISTILL_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("formats-check"));
    let o = run(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_one() {
    let o = run(&["probe", "--data", "x", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--no-such-flag"));

    let o = run(&["voxelize", "--events", "e.csv", "--count", "5", "--window-us", "9", "--out", "v.ftn"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--count") && err.contains("--window-us"), "{err}");
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = bin().env("EVENTDISTILL_THREADS", "many").args(["gradcheck", "--loss", "l1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("EVENTDISTILL_THREADS"));
}

#[test]
fn preset_dump_parses_back() {
    let o = run(&["pretrain", "--preset", "paper", "--set", "seed=9", "--dump-config"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = TrainConfig::parse(&stdout(&o)).unwrap();
    assert_eq!(cfg, TrainConfig { seed: 9, ..TrainConfig::paper() });

    let o = run(&["pretrain", "--preset", "tiny", "--dump-config"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["pretrain", "--set", "lr=-1", "--dump-config"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_reports_every_loss() {
    let o = run(&["gradcheck", "--loss", "all", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for kind in ["l1", "intra", "cross", "combined", "student"] {
        assert!(out.lines().any(|l| l.starts_with(&format!("{kind}\t"))), "{out}");
    }
    assert_eq!(run(&["gradcheck", "--loss", "hinge"]).status.code(), Some(1));
}

#[test]
fn end_to_end_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = run(&["synth", "--scenes", "8", "--seed", "3", "--width", "64", "--height", "64", "--out", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(data.join("manifest.txt").exists());

    let o = run(&["formats-check", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok\t")).count(), 32);

    let events = data.join("events_0.evt1");
    let vol = dir.path().join("v.ftn");
    let o = run(&["voxelize", "--events", p(&events), "--bins", "3", "--out", p(&vol)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(Tensor::load(&vol).unwrap().dims, vec![64, 64, 3]);

    let mask = dir.path().join("m.ftn");
    let o = run(&["mask", "--volume", p(&vol), "--patch", "16", "--tau", "8", "--out", p(&mask)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bits = Tensor::load(&mask).unwrap();
    assert_eq!(bits.dims, vec![4, 4]);
    assert!(bits.to_f64().iter().all(|&b| b == 0.0 || b == 1.0));

    let ckpt = dir.path().join("s.ckp1");
    let o = run(&[
        "pretrain", "--data", p(&data), "--set", "width=64", "--set", "height=64", "--set", "steps=5", "--out", p(&ckpt),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(Checkpoint::load(&ckpt).unwrap().history.len(), 5);

    let o = run(&["eval", "--ckpt", p(&ckpt), "--data", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("gram_err\t"));

    let o = run(&["probe", "--ckpt", p(&ckpt), "--data", p(&data), "--fraction", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("miou\t") && out.contains("acc\t"), "{out}");

    let feats = dir.path().join("k.ftn");
    let o = run(&["encode", "--ckpt", p(&ckpt), "--events", p(&events), "--out", p(&feats)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(Tensor::load(&feats).unwrap().dims, vec![4, 4, 16]);

    let map = dir.path().join("sim.pgm");
    let o = run(&["simmap", "--features", p(&feats), "--anchor", "1,2", "--out", p(&map)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["simmap", "--features", p(&feats), "--anchor", "9,9", "--out", p(&map)]);
    assert_ne!(o.status.code(), Some(0));

    let q = dir.path().join("q.ftn");
    let o = run(&["teacher", "--image", p(&data.join("frame0_0.ppm")), "--out", p(&q)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(Tensor::load(&q).unwrap().dims, vec![4, 4, 16]);
}

#[test]
fn formats_check_flags_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["formats-check", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());

    std::fs::write(dir.path().join("bad.evt1"), b"EVT1\x00garbage").unwrap();
    std::fs::write(dir.path().join("note.txt"), b"ignored").unwrap();
    let o = run(&["formats-check", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("FAIL\tbad.evt1"), "{out}");
    assert!(!out.contains("note.txt"));
}

#[test]
fn missing_file_maps_to_io_exit_code() {
    let o = run(&["eval", "--ckpt", "/nonexistent/a.ckp1", "--data", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: "));
}
