use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_heatrack");

const SMALL: &str = "\
scenario.width = 48
scenario.height = 48
scenario.frames = 6
scenario.vehicles = 3
net.base_channels = 2
train.batch_size = 2
train.max_steps = 3
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn heatrack")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("small.cfg");
        std::fs::write(&config, SMALL).unwrap();
        Self { _dir: dir, root, config }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn simulate(&self, name: &str, seed: u64) -> PathBuf {
        let out = self.path(name);
        ok(&["simulate", "--config", s(&self.config), "--out", s(&out), "--seed", &seed.to_string()]);
        out
    }
}

#[test]
fn simulate_writes_frames_and_truth_reproducibly() {
    let ws = Workspace::new();
    let a = ws.simulate("a", 5);
    let b = ws.simulate("b", 5);
    let fa = files(&a);
    assert_eq!(fa.len(), 7);
    assert_eq!(fa, files(&b));
    assert!(fa[0].0 == "frame_000000.pgm" && fa[0].1.starts_with(b"P5"));
    let truth = String::from_utf8(fa.last().unwrap().1.clone()).unwrap();
    assert!(truth.starts_with("frame,track_id,class,x,y\n"));
    assert_ne!(fa, files(&ws.simulate("c", 6)));
}

#[test]
fn truth_as_tracks_evaluates_perfectly() {
    let ws = Workspace::new();
    let dir = ws.simulate("seq", 1);
    let truth = std::fs::read_to_string(dir.join("truth.csv")).unwrap();
    let mut tracks = String::from("frame,id,class,x,y,confidence\n");
    for line in truth.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        tracks.push_str(&format!("{},{},{},{},{},1.0\n", f[0], f[1], f[2], f[3], f[4]));
    }
    let tracks_path = ws.path("tracks.csv");
    std::fs::write(&tracks_path, tracks).unwrap();
    let pr = ws.path("pr.csv");
    let report_path = ws.path("report.txt");
    ok(&[
        "eval", "--tracks", s(&tracks_path), "--truth", s(&dir.join("truth.csv")),
        "--out", s(&report_path), "--pr-csv", s(&pr),
    ]);
    let report = std::fs::read_to_string(&report_path).unwrap();
    assert!(report.contains("f1=1"), "{report}");
    assert!(report.contains("track_map=100.00"), "{report}");
    assert!(std::fs::read_to_string(&pr).unwrap().starts_with("threshold,recall,precision\n"));

    let stdout = ok(&["eval", "--tracks", s(&tracks_path), "--truth", s(&dir.join("truth.csv")), "--iou", "0.5", "--gate", "3"]);
    let text = String::from_utf8(stdout.stdout).unwrap();
    assert!(text.contains("track_ap_iou0.50=100.00"), "{text}");
    assert!(!text.contains("iou0.25"), "{text}");
}

#[test]
fn train_track_overlay_round_trip() {
    let ws = Workspace::new();
    let d1 = ws.simulate("d1", 10);
    let d2 = ws.simulate("d2", 11);
    let cfg = s(&ws.config);
    let train = |name: &str| {
        let ckpt = ws.path(name);
        let loss = ws.path(&format!("{name}.loss.csv"));
        ok(&["train", "--config", cfg, "--data", s(&d1), "--data", s(&d2), "--out", s(&ckpt), "--loss-csv", s(&loss)]);
        (std::fs::read(&ckpt).unwrap(), std::fs::read_to_string(&loss).unwrap())
    };
    let (c1, l1) = train("m1.ckpt");
    let (c2, l2) = train("m2.ckpt");
    assert_eq!(c1, c2, "training is not reproducible");
    assert_eq!(l1, l2);
    assert!(c1.starts_with(b"HTRKCKPT"));
    assert!(l1.starts_with("epoch,step,total,center,motion,subpixel\n"));
    assert_eq!(l1.lines().count(), 4);

    let track = |suffix: &str| {
        let t = ws.path(&format!("tracks{suffix}.csv"));
        let d = ws.path(&format!("dets{suffix}.csv"));
        ok(&["track", "--config", cfg, "--frames", s(&d1), "--checkpoint", s(&ws.path("m1.ckpt")), "--tracks", s(&t), "--detections", s(&d)]);
        (std::fs::read(&t).unwrap(), std::fs::read(&d).unwrap())
    };
    let (t1, dt1) = track("1");
    let (t2, dt2) = track("2");
    assert_eq!((&t1, &dt1), (&t2, &dt2), "tracking is not reproducible");
    assert!(t1.starts_with(b"frame,id,class,x,y,confidence\n"));
    assert!(dt1.starts_with(b"frame,class,x,y,confidence,vx,vy\n"));

    let over = ws.path("overlay");
    ok(&["overlay", "--frames", s(&d1), "--tracks", s(&ws.path("tracks1.csv")), "--truth", s(&d1.join("truth.csv")), "--out", s(&over)]);
    let imgs = files(&over);
    assert_eq!(imgs.len(), 6);
    assert!(imgs.iter().all(|(n, b)| n.ends_with(".ppm") && b.starts_with(b"P6")));
}

#[test]
fn no_rcr_rcp_training_differs() {
    let ws = Workspace::new();
    let d = ws.simulate("d", 3);
    let cfg = s(&ws.config);
    let a = ws.path("a.ckpt");
    let b = ws.path("b.ckpt");
    ok(&["train", "--config", cfg, "--data", s(&d), "--out", s(&a)]);
    ok(&["train", "--config", cfg, "--data", s(&d), "--out", s(&b), "--no-rcr-rcp"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn configuration_errors_exit_with_two() {
    let ws = Workspace::new();
    let bad = ws.path("bad.cfg");
    std::fs::write(&bad, "scenario.frames = 4\nscenario.bogus = 1\n").unwrap();
    let out = run(&["simulate", "--config", s(&bad), "--out", s(&ws.path("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.cfg:2"), "{err}");

    let dup = ws.path("dup.cfg");
    std::fs::write(&dup, "sgr.theta = 0.3\nsgr.theta = 0.4\n").unwrap();
    assert_eq!(run(&["simulate", "--config", s(&dup), "--out", s(&ws.path("y"))]).status.code(), Some(2));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["track", "--frames", "x"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_with_three() {
    let ws = Workspace::new();
    let missing = ws.path("nowhere");
    let out = run(&["track", "--frames", s(&missing), "--checkpoint", s(&ws.path("m.ckpt")), "--tracks", s(&ws.path("t.csv"))]);
    assert_eq!(out.status.code(), Some(3));

    let bad_csv = ws.path("bad.csv");
    std::fs::write(&bad_csv, "frame,id,class,x,y,confidence\n0,1,0,abc,2,0.5\n").unwrap();
    let out = run(&["eval", "--tracks", s(&bad_csv), "--truth", s(&bad_csv)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2"));

    let d = ws.simulate("d", 1);
    let junk = ws.path("junk.ckpt");
    std::fs::write(&junk, b"garbage").unwrap();
    let out = run(&["track", "--frames", s(&d), "--checkpoint", s(&junk), "--tracks", s(&ws.path("t.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}
