use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cyclematch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclematch"))
        .args(args)
        .env_remove("CYCLEMATCH_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cyclematch(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL_NET: [&str; 10] = [
    "--layers",
    "4",
    "--hidden",
    "8",
    "--groups",
    "2",
    "--eval-graphs",
    "1",
    "--points",
    "6",
];

/// Every subcommand once, writing under `root`.
fn pipeline(root: &Path) {
    let d = |s: &str| root.join(s);
    ok(&["--seed", "3", "--out", p(&d("g")), "gen-graph", "--points", "6", "--outliers", "0.1"]);
    ok(&["--seed", "3", "--out", p(&d("s")), "gen-scene", "--points", "8"]);
    let t = d("t");
    let mut train = vec!["--seed", "1", "--out", p(&t), "train", "--steps", "4"];
    train.extend(SMALL_NET);
    ok(&train);
    let (graph, gt) = (d("g").join("graph.cgrf"), d("g").join("graph.gtrf"));
    ok(&[
        "--out",
        p(&d("i")),
        "infer",
        "--model",
        p(&t.join("model.gcnm")),
        "--graph",
        p(&graph),
        "--gt",
        p(&gt),
    ]);
    for method in ["spectral", "matchals", "pgdds"] {
        ok(&[
            "--out",
            p(&d("b")),
            "baseline",
            "--method",
            method,
            "--graph",
            p(&graph),
            "--gt",
            p(&gt),
            "--dim",
            "6",
        ]);
        fs::rename(d("b").join("metrics.csv"), d("b").join(format!("{method}_metrics.csv"))).unwrap();
    }
    ok(&["--out", p(&d("e")), "eval", "--graph", p(&graph), "--gt", p(&gt)]);
    ok(&["--seed", "2", "--out", p(&d("w")), "sweep", "--instances", "2", "--points", "6"]);
    let a = d("a");
    let mut ablate = vec!["--out", p(&a), "ablate", "--flag", "groupnorm", "--seeds", "1,2", "--steps", "3"];
    ablate.extend(SMALL_NET);
    ok(&ablate);
    ok(&["--seed", "7", "--out", p(&d("c")), "gradcheck", "--directions", "4"]);
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for dir in fs::read_dir(root).unwrap() {
        for f in fs::read_dir(dir.unwrap().path()).unwrap() {
            out.push(f.unwrap().path().strip_prefix(root).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

#[test]
fn every_subcommand_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let listed = files(a.path());
    assert_eq!(listed, files(b.path()));
    assert_eq!(listed.len(), 20);
    for f in &listed {
        let (x, y) = (fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{} differs between runs", f.display());
    }
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(cyclematch(&[]).status.code(), Some(1));
    assert_eq!(cyclematch(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cyclematch(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["--seed", "7", "gradcheck"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().ends_with("PASS"), "{text}");
}

#[test]
fn config_type_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "steps = 5\nlr0 = banana\n").unwrap();
    let out = cyclematch(&["--config", p(&cfg), "gen-graph"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn config_values_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small instance\nviews = 4\npoints = 5\nseed = 11\n").unwrap();
    let g = dir.path().join("a.cgrf");
    ok(&["--config", p(&cfg), "--out", p(&g), "gen-graph", "--points", "3"]);
    let text = fs::read_to_string(&g).unwrap();
    let same_seed = dir.path().join("b.cgrf");
    ok(&["--seed", "11", "--out", p(&same_seed), "gen-graph", "--views", "4", "--points", "3"]);
    assert_eq!(text, fs::read_to_string(&same_seed).unwrap());
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cyclematch"));
        cmd.env_remove("CYCLEMATCH_SEED");
        if let Some(v) = env {
            cmd.env("CYCLEMATCH_SEED", v);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.args(["--out", p(&path), "gen-graph"]).output().unwrap().status.success());
        fs::read_to_string(path).unwrap()
    };
    assert_eq!(run("env.cgrf", Some("9"), None), run("flag.cgrf", None, Some("9")));
    assert_eq!(run("both.cgrf", Some("4"), Some("9")), run("flag2.cgrf", None, Some("9")));
    assert_ne!(run("zero.cgrf", None, None), run("nine.cgrf", None, Some("9")));
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cgrf");
    let out = cyclematch(&["baseline", "--method", "spectral", "--graph", p(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    let out = cyclematch(&["--out", p(dir.path()), "baseline", "--method", "simplex", "--graph", p(&missing)]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn eval_scores_a_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--seed", "5", "--out", p(d), "gen-graph", "--points", "6"]);
    let mut train = vec!["--out", p(d), "train", "--steps", "3"];
    train.extend(SMALL_NET);
    ok(&train);
    let out = ok(&[
        "eval",
        "--graph",
        p(&d.join("graph.cgrf")),
        "--gt",
        p(&d.join("graph.gtrf")),
        "--embedding",
        p(&d.join("model.gcnm")),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("method,views,points"));
    assert_eq!(lines.count(), 1);
}

#[test]
fn training_resumes_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let (whole, half) = (dir.path().join("whole"), dir.path().join("half"));
    let mut args = vec!["--out", p(&whole), "train", "--steps", "6"];
    args.extend(SMALL_NET);
    ok(&args);
    let mut first = vec!["--out", p(&half), "train", "--steps", "3"];
    first.extend(SMALL_NET);
    ok(&first);
    let ckpt = half.join("model.gcnm");
    let mut second = vec!["--out", p(&half), "train", "--steps", "6", "--resume", p(&ckpt)];
    second.extend(SMALL_NET);
    ok(&second);
    assert_eq!(
        fs::read_to_string(whole.join("model.gcnm")).unwrap(),
        fs::read_to_string(half.join("model.gcnm")).unwrap()
    );
}
