use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_accim"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path, workers: usize) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--workers")
        .arg(workers.to_string())
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const MARKOV_MAP: &str = r#"
[map]
kind = "mod_one"
lift = { form = "affine", intercept = 0, slope = 3 }
alpha = 1
holder_const = 0
mu = 3
"#;

#[test]
fn check_reports_a1_fail_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["check"], &configs().join("tripling_markov.toml"), tmp.path(), 2);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let a1 = text.lines().find(|l| l.trim_start().starts_with("A1")).unwrap();
    assert!(a1.contains("FAIL"), "{a1}");
    assert!(text.contains("xi                 0.2027"));
    assert!(tmp.path().join("constants.json").exists());
}

#[test]
fn check_closed_all_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["check"], &configs().join("tripling_closed.toml"), tmp.path(), 1);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn malformed_config_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &format!("{MARKOV_MAP}\n[hole]\nintervals = [[0.5]]\n"));
    let out = run(&["check"], &cfg, tmp.path(), 1);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 10"), "{err}");

    let out = run(&["check"], &tmp.path().join("missing.toml"), tmp.path(), 1);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_hole_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "deg.toml", &format!("{MARKOV_MAP}\n[hole]\nintervals = [[0.3, 0.7]]\n"));
    let out = run(&["solve"], &cfg, tmp.path(), 1);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_family_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "fam.toml",
        &format!(
            "{MARKOV_MAP}\n[family]\nkind = \"explicit\"\nmembers = [{{ s = 0.02, intervals = [[0.1, 0.12]] }}, {{ s = 0.01, intervals = [[0.5, 0.51]] }}]\n"
        ),
    );
    let out = run(&["shrink"], &cfg, tmp.path(), 1);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solve_markov_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["solve"], &configs().join("tripling_markov.toml"), tmp.path(), 2);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert!((summary["lambda"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let density = fs::read_to_string(tmp.path().join("density.csv")).unwrap();
    assert_eq!(density.lines().count(), 4097);
}

#[test]
fn single_member_family_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "one.toml",
        &format!("{MARKOV_MAP}\n[family]\nkind = \"centered\"\ncenter = 0.5\nsizes = [0.01]\n"),
    );
    let out = run(&["shrink"], &cfg, tmp.path(), 1);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(tmp.path().join("shrink.csv")).unwrap().lines().count(), 2);
}

/// Every command writes byte-identical files with one worker and with four.
#[test]
fn outputs_identical_across_worker_counts() {
    let cases: [(&str, &str); 6] = [
        ("check", "tripling_small.toml"),
        ("solve", "perturbed_small.toml"),
        ("tower-dump", "tripling_small.toml"),
        ("lipschitz", "lipschitz_tripling.toml"),
        ("shrink", "shrink_tripling.toml"),
        ("mc", "tripling_markov.toml"),
    ];
    for (cmd, cfg) in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = run(&[cmd], &configs().join(cfg), a.path(), 1);
        let rb = run(&[cmd], &configs().join(cfg), b.path(), 4);
        assert_eq!(ra.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&ra.stderr));
        assert_eq!(ra.stdout, rb.stdout, "{cmd} stdout differs");
        let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            let x = fs::read(a.path().join(&n)).unwrap();
            let y = fs::read(b.path().join(&n)).unwrap();
            assert!(x == y, "{cmd}: {n:?} differs between 1 and 4 workers");
        }
    }
}

#[test]
fn mc_seed_flag_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let cfg = configs().join("tripling_markov.toml");
    run(&["mc", "--seed", "11"], &cfg, a.path(), 3);
    run(&["mc", "--seed", "11"], &cfg, b.path(), 3);
    run(&["mc", "--seed", "12"], &cfg, c.path(), 3);
    let read = |d: &Path| fs::read(d.join("survival.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}
