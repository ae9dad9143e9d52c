use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bethe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bethe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bethe-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn two_node_solve_is_certified() {
    let dir = scratch_dir("two");
    let model = dir.join("m.txt");
    fs::write(&model, "2 1\n0 0\n1 0\n0 1 2\n").unwrap();
    let csv = dir.join("r.csv");
    let o = bethe(&[
        "solve",
        "--model",
        model.to_str().unwrap(),
        "--epsilon",
        "0.1",
        "--exact-compare",
        "--no-timing",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let est: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("log_zb_estimate: "))
        .unwrap()
        .parse()
        .unwrap();
    let lz = (2.0 * std::f64::consts::E + 2.0).ln();
    assert!(est <= lz + 1e-9 && est >= lz - 0.1);
    assert_eq!(text.lines().filter(|l| l.starts_with("certified")).count(), 1);
    assert!(!text.contains("timing_ms"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn text_report_is_reproducible() {
    let dir = scratch_dir("repro");
    let model = dir.join("m.txt");
    let g = bethe(&[
        "generate",
        "--kind",
        "random",
        "--n",
        "8",
        "--degree",
        "3",
        "--theta=-1:1",
        "--w",
        "0.5:2",
        "--seed",
        "11",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert!(g.status.success());
    let run = || stdout(&bethe(&["solve", "--model", model.to_str().unwrap(), "--no-timing"]));
    assert_eq!(run(), run());
}

#[test]
fn generate_is_deterministic() {
    let args = ["generate", "--kind", "pref-attach", "--n", "55", "--theta=-2", "--w", "4", "--seed", "3"];
    let a = bethe(&args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&bethe(&args)));
    assert!(stdout(&a).starts_with("55 54\n"));
}

#[test]
fn uncertified_exit_code() {
    let dir = scratch_dir("frustrated");
    let model = dir.join("m.txt");
    fs::write(&model, "3 3\n0 1\n1 1\n2 1\n0 1 -2\n1 2 -2\n0 2 -2\n").unwrap();
    let o = bethe(&["solve", "--model", model.to_str().unwrap(), "--solver", "localsearch", "--no-timing"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(!text.lines().any(|l| l.starts_with("certified")));
    assert!(text.lines().any(|l| l.starts_with("uncertified")));
}

#[test]
fn mesh_stats_lists_every_method() {
    let dir = scratch_dir("stats");
    let model = dir.join("m.txt");
    fs::write(&model, "3 2\n0 0.5\n1 -0.5\n2 0\n0 1 1.5\n1 2 -1\n").unwrap();
    let o = bethe(&["mesh-stats", "--model", model.to_str().unwrap(), "--epsilon", "0.2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for m in ["simple", "minsum", "adaptive-simple", "adaptive-minsum", "second-derivative"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(m)), "{m} missing");
    }
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(bethe(&["solve", "--model", "/nonexistent/model"]).status.code(), Some(1));
    let dir = scratch_dir("bad");
    let model = dir.join("m.txt");
    fs::write(&model, "2 1\n0 0\n1 0\n0 1 2\n").unwrap();
    let m = model.to_str().unwrap();
    assert_eq!(bethe(&["solve", "--model", m, "--epsilon", "-1"]).status.code(), Some(1));
    assert_eq!(bethe(&["solve", "--model", m, "--mesh", "cubic"]).status.code(), Some(1));
    assert_eq!(bethe(&["generate", "--n", "0"]).status.code(), Some(1));
}

#[test]
fn bounds_file_and_problem_dump() {
    let dir = scratch_dir("files");
    let model = dir.join("m.txt");
    fs::write(&model, "2 1\n0 0\n1 0\n0 1 2\n").unwrap();
    let bounds = dir.join("b.txt");
    fs::write(&bounds, "0 0.1 0.1\n1 0.1 0.1\n").unwrap();
    let dump = dir.join("p.txt");
    let o = bethe(&[
        "solve",
        "--model",
        model.to_str().unwrap(),
        "--bounds",
        bounds.to_str().unwrap(),
        "--dump-problem",
        dump.to_str().unwrap(),
        "--no-timing",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = fs::read_to_string(&dump).unwrap();
    assert!(d.starts_with("# component 0 1\n2 1\n"));
}
