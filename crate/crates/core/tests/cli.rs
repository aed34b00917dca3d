use std::path::Path;
use std::process::{Command, Output};

use lvbounds::csv::Table;

fn lvb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lvb"))
        .args(args)
        .env_remove("LVB_SEED")
        .output()
        .expect("run lvb")
}

fn read(path: &Path) -> Table {
    Table::parse(&std::fs::read_to_string(path).expect("read csv")).expect("parse csv")
}

#[test]
fn bounds_to_stdout_matches_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let args = [
        "bounds",
        "--grid-min",
        "1.5",
        "--grid-max",
        "30",
        "--grid-count",
        "25",
    ];
    let stdout = lvb(&args);
    assert_eq!(stdout.status.code(), Some(0));
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    assert_eq!(lvb(&with_out).status.code(), Some(0));

    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.as_bytes(), stdout.stdout.as_slice());
    let t = Table::parse(&text).unwrap();
    assert_eq!(t.rows.len(), 25);
    assert_eq!(&t.header[..4], ["y", "Y", "x_exact", "z_exact"]);
    assert!(t.header.iter().any(|h| h == "relerr_tz3"));
    assert_eq!(t.to_csv_string(), text);
}

#[test]
fn lambert_leaves_corollary_cells_empty_outside_branch_interval() {
    let out = lvb(&[
        "lambert",
        "--grid-min",
        "-0.3",
        "--grid-max",
        "2",
        "--grid-count",
        "24",
        "--grid-spacing",
        "linear",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let t = Table::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let x = t.column("X").unwrap();
    let z1 = t.column("Z1").unwrap();
    let w = t.column("W").unwrap();
    for ((x, z1), w) in x.iter().zip(&z1).zip(&w) {
        let x = x.unwrap();
        assert_eq!(z1.is_some(), x < 0.0, "X = {x}");
        assert!(w.is_some());
    }
}

#[test]
fn domain_errors_exit_1() {
    assert_eq!(lvb(&["bounds", "--grid-min", "0.5"]).status.code(), Some(1));
    assert_eq!(lvb(&["lambert", "--grid-min", "-1"]).status.code(), Some(1));
    assert_eq!(lvb(&["simulate", "--alpha", "-1"]).status.code(), Some(1));
    assert_eq!(lvb(&["figure", "--figure", "9"]).status.code(), Some(1));
    assert_eq!(lvb(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn missed_event_exits_3_after_writing_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = lvb(&[
        "simulate",
        "--stop",
        "next",
        "--t-max",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let t = read(&path);
    assert!(t.rows.len() > 1);
    let tau = t.column("tau").unwrap();
    assert!((tau.last().unwrap().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn simulate_writes_events_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rm.csv");
    let out = lvb(&[
        "simulate",
        "--system",
        "rm",
        "--m",
        "1",
        "--lambda",
        "0.3",
        "--a",
        "0.1",
        "--s0",
        "0.3",
        "--x0",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let traj = read(&path);
    let events = read(&dir.path().join("rm_events.csv"));
    assert!(traj.rows.len() > 10);
    assert_eq!(events.rows.len(), 1);
}

#[test]
fn verify_is_deterministic_and_reads_seed_from_env() {
    let a = lvb(&["verify"]);
    let b = lvb(&["verify"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stdout)
    );
    assert_eq!(a.stdout, b.stdout);

    let env = Command::new(env!("CARGO_BIN_EXE_lvb"))
        .arg("verify")
        .env("LVB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&env.stdout).starts_with("seed 7\n"));
    let flag = lvb(&["verify", "--seed", "7"]);
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn corrupted_coefficient_fails_verification() {
    let out = lvb(&["verify", "--corrupt-coefficient"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn figure_panels_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = lvb(&[
        "figure",
        "--figure",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    for panel in ["upper_left", "upper_right", "lower_left", "lower_right"] {
        let path = dir.path().join(format!("fig2_{panel}.csv"));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(read(&path).to_csv_string(), text, "{panel}");
    }
}
