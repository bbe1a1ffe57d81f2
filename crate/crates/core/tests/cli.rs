use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinolazy::bench::{aggregate, load_suite, run_bench, BenchRow};
use kinolazy::planner::PlanStatus;
use kinolazy::scenario::{load_scenario, Scenario};

fn kinolazy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinolazy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .display()
        .to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn plan_into(dir: &Path, name: &str, planner: &str) -> Output {
    kinolazy(&[
        "plan",
        &scenario(name),
        "--planner",
        planner,
        "--out-dir",
        path_str(dir),
    ])
}

#[test]
fn plan_writes_reproducible_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = plan_into(dir, "forest.json", "lazy");
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["trajectory.csv", "tree.jsonl"] {
        let (x, y) = (
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
        );
        assert!(!x.is_empty());
        assert_eq!(x, y, "{file} differs between runs");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let sc = load_scenario(scenario("forest.json")).unwrap();
    assert_eq!(summary["config_hash"], sc.config_hash());
    assert_eq!(summary["status"], "reached_goal");
    assert_eq!(summary["planner"], "lazy");

    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,z,vx,vy,vz,ux,uy,uz"));
}

#[test]
fn plan_tree_dump_chains_to_the_start() {
    let tmp = tempfile::tempdir().unwrap();
    for planner in ["lazy", "eager"] {
        let dir = tmp.path().join(planner);
        assert_eq!(
            plan_into(&dir, "forest.json", planner).status.code(),
            Some(0)
        );
        let edges: Vec<serde_json::Value> = fs::read_to_string(dir.join("tree.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert!(!edges.is_empty());
        let sc = load_scenario(scenario("forest.json")).unwrap();
        let start = sc.start_state().unwrap().to_flat();
        let start: Vec<serde_json::Value> =
            start.into_iter().map(serde_json::Value::from).collect();
        for e in &edges {
            let parent = e["parent"].as_u64().unwrap();
            let parent_end = if parent == 0 {
                &start
            } else {
                edges
                    .iter()
                    .find(|p| p["id"].as_u64() == Some(parent))
                    .expect("parent is in the dump")["end"]
                    .as_array()
                    .unwrap()
            };
            assert_eq!(e["start"].as_array().unwrap(), parent_end);
            if planner == "eager" {
                assert_eq!(e["eval_status"], "full");
            }
        }
    }
}

#[test]
fn plan_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = plan_into(tmp.path(), "sealed_start.json", "eager");
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let summary = fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"failure\""));
}

#[test]
fn best_effort_is_not_a_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = plan_into(tmp.path(), "sealed_goal.json", "lazy");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("status=best_effort"));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["fly"],
        vec!["plan"],
        vec!["plan", path_str(&missing)],
        vec!["plan", "x.json", "--planner", "greedy"],
        vec!["bench", path_str(&missing)],
        vec!["bench", path_str(tmp.path()), "--reps", "0"],
        vec!["sample-eval", "--strategies", "sobol"],
        vec!["sample-eval", "--m", "0"],
        vec!["esdf", path_str(&missing)],
    ];
    for args in cases {
        let out = kinolazy(&args);
        assert_eq!(out.status.code(), Some(1), "args {args:?}");
        assert!(!out.stderr.is_empty(), "args {args:?} gave no message");
    }
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"version": 1, "name": "x"}"#).unwrap();
    assert_eq!(kinolazy(&["plan", path_str(&bad)]).status.code(), Some(1));
    assert_eq!(kinolazy(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_report_round_trips_and_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let report_path = tmp.path().join("report.csv");
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/suite");
    let out = kinolazy(&[
        "bench",
        path_str(&suite),
        "--reps",
        "1",
        "--out",
        path_str(&report_path),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Lazy") && stdout.contains("MP-A*"));

    let rows: Vec<BenchRow> = csv::Reader::from_path(&report_path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 20);
    let names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(rows.iter().all(|r| r.status == PlanStatus::ReachedGoal));

    let scenarios = load_suite(&suite).unwrap();
    let report = run_bench(&scenarios, 1).unwrap();
    assert_eq!(report.aggregates, aggregate(&report.rows));
    let strip = |r: &BenchRow| BenchRow {
        t_ms: 0.0,
        ..r.clone()
    };
    let from_file: Vec<BenchRow> = rows.iter().map(strip).collect();
    let fresh: Vec<BenchRow> = report.rows.iter().map(strip).collect();
    assert_eq!(from_file, fresh);
    for (row, sc) in fresh.iter().step_by(2).zip(&scenarios) {
        assert_eq!(row.config_hash, sc.config_hash());
    }
}

#[test]
fn sample_eval_csv_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let files: Vec<PathBuf> = (0..2)
        .map(|i| tmp.path().join(format!("s{i}.csv")))
        .collect();
    for f in &files {
        let out = kinolazy(&[
            "sample-eval",
            "--strategies",
            "normal,uniform,random",
            "--m",
            "125",
            "--seeds",
            "5",
            "--out",
            path_str(f),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let text = fs::read_to_string(&files[0]).unwrap();
    assert_eq!(text, fs::read_to_string(&files[1]).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("strategy,M,seed,alpha,L_m"));
    assert_eq!(lines.count(), 15);
}

#[test]
fn esdf_dump_matches_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("field.csv");
    let out = kinolazy(&["esdf", &scenario("forest.json"), "--out", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let world = load_scenario(scenario("forest.json"))
        .unwrap()
        .build_world()
        .unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["x_index", "y_index", "z_index", "distance_m"]
    );
    let mut count = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let idx: Vec<usize> = (0..3).map(|c| rec[c].parse().unwrap()).collect();
        let d: f64 = rec[3].parse().unwrap();
        assert_eq!(d, world.field.distance_at(idx[0], idx[1], idx[2]));
        count += 1;
    }
    assert_eq!(count, world.field.distances.len());
}

#[test]
fn scenario_files_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.extend(
        fs::read_dir(dir.join("suite"))
            .unwrap()
            .map(|e| e.unwrap().path()),
    );
    assert!(paths.len() >= 14);
    for p in paths {
        let sc = load_scenario(&p).unwrap();
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc, "{}", p.display());
        assert_eq!(back.config_hash(), sc.config_hash());
    }
}
