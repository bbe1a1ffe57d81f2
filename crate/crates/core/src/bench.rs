//! Experiment harnesses and their file outputs: single planning runs with
//! trajectory and search-tree dumps, the lazy/eager comparison over a
//! scenario suite, the control-sampling study, and ESDF export.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control_sampling::{
    evaluate_sampling, generate_control_set, SamplingError, SamplingMetrics, Strategy,
};
use crate::dynamics::{State, Vec3};
use crate::planner::{PlanError, PlanResult, PlanStatus, Planner, PlannerKind};
use crate::scenario::{load_scenario, Scenario, ScenarioError};
use crate::world::DistanceField;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("scenario `{name}`: {source}")]
    Scenario {
        name: String,
        #[source]
        source: ScenarioError,
    },
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("scenario `{0}`: repeated runs disagree")]
    Nondeterministic(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn scenario_err(name: &str) -> impl FnOnce(ScenarioError) -> BenchError + '_ {
    move |source| BenchError::Scenario {
        name: name.to_string(),
        source,
    }
}

/// A planning run with the field it ran against.
pub struct PlanRun {
    pub result: PlanResult,
    pub field: DistanceField,
    pub start: State,
}

pub fn run_plan(scenario: &Scenario, kind: PlannerKind) -> Result<PlanRun, BenchError> {
    let world = scenario
        .build_world()
        .map_err(scenario_err(&scenario.name))?;
    let controls = scenario.control_set().map_err(|e| {
        scenario_err(&scenario.name)(ScenarioError::Invalid {
            field: "sampler",
            reason: e.to_string(),
        })
    })?;
    let start = scenario.start_state().map_err(|e| {
        scenario_err(&scenario.name)(ScenarioError::Invalid {
            field: "start",
            reason: e.to_string(),
        })
    })?;
    let planner = Planner::new(
        &world.field,
        &controls,
        &scenario.weights,
        &scenario.limits,
        scenario.search_config(),
    );
    let result = planner.plan(kind, &start, &scenario.goal)?;
    Ok(PlanRun {
        result,
        field: world.field,
        start,
    })
}

/// One CSV row per trajectory sample; consecutive edges share their
/// boundary sample, which is written once.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
}

pub fn trajectory_rows(result: &PlanResult, start: &State) -> Vec<TrajectoryRow> {
    let row = |t: f64, s: &State, u: &Vec3| TrajectoryRow {
        t,
        x: s.position().x,
        y: s.position().y,
        z: s.position().z,
        vx: s.velocity().x,
        vy: s.velocity().y,
        vz: s.velocity().z,
        ux: u.x,
        uy: u.y,
        uz: u.z,
    };
    if result.trajectory.is_empty() {
        return vec![row(0.0, start, &Vec3::zeros())];
    }
    let mut rows = Vec::new();
    let mut t0 = 0.0;
    for (i, edge) in result.trajectory.iter().enumerate() {
        let skip = usize::from(i > 0);
        for (s, t) in edge.samples.iter().zip(edge.sample_times()).skip(skip) {
            rows.push(row(t0 + t, s, &edge.control.0));
        }
        t0 += edge.tau;
    }
    rows
}

pub fn write_trajectory_csv(
    path: &Path,
    result: &PlanResult,
    start: &State,
) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in trajectory_rows(result, start) {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_tree_jsonl(path: &Path, result: &PlanResult) -> Result<(), BenchError> {
    let mut out = String::new();
    for e in result.tree_edges() {
        out.push_str(&serde_json::to_string(&e).expect("tree edge serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub scenario: String,
    pub config_hash: String,
    pub planner: PlannerKind,
    pub status: PlanStatus,
    pub cost: f64,
    pub edges: usize,
    pub planning_ms: f64,
    pub pops: usize,
    pub expansions: usize,
    pub distance_to_goal: f64,
    pub partial_evals: usize,
    pub full_evals: usize,
    pub generated_edges: usize,
}

impl PlanSummary {
    pub fn new(scenario: &Scenario, result: &PlanResult) -> Self {
        let m = &result.metrics;
        Self {
            scenario: scenario.name.clone(),
            config_hash: scenario.config_hash(),
            planner: result.planner,
            status: result.status,
            cost: result.cost,
            edges: result.trajectory.len(),
            planning_ms: m.planning_ms,
            pops: m.pops,
            expansions: m.expansions,
            distance_to_goal: m.distance_to_goal,
            partial_evals: m.partial_evals,
            full_evals: m.full_evals,
            generated_edges: m.generated_edges,
        }
    }
}

/// Files written by [`write_plan_artifacts`].
pub struct PlanArtifacts {
    pub trajectory_csv: PathBuf,
    pub tree_jsonl: PathBuf,
    pub summary_json: PathBuf,
}

/// `trajectory.csv` and `tree.jsonl` carry no timing, so reruns are
/// byte-identical; timing goes to `summary.json`.
pub fn write_plan_artifacts(
    dir: &Path,
    scenario: &Scenario,
    run: &PlanRun,
) -> Result<PlanArtifacts, BenchError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let out = PlanArtifacts {
        trajectory_csv: dir.join("trajectory.csv"),
        tree_jsonl: dir.join("tree.jsonl"),
        summary_json: dir.join("summary.json"),
    };
    write_trajectory_csv(&out.trajectory_csv, &run.result, &run.start)?;
    write_tree_jsonl(&out.tree_jsonl, &run.result)?;
    let summary = PlanSummary::new(scenario, &run.result);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&out.summary_json, text + "\n").map_err(io_err(&out.summary_json))?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub config_hash: String,
    pub planner: PlannerKind,
    pub status: PlanStatus,
    /// Mean wall time over repetitions (T).
    pub t_ms: f64,
    /// Pops (N).
    pub n: usize,
    /// Closest approach to the goal (D).
    pub d_m: f64,
    pub cost: f64,
    pub expansions: usize,
    pub full_evals: usize,
    pub partial_evals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchAggregate {
    pub planner: PlannerKind,
    pub mean_t_ms: f64,
    pub mean_n: f64,
    pub mean_d_m: f64,
    pub mean_full_evals: f64,
    pub reached: usize,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub rows: Vec<BenchRow>,
    pub aggregates: Vec<BenchAggregate>,
}

pub fn aggregate(rows: &[BenchRow]) -> Vec<BenchAggregate> {
    [PlannerKind::Lazy, PlannerKind::Eager]
        .into_iter()
        .filter_map(|kind| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.planner == kind).collect();
            if mine.is_empty() {
                return None;
            }
            let k = mine.len() as f64;
            let mean = |f: &dyn Fn(&BenchRow) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / k;
            Some(BenchAggregate {
                planner: kind,
                mean_t_ms: mean(&|r| r.t_ms),
                mean_n: mean(&|r| r.n as f64),
                mean_d_m: mean(&|r| r.d_m),
                mean_full_evals: mean(&|r| r.full_evals as f64),
                reached: mine
                    .iter()
                    .filter(|r| r.status == PlanStatus::ReachedGoal)
                    .count(),
                runs: mine.len(),
            })
        })
        .collect()
}

/// Runs both planners on every scenario, `repetitions` times each. Search
/// output is deterministic, so only the timing is averaged; rows come out
/// sorted by scenario name, lazy before eager.
pub fn run_bench(scenarios: &[Scenario], repetitions: usize) -> Result<BenchReport, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::Usage("repetitions must be >= 1".into()));
    }
    let mut ordered: Vec<&Scenario> = scenarios.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let mut rows = Vec::new();
    for scenario in ordered {
        let world = scenario
            .build_world()
            .map_err(scenario_err(&scenario.name))?;
        let controls = scenario.control_set()?;
        let start = scenario.start_state().map_err(|e| {
            scenario_err(&scenario.name)(ScenarioError::Invalid {
                field: "start",
                reason: e.to_string(),
            })
        })?;
        let planner = Planner::new(
            &world.field,
            &controls,
            &scenario.weights,
            &scenario.limits,
            scenario.search_config(),
        );
        let hash = scenario.config_hash();
        const KINDS: [PlannerKind; 2] = [PlannerKind::Lazy, PlannerKind::Eager];
        // untimed warm-up, then alternate planners so drift hits both alike
        let reference = KINDS
            .iter()
            .map(|&kind| {
                planner
                    .plan(kind, &start, &scenario.goal)
                    .map(|r| r.without_timing())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut total_ms = [0.0; 2];
        for _ in 0..repetitions {
            for (i, kind) in KINDS.into_iter().enumerate() {
                let r = planner.plan(kind, &start, &scenario.goal)?;
                total_ms[i] += r.metrics.planning_ms;
                if r.without_timing() != reference[i] {
                    return Err(BenchError::Nondeterministic(scenario.name.clone()));
                }
            }
        }
        for (i, r) in reference.iter().enumerate() {
            rows.push(BenchRow {
                scenario: scenario.name.clone(),
                config_hash: hash.clone(),
                planner: r.planner,
                status: r.status,
                t_ms: total_ms[i] / repetitions as f64,
                n: r.metrics.pops,
                d_m: r.metrics.distance_to_goal,
                cost: r.cost,
                expansions: r.metrics.expansions,
                full_evals: r.metrics.full_evals,
                partial_evals: r.metrics.partial_evals,
            });
        }
    }
    Ok(BenchReport {
        repetitions,
        aggregates: aggregate(&rows),
        rows,
    })
}

/// All `*.json` scenarios in a directory, sorted by file name.
pub fn load_suite(dir: &Path) -> Result<Vec<Scenario>, BenchError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.display().to_string();
            load_scenario(p).map_err(|source| BenchError::Scenario { name, source })
        })
        .collect()
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }

    /// Per-scenario rows, then planner means laid out as T / N / D columns.
    pub fn format_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<24} {:<6} {:<13} {:>10} {:>8} {:>8} {:>10} {:>10}",
            "scenario", "planner", "status", "T [ms]", "N", "D [m]", "full", "partial"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<24} {:<6} {:<13} {:>10.3} {:>8} {:>8.3} {:>10} {:>10}",
                r.scenario,
                r.planner.name(),
                r.status.name(),
                r.t_ms,
                r.n,
                r.d_m,
                r.full_evals,
                r.partial_evals
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<8} {:>10} {:>10} {:>8} {:>12}",
            "", "T", "N", "D", "reached"
        );
        for a in &self.aggregates {
            let label = match a.planner {
                PlannerKind::Lazy => "Lazy",
                PlannerKind::Eager => "MP-A*",
            };
            let _ = writeln!(
                s,
                "{:<8} {:>10.3} {:>10.1} {:>8.3} {:>9}/{:<2}",
                label, a.mean_t_ms, a.mean_n, a.mean_d_m, a.reached, a.runs
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvalConfig {
    pub strategies: Vec<Strategy>,
    pub m: usize,
    pub seeds: Vec<u64>,
    pub tau: f64,
    pub u_max: f64,
    pub threshold: f64,
    /// Start state for the primitives; rest at the origin by default.
    pub start: State,
}

impl Default for SampleEvalConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            m: 125,
            seeds: (0..20).collect(),
            tau: 1.0,
            u_max: 1.0,
            threshold: crate::control_sampling::DEFAULT_USEFUL_THRESHOLD,
            start: State::at_rest(Vec3::zeros(), 2).expect("order 2 is valid"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEvalRow {
    pub strategy: Strategy,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub alpha: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvalSummary {
    pub strategy: Strategy,
    pub median: SamplingMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvalReport {
    pub rows: Vec<SampleEvalRow>,
    pub medians: Vec<SampleEvalSummary>,
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn run_sample_eval(cfg: &SampleEvalConfig) -> Result<SampleEvalReport, BenchError> {
    if cfg.strategies.is_empty() || cfg.seeds.is_empty() {
        return Err(BenchError::Usage(
            "need at least one strategy and one seed".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &strategy in &cfg.strategies {
        let mut alphas = Vec::new();
        let mut spreads = Vec::new();
        for &seed in &cfg.seeds {
            let cs = generate_control_set(strategy, cfg.m, cfg.u_max, seed)?;
            let m = evaluate_sampling(&cfg.start, &cs, cfg.tau, cfg.threshold)?;
            alphas.push(m.alpha);
            spreads.push(m.spread_m);
            rows.push(SampleEvalRow {
                strategy,
                m: cfg.m,
                seed,
                alpha: m.alpha,
                l_m: m.spread_m,
            });
        }
        medians.push(SampleEvalSummary {
            strategy,
            median: SamplingMetrics {
                alpha: median(&mut alphas),
                spread_m: median(&mut spreads),
            },
        });
    }
    Ok(SampleEvalReport { rows, medians })
}

impl SampleEvalReport {
    pub fn median_for(&self, strategy: Strategy) -> Option<SamplingMetrics> {
        self.medians
            .iter()
            .find(|s| s.strategy == strategy)
            .map(|s| s.median)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|source| BenchError::Io {
            path: "<csv>".into(),
            source,
        })?;
        Ok(())
    }

    /// Strategies as columns, alpha and L as rows.
    pub fn format_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<8}", "");
        for m in &self.medians {
            let _ = write!(s, " {:>10}", m.strategy.name());
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<8}", "alpha");
        for m in &self.medians {
            let _ = write!(s, " {:>9.1}%", m.median.alpha * 100.0);
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<8}", "L [m]");
        for m in &self.medians {
            let _ = write!(s, " {:>10.4}", m.median.spread_m);
        }
        let _ = writeln!(s);
        let _ = write!(s, "{:<8}", "L [cm]");
        for m in &self.medians {
            let _ = write!(s, " {:>10.2}", m.median.spread_cm());
        }
        let _ = writeln!(s);
        s
    }
}

/// `x_index,y_index,z_index,distance_m` for every voxel, x fastest.
pub fn write_esdf_csv(path: &Path, field: &DistanceField) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x_index", "y_index", "z_index", "distance_m"])?;
    for (idx, d) in field.distances.iter().enumerate() {
        let [i, j, k] = field.geometry.coords(idx);
        w.write_record([i.to_string(), j.to_string(), k.to_string(), d.to_string()])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
