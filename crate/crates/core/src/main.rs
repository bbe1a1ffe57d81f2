use std::fs::File;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kinolazy::bench::{
    load_suite, run_bench, run_plan, run_sample_eval, write_esdf_csv, write_plan_artifacts,
    SampleEvalConfig,
};
use kinolazy::control_sampling::Strategy;
use kinolazy::planner::{PlanStatus, PlannerKind};
use kinolazy::scenario::load_scenario;

#[derive(Parser)]
#[command(
    name = "kinolazy",
    version,
    about = "Lazy and eager motion-primitive A* planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write trajectory.csv, tree.jsonl and summary.json
    Plan {
        scenario: PathBuf,
        #[arg(long, default_value = "lazy")]
        planner: PlannerKind,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run lazy and eager on every scenario in a directory
    Bench {
        suite_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Control-sampling study: alpha and L per strategy and seed
    SampleEval {
        #[arg(long, value_delimiter = ',', default_value = "normal,uniform,random")]
        strategies: Vec<Strategy>,
        #[arg(long, default_value_t = 125)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        u_max: f64,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a scenario's distance field as CSV
    Esdf {
        scenario: PathBuf,
        #[arg(long, default_value = "field.csv")]
        out: PathBuf,
    },
}

enum Outcome {
    Done,
    PlanningFailed,
}

fn run(cli: Cli) -> Result<Outcome, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Plan {
            scenario,
            planner,
            out_dir,
        } => {
            let sc = load_scenario(&scenario)?;
            let run = run_plan(&sc, planner)?;
            let files = write_plan_artifacts(&out_dir, &sc, &run)?;
            let r = &run.result;
            println!(
                "{} [{}] status={} cost={:.4} edges={} T={:.3}ms N={} D={:.3}m full={} partial={}",
                sc.name,
                planner.name(),
                r.status.name(),
                r.cost,
                r.trajectory.len(),
                r.metrics.planning_ms,
                r.metrics.pops,
                r.metrics.distance_to_goal,
                r.metrics.full_evals,
                r.metrics.partial_evals
            );
            println!("wrote {}", files.trajectory_csv.display());
            println!("wrote {}", files.tree_jsonl.display());
            if r.status == PlanStatus::Failure {
                return Ok(Outcome::PlanningFailed);
            }
        }
        Command::Bench {
            suite_dir,
            reps,
            out,
        } => {
            let suite = load_suite(&suite_dir)?;
            let report = run_bench(&suite, reps)?;
            print!("{}", report.format_table());
            if let Some(path) = out {
                report.write_csv(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::SampleEval {
            strategies,
            m,
            seeds,
            tau,
            u_max,
            threshold,
            out,
        } => {
            let cfg = SampleEvalConfig {
                strategies,
                m,
                seeds: (0..seeds).collect(),
                tau,
                u_max,
                threshold,
                ..SampleEvalConfig::default()
            };
            let report = run_sample_eval(&cfg)?;
            match out {
                Some(path) => {
                    report.write_csv(File::create(&path)?)?;
                    print!("{}", report.format_table());
                }
                None => {
                    report.write_csv(io::stdout().lock())?;
                    eprint!("{}", report.format_table());
                }
            }
        }
        Command::Esdf { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let world = sc.build_world()?;
            write_esdf_csv(&out, &world.field)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::PlanningFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
