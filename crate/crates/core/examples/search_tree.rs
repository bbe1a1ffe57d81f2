//! Plan one scenario with both planners and summarise their search trees.
//!
//! ```text
//! cargo run -p kinolazy --example search_tree -- crates/core/scenarios/forest.json /tmp/trees
//! ```
//!
//! Writes `lazy/` and `eager/` artifact directories (trajectory.csv,
//! tree.jsonl, summary.json). The lazy tree mixes partially and fully
//! evaluated edges; the eager tree holds only fully evaluated ones.

use std::path::PathBuf;

use kinolazy::bench::{run_plan, write_plan_artifacts};
use kinolazy::edge_eval::EvalStatus;
use kinolazy::planner::PlannerKind;
use kinolazy::scenario::load_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .ok_or("usage: search_tree <scenario.json> [out-dir]")?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "trees".into()));
    let scenario = load_scenario(&path)?;
    for kind in [PlannerKind::Lazy, PlannerKind::Eager] {
        let run = run_plan(&scenario, kind)?;
        let dir = out.join(kind.name());
        write_plan_artifacts(&dir, &scenario, &run)?;
        let edges = run.result.tree_edges();
        let partial = edges
            .iter()
            .filter(|e| e.eval_status == EvalStatus::Partial)
            .count();
        let infeasible = edges.iter().filter(|e| e.cost.is_none()).count();
        println!(
            "{:>5}: {} edges ({} partial, {} full, {} infeasible), {} on the path, cost {:.4} -> {}",
            kind.name(),
            edges.len(),
            partial,
            edges.len() - partial,
            infeasible,
            run.result.trajectory.len(),
            run.result.cost,
            dir.display()
        );
    }
    Ok(())
}
