//! Lazy vs eager on a batch of seeded random clutter worlds.
//!
//! ```text
//! cargo run --release -p kinolazy --example compare_planners -- 20 [strategy] [M]
//! ```

use kinolazy::planner::{PlanStatus, Planner, PlannerKind};
use kinolazy::scenario::{generate_scenario, GeneratorConfig};

fn main() {
    let count: u64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(10);
    let mut cfg = GeneratorConfig::default();
    if let Some(strategy) = std::env::args().nth(2) {
        cfg.sampler.strategy = strategy
            .parse()
            .expect("strategy is normal, uniform or random");
    }
    if let Some(m) = std::env::args().nth(3) {
        cfg.sampler.m = m.parse().expect("M is a positive integer");
    }
    println!(
        "{:>4} {:>6} {:>13} {:>10} {:>10} {:>8} {:>8} {:>8} {:>8} {:>9}",
        "seed",
        "occ",
        "status",
        "cost",
        "T_lazy",
        "T_eager",
        "N_lazy",
        "N_eager",
        "full_l",
        "full_e"
    );
    let (mut t_lazy, mut t_eager) = (0.0, 0.0);
    for seed in 0..count {
        let scenario = generate_scenario(&format!("random_{seed:03}"), seed, &cfg);
        let world = scenario.build_world().expect("generated scenario is valid");
        let controls = scenario.control_set().expect("valid sampler");
        let start = scenario.start_state().expect("valid start");
        let planner = Planner::new(
            &world.field,
            &controls,
            &scenario.weights,
            &scenario.limits,
            scenario.search_config(),
        );
        let lazy = planner
            .plan(PlannerKind::Lazy, &start, &scenario.goal)
            .unwrap();
        let eager = planner
            .plan(PlannerKind::Eager, &start, &scenario.goal)
            .unwrap();
        t_lazy += lazy.metrics.planning_ms;
        t_eager += eager.metrics.planning_ms;
        let same = lazy.status == eager.status && lazy.cost == eager.cost;
        println!(
            "{:>4} {:>6.3} {:>13} {:>10.4} {:>10.3} {:>8.3} {:>8} {:>8} {:>8} {:>9}{}",
            seed,
            world.grid.occupied_fraction(),
            lazy.status.name(),
            lazy.cost,
            lazy.metrics.planning_ms,
            eager.metrics.planning_ms,
            lazy.metrics.pops,
            eager.metrics.pops,
            lazy.metrics.full_evals,
            eager.metrics.full_evals,
            if same { "" } else { "  MISMATCH" }
        );
        if lazy.status == PlanStatus::ReachedGoal {
            assert_eq!(lazy.trajectory, eager.trajectory);
        }
    }
    println!(
        "mean T: lazy {:.3} ms, eager {:.3} ms",
        t_lazy / count as f64,
        t_eager / count as f64
    );
}
