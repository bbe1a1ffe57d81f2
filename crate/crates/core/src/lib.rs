//! Kinodynamic motion planning with lazy A* over motion primitives.
//!
//! The vehicle is a chain of integrators in 3D (position plus `n - 1`
//! derivatives, control on the `n`-th). Motion primitives apply a constant
//! control sample for a fixed duration. Obstacles live in a voxel grid with
//! an exact Euclidean signed distance field. Two planners search the
//! primitive graph with the same cost model:
//!
//! - **lazy**: children are scored from their endpoints only; the full
//!   edge check runs when a node reaches the top of the open list.
//! - **eager** (motion-primitive A*): every generated edge is fully checked
//!   immediately.
//!
//! ```
//! use kinolazy::prelude::*;
//!
//! let obstacles = ObstacleSet::new(
//!     Aabb::new(Vec3::zeros(), Vec3::new(10.0, 10.0, 4.0)),
//!     vec![Aabb::new(Vec3::new(4.0, 0.0, 0.0), Vec3::new(5.0, 6.0, 4.0))],
//! )
//! .unwrap();
//! let world = World::build(obstacles, 0.25).unwrap();
//! let controls = generate_control_set(Strategy::Uniform, 27, 1.0, 0).unwrap();
//! let (weights, limits) = (CostWeights::default(), DynamicLimits::default());
//! let planner = Planner::new(&world.field, &controls, &weights, &limits, SearchConfig::default());
//!
//! let start = State::at_rest(Vec3::new(1.0, 1.0, 2.0), 2).unwrap();
//! let goal = GoalRegion { center: Vec3::new(8.0, 2.0, 2.0), radius: 0.75 };
//! let plan = planner.plan_lazy(&start, &goal).unwrap();
//! assert_eq!(plan.status, PlanStatus::ReachedGoal);
//! ```

// `!(x > 0.0)` is how the validators reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod control_sampling;
pub mod dynamics;
pub mod edge_eval;
pub mod planner;
pub mod scenario;
pub mod world;

pub mod prelude {
    pub use crate::control_sampling::{generate_control_set, ControlSet, Strategy};
    pub use crate::dynamics::{ControlInput, DynamicLimits, State, Vec3};
    pub use crate::edge_eval::{CostWeights, EvalStatus, MotionEdge};
    pub use crate::planner::{
        GoalRegion, PlanResult, PlanStatus, Planner, PlannerKind, SearchConfig,
    };
    pub use crate::scenario::{load_scenario, Scenario};
    pub use crate::world::{Aabb, DistanceField, ObstacleSet, World};
}
