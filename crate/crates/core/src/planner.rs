//! Best-first search over motion primitives, in two flavours.
//!
//! [`Planner::plan_lazy`] expands children with a cheap endpoint-only cost
//! and defers the full edge check until a node reaches the top of the open
//! list. A node is goal-tested or expanded only once its incoming edge is
//! fully evaluated; otherwise it is evaluated, its cost raised, and it goes
//! back into the queue (or is dropped if the edge collides).
//!
//! [`Planner::plan_eager`] fully evaluates every edge as it is generated.
//! Both share the dedup policy (a state bin is claimed when a collision-free
//! endpoint is first generated, whatever its edge turns out to be), the
//! tie-breaking, and the budget, so their expansion order is identical and
//! they return the same trajectory.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::control_sampling::ControlSet;
use crate::dynamics::{within_dynamic_limits, DynamicLimits, State, Vec3};
use crate::edge_eval::{
    discretize_edge, heuristic, CostWeights, EdgeCost, EdgeError, EdgeSampler, EvalStatus,
    MotionEdge,
};
use crate::world::{is_position_free, DistanceField, GridGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("start state is in collision or out of bounds")]
    StartInCollision,
    #[error("start state violates the dynamic limits")]
    StartOutsideLimits,
    #[error("goal radius must be positive, got {0}")]
    InvalidGoal(f64),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("parent chain of node {0} does not reach the root")]
    BrokenParentChain(usize),
    #[error(transparent)]
    Edge(#[from] EdgeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Lazy,
    Eager,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::Lazy => "lazy",
            PlannerKind::Eager => "eager",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lazy" => Ok(PlannerKind::Lazy),
            "eager" => Ok(PlannerKind::Eager),
            other => Err(format!(
                "unknown planner `{other}` (expected lazy or eager)"
            )),
        }
    }
}

/// Position ball around `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalRegion {
    pub center: Vec3,
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub max_pops: Option<usize>,
    pub max_millis: Option<u64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_pops: Some(500_000),
            max_millis: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Primitive duration in seconds.
    pub tau: f64,
    /// Requested spacing of intermediate edge samples in seconds.
    pub delta_check: f64,
    pub velocity_bins: usize,
    /// Visited-set pruning on discretized state keys.
    pub dedup: bool,
    /// Nodes at this depth are not expanded.
    pub max_depth: Option<usize>,
    pub budget: Budget,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            delta_check: 0.125,
            velocity_bins: 10,
            dedup: true,
            max_depth: None,
            budget: Budget::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    ReachedGoal,
    BestEffort,
    Failure,
}

impl PlanStatus {
    pub fn name(&self) -> &'static str {
        match self {
            PlanStatus::ReachedGoal => "reached_goal",
            PlanStatus::BestEffort => "best_effort",
            PlanStatus::Failure => "failure",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    /// Wall time of the search in milliseconds (T).
    pub planning_ms: f64,
    /// Open-list pops, re-pops included (N).
    pub pops: usize,
    pub expansions: usize,
    /// Closest approach of the returned trajectory to the goal centre (D).
    pub distance_to_goal: f64,
    pub partial_evals: usize,
    pub full_evals: usize,
    pub generated_edges: usize,
}

/// Incoming edge of a search node, stored compactly; the sample chain is
/// rebuilt from the parent state when needed.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub control_index: usize,
    pub status: EvalStatus,
    pub cost: EdgeCost,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub id: usize,
    pub state: State,
    pub g: f64,
    pub h: f64,
    /// Equal to `id` for the root.
    pub parent: usize,
    /// `None` for the root, whose virtual edge counts as fully evaluated.
    pub edge: Option<EdgeRecord>,
    pub depth: usize,
    pub expanded: bool,
    /// Edge turned out infeasible; never (re)queued.
    pub pruned: bool,
    version: u32,
}

impl SearchNode {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }

    pub fn is_root(&self) -> bool {
        self.parent == self.id
    }

    pub fn edge_status(&self) -> EvalStatus {
        self.edge.as_ref().map_or(EvalStatus::Full, |e| e.status)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub status: PlanStatus,
    pub planner: PlannerKind,
    pub trajectory: Vec<MotionEdge>,
    /// Sum of fully evaluated edge costs along the trajectory.
    pub cost: f64,
    pub metrics: PlanMetrics,
    /// Every node the search created, in creation order.
    pub nodes: Vec<SearchNode>,
}

impl PlanResult {
    pub fn end_state(&self) -> Option<&State> {
        self.trajectory.last().map(|e| e.end())
    }

    /// Copy with the wall-time field cleared, for determinism checks.
    pub fn without_timing(&self) -> PlanResult {
        let mut out = self.clone();
        out.metrics.planning_ms = 0.0;
        out
    }
}

/// Discretized state used by the visited set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateKey(pub SmallVec<[i64; 12]>);

/// Position binned at the grid resolution, each higher derivative `k` binned
/// at `cap_k / velocity_bins`.
pub fn state_key(
    s: &State,
    geometry: &GridGeometry,
    limits: &DynamicLimits,
    velocity_bins: usize,
) -> StateKey {
    let mut key = SmallVec::new();
    let p = s.position();
    for a in 0..3 {
        key.push(floor_i64((p[a] - geometry.origin[a]) / geometry.resolution));
    }
    let bins = velocity_bins.max(1) as f64;
    for k in 1..s.order() {
        let width = limits.cap(k).unwrap_or(1.0) / bins;
        let d = s.derivative(k);
        for a in 0..3 {
            key.push(floor_i64(d[a] / width));
        }
    }
    StateKey(key)
}

/// `x.floor() as i64` without the libm call.
#[inline]
fn floor_i64(x: f64) -> i64 {
    let t = x as i64;
    t - ((t as f64) > x) as i64
}

#[derive(Debug)]
struct OpenEntry {
    f: f64,
    h: f64,
    id: usize,
    version: u32,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap; invert so the smallest (f, h, id) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Priority queue ordered by `f`, then smaller `h`, then node creation order.
#[derive(Debug, Default)]
pub struct OpenList {
    heap: BinaryHeap<OpenEntry>,
}

impl OpenList {
    fn entry(node: &SearchNode) -> OpenEntry {
        OpenEntry {
            f: node.f(),
            h: node.h,
            id: node.id,
            version: node.version,
        }
    }

    fn push(&mut self, node: &SearchNode) {
        self.heap.push(Self::entry(node));
    }

    /// Queue `node`, unless it would be the very next pop anyway; then hand
    /// its entry back instead of cycling it through the heap.
    fn push_or_take(&mut self, node: &SearchNode) -> Option<OpenEntry> {
        let entry = Self::entry(node);
        if self.heap.peek().is_none_or(|top| entry > *top) {
            Some(entry)
        } else {
            self.heap.push(entry);
            None
        }
    }

    fn pop(&mut self) -> Option<OpenEntry> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Edges from the root to `id`, root first.
pub fn reconstruct_trajectory(
    nodes: &[SearchNode],
    id: usize,
    controls: &ControlSet,
    tau: f64,
    delta_check: f64,
) -> Result<Vec<MotionEdge>, PlanError> {
    let mut chain = Vec::new();
    let mut cur = id;
    while nodes[cur].parent != cur {
        if chain.len() > nodes.len() {
            return Err(PlanError::BrokenParentChain(id));
        }
        chain.push(cur);
        cur = nodes[cur].parent;
    }
    chain.reverse();
    chain
        .into_iter()
        .map(|nid| {
            let node = &nodes[nid];
            let rec = node.edge.as_ref().ok_or(PlanError::BrokenParentChain(id))?;
            let parent = &nodes[node.parent];
            let mut edge = discretize_edge(
                &parent.state,
                &controls.samples[rec.control_index],
                tau,
                delta_check,
            )?;
            edge.eval_status = rec.status;
            edge.cost = Some(rec.cost);
            Ok(edge)
        })
        .collect()
}

pub struct Planner<'a> {
    pub field: &'a DistanceField,
    pub controls: &'a ControlSet,
    pub weights: &'a CostWeights,
    pub limits: &'a DynamicLimits,
    pub config: SearchConfig,
}

struct Search {
    nodes: Vec<SearchNode>,
    open: OpenList,
    visited: FxHashSet<StateKey>,
    metrics: PlanMetrics,
    best: usize,
}

impl<'a> Planner<'a> {
    pub fn new(
        field: &'a DistanceField,
        controls: &'a ControlSet,
        weights: &'a CostWeights,
        limits: &'a DynamicLimits,
        config: SearchConfig,
    ) -> Self {
        Self {
            field,
            controls,
            weights,
            limits,
            config,
        }
    }

    pub fn plan_lazy(&self, start: &State, goal: &GoalRegion) -> Result<PlanResult, PlanError> {
        self.plan(PlannerKind::Lazy, start, goal)
    }

    pub fn plan_eager(&self, start: &State, goal: &GoalRegion) -> Result<PlanResult, PlanError> {
        self.plan(PlannerKind::Eager, start, goal)
    }

    /// One primitive per control sample, minus those whose endpoint is out of
    /// bounds, in collision, or outside the dynamic limits.
    pub fn find_neighbors(&self, s: &State) -> Vec<(usize, MotionEdge)> {
        let sampler = EdgeSampler::new(s.order(), self.config.tau, self.config.delta_check)
            .expect("spacing validated before search");
        self.neighbor_ends(&sampler, s)
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(i, _)| {
                let edge = discretize_edge(
                    s,
                    &self.controls.samples[i],
                    self.config.tau,
                    self.config.delta_check,
                )
                .expect("spacing validated before search");
                (i, edge)
            })
            .collect()
    }

    /// Control index and end state of each admissible primitive, in control order.
    fn neighbor_ends<'s>(
        &'s self,
        sampler: &'s EdgeSampler,
        s: &'s State,
    ) -> impl Iterator<Item = (usize, State)> + 's {
        self.controls
            .samples
            .iter()
            .enumerate()
            .filter_map(move |(i, u)| {
                let end = sampler.end(s, u);
                (is_position_free(self.field, end.position(), 0.0)
                    && within_dynamic_limits(&end, self.limits))
                .then_some((i, end))
            })
    }

    fn validate(&self, start: &State, goal: &GoalRegion) -> Result<(), PlanError> {
        let c = &self.config;
        if !(c.tau > 0.0 && c.tau.is_finite()) {
            return Err(PlanError::InvalidConfig(format!(
                "tau must be > 0, got {}",
                c.tau
            )));
        }
        if !(c.delta_check > 0.0) || c.delta_check > c.tau * (1.0 + 1e-12) {
            return Err(PlanError::InvalidConfig(format!(
                "delta_check must be in (0, tau], got {}",
                c.delta_check
            )));
        }
        if c.velocity_bins == 0 {
            return Err(PlanError::InvalidConfig(
                "velocity_bins must be >= 1".into(),
            ));
        }
        if !self.weights.is_valid() {
            return Err(PlanError::InvalidConfig(
                "cost weights must be >= 0 and heuristic_weight >= 1".into(),
            ));
        }
        self.limits
            .validate(start.order())
            .map_err(|e| PlanError::InvalidConfig(e.to_string()))?;
        if self
            .controls
            .samples
            .iter()
            .any(|u| !u.within(self.limits.u_max))
        {
            return Err(PlanError::InvalidConfig(
                "control sample exceeds u_max".into(),
            ));
        }
        if !(goal.radius > 0.0 && goal.radius.is_finite()) {
            return Err(PlanError::InvalidGoal(goal.radius));
        }
        if !is_position_free(self.field, start.position(), 0.0) {
            return Err(PlanError::StartInCollision);
        }
        if !within_dynamic_limits(start, self.limits) {
            return Err(PlanError::StartOutsideLimits);
        }
        Ok(())
    }

    pub fn plan(
        &self,
        kind: PlannerKind,
        start: &State,
        goal: &GoalRegion,
    ) -> Result<PlanResult, PlanError> {
        self.validate(start, goal)?;
        let clock = Instant::now();
        let sampler = EdgeSampler::new(start.order(), self.config.tau, self.config.delta_check)?;
        let deadline = self.config.budget.max_millis;
        let max_pops = self.config.budget.max_pops.unwrap_or(usize::MAX);

        let root = SearchNode {
            id: 0,
            state: start.clone(),
            g: 0.0,
            h: heuristic(start, &goal.center, goal.radius, self.weights),
            parent: 0,
            edge: None,
            depth: 0,
            expanded: false,
            pruned: false,
            version: 0,
        };
        let mut search = Search {
            nodes: vec![root],
            open: OpenList::default(),
            visited: FxHashSet::default(),
            metrics: PlanMetrics::default(),
            best: 0,
        };
        search.open.push(&search.nodes[0]);

        let mut reached = None;
        let mut next = None;
        while let Some(entry) = next.take().or_else(|| search.open.pop()) {
            let node = &search.nodes[entry.id];
            if entry.version != node.version || node.pruned {
                continue;
            }
            if search.metrics.pops >= max_pops {
                break;
            }
            if let Some(ms) = deadline {
                if search.metrics.pops.is_multiple_of(64)
                    && clock.elapsed().as_millis() as u64 >= ms
                {
                    break;
                }
            }
            search.metrics.pops += 1;

            if node.edge_status() == EvalStatus::Full {
                if goal.contains(node.state.position()) {
                    reached = Some(entry.id);
                    break;
                }
                self.expand(kind, &sampler, &mut search, entry.id, goal);
            } else {
                debug_assert_eq!(kind, PlannerKind::Lazy);
                next = self.complete_evaluation(&sampler, &mut search, entry.id)?;
            }
        }

        let (status, target) = match reached {
            Some(id) => (PlanStatus::ReachedGoal, id),
            None if search.best == 0 => (PlanStatus::Failure, 0),
            None => (PlanStatus::BestEffort, search.best),
        };
        let trajectory = reconstruct_trajectory(
            &search.nodes,
            target,
            self.controls,
            self.config.tau,
            self.config.delta_check,
        )?;
        let cost = search.nodes[target].g;
        let distance_to_goal = std::iter::once(start)
            .chain(trajectory.iter().map(|e| e.end()))
            .map(|s| (s.position() - goal.center).norm())
            .fold(f64::INFINITY, f64::min);
        search.metrics.distance_to_goal = distance_to_goal;
        search.metrics.planning_ms = clock.elapsed().as_secs_f64() * 1e3;
        Ok(PlanResult {
            status,
            planner: kind,
            trajectory,
            cost,
            metrics: search.metrics,
            nodes: search.nodes,
        })
    }

    fn expand(
        &self,
        kind: PlannerKind,
        sampler: &EdgeSampler,
        search: &mut Search,
        id: usize,
        goal: &GoalRegion,
    ) {
        debug_assert_eq!(search.nodes[id].edge_status(), EvalStatus::Full);
        search.nodes[id].expanded = true;
        search.metrics.expansions += 1;
        let (parent_g, depth, h) = {
            let n = &search.nodes[id];
            (n.g, n.depth, n.h)
        };
        // Best-effort target: first expanded node with the smallest h.
        if id != 0 && h < search.nodes[search.best].h {
            search.best = id;
        }
        if self.config.max_depth.is_some_and(|d| depth >= d) {
            return;
        }
        let parent_state = search.nodes[id].state.clone();
        for (control_index, end) in self.neighbor_ends(sampler, &parent_state) {
            if self.config.dedup {
                let key = state_key(
                    &end,
                    &self.field.geometry,
                    self.limits,
                    self.config.velocity_bins,
                );
                if !search.visited.insert(key) {
                    continue;
                }
            }
            search.metrics.generated_edges += 1;
            let u = &self.controls.samples[control_index];
            let cost = match kind {
                PlannerKind::Lazy => {
                    search.metrics.partial_evals += 1;
                    sampler.partial_cost(&parent_state, &end, u, self.field, self.weights)
                }
                PlannerKind::Eager => {
                    search.metrics.full_evals += 1;
                    sampler.full_cost(&parent_state, u, self.field, self.weights, self.limits)
                }
            };
            let child = SearchNode {
                id: search.nodes.len(),
                h: heuristic(&end, &goal.center, goal.radius, self.weights),
                state: end,
                g: parent_g + cost.total,
                parent: id,
                edge: Some(EdgeRecord {
                    control_index,
                    status: cost.level,
                    cost,
                }),
                depth: depth + 1,
                expanded: false,
                pruned: !cost.is_feasible(),
                version: 0,
            };
            if !child.pruned {
                search.open.push(&child);
            }
            search.nodes.push(child);
        }
    }

    /// Lazy re-pop: run the full check on the incoming edge, raise the cost,
    /// and requeue unless the edge is infeasible. Returns the entry when the
    /// node is still at the front of the queue.
    fn complete_evaluation(
        &self,
        sampler: &EdgeSampler,
        search: &mut Search,
        id: usize,
    ) -> Result<Option<OpenEntry>, PlanError> {
        let parent = search.nodes[id].parent;
        let rec = search.nodes[id]
            .edge
            .clone()
            .ok_or(PlanError::BrokenParentChain(id))?;
        let control_index = rec.control_index;
        search.metrics.full_evals += 1;
        let cost = sampler.complete_cost(
            &rec.cost,
            &search.nodes[parent].state,
            &self.controls.samples[control_index],
            self.field,
            self.weights,
            self.limits,
        );
        let parent_g = search.nodes[parent].g;
        let node = &mut search.nodes[id];
        node.edge = Some(EdgeRecord {
            control_index,
            status: EvalStatus::Full,
            cost,
        });
        node.g = parent_g + cost.total;
        node.version += 1;
        if cost.is_feasible() {
            Ok(search.open.push_or_take(node))
        } else {
            node.pruned = true;
            Ok(None)
        }
    }
}

/// One search-tree edge, as exported for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub id: usize,
    pub parent: usize,
    /// Flattened parent state `[px, py, pz, vx, vy, vz, ...]`.
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub eval_status: EvalStatus,
    /// `None` when the edge is infeasible.
    pub cost: Option<f64>,
    pub expanded: bool,
}

impl PlanResult {
    pub fn tree_edges(&self) -> Vec<TreeEdge> {
        self.nodes
            .iter()
            .filter(|n| !n.is_root())
            .map(|n| {
                let rec = n.edge.as_ref().expect("non-root node has an edge");
                TreeEdge {
                    id: n.id,
                    parent: n.parent,
                    start: self.nodes[n.parent].state.to_flat(),
                    end: n.state.to_flat(),
                    eval_status: rec.status,
                    cost: rec.cost.is_feasible().then_some(rec.cost.total),
                    expanded: n.expanded,
                }
            })
            .collect()
    }
}
