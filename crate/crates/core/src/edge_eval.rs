//! Edge cost model: path length, heuristic, control effort and obstacle
//! proximity, plus the two evaluation levels for a motion primitive.
//!
//! A partial evaluation looks at the two endpoints only; a full evaluation
//! looks at every intermediate sample and also checks collisions and dynamic
//! limits there. Path-length and control terms are identical at both levels
//! and the obstacle term is a maximum over the evaluated samples, so a full
//! evaluation can never be cheaper than a partial one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    propagate_exact, within_dynamic_limits, ControlInput, DynamicLimits, Propagator, State, Vec3,
};
use crate::world::{query_distance, DistanceField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeError {
    #[error("delta_check must satisfy 0 < delta_check <= tau (delta_check = {delta_check}, tau = {tau})")]
    InvalidSpacing { delta_check: f64, tau: f64 },
    #[error("edge is already fully evaluated")]
    AlreadyFull,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalStatus {
    Unevaluated,
    Partial,
    Full,
}

impl EvalStatus {
    pub fn name(&self) -> &'static str {
        match self {
            EvalStatus::Unevaluated => "unevaluated",
            EvalStatus::Partial => "partial",
            EvalStatus::Full => "full",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub w_dist: f64,
    pub w_ctrl: f64,
    pub w_obs: f64,
    pub d_safe: f64,
    pub heuristic_weight: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_dist: 1.0,
            w_ctrl: 0.1,
            w_obs: 1.0,
            d_safe: 0.5,
            heuristic_weight: 1.0,
        }
    }
}

impl CostWeights {
    pub fn is_valid(&self) -> bool {
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        nonneg(self.w_dist)
            && nonneg(self.w_ctrl)
            && nonneg(self.w_obs)
            && nonneg(self.d_safe)
            && self.heuristic_weight >= 1.0
            && self.heuristic_weight.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCost {
    /// `w_dist` times the chord length through the samples.
    pub g_inc: f64,
    pub ctrl: f64,
    pub obs: f64,
    pub total: f64,
    pub level: EvalStatus,
}

impl EdgeCost {
    pub fn is_feasible(&self) -> bool {
        self.total.is_finite()
    }
}

/// One motion primitive with its evaluation state.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionEdge {
    pub start: State,
    pub control: ControlInput,
    pub tau: f64,
    /// Evenly spaced in time, both endpoints included.
    pub samples: Vec<State>,
    pub eval_status: EvalStatus,
    pub cost: Option<EdgeCost>,
}

impl MotionEdge {
    pub fn end(&self) -> &State {
        self.samples.last().expect("edge has at least two samples")
    }

    /// Sample times, matching `samples`.
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.samples.len() - 1;
        (0..=k).map(move |i| sample_time(self.tau, i, k))
    }

    /// Sum of straight segments through consecutive sample positions.
    pub fn arclength(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].position() - w[0].position()).norm())
            .sum()
    }
}

/// Number of segments for a requested spacing; the spacing is then
/// stretched so the last sample lands exactly on `tau`.
pub fn segment_count(tau: f64, delta_check: f64) -> usize {
    let ratio = tau / delta_check;
    // tolerate ratios like 4.000000000000001 from binary rounding
    let k = (ratio - 1e-9).ceil();
    (k as usize).max(1)
}

/// Time of sample `i` out of `k` segments; the last one is exactly `tau`.
#[inline]
pub fn sample_time(tau: f64, i: usize, k: usize) -> f64 {
    if i == k {
        tau
    } else {
        tau * i as f64 / k as f64
    }
}

fn check_spacing(tau: f64, delta_check: f64) -> Result<(), EdgeError> {
    if !(delta_check > 0.0) || !(tau > 0.0) || delta_check > tau * (1.0 + 1e-12) {
        return Err(EdgeError::InvalidSpacing { delta_check, tau });
    }
    Ok(())
}

pub fn discretize_edge(
    start: &State,
    u: &ControlInput,
    tau: f64,
    delta_check: f64,
) -> Result<MotionEdge, EdgeError> {
    check_spacing(tau, delta_check)?;
    let k = segment_count(tau, delta_check);
    let mut samples = Vec::with_capacity(k + 1);
    samples.push(start.clone());
    for i in 1..=k {
        samples.push(propagate_exact(start, u, sample_time(tau, i, k)));
    }
    Ok(MotionEdge {
        start: start.clone(),
        control: *u,
        tau,
        samples,
        eval_status: EvalStatus::Unevaluated,
        cost: None,
    })
}

/// Scaled straight-line distance to the goal ball; zero inside it.
pub fn heuristic(s: &State, goal_center: &Vec3, goal_radius: f64, w: &CostWeights) -> f64 {
    let gap = ((s.position() - goal_center).norm() - goal_radius).max(0.0);
    w.heuristic_weight * w.w_dist * gap
}

pub fn control_cost(u: &ControlInput, tau: f64, w: &CostWeights) -> f64 {
    w.w_ctrl * u.l1_norm() * tau
}

/// Hinge penalty inside the `d_safe` band; `+inf` at or inside an obstacle.
pub fn obstacle_cost_at(f: &DistanceField, p: &Vec3, w: &CostWeights) -> f64 {
    let d = query_distance(f, p);
    if d <= 0.0 {
        return f64::INFINITY;
    }
    w.w_obs * (w.d_safe - d).max(0.0)
}

fn assemble(
    arclength: f64,
    u: &ControlInput,
    tau: f64,
    obs: f64,
    w: &CostWeights,
    level: EvalStatus,
) -> EdgeCost {
    let g_inc = w.w_dist * arclength;
    let ctrl = control_cost(u, tau, w);
    let total = if obs.is_finite() {
        g_inc + ctrl + obs
    } else {
        f64::INFINITY
    };
    EdgeCost {
        g_inc,
        ctrl,
        obs,
        total,
        level,
    }
}

/// Precomputed sample times for one primitive duration and spacing.
///
/// Evaluates edges without materializing a [`MotionEdge`]; every result is
/// bit-identical to discretizing with [`discretize_edge`] and calling
/// [`partially_evaluate`] or [`fully_evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSampler {
    tau: f64,
    /// One propagator per sample time after the start; the last is `tau`.
    steps: Vec<Propagator>,
}

impl EdgeSampler {
    pub fn new(order: usize, tau: f64, delta_check: f64) -> Result<Self, EdgeError> {
        check_spacing(tau, delta_check)?;
        let k = segment_count(tau, delta_check);
        let steps = (1..=k)
            .map(|i| Propagator::new(order, sample_time(tau, i, k)))
            .collect();
        Ok(Self { tau, steps })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn segments(&self) -> usize {
        self.steps.len()
    }

    pub fn end(&self, start: &State, u: &ControlInput) -> State {
        self.steps
            .last()
            .expect("at least one segment")
            .state(start, u)
    }

    /// Same value as [`MotionEdge::arclength`] on the discretized edge.
    pub fn chord_length(&self, start: &State, u: &ControlInput) -> f64 {
        let mut prev = *start.position();
        let mut len = 0.0;
        for step in &self.steps {
            let p = step.position(start, u);
            len += (p - prev).norm();
            prev = p;
        }
        len
    }

    pub fn partial_cost(
        &self,
        start: &State,
        end: &State,
        u: &ControlInput,
        f: &DistanceField,
        w: &CostWeights,
    ) -> EdgeCost {
        let obs =
            obstacle_cost_at(f, start.position(), w).max(obstacle_cost_at(f, end.position(), w));
        assemble(
            self.chord_length(start, u),
            u,
            self.tau,
            obs,
            w,
            EvalStatus::Partial,
        )
    }

    pub fn full_cost(
        &self,
        start: &State,
        u: &ControlInput,
        f: &DistanceField,
        w: &CostWeights,
        limits: &DynamicLimits,
    ) -> EdgeCost {
        let mut obs = sample_cost(start, f, w, limits);
        let mut prev = *start.position();
        let mut len = 0.0;
        if obs.is_finite() {
            for step in &self.steps {
                let s = step.state(start, u);
                let c = sample_cost(&s, f, w, limits);
                if !c.is_finite() {
                    obs = f64::INFINITY;
                    break;
                }
                obs = obs.max(c);
                len += (s.position() - prev).norm();
                prev = *s.position();
            }
        }
        if !obs.is_finite() {
            len = self.chord_length(start, u);
        }
        assemble(len, u, self.tau, obs, w, EvalStatus::Full)
    }

    /// Upgrade a partial cost of the same edge to a full one. The length and
    /// control terms carry over; only the samples are checked.
    pub fn complete_cost(
        &self,
        partial: &EdgeCost,
        start: &State,
        u: &ControlInput,
        f: &DistanceField,
        w: &CostWeights,
        limits: &DynamicLimits,
    ) -> EdgeCost {
        let mut obs = sample_cost(start, f, w, limits);
        if obs.is_finite() {
            for step in &self.steps {
                let c = sample_cost(&step.state(start, u), f, w, limits);
                if !c.is_finite() {
                    obs = f64::INFINITY;
                    break;
                }
                obs = obs.max(c);
            }
        }
        let total = if obs.is_finite() {
            partial.g_inc + partial.ctrl + obs
        } else {
            f64::INFINITY
        };
        EdgeCost {
            obs,
            total,
            level: EvalStatus::Full,
            ..*partial
        }
    }
}

#[inline]
fn sample_cost(s: &State, f: &DistanceField, w: &CostWeights, limits: &DynamicLimits) -> f64 {
    let c = obstacle_cost_at(f, s.position(), w);
    if c.is_finite() && within_dynamic_limits(s, limits) {
        c
    } else {
        f64::INFINITY
    }
}

/// Costs at the start and end samples only.
pub fn partially_evaluate(
    e: &mut MotionEdge,
    f: &DistanceField,
    w: &CostWeights,
) -> Result<EdgeCost, EdgeError> {
    if e.eval_status == EvalStatus::Full {
        return Err(EdgeError::AlreadyFull);
    }
    let obs =
        obstacle_cost_at(f, e.start.position(), w).max(obstacle_cost_at(f, e.end().position(), w));
    let cost = assemble(
        e.arclength(),
        &e.control,
        e.tau,
        obs,
        w,
        EvalStatus::Partial,
    );
    e.eval_status = EvalStatus::Partial;
    e.cost = Some(cost);
    Ok(cost)
}

/// Costs at every sample. Any sample in collision, out of bounds, or outside
/// the dynamic limits makes the edge infeasible (`total = +inf`).
pub fn fully_evaluate(
    e: &mut MotionEdge,
    f: &DistanceField,
    w: &CostWeights,
    limits: &DynamicLimits,
) -> EdgeCost {
    let mut obs = 0.0f64;
    for s in &e.samples {
        let c = sample_cost(s, f, w, limits);
        if !c.is_finite() {
            obs = f64::INFINITY;
            break;
        }
        obs = obs.max(c);
    }
    let cost = assemble(e.arclength(), &e.control, e.tau, obs, w, EvalStatus::Full);
    e.eval_status = EvalStatus::Full;
    e.cost = Some(cost);
    cost
}
