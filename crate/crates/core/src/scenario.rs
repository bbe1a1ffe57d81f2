//! Scenario files: a JSON document carrying the map, start, goal, limits,
//! cost weights, sampler and search budget. Every optional field gets its
//! default on load, so a loaded scenario saves back fully explicit.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::control_sampling::{generate_control_set, ControlSet, Strategy};
use crate::dynamics::{within_dynamic_limits, DynamicLimits, State, Vec3};
use crate::edge_eval::CostWeights;
use crate::planner::{Budget, GoalRegion, SearchConfig};
use crate::world::{
    rasterize, Aabb, GridGeometry, ObstacleSet, World, WorldError, DEFAULT_VOXEL_BUDGET,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("start in collision")]
    StartInCollision,
    #[error(transparent)]
    World(#[from] WorldError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn default_resolution() -> f64 {
    0.25
}

fn default_order() -> usize {
    2
}

fn default_velocity_bins() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub position: Vec3,
    /// Velocity, acceleration, ... up to `order - 1`; missing ones are zero.
    #[serde(default)]
    pub derivatives: Vec<Vec3>,
    #[serde(default = "default_order")]
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub m: usize,
    pub seed: u64,
    pub tau: f64,
    /// Defaults to `tau / 8`.
    pub delta_check: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Uniform,
            m: 27,
            seed: 0,
            tau: 1.0,
            delta_check: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub bounds: Aabb,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub obstacles: Vec<Aabb>,
    pub start: StartSpec,
    pub goal: GoalRegion,
    #[serde(default)]
    pub limits: DynamicLimits,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default = "default_velocity_bins")]
    pub velocity_bins: usize,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let mut s: Scenario = serde_json::from_str(text)?;
        s.materialize();
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Fill every default that depends on other fields.
    pub fn materialize(&mut self) {
        if self.start.derivatives.len() + 1 < self.start.order {
            self.start
                .derivatives
                .resize(self.start.order - 1, Vec3::zeros());
        }
        if self.sampler.delta_check.is_none() {
            self.sampler.delta_check = Some(self.sampler.tau / 8.0);
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(invalid(
                "version",
                format!("expected {SCENARIO_VERSION}, got {}", self.version),
            ));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(invalid("resolution", "must be positive"));
        }
        self.obstacle_set()?;
        let n = self.start.order;
        if n < 2 {
            return Err(invalid("start.order", "must be >= 2"));
        }
        if self.start.derivatives.len() != n - 1 {
            return Err(invalid(
                "start.derivatives",
                format!("expected at most {} entries for order {n}", n - 1),
            ));
        }
        self.limits
            .validate(n)
            .map_err(|e| invalid("limits", e.to_string()))?;
        let start = self
            .start_state()
            .map_err(|e| invalid("start", e.to_string()))?;
        if !within_dynamic_limits(&start, &self.limits) {
            return Err(invalid("start", "violates dynamic limits"));
        }
        if !self.bounds.contains(&self.goal.center) {
            return Err(invalid("goal.center", "outside bounds"));
        }
        if !(self.goal.radius > 0.0 && self.goal.radius.is_finite()) {
            return Err(invalid("goal.radius", "must be positive"));
        }
        if !self.weights.is_valid() {
            return Err(invalid(
                "weights",
                "weights must be >= 0 and heuristic_weight >= 1",
            ));
        }
        let sp = &self.sampler;
        if !(sp.tau > 0.0 && sp.tau.is_finite()) {
            return Err(invalid("sampler.tau", "must be positive"));
        }
        let dc = sp.delta_check.unwrap_or(sp.tau / 8.0);
        if !(dc > 0.0) || dc > sp.tau {
            return Err(invalid("sampler.delta_check", "must be in (0, tau]"));
        }
        self.control_set()
            .map_err(|e| invalid("sampler", e.to_string()))?;
        if self.velocity_bins == 0 {
            return Err(invalid("velocity_bins", "must be >= 1"));
        }
        if self.start_in_collision()? {
            return Err(ScenarioError::StartInCollision);
        }
        Ok(())
    }

    /// Matches the planner's view: the start voxel's centre is inside a box,
    /// or the start is outside the bounds.
    fn start_in_collision(&self) -> Result<bool, ScenarioError> {
        let p = self.start.position;
        if !self.bounds.contains(&p) {
            return Ok(true);
        }
        let grid = rasterize(
            &ObstacleSet::new(self.bounds, vec![])?,
            self.resolution,
            DEFAULT_VOXEL_BUDGET,
        )?;
        let geometry: GridGeometry = grid.geometry;
        let Some([i, j, k]) = geometry.voxel_of(&p) else {
            return Ok(true);
        };
        let c = geometry.center(i, j, k);
        Ok(self.obstacles.iter().any(|b| b.contains(&c)))
    }

    pub fn obstacle_set(&self) -> Result<ObstacleSet, ScenarioError> {
        Ok(ObstacleSet::new(self.bounds, self.obstacles.clone())?)
    }

    pub fn build_world(&self) -> Result<World, ScenarioError> {
        Ok(World::build(self.obstacle_set()?, self.resolution)?)
    }

    pub fn start_state(&self) -> Result<State, crate::dynamics::DynamicsError> {
        let mut derivs = vec![self.start.position];
        derivs.extend(self.start.derivatives.iter().copied());
        derivs.resize(self.start.order.max(2), Vec3::zeros());
        State::new(derivs)
    }

    pub fn control_set(&self) -> Result<ControlSet, crate::control_sampling::SamplingError> {
        generate_control_set(
            self.sampler.strategy,
            self.sampler.m,
            self.limits.u_max,
            self.sampler.seed,
        )
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            tau: self.sampler.tau,
            delta_check: self.sampler.delta_check.unwrap_or(self.sampler.tau / 8.0),
            velocity_bins: self.velocity_bins,
            dedup: true,
            max_depth: None,
            budget: self.budget,
        }
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

/// Parameters of the seeded clutter generator.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub size: Vec3,
    pub resolution: f64,
    /// Target occupied-volume fraction, drawn uniformly from this range.
    pub occupancy: (f64, f64),
    pub start: Vec3,
    pub goal: Vec3,
    pub goal_radius: f64,
    /// Boxes never come closer than this to the start or goal.
    pub keep_out: f64,
    /// Horizontal box edge length range in meters.
    pub footprint: (f64, f64),
    pub limits: DynamicLimits,
    pub sampler: SamplerConfig,
    pub budget: Budget,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            size: Vec3::new(8.0, 8.0, 3.0),
            resolution: 0.25,
            occupancy: (0.1, 0.3),
            start: Vec3::new(1.0, 1.0, 1.5),
            goal: Vec3::new(7.0, 7.0, 1.5),
            goal_radius: 0.75,
            keep_out: 0.9,
            footprint: (0.5, 1.75),
            limits: DynamicLimits::default(),
            sampler: SamplerConfig::default(),
            budget: Budget {
                max_pops: Some(2_000_000),
                max_millis: None,
            },
        }
    }
}

fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let gap = (b.min[a] - p[a]).max(p[a] - b.max[a]).max(0.0);
        d2 += gap * gap;
    }
    d2.sqrt()
}

/// Random box clutter whose rasterized occupancy lands in the configured
/// range. Deterministic in `seed`.
pub fn generate_scenario(name: &str, seed: u64, cfg: &GeneratorConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bounds = Aabb::new(Vec3::zeros(), cfg.size);
    let (lo, hi) = cfg.occupancy;
    let target = rng.random_range(lo..=hi);
    let mut boxes: Vec<Aabb> = Vec::new();
    let mut fraction = 0.0;
    let snap = |x: f64| (x / cfg.resolution).round() * cfg.resolution;
    for _ in 0..2000 {
        if fraction >= target {
            break;
        }
        let wx = snap(rng.random_range(cfg.footprint.0..=cfg.footprint.1)).max(cfg.resolution);
        let wy = snap(rng.random_range(cfg.footprint.0..=cfg.footprint.1)).max(cfg.resolution);
        // floor-standing pillars of random height, or full-height walls
        let height = if rng.random_bool(0.5) {
            cfg.size.z
        } else {
            snap(rng.random_range(0.25 * cfg.size.z..=cfg.size.z)).max(cfg.resolution)
        };
        let x0 = snap(rng.random_range(0.0..=(cfg.size.x - wx).max(0.0)));
        let y0 = snap(rng.random_range(0.0..=(cfg.size.y - wy).max(0.0)));
        let candidate = Aabb::new(
            Vec3::new(x0, y0, 0.0),
            Vec3::new(
                (x0 + wx).min(cfg.size.x),
                (y0 + wy).min(cfg.size.y),
                height.min(cfg.size.z),
            ),
        );
        if candidate.is_degenerate()
            || box_distance(&candidate, &cfg.start) < cfg.keep_out
            || box_distance(&candidate, &cfg.goal) < cfg.keep_out
        {
            continue;
        }
        boxes.push(candidate);
        let obs = ObstacleSet {
            bounds,
            boxes: boxes.clone(),
        };
        let f = rasterize(&obs, cfg.resolution, DEFAULT_VOXEL_BUDGET)
            .expect("generated boxes stay inside bounds")
            .occupied_fraction();
        if f > hi {
            boxes.pop();
            continue;
        }
        fraction = f;
    }
    let mut s = Scenario {
        version: SCENARIO_VERSION,
        name: name.to_string(),
        bounds,
        resolution: cfg.resolution,
        obstacles: boxes,
        start: StartSpec {
            position: cfg.start,
            derivatives: vec![],
            order: 2,
        },
        goal: GoalRegion {
            center: cfg.goal,
            radius: cfg.goal_radius,
        },
        limits: cfg.limits.clone(),
        weights: CostWeights::default(),
        sampler: cfg.sampler.clone(),
        budget: cfg.budget,
        velocity_bins: default_velocity_bins(),
    };
    s.materialize();
    s
}
