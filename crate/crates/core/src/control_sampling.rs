//! Discretized control sets and the two sampling-quality metrics: the
//! useful-sample ratio `alpha` and the mean nearest-neighbour spread `L` of
//! primitive endpoints.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{propagate_exact, ControlInput, State, Vec3};

/// Endpoint clustering radius used by `alpha` unless overridden.
pub const DEFAULT_USEFUL_THRESHOLD: f64 = 0.1;

/// Normal samples are truncated to this many standard deviations.
const NORMAL_TRUNCATION: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("control set size must be >= 1")]
    EmptySet,
    #[error("uniform grid needs a perfect-cube sample count, got {0}")]
    InvalidCardinality(usize),
    #[error("u_max must be positive and finite, got {0}")]
    InvalidBound(f64),
    #[error("unknown sampling strategy `{0}` (expected random, uniform or normal)")]
    UnknownStrategy(String),
    #[error("{0}")]
    InvalidInput(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// i.i.d. uniform on the control cube.
    Random,
    /// Cartesian grid with both endpoints per axis.
    Uniform,
    /// Truncated standard normal per axis, scaled into the cube.
    Normal,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Normal, Strategy::Uniform, Strategy::Random];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Uniform => "uniform",
            Strategy::Normal => "normal",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Strategy::Random),
            "uniform" => Ok(Strategy::Uniform),
            "normal" => Ok(Strategy::Normal),
            other => Err(SamplingError::UnknownStrategy(other.to_string())),
        }
    }
}

/// The discretized control set `U_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    pub samples: Vec<ControlInput>,
    pub strategy: Strategy,
    pub seed: u64,
    pub u_max: f64,
}

impl ControlSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Wraps an explicit list of controls, checking each against `u_max`.
    pub fn from_samples(samples: Vec<ControlInput>, u_max: f64) -> Result<Self, SamplingError> {
        if samples.is_empty() {
            return Err(SamplingError::EmptySet);
        }
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(SamplingError::InvalidBound(u_max));
        }
        if samples.iter().any(|u| !u.within(u_max)) {
            return Err(SamplingError::InvalidInput(
                "control sample outside [-u_max, u_max]",
            ));
        }
        Ok(Self {
            samples,
            strategy: Strategy::Uniform,
            seed: 0,
            u_max,
        })
    }
}

/// Exact integer cube root, if `m` is a perfect cube.
fn cube_root(m: usize) -> Option<usize> {
    let guess = (m as f64).cbrt().round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|k| k * k * k == m)
}

fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= NORMAL_TRUNCATION {
            return z;
        }
    }
}

pub fn generate_control_set(
    strategy: Strategy,
    m: usize,
    u_max: f64,
    seed: u64,
) -> Result<ControlSet, SamplingError> {
    if m == 0 {
        return Err(SamplingError::EmptySet);
    }
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(SamplingError::InvalidBound(u_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match strategy {
        Strategy::Random => (0..m)
            .map(|_| {
                let mut c = || rng.random_range(-u_max..=u_max);
                ControlInput::new(c(), c(), c())
            })
            .collect(),
        Strategy::Uniform => {
            let k = cube_root(m).ok_or(SamplingError::InvalidCardinality(m))?;
            let axis: Vec<f64> = if k == 1 {
                vec![0.0]
            } else {
                // scale last so the end points are exactly +-u_max
                (0..k)
                    .map(|i| u_max * (2.0 * i as f64 / (k - 1) as f64 - 1.0))
                    .collect()
            };
            let mut out = Vec::with_capacity(m);
            for &x in &axis {
                for &y in &axis {
                    for &z in &axis {
                        out.push(ControlInput::new(x, y, z));
                    }
                }
            }
            out
        }
        Strategy::Normal => {
            let scale = u_max / NORMAL_TRUNCATION;
            (0..m)
                .map(|_| {
                    let x = truncated_normal(&mut rng) * scale;
                    let y = truncated_normal(&mut rng) * scale;
                    let z = truncated_normal(&mut rng) * scale;
                    ControlInput::new(x, y, z)
                })
                .collect()
        }
    };
    Ok(ControlSet {
        samples,
        strategy,
        seed,
        u_max,
    })
}

/// Position reached by each primitive, in sample order.
pub fn primitive_endpoints(s: &State, cs: &ControlSet, tau: f64) -> Vec<Vec3> {
    cs.samples
        .iter()
        .map(|u| *propagate_exact(s, u, tau).position())
        .collect()
}

/// Greedy first-come clustering: an endpoint counts as useful iff it lies
/// farther than `threshold` from every endpoint already accepted.
pub fn useful_sample_ratio(endpoints: &[Vec3], threshold: f64) -> Result<f64, SamplingError> {
    if endpoints.is_empty() {
        return Err(SamplingError::InvalidInput("no endpoints"));
    }
    if !(threshold > 0.0) {
        return Err(SamplingError::InvalidInput("threshold must be > 0"));
    }
    let mut accepted: Vec<&Vec3> = Vec::with_capacity(endpoints.len());
    for p in endpoints {
        if accepted.iter().all(|q| (p - *q).norm() > threshold) {
            accepted.push(p);
        }
    }
    Ok(accepted.len() as f64 / endpoints.len() as f64)
}

/// Mean distance from each endpoint to its nearest other endpoint, in meters.
pub fn nearest_neighbor_spread(endpoints: &[Vec3]) -> Result<f64, SamplingError> {
    if endpoints.len() < 2 {
        return Err(SamplingError::InvalidInput("need at least two endpoints"));
    }
    let total: f64 = endpoints
        .iter()
        .enumerate()
        .map(|(i, p)| {
            endpoints
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / endpoints.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMetrics {
    pub alpha: f64,
    /// Mean nearest-neighbour endpoint distance in meters.
    pub spread_m: f64,
}

impl SamplingMetrics {
    pub fn spread_cm(&self) -> f64 {
        self.spread_m * 100.0
    }
}

/// Both metrics for one control set applied from `start`.
pub fn evaluate_sampling(
    start: &State,
    cs: &ControlSet,
    tau: f64,
    threshold: f64,
) -> Result<SamplingMetrics, SamplingError> {
    let endpoints = primitive_endpoints(start, cs, tau);
    Ok(SamplingMetrics {
        alpha: useful_sample_ratio(&endpoints, threshold)?,
        spread_m: nearest_neighbor_spread(&endpoints)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_27_is_three_point_grid() {
        let cs = generate_control_set(Strategy::Uniform, 27, 1.0, 0).unwrap();
        assert_eq!(cs.len(), 27);
        for u in &cs.samples {
            for c in u.0.iter() {
                assert!([-1.0, 0.0, 1.0].contains(c), "{c}");
            }
        }
        let mut seen: Vec<_> = cs.samples.iter().map(|u| (u.0.x, u.0.y, u.0.z)).collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 27);
    }

    #[test]
    fn uniform_rejects_non_cube() {
        assert_eq!(
            generate_control_set(Strategy::Uniform, 26, 1.0, 0),
            Err(SamplingError::InvalidCardinality(26))
        );
        assert!(generate_control_set(Strategy::Uniform, 1, 1.0, 0).is_ok());
        assert!(generate_control_set(Strategy::Uniform, 125, 1.0, 0).is_ok());
    }

    #[test]
    fn uniform_grid_ends_exactly_at_bound() {
        // -0.1 + 0.2 * 3 / 3 rounds above 0.1
        let cs = generate_control_set(Strategy::Uniform, 64, 0.1, 0).unwrap();
        assert!(cs.samples.iter().all(|u| u.within(0.1)));
        assert_eq!(cs.samples.last().unwrap().0, Vec3::repeat(0.1));
        assert_eq!(cs.samples[0].0, Vec3::repeat(-0.1));
    }

    #[test]
    fn other_errors() {
        assert_eq!(
            generate_control_set(Strategy::Normal, 0, 1.0, 0),
            Err(SamplingError::EmptySet)
        );
        assert!(generate_control_set(Strategy::Random, 5, 0.0, 0).is_err());
        assert!("gaussian".parse::<Strategy>().is_err());
        assert_eq!("Normal".parse::<Strategy>().unwrap(), Strategy::Normal);
    }

    #[test]
    fn normal_is_deterministic_and_in_range() {
        let a = generate_control_set(Strategy::Normal, 100, 1.5, 42).unwrap();
        let b = generate_control_set(Strategy::Normal, 100, 1.5, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.samples.iter().all(|u| u.within(1.5)));
        let c = generate_control_set(Strategy::Normal, 100, 1.5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_mean_near_zero() {
        let cs = generate_control_set(Strategy::Random, 1000, 2.0, 7).unwrap();
        assert!(cs.samples.iter().all(|u| u.within(2.0)));
        for axis in 0..3 {
            let mean: f64 = cs.samples.iter().map(|u| u.0[axis]).sum::<f64>() / 1000.0;
            assert!(mean.abs() <= 0.15, "axis {axis} mean {mean}");
        }
    }

    #[test]
    fn endpoints_from_rest() {
        let rest = State::at_rest(Vec3::zeros(), 2).unwrap();
        let cs = ControlSet::from_samples(
            vec![ControlInput::new(1.0, 0.0, 0.0), ControlInput::zero()],
            1.0,
        )
        .unwrap();
        let e = primitive_endpoints(&rest, &cs, 1.0);
        assert_eq!(e[0], Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(e[1], Vec3::zeros());
    }

    #[test]
    fn endpoints_of_grid_form_scaled_grid() {
        let rest = State::at_rest(Vec3::new(1.0, 1.0, 1.0), 2).unwrap();
        let cs = generate_control_set(Strategy::Uniform, 27, 1.0, 0).unwrap();
        let e = primitive_endpoints(&rest, &cs, 1.0);
        // grid step 1 in control maps to 0.5 in position
        for (p, u) in e.iter().zip(&cs.samples) {
            assert_eq!(*p, Vec3::new(1.0, 1.0, 1.0) + u.0 * 0.5);
        }
        assert!((nearest_neighbor_spread(&e).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_cases() {
        let same = vec![Vec3::new(1.0, 2.0, 3.0); 8];
        assert_eq!(useful_sample_ratio(&same, 0.1).unwrap(), 1.0 / 8.0);
        let apart: Vec<_> = (0..5)
            .map(|i| Vec3::new(0.2 * i as f64, 0.0, 0.0))
            .collect();
        assert_eq!(useful_sample_ratio(&apart, 0.1).unwrap(), 1.0);
        assert!(useful_sample_ratio(&[], 0.1).is_err());
        assert!(useful_sample_ratio(&apart, 0.0).is_err());
    }

    #[test]
    fn alpha_is_greedy_in_input_order() {
        // 0 and 0.16 accepted, 0.08 is within 0.1 of 0 and rejected
        let pts = [0.0, 0.16, 0.08].map(|x| Vec3::new(x, 0.0, 0.0));
        assert!((useful_sample_ratio(&pts, 0.1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let pts = [0.08, 0.0, 0.16].map(|x| Vec3::new(x, 0.0, 0.0));
        assert!((useful_sample_ratio(&pts, 0.1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spread_cases() {
        let two = [Vec3::zeros(), Vec3::new(0.05, 0.0, 0.0)];
        assert!((nearest_neighbor_spread(&two).unwrap() - 0.05).abs() < 1e-15);
        let three = [0.0, 1.0, 3.0].map(|x| Vec3::new(x, 0.0, 0.0));
        assert!((nearest_neighbor_spread(&three).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(nearest_neighbor_spread(&two[..1]).is_err());
    }
}
