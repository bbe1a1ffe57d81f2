//! Chain-of-integrators vehicle model.
//!
//! A state of order `n` holds the position and its first `n - 1` time
//! derivatives in 3D. The control input drives the `n`-th derivative, so the
//! system is `x' = A x + B u` with a nilpotent block-shift `A`. Because
//! `A^n = 0` the propagation under constant control has an exact polynomial
//! form, which the planner uses; the explicit Euler step is kept alongside it.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Inline storage for the derivative stack. Orders up to 4 never allocate.
const INLINE_ORDER: usize = 4;
pub type Derivs = SmallVec<[Vec3; INLINE_ORDER]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("propagation needs tau > 0 and substeps >= 1 (tau = {tau}, substeps = {substeps})")]
    InvalidStep { tau: f64, substeps: usize },
    #[error("dynamic limit for derivative order {order} must be > 0, got {value}")]
    InvalidLimit { order: usize, value: f64 },
    #[error("no limit configured for derivative order {0}")]
    MissingLimit(usize),
}

/// Position plus derivatives up to order `n - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    derivs: Derivs,
}

impl State {
    pub fn new(derivs: impl IntoIterator<Item = Vec3>) -> Result<Self, DynamicsError> {
        let derivs: Derivs = derivs.into_iter().collect();
        if derivs.len() < 2 {
            return Err(DynamicsError::InvalidOrder(derivs.len()));
        }
        if derivs.iter().any(|d| !d.iter().all(|c| c.is_finite())) {
            return Err(DynamicsError::NonFinite("state"));
        }
        Ok(Self { derivs })
    }

    /// Stationary state of the given order at `position`.
    pub fn at_rest(position: Vec3, order: usize) -> Result<Self, DynamicsError> {
        let mut derivs = vec![Vec3::zeros(); order];
        if let Some(p) = derivs.first_mut() {
            *p = position;
        }
        Self::new(derivs)
    }

    pub fn order(&self) -> usize {
        self.derivs.len()
    }

    pub fn position(&self) -> &Vec3 {
        &self.derivs[0]
    }

    pub fn velocity(&self) -> &Vec3 {
        &self.derivs[1]
    }

    pub fn derivative(&self, k: usize) -> &Vec3 {
        &self.derivs[k]
    }

    pub fn derivatives(&self) -> &[Vec3] {
        &self.derivs
    }

    pub fn is_finite(&self) -> bool {
        self.derivs.iter().all(|d| d.iter().all(|c| c.is_finite()))
    }

    /// Same state with the position shifted by `d`.
    pub fn translated(&self, d: &Vec3) -> Self {
        let mut out = self.clone();
        out.derivs[0] += d;
        out
    }

    /// All components, derivative-major: `[px, py, pz, vx, vy, vz, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.derivs.iter().flat_map(|d| d.iter().copied()).collect()
    }

    /// Euclidean norm over the full `3n` vector of `self - other`.
    pub fn distance(&self, other: &State) -> f64 {
        self.derivs
            .iter()
            .zip(other.derivs.iter())
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Constant control applied to the highest derivative (units m/s^n).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlInput(pub Vec3);

impl ControlInput {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vec3::new(x, y, z))
    }

    pub fn zero() -> Self {
        Self(Vec3::zeros())
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn within(&self, u_max: f64) -> bool {
        self.0.iter().all(|c| c.abs() <= u_max)
    }
}

/// Per-axis caps on velocity, acceleration, higher derivatives and control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicLimits {
    pub v_max: f64,
    pub a_max: f64,
    /// Caps for derivative orders 3, 4, ... (jerk, snap, ...).
    #[serde(default)]
    pub higher: Vec<f64>,
    pub u_max: f64,
}

impl Default for DynamicLimits {
    fn default() -> Self {
        Self {
            v_max: 2.0,
            a_max: 2.0,
            higher: Vec::new(),
            u_max: 1.0,
        }
    }
}

impl DynamicLimits {
    /// Cap for derivative order `k` (1 = velocity). `None` when unconfigured.
    pub fn cap(&self, k: usize) -> Option<f64> {
        match k {
            0 => None,
            1 => Some(self.v_max),
            2 => Some(self.a_max),
            _ => self.higher.get(k - 3).copied(),
        }
    }

    /// Checks that every cap a state of order `n` needs exists and is positive.
    pub fn validate(&self, n: usize) -> Result<(), DynamicsError> {
        let check = |order: usize, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(DynamicsError::InvalidLimit { order, value: v })
            }
        };
        check(n, self.u_max)?;
        check(1, self.v_max)?;
        check(2, self.a_max)?;
        for (i, &c) in self.higher.iter().enumerate() {
            check(i + 3, c)?;
        }
        for k in 1..n {
            if self.cap(k).is_none() {
                return Err(DynamicsError::MissingLimit(k));
            }
        }
        Ok(())
    }
}

/// The `(A, B)` pair of the order-`n` chain of integrators in 3D.
pub fn system_matrices(n: usize) -> Result<(DMatrix<f64>, DMatrix<f64>), DynamicsError> {
    if n < 2 {
        return Err(DynamicsError::InvalidOrder(n));
    }
    let dim = 3 * n;
    let mut a = DMatrix::zeros(dim, dim);
    for block in 0..n - 1 {
        for i in 0..3 {
            a[(3 * block + i, 3 * (block + 1) + i)] = 1.0;
        }
    }
    let mut b = DMatrix::zeros(dim, 3);
    for i in 0..3 {
        b[(3 * (n - 1) + i, i)] = 1.0;
    }
    Ok((a, b))
}

/// Explicit Euler: `x <- x + (A x + B u) dt`, `substeps` times with `dt = tau / substeps`.
pub fn propagate_euler(
    s: &State,
    u: &ControlInput,
    tau: f64,
    substeps: usize,
) -> Result<State, DynamicsError> {
    if !(tau > 0.0) || substeps == 0 {
        return Err(DynamicsError::InvalidStep { tau, substeps });
    }
    if !s.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }
    if !u.0.iter().all(|c| c.is_finite()) || !tau.is_finite() {
        return Err(DynamicsError::NonFinite("control"));
    }
    let dt = tau / substeps as f64;
    let n = s.order();
    let mut d = s.derivs.clone();
    for _ in 0..substeps {
        // Ascending order reads derivs[k + 1] before it is updated.
        for k in 0..n - 1 {
            let rate = d[k + 1];
            d[k] += rate * dt;
        }
        d[n - 1] += u.0 * dt;
    }
    let out = State { derivs: d };
    if !out.is_finite() {
        return Err(DynamicsError::NonFinite("propagated state"));
    }
    Ok(out)
}

/// Closed-form propagation over one fixed duration, with the polynomial
/// coefficients `t^m / m!` computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagator {
    tau: f64,
    coeff: SmallVec<[f64; 8]>,
}

impl Propagator {
    pub fn new(order: usize, tau: f64) -> Self {
        let mut coeff: SmallVec<[f64; 8]> = SmallVec::with_capacity(order + 1);
        coeff.push(1.0);
        for m in 1..=order {
            let prev = coeff[m - 1];
            coeff.push(prev * tau / m as f64);
        }
        Self { tau, coeff }
    }

    pub fn order(&self) -> usize {
        self.coeff.len() - 1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    fn block(&self, d: &[Vec3], u: &ControlInput, k: usize) -> Vec3 {
        let n = d.len();
        let c = &self.coeff[..=n];
        let mut acc = u.0 * c[n - k];
        for j in (k..n).rev() {
            acc += d[j] * c[j - k];
        }
        acc
    }

    /// `d'_k = sum_{j>=k} d_j t^(j-k)/(j-k)! + u t^(n-k)/(n-k)!`.
    ///
    /// Panics if `s` is not of the propagator's order.
    pub fn state(&self, s: &State, u: &ControlInput) -> State {
        let d = s.derivs.as_slice();
        assert_eq!(
            d.len(),
            self.order(),
            "state order does not match the propagator"
        );
        let n = d.len();
        let derivs = if n <= INLINE_ORDER {
            let mut buf = [Vec3::zeros(); INLINE_ORDER];
            for (k, slot) in buf.iter_mut().enumerate().take(n) {
                *slot = self.block(d, u, k);
            }
            Derivs::from_buf_and_len(buf, n)
        } else {
            (0..n).map(|k| self.block(d, u, k)).collect()
        };
        State { derivs }
    }

    /// Position block of [`Propagator::state`], bit-identical to it.
    pub fn position(&self, s: &State, u: &ControlInput) -> Vec3 {
        let d = s.derivs.as_slice();
        assert_eq!(
            d.len(),
            self.order(),
            "state order does not match the propagator"
        );
        self.block(d, u, 0)
    }
}

/// Closed-form solution under constant control; see [`Propagator::state`].
pub fn propagate_exact(s: &State, u: &ControlInput, tau: f64) -> State {
    Propagator::new(s.order(), tau).state(s, u)
}

/// Position after `tau`, bit-identical to the position of [`propagate_exact`].
pub fn propagate_position(s: &State, u: &ControlInput, tau: f64) -> Vec3 {
    Propagator::new(s.order(), tau).position(s, u)
}

/// True iff every derivative of order `1..n` is inside its closed per-axis cap.
/// Position is the world's business and is not checked here.
pub fn within_dynamic_limits(s: &State, lim: &DynamicLimits) -> bool {
    (1..s.order()).all(|k| match lim.cap(k) {
        Some(cap) => s.derivs[k].iter().all(|c| c.abs() <= cap),
        None => false,
    })
}
