//! Plant family: second-order fully actuated dynamics with a matched
//! disturbance, driven through first-order input dynamics.
//!
//! ```text
//! x1' = x2
//! x2' = B u + h1(x1, x2) + h2(x1, x2) + q(x1, x2, u, t)
//! u'  = T^-1 (v - u)
//! ```
//!
//! `h = h1 + h2` is the known part of the dynamics. The split only matters
//! to the compensation term, which evaluates `h1` on observer estimates and
//! `h2` on the reference. `q` is the unknown disturbance.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_positive, AdrcError, Result};
use crate::linalg::fd_jacobian;
use crate::{Matrix, Vector};

/// Central-difference step used whenever analytic partials are missing.
pub const FD_STEP: f64 = 1e-6;

/// Jacobians of a known-dynamics component with respect to its two arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitJacobians {
    pub first: Matrix,
    pub second: Matrix,
}

/// A known-dynamics component `h_i(a, b)`.
///
/// Time is passed so that piecewise-constant parameter schedules (manual
/// retuning of a friction coefficient) can be represented; the partials
/// ignore the schedule switching instants.
pub trait KnownDynamics: Send + Sync + fmt::Debug {
    fn eval(&self, a: &Vector, b: &Vector, t: f64) -> Vector;

    /// Analytic partials, if the component provides them.
    fn jacobians(&self, _a: &Vector, _b: &Vector, _t: f64) -> Option<SplitJacobians> {
        None
    }

    fn has_analytic_jacobians(&self) -> bool {
        false
    }

    fn jacobians_or_fd(&self, a: &Vector, b: &Vector, t: f64) -> SplitJacobians {
        self.jacobians(a, b, t).unwrap_or_else(|| SplitJacobians {
            first: fd_jacobian(|x| self.eval(x, b, t), a, FD_STEP),
            second: fd_jacobian(|x| self.eval(a, x, t), b, FD_STEP),
        })
    }
}

/// Partials of the unknown disturbance `q(x1, x2, u, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceJacobians {
    pub position: Matrix,
    pub velocity: Matrix,
    pub input: Matrix,
    pub time: Vector,
}

pub trait Disturbance: Send + Sync + fmt::Debug {
    fn eval(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Vector;

    fn jacobians(&self, _x1: &Vector, _x2: &Vector, _u: &Vector, _t: f64) -> Option<DisturbanceJacobians> {
        None
    }

    fn has_analytic_jacobians(&self) -> bool {
        false
    }

    fn jacobians_or_fd(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> DisturbanceJacobians {
        self.jacobians(x1, x2, u, t).unwrap_or_else(|| {
            let dt = (self.eval(x1, x2, u, t + FD_STEP) - self.eval(x1, x2, u, t - FD_STEP)) / (2.0 * FD_STEP);
            DisturbanceJacobians {
                position: fd_jacobian(|x| self.eval(x, x2, u, t), x1, FD_STEP),
                velocity: fd_jacobian(|x| self.eval(x1, x, u, t), x2, FD_STEP),
                input: fd_jacobian(|x| self.eval(x1, x2, x, t), u, FD_STEP),
                time: dt,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDynamics;

impl KnownDynamics for ZeroDynamics {
    fn eval(&self, a: &Vector, _b: &Vector, _t: f64) -> Vector {
        Vector::zeros(a.len())
    }

    fn jacobians(&self, a: &Vector, b: &Vector, _t: f64) -> Option<SplitJacobians> {
        Some(SplitJacobians {
            first: Matrix::zeros(a.len(), a.len()),
            second: Matrix::zeros(a.len(), b.len()),
        })
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

/// `h(a, b) = first * a + second * b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics {
    pub first: Matrix,
    pub second: Matrix,
}

impl KnownDynamics for LinearDynamics {
    fn eval(&self, a: &Vector, b: &Vector, _t: f64) -> Vector {
        &self.first * a + &self.second * b
    }

    fn jacobians(&self, _a: &Vector, _b: &Vector, _t: f64) -> Option<SplitJacobians> {
        Some(SplitJacobians {
            first: self.first.clone(),
            second: self.second.clone(),
        })
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

/// Piecewise-constant coefficient keyed by start time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionSchedule {
    segments: Vec<(f64, f64)>,
}

impl FrictionSchedule {
    pub fn constant(coefficient: f64) -> Self {
        Self {
            segments: vec![(f64::NEG_INFINITY, coefficient)],
        }
    }

    /// `segments` are `(start_time, coefficient)` pairs. The first segment
    /// also covers all times before its start.
    pub fn new(mut segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(AdrcError::Empty("friction schedule"));
        }
        if segments.iter().any(|(t, c)| t.is_nan() || !c.is_finite()) {
            return Err(AdrcError::InvalidBound {
                what: "friction schedule entry",
                value: f64::NAN,
            });
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { segments })
    }

    pub fn coefficient_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| t >= *start)
            .unwrap_or(&self.segments[0])
            .1
    }

    pub fn max_abs(&self) -> f64 {
        self.segments.iter().fold(0.0_f64, |m, (_, c)| m.max(c.abs()))
    }
}

/// Friction-like term `f_c(t) * tanh(f_t * b)` applied per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TanhFriction {
    pub schedule: FrictionSchedule,
    pub steepness: f64,
}

impl TanhFriction {
    pub fn new(coefficient: f64, steepness: f64) -> Self {
        Self {
            schedule: FrictionSchedule::constant(coefficient),
            steepness,
        }
    }

    /// Bound on the velocity partial: `|f_c| * f_t`.
    pub fn velocity_partial_bound(&self) -> f64 {
        self.schedule.max_abs() * self.steepness.abs()
    }
}

impl KnownDynamics for TanhFriction {
    fn eval(&self, _a: &Vector, b: &Vector, t: f64) -> Vector {
        let c = self.schedule.coefficient_at(t);
        b.map(|v| c * (self.steepness * v).tanh())
    }

    fn jacobians(&self, a: &Vector, b: &Vector, t: f64) -> Option<SplitJacobians> {
        let c = self.schedule.coefficient_at(t);
        let d = b.map(|v| {
            let th = (self.steepness * v).tanh();
            c * self.steepness * (1.0 - th * th)
        });
        Some(SplitJacobians {
            first: Matrix::zeros(b.len(), a.len()),
            second: Matrix::from_diagonal(&d),
        })
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

type DynFn = dyn Fn(&Vector, &Vector, f64) -> Vector + Send + Sync;
type DynJac = dyn Fn(&Vector, &Vector, f64) -> SplitJacobians + Send + Sync;

/// User-registered known dynamics with optional analytic partials.
pub struct FnDynamics {
    f: Box<DynFn>,
    jac: Option<Box<DynJac>>,
}

impl FnDynamics {
    pub fn new(f: impl Fn(&Vector, &Vector, f64) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            jac: None,
        }
    }

    pub fn with_jacobians(
        mut self,
        jac: impl Fn(&Vector, &Vector, f64) -> SplitJacobians + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl fmt::Debug for FnDynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDynamics")
            .field("analytic_jacobians", &self.jac.is_some())
            .finish()
    }
}

impl KnownDynamics for FnDynamics {
    fn eval(&self, a: &Vector, b: &Vector, t: f64) -> Vector {
        (self.f)(a, b, t)
    }

    fn jacobians(&self, a: &Vector, b: &Vector, t: f64) -> Option<SplitJacobians> {
        self.jac.as_ref().map(|j| j(a, b, t))
    }

    fn has_analytic_jacobians(&self) -> bool {
        self.jac.is_some()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoDisturbance;

impl Disturbance for NoDisturbance {
    fn eval(&self, x1: &Vector, _x2: &Vector, _u: &Vector, _t: f64) -> Vector {
        Vector::zeros(x1.len())
    }

    fn jacobians(&self, x1: &Vector, _x2: &Vector, _u: &Vector, _t: f64) -> Option<DisturbanceJacobians> {
        let n = x1.len();
        Some(DisturbanceJacobians {
            position: Matrix::zeros(n, n),
            velocity: Matrix::zeros(n, n),
            input: Matrix::zeros(n, n),
            time: Vector::zeros(n),
        })
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantDisturbance(pub Vector);

impl Disturbance for ConstantDisturbance {
    fn eval(&self, _x1: &Vector, _x2: &Vector, _u: &Vector, _t: f64) -> Vector {
        self.0.clone()
    }

    fn jacobians(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Option<DisturbanceJacobians> {
        NoDisturbance.jacobians(x1, x2, u, t)
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

/// Pure time disturbance `q(t) = amplitude * sin(angular_frequency * t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineDisturbance {
    pub amplitude: Vector,
    pub angular_frequency: f64,
}

impl Disturbance for SineDisturbance {
    fn eval(&self, _x1: &Vector, _x2: &Vector, _u: &Vector, t: f64) -> Vector {
        &self.amplitude * (self.angular_frequency * t).sin()
    }

    fn jacobians(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Option<DisturbanceJacobians> {
        let mut j = NoDisturbance.jacobians(x1, x2, u, t)?;
        j.time = &self.amplitude * (self.angular_frequency * (self.angular_frequency * t).cos());
        Some(j)
    }

    fn has_analytic_jacobians(&self) -> bool {
        true
    }
}

type DistFn = dyn Fn(&Vector, &Vector, &Vector, f64) -> Vector + Send + Sync;
type DistJac = dyn Fn(&Vector, &Vector, &Vector, f64) -> DisturbanceJacobians + Send + Sync;

/// User-registered disturbance with optional analytic partials.
pub struct FnDisturbance {
    f: Box<DistFn>,
    jac: Option<Box<DistJac>>,
}

impl FnDisturbance {
    pub fn new(f: impl Fn(&Vector, &Vector, &Vector, f64) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            jac: None,
        }
    }

    pub fn with_jacobians(
        mut self,
        jac: impl Fn(&Vector, &Vector, &Vector, f64) -> DisturbanceJacobians + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }
}

impl fmt::Debug for FnDisturbance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDisturbance")
            .field("analytic_jacobians", &self.jac.is_some())
            .finish()
    }
}

impl Disturbance for FnDisturbance {
    fn eval(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Vector {
        (self.f)(x1, x2, u, t)
    }

    fn jacobians(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Option<DisturbanceJacobians> {
        self.jac.as_ref().map(|j| j(x1, x2, u, t))
    }

    fn has_analytic_jacobians(&self) -> bool {
        self.jac.is_some()
    }
}

/// Time derivatives of the plant state.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantDerivative {
    pub position: Vector,
    pub velocity: Vector,
    pub input: Vector,
}

/// Plant description. Immutable after construction.
#[derive(Clone, Debug)]
pub struct PlantModel {
    n: usize,
    input_matrix: Matrix,
    input_inverse: Matrix,
    time_constants: Vector,
    h1: Arc<dyn KnownDynamics>,
    h2: Arc<dyn KnownDynamics>,
    q: Arc<dyn Disturbance>,
}

impl PlantModel {
    /// Plant with `h = 0` and `q = 0`. `time_constants` holds the diagonal of `T`.
    pub fn new(input_matrix: Matrix, time_constants: Vector) -> Result<Self> {
        let n = input_matrix.nrows();
        if n == 0 {
            return Err(AdrcError::Empty("input matrix"));
        }
        check_dim("input matrix columns", n, input_matrix.ncols())?;
        check_dim("time constants", n, time_constants.len())?;
        for (index, &value) in time_constants.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(AdrcError::NonPositiveTimeConstant { index, value });
            }
        }
        let sv = input_matrix.singular_values();
        let ratio = sv.min() / sv.max();
        if ratio.is_nan() || ratio < 1e-12 {
            return Err(AdrcError::SingularInput { ratio });
        }
        let input_inverse = input_matrix
            .clone()
            .try_inverse()
            .ok_or(AdrcError::SingularInput { ratio })?;
        Ok(Self {
            n,
            input_matrix,
            input_inverse,
            time_constants,
            h1: Arc::new(ZeroDynamics),
            h2: Arc::new(ZeroDynamics),
            q: Arc::new(NoDisturbance),
        })
    }

    pub fn with_known_dynamics(mut self, h1: Arc<dyn KnownDynamics>, h2: Arc<dyn KnownDynamics>) -> Self {
        self.h1 = h1;
        self.h2 = h2;
        self
    }

    pub fn with_disturbance(mut self, q: Arc<dyn Disturbance>) -> Self {
        self.q = q;
        self
    }

    pub fn with_time_constants(&self, time_constants: Vector) -> Result<Self> {
        let rebuilt = Self::new(self.input_matrix.clone(), time_constants)?;
        Ok(rebuilt
            .with_known_dynamics(self.h1.clone(), self.h2.clone())
            .with_disturbance(self.q.clone()))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn input_matrix(&self) -> &Matrix {
        &self.input_matrix
    }

    pub fn input_inverse(&self) -> &Matrix {
        &self.input_inverse
    }

    pub fn time_constants(&self) -> &Vector {
        &self.time_constants
    }

    pub fn h1(&self) -> &dyn KnownDynamics {
        self.h1.as_ref()
    }

    pub fn h2(&self) -> &dyn KnownDynamics {
        self.h2.as_ref()
    }

    pub fn disturbance(&self) -> &dyn Disturbance {
        self.q.as_ref()
    }

    /// Total known dynamics `h = h1 + h2`.
    pub fn known(&self, a: &Vector, b: &Vector, t: f64) -> Vector {
        self.h1.eval(a, b, t) + self.h2.eval(a, b, t)
    }

    /// `B u + h(x1, x2) + q(x1, x2, u, t)`; no dimension checks.
    pub fn acceleration(&self, x1: &Vector, x2: &Vector, u: &Vector, t: f64) -> Vector {
        &self.input_matrix * u + self.known(x1, x2, t) + self.q.eval(x1, x2, u, t)
    }

    /// Right-hand side of the plant and its first-order input dynamics.
    pub fn derivative(&self, x1: &Vector, x2: &Vector, u: &Vector, v: &Vector, t: f64) -> Result<PlantDerivative> {
        for (ctx, len) in [
            ("position", x1.len()),
            ("velocity", x2.len()),
            ("input", u.len()),
            ("command", v.len()),
        ] {
            check_dim(ctx, self.n, len)?;
        }
        let input = (v - u).component_div(&self.time_constants);
        Ok(PlantDerivative {
            position: x2.clone(),
            velocity: self.acceleration(x1, x2, u, t),
            input,
        })
    }
}

/// Tracking error `e = [xd - x1; xd' - x2]`.
pub fn tracking_error(xd: &Vector, xd_dot: &Vector, x1: &Vector, x2: &Vector) -> Result<Vector> {
    let n = xd.len();
    check_dim("reference velocity", n, xd_dot.len())?;
    check_dim("position", n, x1.len())?;
    check_dim("velocity", n, x2.len())?;
    let mut e = Vector::zeros(2 * n);
    e.rows_mut(0, n).copy_from(&(xd - x1));
    e.rows_mut(n, n).copy_from(&(xd_dot - x2));
    Ok(e)
}

/// Reference position and its first three derivatives at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub position: Vector,
    pub velocity: Vector,
    pub acceleration: Vector,
    pub jerk: Vector,
}

/// Norm bounds on the reference and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryBounds {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

impl TrajectoryBounds {
    pub fn dominates(&self, s: &ReferenceSample, tol: f64) -> bool {
        s.position.norm() <= self.position + tol
            && s.velocity.norm() <= self.velocity + tol
            && s.acceleration.norm() <= self.acceleration + tol
            && s.jerk.norm() <= self.jerk + tol
    }
}

pub trait ReferenceTrajectory: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn sample(&self, t: f64) -> ReferenceSample;
    fn bounds(&self) -> TrajectoryBounds;
}

/// `xd(t) = amplitude * sin(angular_frequency * t)` on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineReference {
    amplitude: f64,
    angular_frequency: f64,
    n: usize,
}

/// Builds a sine reference. Bounds are Euclidean norms over all `n` axes,
/// so `x_bk = sqrt(n) * amplitude * angular_frequency^k`.
pub fn sine_reference(amplitude: f64, angular_frequency: f64, n: usize) -> Result<SineReference> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(AdrcError::InvalidBound {
            what: "sine amplitude",
            value: amplitude,
        });
    }
    check_positive("sine angular frequency", angular_frequency)?;
    if n == 0 {
        return Err(AdrcError::Empty("reference dimension"));
    }
    Ok(SineReference {
        amplitude,
        angular_frequency,
        n,
    })
}

impl SineReference {
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.angular_frequency
    }
}

impl ReferenceTrajectory for SineReference {
    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, t: f64) -> ReferenceSample {
        let (a, w) = (self.amplitude, self.angular_frequency);
        let (s, c) = (w * t).sin_cos();
        let fill = |v: f64| Vector::from_element(self.n, v);
        ReferenceSample {
            position: fill(a * s),
            velocity: fill(a * w * c),
            acceleration: fill(-a * w * w * s),
            jerk: fill(-a * w * w * w * c),
        }
    }

    fn bounds(&self) -> TrajectoryBounds {
        let (a, w) = (self.amplitude * (self.n as f64).sqrt(), self.angular_frequency);
        TrajectoryBounds {
            position: a,
            velocity: a * w,
            acceleration: a * w * w,
            jerk: a * w * w * w,
        }
    }
}

/// Bounds on the partial derivatives of `h1`, `h2` and `q`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceBounds {
    pub h1_position: f64,
    pub h1_velocity: f64,
    pub h2_position: f64,
    pub h2_velocity: f64,
    pub q_position: f64,
    pub q_velocity: f64,
    pub q_input: f64,
    pub q_time: f64,
}

impl DisturbanceBounds {
    fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("h1_position", self.h1_position),
            ("h1_velocity", self.h1_velocity),
            ("h2_position", self.h2_position),
            ("h2_velocity", self.h2_velocity),
            ("q_position", self.q_position),
            ("q_velocity", self.q_velocity),
            ("q_input", self.q_input),
            ("q_time", self.q_time),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (what, value) in self.entries() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(AdrcError::InvalidBound { what, value });
            }
        }
        Ok(())
    }

    /// Entry-wise `self >= other - tol`.
    pub fn dominates(&self, other: &Self, tol: f64) -> bool {
        self.entries()
            .iter()
            .zip(other.entries().iter())
            .all(|((_, a), (_, b))| *a >= *b - tol)
    }

    /// Largest spectral norms of the partials observed over `points`, using
    /// analytic partials where available and central differences otherwise.
    pub fn sampled(model: &PlantModel, points: &[EnvelopePoint]) -> Self {
        use crate::linalg::spectral_norm;
        let mut out = Self::default();
        let bump = |slot: &mut f64, v: f64| *slot = slot.max(v);
        for p in points {
            let j1 = model.h1().jacobians_or_fd(&p.x1, &p.x2, p.t);
            let j2 = model.h2().jacobians_or_fd(&p.x1, &p.x2, p.t);
            let jq = model.disturbance().jacobians_or_fd(&p.x1, &p.x2, &p.u, p.t);
            bump(&mut out.h1_position, spectral_norm(&j1.first));
            bump(&mut out.h1_velocity, spectral_norm(&j1.second));
            bump(&mut out.h2_position, spectral_norm(&j2.first));
            bump(&mut out.h2_velocity, spectral_norm(&j2.second));
            bump(&mut out.q_position, spectral_norm(&jq.position));
            bump(&mut out.q_velocity, spectral_norm(&jq.velocity));
            bump(&mut out.q_input, spectral_norm(&jq.input));
            bump(&mut out.q_time, jq.time.norm());
        }
        out
    }
}

/// One point of the state/time envelope used for sampled bound checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoint {
    pub x1: Vector,
    pub x2: Vector,
    pub u: Vector,
    pub t: f64,
}
