//! Two-axis telescope mount: ADRC position loop commanding torque to PI
//! current loops with saturation and anti-windup.
//!
//! ```text
//! i~     = i_d - i,   i_d = tau_d / k_t
//! pre    = k_p i~ + v + u_r
//! volt   = sat(pre, U_m)
//! v'     = k_i (i~ - k_s (pre - volt))
//! T_e i' = volt - i
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{CompensationMode, ControllerGains};
use crate::error::{check_positive, AdrcError, Result};
use crate::model::{sine_reference, FrictionSchedule, PlantModel, TanhFriction, ZeroDynamics};
use crate::scaling::GainSet;
use crate::sim::integrator::rk4_integrate;
use crate::sim::scenario::{run_scenario, InputModel, Scenario, ScenarioResult};
use crate::{Matrix, Vector};

/// Apparent angular velocity of stars, rad/s.
pub const SIDEREAL_RATE: f64 = 7.268e-5;
/// Motor torque per unit current, N m / A.
pub const TORQUE_CONSTANT: f64 = 2.45;
/// Friction steepness used on both axes.
pub const FRICTION_STEEPNESS: f64 = 1e3;

pub fn saturate(x: f64, limit: f64) -> f64 {
    x.clamp(-limit, limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentLoopConfig {
    pub kp: f64,
    pub ki: f64,
    /// `k_s`; zero disables anti-windup.
    pub anti_windup_gain: f64,
    /// `U_m`, volts.
    pub voltage_limit: f64,
    /// `u_r = feedforward_gain * i_d`.
    pub feedforward_gain: f64,
    pub torque_constant: f64,
    /// Electrical lag from voltage to current, s.
    pub electrical_time_constant: f64,
    /// Controller loop rate, Hz. The integration step may not exceed its period.
    pub loop_rate: f64,
}

impl Default for CurrentLoopConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 100.0,
            anti_windup_gain: 1.0,
            voltage_limit: 24.0,
            feedforward_gain: 0.0,
            torque_constant: TORQUE_CONSTANT,
            electrical_time_constant: 1e-3,
            loop_rate: 1e4,
        }
    }
}

impl CurrentLoopConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("current loop k_p", self.kp)?;
        check_positive("current loop k_i", self.ki)?;
        check_positive("voltage limit U_m", self.voltage_limit)?;
        check_positive("torque constant", self.torque_constant)?;
        check_positive("electrical time constant", self.electrical_time_constant)?;
        check_positive("loop rate", self.loop_rate)?;
        for (what, value) in [
            ("anti-windup gain k_s", self.anti_windup_gain),
            ("feedforward gain", self.feedforward_gain),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(AdrcError::InvalidBound { what, value });
            }
        }
        Ok(())
    }

    /// Isolated current loop driven by a constant desired current; returns
    /// `(current, integrator)` after `duration`.
    pub fn step_response(&self, desired_current: f64, duration: f64, step: f64) -> (f64, f64) {
        let c = *self;
        let f = move |_t: f64, y: &Vector| {
            let (i, integ) = (y[0], y[1]);
            let err = desired_current - i;
            let pre = c.kp * err + integ + c.feedforward_gain * desired_current;
            let volt = saturate(pre, c.voltage_limit);
            Vector::from_row_slice(&[
                (volt - i) / c.electrical_time_constant,
                c.ki * (err - c.anti_windup_gain * (pre - volt)),
            ])
        };
        let steps = (duration / step).round() as usize;
        let y = rk4_integrate(f, 0.0, Vector::zeros(2), step, steps);
        (y[0], y[1])
    }
}

/// Controller and observer gains of the two axes (horizontal, vertical).
pub fn telescope_gains() -> GainSet {
    GainSet {
        kp: vec![225.0, 225.0],
        kd: vec![24.0, 24.0],
        k1: vec![1.2e3, 2.4e2],
        k2: vec![5.7e5, 2.28e4],
        k3: vec![1e8, 0.8e6],
    }
}

/// Diagonal of the input matrix (horizontal, vertical).
pub const TELESCOPE_INPUT_GAINS: [f64; 2] = [1.0 / 5.0, 1.0 / 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelescopeSetup {
    /// Peak reference velocity in multiples of the sidereal rate.
    pub max_velocity_sidereal: f64,
    /// Reference period, s.
    pub period: f64,
    /// Coulomb friction magnitude `f_c` as `(start_time, value)` steps. The
    /// plant term is a drag, `-f_c tanh(f_t x2)`, and reference- or
    /// estimate-based compensation evaluates the same term.
    pub friction: Vec<(f64, f64)>,
    pub compensation_mode: CompensationMode,
    pub current_loop: CurrentLoopConfig,
    pub duration: f64,
    pub step: f64,
    pub record_stride: usize,
}

impl Default for TelescopeSetup {
    fn default() -> Self {
        Self {
            max_velocity_sidereal: 500.0,
            period: 30.0,
            friction: vec![(0.0, 0.15)],
            compensation_mode: CompensationMode::ReferenceBased,
            current_loop: CurrentLoopConfig::default(),
            duration: 30.0,
            step: 1e-4,
            record_stride: 100,
        }
    }
}

impl TelescopeSetup {
    /// First experiment: 50 v_s with `f_c = 0.5`.
    pub fn slow(mode: CompensationMode) -> Self {
        Self {
            max_velocity_sidereal: 50.0,
            friction: vec![(0.0, 0.5)],
            compensation_mode: mode,
            ..Self::default()
        }
    }

    /// Second experiment: 500 v_s with `f_c = 0.15`.
    pub fn fast(mode: CompensationMode) -> Self {
        Self {
            compensation_mode: mode,
            ..Self::default()
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        check_positive("period", self.period)?;
        if !(self.max_velocity_sidereal.is_finite() && self.max_velocity_sidereal >= 0.0) {
            return Err(AdrcError::InvalidBound {
                what: "maximum velocity",
                value: self.max_velocity_sidereal,
            });
        }
        self.current_loop.validate()?;
        if self.step > 1.0 / self.current_loop.loop_rate * (1.0 + 1e-12) {
            return Err(AdrcError::InvalidBound {
                what: "step longer than the current-loop period",
                value: self.step,
            });
        }
        let w_ref = 2.0 * std::f64::consts::PI / self.period;
        let amplitude = self.max_velocity_sidereal * SIDEREAL_RATE / w_ref;
        let b = Matrix::from_diagonal(&Vector::from_row_slice(&TELESCOPE_INPUT_GAINS));
        let friction = TanhFriction {
            schedule: FrictionSchedule::new(self.friction.iter().map(|&(t, c)| (t, -c)).collect())?,
            steepness: FRICTION_STEEPNESS,
        };
        let model = PlantModel::new(b, Vector::from_element(2, self.current_loop.electrical_time_constant))?
            .with_known_dynamics(Arc::new(friction), Arc::new(ZeroDynamics));
        let gains = telescope_gains();
        Ok(Scenario {
            model,
            reference: Arc::new(sine_reference(amplitude, w_ref, 2)?),
            controller: ControllerGains::new(gains.kp_vec(), gains.kd_vec(), self.compensation_mode, true)?,
            observer: gains.observer()?,
            scaling: None,
            input_model: InputModel::CurrentLoop(self.current_loop),
            duration: self.duration,
            step: self.step,
            record_stride: self.record_stride,
        })
    }
}

pub fn run_telescope(setup: &TelescopeSetup) -> Result<ScenarioResult> {
    run_scenario(&setup.scenario()?)
}
