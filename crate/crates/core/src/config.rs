//! JSON scenario files.
//!
//! Gains may be given scaled (`form = "scaled"`, with `omega` and `kappa`)
//! or raw (`form = "raw"`, with optional `omega`/`kappa` used only for the
//! scaled error and the certificate). Per-axis values accept either one
//! number, broadcast to all axes, or a list.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{CompensationMode, ControllerGains};
use crate::error::{AdrcError, Result};
use crate::linalg::spectral_norm;
use crate::model::{
    sine_reference, ConstantDisturbance, Disturbance, DisturbanceBounds, FrictionSchedule, KnownDynamics,
    LinearDynamics, NoDisturbance, PlantModel, ReferenceTrajectory, SineDisturbance, TanhFriction, ZeroDynamics,
};
use crate::scaling::{GainSet, ScaledSystem, ScalingParams};
use crate::sim::{InputModel, Scenario, TelescopeSetup, SIDEREAL_RATE};
use crate::stability::{Certifier, LyapunovPair, SearchGrid};
use crate::{Matrix, Vector};

fn err(path: impl Into<String>, e: impl std::fmt::Display) -> AdrcError {
    AdrcError::Config {
        path: path.into(),
        message: e.to_string(),
    }
}

/// One value for every axis, or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    Uniform(f64),
    PerAxis(Vec<f64>),
}

impl AxisValues {
    pub fn expand(&self, n: usize, path: &str) -> Result<Vec<f64>> {
        match self {
            Self::Uniform(v) => Ok(vec![*v; n]),
            Self::PerAxis(v) if v.len() == n => Ok(v.clone()),
            Self::PerAxis(v) => Err(err(path, format!("expected {n} values, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    #[default]
    Zero,
    Linear {
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
    },
    /// `f_c(t) tanh(steepness * b)`; `coefficient` is a constant `f_c`,
    /// `schedule` a list of `[start_time, f_c]` steps.
    TanhFriction {
        #[serde(default)]
        coefficient: Option<f64>,
        #[serde(default)]
        schedule: Option<Vec<(f64, f64)>>,
        steepness: f64,
    },
}

fn matrix(rows: &[Vec<f64>], n: usize, path: &str) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(err(path, format!("expected a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(err(path, "entries must be finite"));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl DynamicsSpec {
    fn build(&self, n: usize, path: &str) -> Result<(Arc<dyn KnownDynamics>, f64, f64)> {
        Ok(match self {
            Self::Zero => (Arc::new(ZeroDynamics), 0.0, 0.0),
            Self::Linear { first, second } => {
                let (a, b) = (
                    matrix(first, n, &format!("{path}.first"))?,
                    matrix(second, n, &format!("{path}.second"))?,
                );
                let bounds = (spectral_norm(&a), spectral_norm(&b));
                (Arc::new(LinearDynamics { first: a, second: b }), bounds.0, bounds.1)
            }
            Self::TanhFriction {
                coefficient,
                schedule,
                steepness,
            } => {
                let schedule = match (coefficient, schedule) {
                    (Some(c), None) => FrictionSchedule::constant(*c),
                    (None, Some(s)) => {
                        FrictionSchedule::new(s.clone()).map_err(|e| err(format!("{path}.schedule"), e))?
                    }
                    _ => return Err(err(path, "give exactly one of `coefficient` or `schedule`")),
                };
                if !steepness.is_finite() {
                    return Err(err(format!("{path}.steepness"), "must be finite"));
                }
                let f = TanhFriction {
                    schedule,
                    steepness: *steepness,
                };
                let hb = f.velocity_partial_bound();
                (Arc::new(f), 0.0, hb)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    None,
    Constant {
        value: AxisValues,
    },
    /// `amplitude * sin(angular_frequency * t)`
    Sine {
        amplitude: AxisValues,
        angular_frequency: f64,
    },
}

impl DisturbanceSpec {
    fn build(&self, n: usize, path: &str) -> Result<(Arc<dyn Disturbance>, f64)> {
        Ok(match self {
            Self::None => (Arc::new(NoDisturbance), 0.0),
            Self::Constant { value } => {
                let v = Vector::from_vec(value.expand(n, &format!("{path}.value"))?);
                (Arc::new(ConstantDisturbance(v)), 0.0)
            }
            Self::Sine {
                amplitude,
                angular_frequency,
            } => {
                let a = Vector::from_vec(amplitude.expand(n, &format!("{path}.amplitude"))?);
                if !angular_frequency.is_finite() {
                    return Err(err(format!("{path}.angular_frequency"), "must be finite"));
                }
                let qt = a.norm() * angular_frequency.abs();
                (
                    Arc::new(SineDisturbance {
                        amplitude: a,
                        angular_frequency: *angular_frequency,
                    }),
                    qt,
                )
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    /// Rows of `B`.
    pub input_matrix: Vec<Vec<f64>>,
    /// Diagonal of `T`, s.
    pub time_constants: AxisValues,
    #[serde(default)]
    pub h1: DynamicsSpec,
    #[serde(default)]
    pub h2: DynamicsSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainsSpec {
    Scaled {
        kp: AxisValues,
        kd: AxisValues,
        k1: AxisValues,
        k2: AxisValues,
        k3: AxisValues,
        omega: f64,
        kappa: f64,
    },
    Raw {
        kp: AxisValues,
        kd: AxisValues,
        k1: AxisValues,
        k2: AxisValues,
        k3: AxisValues,
        #[serde(default)]
        omega: Option<f64>,
        #[serde(default)]
        kappa: Option<f64>,
    },
}

impl GainsSpec {
    /// Unit-bandwidth gains at `(omega, kappa)`.
    pub fn unit_bandwidth(omega: f64, kappa: f64) -> Self {
        Self::Scaled {
            kp: AxisValues::Uniform(1.0),
            kd: AxisValues::Uniform(2.0),
            k1: AxisValues::Uniform(3.0),
            k2: AxisValues::Uniform(3.0),
            k3: AxisValues::Uniform(1.0),
            omega,
            kappa,
        }
    }

    fn sets(&self, n: usize) -> Result<(GainSet, Option<ScalingParams>, bool)> {
        let (kp, kd, k1, k2, k3, scaled) = match self {
            Self::Scaled { kp, kd, k1, k2, k3, .. } => (kp, kd, k1, k2, k3, true),
            Self::Raw { kp, kd, k1, k2, k3, .. } => (kp, kd, k1, k2, k3, false),
        };
        let set = GainSet {
            kp: kp.expand(n, "gains.kp")?,
            kd: kd.expand(n, "gains.kd")?,
            k1: k1.expand(n, "gains.k1")?,
            k2: k2.expand(n, "gains.k2")?,
            k3: k3.expand(n, "gains.k3")?,
        };
        set.validate().map_err(|e| err("gains", e))?;
        let params = match self {
            Self::Scaled { omega, kappa, .. } => Some(params(*omega, *kappa)?),
            Self::Raw {
                omega: Some(w),
                kappa: Some(k),
                ..
            } => Some(params(*w, *k)?),
            Self::Raw {
                omega: None,
                kappa: None,
                ..
            } => None,
            Self::Raw { .. } => return Err(err("gains", "give both `omega` and `kappa` or neither")),
        };
        Ok((set, params, scaled))
    }

    /// `(raw gains, scaled gains, scaling)`; scaled gains need scaling parameters.
    pub fn resolve(&self, n: usize) -> Result<(GainSet, Option<GainSet>, Option<ScalingParams>)> {
        let (set, p, scaled) = self.sets(n)?;
        Ok(match (scaled, p) {
            (true, Some(p)) => (set.unscale(p), Some(set), Some(p)),
            (false, Some(p)) => (set.clone(), Some(set.scale(p)), Some(p)),
            (_, None) => (set, None, None),
        })
    }

    pub fn set_omega(&mut self, w: f64) -> Result<()> {
        match self {
            Self::Scaled { omega, .. } => *omega = w,
            Self::Raw { .. } => return Err(err("gains.form", "bandwidth sweeps need scaled gains")),
        }
        Ok(())
    }
}

fn params(omega: f64, kappa: f64) -> Result<ScalingParams> {
    ScalingParams::new(omega, kappa).map_err(|e| {
        let path = if matches!(e, AdrcError::NonPositive { what, .. } if what.contains("omega")) {
            "gains.omega"
        } else {
            "gains.kappa"
        };
        err(path, e)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    /// `amplitude * sin(angular_frequency * t)` on every axis.
    Sine { amplitude: f64, angular_frequency: f64 },
    /// Sine with the given period whose peak velocity is a multiple of the
    /// sidereal rate.
    SiderealSine { max_velocity_sidereal: f64, period: f64 },
}

impl TrajectorySpec {
    fn build(&self, n: usize) -> Result<Arc<dyn ReferenceTrajectory>> {
        let r = match self {
            Self::Sine {
                amplitude,
                angular_frequency,
            } => sine_reference(*amplitude, *angular_frequency, n),
            Self::SiderealSine {
                max_velocity_sidereal,
                period,
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(err("trajectory.period", "must be strictly positive"));
                }
                let w = 2.0 * std::f64::consts::PI / period;
                sine_reference(max_velocity_sidereal * SIDEREAL_RATE / w, w, n)
            }
        };
        Ok(Arc::new(r.map_err(|e| err("trajectory", e))?))
    }
}

/// Certificate settings: diagonal Lyapunov weights, search grids and,
/// optionally, explicit disturbance bounds (otherwise derived from the plant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    pub qc: AxisValues,
    pub qo: AxisValues,
    pub omega_grid: SearchGrid,
    pub kappa_grid: SearchGrid,
    pub disturbance_bounds: Option<DisturbanceBounds>,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            qc: AxisValues::Uniform(1.0),
            qo: AxisValues::Uniform(1.0),
            omega_grid: SearchGrid::default(),
            kappa_grid: SearchGrid::default(),
            disturbance_bounds: None,
        }
    }
}

/// Cells of a time-constant / bandwidth / rejection sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub time_constants: Vec<f64>,
    pub omegas: Vec<f64>,
    #[serde(default = "both")]
    pub rejection: Vec<bool>,
}

fn both() -> Vec<bool> {
    vec![true, false]
}

/// Telescope experiment: one setup run once per compensation variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelescopeConfig {
    #[serde(default)]
    pub experiment: TelescopeSetup,
    pub variants: Vec<CompensationMode>,
}

impl TelescopeConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text)
    }

    /// Setups in variant order; configuration errors name their path.
    pub fn setups(&self) -> Result<Vec<TelescopeSetup>> {
        if self.variants.is_empty() {
            return Err(err("variants", "must not be empty"));
        }
        self.experiment.scenario().map_err(|e| err("experiment", e))?;
        Ok(self
            .variants
            .iter()
            .map(|&m| TelescopeSetup {
                compensation_mode: m,
                ..self.experiment.clone()
            })
            .collect())
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        err(if path.is_empty() { ".".into() } else { path }, e.into_inner())
    })
}

fn default_step() -> f64 {
    1e-4
}

fn default_stride() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: PlantSpec,
    pub gains: GainsSpec,
    pub trajectory: TrajectorySpec,
    #[serde(default = "yes")]
    pub rejection_enabled: bool,
    #[serde(default)]
    pub compensation_mode: CompensationMode,
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub input_model: InputModel,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub stability: StabilitySpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

/// Everything built from a config.
#[derive(Debug, Clone)]
pub struct Built {
    pub scenario: Scenario,
    pub raw_gains: GainSet,
    pub scaled_gains: Option<GainSet>,
    pub disturbance_bounds: DisturbanceBounds,
}

impl ScenarioConfig {
    /// Parses JSON; errors name the offending path.
    pub fn from_json(text: &str) -> Result<Self> {
        parse(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.plant.input_matrix.len()
    }

    pub fn build(&self) -> Result<Built> {
        let n = self.dim();
        if n == 0 {
            return Err(err("plant.input_matrix", "empty"));
        }
        let b = matrix(&self.plant.input_matrix, n, "plant.input_matrix")?;
        let t = Vector::from_vec(self.plant.time_constants.expand(n, "plant.time_constants")?);
        let model = PlantModel::new(b, t).map_err(|e| match e {
            AdrcError::NonPositiveTimeConstant { index, .. } => err(format!("plant.time_constants[{index}]"), e),
            e => err("plant.input_matrix", e),
        })?;
        let (h1, h1a, h1b) = self.plant.h1.build(n, "plant.h1")?;
        let (h2, h2a, h2b) = self.plant.h2.build(n, "plant.h2")?;
        let (q, qt) = self.plant.disturbance.build(n, "plant.disturbance")?;
        let model = model.with_known_dynamics(h1, h2).with_disturbance(q);

        let (raw, scaled, scaling) = self.gains.resolve(n)?;
        let controller = ControllerGains::new(
            raw.kp_vec(),
            raw.kd_vec(),
            self.compensation_mode,
            self.rejection_enabled,
        )
        .map_err(|e| err("gains", e))?;
        let observer = raw.observer().map_err(|e| err("gains", e))?;
        if let Some(s) = &scaled {
            ScaledSystem::new(s.clone()).map_err(|e| err("gains", e))?;
        }
        let scenario = Scenario {
            model,
            reference: self.trajectory.build(n)?,
            controller,
            observer,
            scaling,
            input_model: self.input_model.clone(),
            duration: self.duration,
            step: self.step,
            record_stride: self.record_stride,
        };
        scenario.validate().map_err(|e| {
            let path = match &e {
                AdrcError::NonPositive { what: "step", .. } => "step",
                AdrcError::StepTooLarge { .. } => "step",
                AdrcError::DurationBelowStep { .. } => "duration",
                AdrcError::NonPositive { what: "duration", .. } => "duration",
                _ => "input_model",
            };
            err(path, e)
        })?;
        let disturbance_bounds = self.stability.disturbance_bounds.unwrap_or(DisturbanceBounds {
            h1_position: h1a,
            h1_velocity: h1b,
            h2_position: h2a,
            h2_velocity: h2b,
            q_time: qt,
            ..Default::default()
        });
        disturbance_bounds
            .validate()
            .map_err(|e| err("stability.disturbance_bounds", e))?;
        Ok(Built {
            scenario,
            raw_gains: raw,
            scaled_gains: scaled,
            disturbance_bounds,
        })
    }

    /// Certificate for the configured plant, gains and weights. Fails when
    /// the gains carry no scaling parameters.
    pub fn certifier(&self) -> Result<(Certifier, ScalingParams)> {
        let built = self.build()?;
        let (Some(scaled), Some(p)) = (built.scaled_gains, built.scenario.scaling) else {
            return Err(err("gains", "the certificate needs omega and kappa"));
        };
        let n = self.dim();
        let sys = ScaledSystem::new(scaled).map_err(|e| err("gains", e))?;
        let qc = Vector::from_vec(self.stability.qc.expand(2 * n, "stability.qc").or_else(|_| {
            self.stability
                .qc
                .expand(n, "stability.qc")
                .map(|v| [v.clone(), v].concat())
        })?);
        let qo = Vector::from_vec(self.stability.qo.expand(3 * n, "stability.qo").or_else(|_| {
            self.stability
                .qo
                .expand(n, "stability.qo")
                .map(|v| [v.clone(), v.clone(), v].concat())
        })?);
        let pair = LyapunovPair::new(&sys, Matrix::from_diagonal(&qc), Matrix::from_diagonal(&qo))
            .map_err(|e| err("stability", e))?;
        let sc = &built.scenario;
        let cert = Certifier::new(
            sys,
            pair,
            sc.model.input_matrix().clone(),
            sc.model.time_constants(),
            built.disturbance_bounds,
            sc.reference.bounds(),
            self.compensation_mode,
        )
        .map_err(|e| err("stability", e))?;
        Ok((cert, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScenarioConfig {
        ScenarioConfig {
            plant: PlantSpec {
                input_matrix: vec![vec![1.0]],
                time_constants: AxisValues::Uniform(0.1),
                h1: DynamicsSpec::Zero,
                h2: DynamicsSpec::Zero,
                disturbance: DisturbanceSpec::None,
            },
            gains: GainsSpec::unit_bandwidth(4.0, 0.01),
            trajectory: TrajectorySpec::Sine {
                amplitude: 1.0,
                angular_frequency: 10.0,
            },
            rejection_enabled: true,
            compensation_mode: CompensationMode::None,
            duration: 1.0,
            step: 1e-4,
            input_model: InputModel::FirstOrderLag,
            record_stride: 1,
            stability: StabilitySpec::default(),
            grid: None,
        }
    }

    #[test]
    fn round_trip() {
        let c = base();
        let back = ScenarioConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let built = back.build().unwrap();
        assert!((built.raw_gains.k1[0] - 12.0).abs() < 1e-12);
        assert!((built.raw_gains.kp[0] - 0.0016).abs() < 1e-15);
    }

    #[test]
    fn errors_name_paths() {
        let mut c = base();
        c.plant.time_constants = AxisValues::Uniform(-1.0);
        match c.build().unwrap_err() {
            AdrcError::Config { path, message } => {
                assert_eq!(path, "plant.time_constants[0]");
                assert!(message.contains("strictly positive"));
            }
            e => panic!("{e:?}"),
        }
        let mut c = base();
        c.gains = GainsSpec::unit_bandwidth(0.0, 0.01);
        assert!(matches!(c.build().unwrap_err(), AdrcError::Config { path, .. } if path == "gains.omega"));

        let text = base().to_json().replace("\"duration\": 1.0", "\"duration\": \"long\"");
        match ScenarioConfig::from_json(&text).unwrap_err() {
            AdrcError::Config { path, .. } => assert_eq!(path, "duration"),
            e => panic!("{e:?}"),
        }
        let text = base().to_json().replace("\"kd\": 2.0", "\"kd\": 2.0, \"kx\": 1.0");
        assert!(matches!(
            ScenarioConfig::from_json(&text).unwrap_err(),
            AdrcError::Config { .. }
        ));
    }

    #[test]
    fn derived_bounds_from_friction() {
        let mut c = base();
        c.plant.h1 = DynamicsSpec::TanhFriction {
            coefficient: Some(0.5),
            schedule: None,
            steepness: 10.0,
        };
        c.plant.disturbance = DisturbanceSpec::Sine {
            amplitude: AxisValues::Uniform(0.2),
            angular_frequency: 3.0,
        };
        let b = c.build().unwrap().disturbance_bounds;
        assert_eq!(b.h1_velocity, 5.0);
        assert!((b.q_time - 0.6).abs() < 1e-15);
    }

    #[test]
    fn raw_gains_without_scaling_have_no_certificate() {
        let mut c = base();
        c.gains = GainsSpec::Raw {
            kp: AxisValues::Uniform(225.0),
            kd: AxisValues::Uniform(24.0),
            k1: AxisValues::Uniform(240.0),
            k2: AxisValues::Uniform(22800.0),
            k3: AxisValues::Uniform(8e5),
            omega: None,
            kappa: None,
        };
        assert!(c.build().unwrap().scenario.scaling.is_none());
        assert!(c.certifier().is_err());
    }
}
