use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::{compensation_rate, control_derivative_analytic, feedback_unchecked, ControllerGains};
use crate::error::{check_dim, check_positive, AdrcError, Result};
use crate::model::{tracking_error, PlantModel, ReferenceSample, ReferenceTrajectory};
use crate::observer::{initial_estimate, observer_derivative_unchecked, stack3, ObserverGains};
use crate::scaling::{scale_errors_unchecked, ScaledSystem, ScalingParams};
use crate::sim::integrator::{rk4_step, Trapezoid};
use crate::sim::telescope::{saturate, CurrentLoopConfig};
use crate::Vector;

/// Norm of the full closed-loop state beyond which a run counts as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e9;

/// How the commanded input `v` reaches the plant input `u`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputModel {
    /// `u' = T^-1 (v - u)`
    #[default]
    FirstOrderLag,
    /// `u = v`, the limit of a vanishing time constant.
    Direct,
    /// Desired torque `v` tracked through a PI current loop and an
    /// electrical lag; `u = torque_constant * i`.
    CurrentLoop(CurrentLoopConfig),
}

/// A complete closed-loop run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: PlantModel,
    pub reference: Arc<dyn ReferenceTrajectory>,
    pub controller: ControllerGains,
    pub observer: ObserverGains,
    /// Needed for the scaled error `zeta_bar`; optional for raw-gain runs.
    pub scaling: Option<ScalingParams>,
    pub input_model: InputModel,
    pub duration: f64,
    pub step: f64,
    /// Keep every `record_stride`-th sample; 0 keeps none.
    pub record_stride: usize,
}

/// Closed-loop signals at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x1: Vector,
    pub x2: Vector,
    /// Effective plant input.
    pub u: Vector,
    pub v: Vector,
    pub h_u: Vector,
    pub z_hat: Vector,
    pub e: Vector,
    pub z_tilde: Vector,
    /// `v - u`
    pub u_tilde: Vector,
    /// `|[e_bar; z_bar; u~]|`, NaN without scaling parameters.
    pub zeta_bar_norm: f64,
    /// Motor current, empty unless a current loop is simulated.
    pub current: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `int e1^T e1 dt`
    pub ise: f64,
    /// `int v^T v dt`
    pub isc: f64,
    pub ise_per_axis: Vec<f64>,
    pub diverged: bool,
    pub steps: usize,
    pub final_time: f64,
    /// Largest `|zeta_bar|` over the final 20% of the horizon.
    pub steady_state_sup_zeta_bar: Option<f64>,
    /// Fraction of the horizon with the current-loop voltage saturated.
    pub saturation_fraction: Option<f64>,
    pub windup_warning: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub samples: Vec<Sample>,
    pub metrics: Metrics,
}

struct Outputs {
    reference: ReferenceSample,
    v: Vector,
    h_u: Vector,
    u: Vector,
    saturated: bool,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim("controller gains", n, self.controller.dim())?;
        check_dim("observer gains", n, self.observer.dim())?;
        check_dim("reference", n, self.reference.dim())?;
        check_positive("step", self.step)?;
        check_positive("duration", self.duration)?;
        if self.duration < self.step {
            return Err(AdrcError::DurationBelowStep {
                duration: self.duration,
                step: self.step,
            });
        }
        if self.input_model == InputModel::FirstOrderLag {
            let t_min = self.model.time_constants().min();
            if self.step > 1e-3 * t_min * (1.0 + 1e-12) {
                return Err(AdrcError::StepTooLarge {
                    step: self.step,
                    limit: 1e-3 * t_min,
                });
            }
        }
        if let InputModel::CurrentLoop(c) = &self.input_model {
            c.validate()?;
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.step - 1e-9).ceil() as usize
    }

    fn state_len(&self) -> usize {
        let n = self.dim();
        match self.input_model {
            InputModel::CurrentLoop(_) => 8 * n,
            _ => 6 * n,
        }
    }

    pub fn initial_state(&self) -> Vector {
        let n = self.dim();
        let mut y = Vector::zeros(self.state_len());
        let x1 = Vector::zeros(n);
        y.rows_mut(3 * n, 3 * n).copy_from(&initial_estimate(&x1));
        y
    }

    fn eval(&self, t: f64, y: &Vector) -> (Vector, Outputs) {
        let n = self.dim();
        let x1 = y.rows(0, n).into_owned();
        let x2 = y.rows(n, n).into_owned();
        let u_state = y.rows(2 * n, n).into_owned();
        let z_hat = y.rows(3 * n, 3 * n).into_owned();
        let (z1, z2, z3) = (
            z_hat.rows(0, n).into_owned(),
            z_hat.rows(n, n).into_owned(),
            z_hat.rows(2 * n, n).into_owned(),
        );
        let reference = self.reference.sample(t);
        let ctl = feedback_unchecked(&self.controller, &self.model, &reference, &z1, &z2, &z3, t);
        let mut dy = Vector::zeros(y.len());
        let mut saturated = false;
        let u = match &self.input_model {
            InputModel::FirstOrderLag => {
                dy.rows_mut(2 * n, n)
                    .copy_from(&(&ctl.v - &u_state).component_div(self.model.time_constants()));
                u_state
            }
            InputModel::Direct => ctl.v.clone(),
            InputModel::CurrentLoop(c) => {
                let i = y.rows(6 * n, n).into_owned();
                let integ = y.rows(7 * n, n).into_owned();
                let i_d = &ctl.v / c.torque_constant;
                let i_err = &i_d - &i;
                let pre = &i_err * c.kp + &integ + &i_d * c.feedforward_gain;
                let volt = pre.map(|p| saturate(p, c.voltage_limit));
                saturated = pre.iter().zip(volt.iter()).any(|(p, s)| p != s);
                dy.rows_mut(6 * n, n)
                    .copy_from(&((&volt - &i) / c.electrical_time_constant));
                dy.rows_mut(7 * n, n)
                    .copy_from(&((&i_err - (&pre - &volt) * c.anti_windup_gain) * c.ki));
                i * c.torque_constant
            }
        };
        let bv = self.model.input_matrix() * &ctl.v;
        dy.rows_mut(0, n).copy_from(&x2);
        dy.rows_mut(n, n).copy_from(&self.model.acceleration(&x1, &x2, &u, t));
        dy.rows_mut(3 * n, 3 * n).copy_from(&observer_derivative_unchecked(
            &self.observer,
            &z_hat,
            &x1,
            &ctl.h_u,
            &bv,
        ));
        (
            dy,
            Outputs {
                reference,
                v: ctl.v,
                h_u: ctl.h_u,
                u,
                saturated,
            },
        )
    }

    fn sample(&self, t: f64, y: &Vector, out: &Outputs) -> Sample {
        let n = self.dim();
        let x1 = y.rows(0, n).into_owned();
        let x2 = y.rows(n, n).into_owned();
        let z_hat = y.rows(3 * n, 3 * n).into_owned();
        let e =
            tracking_error(&out.reference.position, &out.reference.velocity, &x1, &x2).expect("dimensions validated");
        let z3 = self.model.disturbance().eval(&x1, &x2, &out.u, t) + self.model.known(&x1, &x2, t) - &out.h_u;
        let z_tilde = stack3(&x1, &x2, &z3) - &z_hat;
        let u_tilde = &out.v - &out.u;
        let zeta_bar_norm = match self.scaling {
            Some(p) => {
                let (eb, zb) = scale_errors_unchecked(&e, &z_tilde, p);
                (eb.norm_squared() + zb.norm_squared() + u_tilde.norm_squared()).sqrt()
            }
            None => f64::NAN,
        };
        let current = match self.input_model {
            InputModel::CurrentLoop(_) => y.rows(6 * n, n).into_owned(),
            _ => Vector::zeros(0),
        };
        Sample {
            t,
            x1,
            x2,
            u: out.u.clone(),
            v: out.v.clone(),
            h_u: out.h_u.clone(),
            z_hat,
            e,
            z_tilde,
            u_tilde,
            zeta_bar_norm,
            current,
        }
    }
}

/// Fixed-step RK4 run from `x = 0`, `u = 0`, `z^ = (x1(0), 0, 0)`.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    sc.validate()?;
    let n = sc.dim();
    let h = sc.step;
    let steps = sc.step_count();
    let t_end = steps as f64 * h;
    let tail_start = 0.8 * t_end;

    let mut y = sc.initial_state();
    let mut ise = Trapezoid::default();
    let mut isc = Trapezoid::default();
    let mut ise_axis = vec![Trapezoid::default(); n];
    let mut samples = Vec::new();
    let mut sup_zeta = f64::NEG_INFINITY;
    let mut saturated_steps = 0usize;
    let mut diverged = false;
    let mut completed = 0usize;

    for k in 0..=steps {
        let t = k as f64 * h;
        let (k1, out) = sc.eval(t, &y);
        if k1.iter().any(|v| v.is_nan()) {
            return Err(AdrcError::NonFinite { step: k, time: t });
        }
        let e1 = &out.reference.position - y.rows(0, n);
        ise.push(e1.norm_squared(), h);
        for (i, acc) in ise_axis.iter_mut().enumerate() {
            acc.push(e1[i] * e1[i], h);
        }
        isc.push(out.v.norm_squared(), h);

        let record = sc.record_stride > 0 && (k % sc.record_stride == 0 || k == steps);
        let need_zeta = sc.scaling.is_some() && t >= tail_start - 1e-12;
        if record || need_zeta {
            let s = sc.sample(t, &y, &out);
            if need_zeta {
                sup_zeta = sup_zeta.max(s.zeta_bar_norm);
            }
            if record {
                samples.push(s);
            }
        }
        if k == steps {
            break;
        }
        if out.saturated {
            saturated_steps += 1;
        }
        let next = rk4_step(|tt, yy| sc.eval(tt, yy).0, t, &y, h, &k1);
        completed = k + 1;
        let norm = next.norm();
        if norm.is_nan() {
            return Err(AdrcError::NonFinite {
                step: k + 1,
                time: t + h,
            });
        }
        if norm > DIVERGENCE_THRESHOLD {
            diverged = true;
            break;
        }
        y = next;
    }

    let saturation_fraction = match sc.input_model {
        InputModel::CurrentLoop(_) => Some(saturated_steps as f64 / completed.max(1) as f64),
        _ => None,
    };
    Ok(ScenarioResult {
        samples,
        metrics: Metrics {
            ise: ise.value(),
            isc: isc.value(),
            ise_per_axis: ise_axis.iter().map(|a| a.value()).collect(),
            diverged,
            steps: completed,
            final_time: completed as f64 * h,
            steady_state_sup_zeta_bar: (!diverged && sup_zeta.is_finite()).then_some(sup_zeta),
            windup_warning: saturation_fraction.is_some_and(|f| f > 0.5),
            saturation_fraction,
        },
    })
}

/// Comparison of the analytic control rate with a central difference of
/// the recorded command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlRateCheck {
    pub max_relative_deviation: f64,
    pub max_absolute_deviation: f64,
    pub peak_rate: f64,
    pub samples: usize,
}

/// Analytic `v'` at a recorded sample.
pub fn analytic_control_rate(sc: &Scenario, sys: &ScaledSystem, p: ScalingParams, s: &Sample) -> Result<Vector> {
    let n = sc.dim();
    let (z1, z2) = (s.z_hat.rows(0, n).into_owned(), s.z_hat.rows(n, n).into_owned());
    let reference = sc.reference.sample(s.t);
    let bv = sc.model.input_matrix() * &s.v;
    let zd = observer_derivative_unchecked(&sc.observer, &s.z_hat, &s.x1, &s.h_u, &bv);
    let hu_dot = compensation_rate(
        sc.controller.compensation_mode,
        &sc.model,
        &reference,
        &z1,
        &z2,
        &zd.rows(0, n).into_owned(),
        &zd.rows(n, n).into_owned(),
        s.t,
    );
    let (eb, zb) = scale_errors_unchecked(&s.e, &s.z_tilde, p);
    control_derivative_analytic(sys, &eb, &zb, p, &hu_dot, &reference.jerk, sc.model.input_inverse())
}

/// Relative deviation at interior samples is `|a - d| / max(|a|, 1e-3 peak)`
/// where `peak` is the largest analytic rate over the run, so that zero
/// crossings of `v'` do not dominate.
pub fn control_rate_check(sc: &Scenario, samples: &[Sample]) -> Result<ControlRateCheck> {
    let p = sc
        .scaling
        .ok_or(AdrcError::Empty("scaling parameters for the control-rate check"))?;
    if !sc.controller.rejection_enabled {
        return Err(AdrcError::Config {
            path: "rejection_enabled".into(),
            message: "the analytic control rate assumes disturbance rejection".into(),
        });
    }
    if samples.len() < 3 {
        return Err(AdrcError::Empty("recorded samples"));
    }
    let raw = crate::scaling::GainSet {
        kp: sc.controller.kp().iter().copied().collect(),
        kd: sc.controller.kd().iter().copied().collect(),
        k1: sc.observer.k1().iter().copied().collect(),
        k2: sc.observer.k2().iter().copied().collect(),
        k3: sc.observer.k3().iter().copied().collect(),
    };
    let sys = ScaledSystem::from_raw(&raw, p)?;
    let mut analytic = Vec::with_capacity(samples.len() - 2);
    let mut numeric = Vec::with_capacity(samples.len() - 2);
    for w in samples.windows(3) {
        analytic.push(analytic_control_rate(sc, &sys, p, &w[1])?);
        numeric.push((&w[2].v - &w[0].v) / (w[2].t - w[0].t));
    }
    let peak = analytic.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let floor = 1e-3 * peak;
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for (a, d) in analytic.iter().zip(&numeric) {
        let diff = (a - d).norm();
        max_abs = max_abs.max(diff);
        max_rel = max_rel.max(diff / a.norm().max(floor).max(f64::MIN_POSITIVE));
    }
    Ok(ControlRateCheck {
        max_relative_deviation: max_rel,
        max_absolute_deviation: max_abs,
        peak_rate: peak,
        samples: analytic.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::CompensationMode;
    use crate::model::{sine_reference, ConstantDisturbance};
    use crate::scaling::GainSet;
    use crate::Matrix;

    fn scenario(t: f64, omega: f64, rejection: bool, amplitude: f64) -> Scenario {
        let p = ScalingParams::new(omega, 0.01).unwrap();
        let raw = GainSet::unit_bandwidth(1).unscale(p);
        Scenario {
            model: PlantModel::new(Matrix::identity(1, 1), Vector::from_element(1, t)).unwrap(),
            reference: Arc::new(sine_reference(amplitude, 10.0, 1).unwrap()),
            controller: ControllerGains::new(raw.kp_vec(), raw.kd_vec(), CompensationMode::None, rejection).unwrap(),
            observer: raw.observer().unwrap(),
            scaling: Some(p),
            input_model: InputModel::FirstOrderLag,
            duration: 1.0,
            step: 1e-4,
            record_stride: 100,
        }
    }

    #[test]
    fn equilibrium_stays_at_rest() {
        let r = run_scenario(&scenario(0.1, 1.0, true, 0.0)).unwrap();
        assert_eq!(r.metrics.ise, 0.0);
        assert_eq!(r.metrics.isc, 0.0);
        assert!(!r.metrics.diverged);
        assert!(r.samples.iter().all(|s| s.e.norm() == 0.0));
        assert_eq!(r.samples.len(), 101);
    }

    #[test]
    fn rejects_coarse_step_for_fast_lag() {
        let mut sc = scenario(0.01, 1.0, true, 1.0);
        sc.step = 1e-4;
        assert!(matches!(run_scenario(&sc), Err(AdrcError::StepTooLarge { .. })));
        sc.step = 1e-5;
        sc.duration = 1e-3;
        assert!(run_scenario(&sc).is_ok());
    }

    #[test]
    fn direct_input_removes_lag_error() {
        let mut sc = scenario(0.1, 10.0, true, 0.0);
        sc.input_model = InputModel::Direct;
        sc.model = sc
            .model
            .with_disturbance(Arc::new(ConstantDisturbance(Vector::from_element(1, 0.7))));
        let r = run_scenario(&sc).unwrap();
        assert!(r.samples.iter().all(|s| s.u_tilde.norm() == 0.0));
    }

    #[test]
    fn metrics_grow_with_horizon() {
        let mut sc = scenario(0.1, 1.0, true, 1.0);
        sc.duration = 0.5;
        let a = run_scenario(&sc).unwrap().metrics;
        sc.duration = 1.0;
        let b = run_scenario(&sc).unwrap().metrics;
        assert!(b.ise >= a.ise && b.isc >= a.isc);
        assert!(a.ise > 0.0);
        let sum: f64 = b.ise_per_axis.iter().sum();
        assert!((sum - b.ise).abs() < 1e-12 * b.ise);
    }
}
