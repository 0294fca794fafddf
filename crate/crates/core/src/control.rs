//! Feedback law
//!
//! ```text
//! v = B^-1 (Kp (xd - z1^) + Kd (xd' - z2^) - h_u + xd'' - w_c)
//! ```
//!
//! with `w_c = z3^` when disturbance rejection is enabled.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, AdrcError, Result};
use crate::model::{PlantModel, ReferenceSample};
use crate::scaling::{delta_unchecked, ScaledSystem, ScalingParams};
use crate::{Matrix, Vector};

/// Which known dynamics are cancelled in the feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationMode {
    /// `h_u = 0`
    #[default]
    None,
    /// `h_u = h1(xd, xd') + h2(xd, xd')`
    ReferenceBased,
    /// `h_u = h1(z1^, z2^) + h2(xd, xd')`
    EstimateBased,
}

impl CompensationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::ReferenceBased => "reference_based",
            Self::EstimateBased => "estimate_based",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    kp: Vector,
    kd: Vector,
    pub compensation_mode: CompensationMode,
    pub rejection_enabled: bool,
}

impl ControllerGains {
    /// `kp`, `kd` are the diagonals of `Kp`, `Kd`.
    pub fn new(kp: Vector, kd: Vector, compensation_mode: CompensationMode, rejection_enabled: bool) -> Result<Self> {
        if kp.is_empty() {
            return Err(AdrcError::Empty("controller gains"));
        }
        check_dim("controller gain Kd", kp.len(), kd.len())?;
        for (what, g) in [("Kp", &kp), ("Kd", &kd)] {
            for (index, &value) in g.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(AdrcError::InvalidGain { what, index, value });
                }
            }
        }
        Ok(Self {
            kp,
            kd,
            compensation_mode,
            rejection_enabled,
        })
    }

    pub fn dim(&self) -> usize {
        self.kp.len()
    }

    pub fn kp(&self) -> &Vector {
        &self.kp
    }

    pub fn kd(&self) -> &Vector {
        &self.kd
    }

    /// `Kc = [Kp Kd]`.
    pub fn kc(&self) -> Matrix {
        crate::scaling::build_kc(&self.kp, &self.kd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub v: Vector,
    pub h_u: Vector,
}

/// Compensation term `h_u`.
pub fn compensation(
    mode: CompensationMode,
    model: &PlantModel,
    reference: &ReferenceSample,
    z1_hat: &Vector,
    z2_hat: &Vector,
    t: f64,
) -> Vector {
    let (xd, vd) = (&reference.position, &reference.velocity);
    match mode {
        CompensationMode::None => Vector::zeros(xd.len()),
        CompensationMode::ReferenceBased => model.known(xd, vd, t),
        CompensationMode::EstimateBased => model.h1().eval(z1_hat, z2_hat, t) + model.h2().eval(xd, vd, t),
    }
}

/// Time derivative of `h_u` by the chain rule, given the observer rates.
/// Schedule switching instants are not differentiated.
#[allow(clippy::too_many_arguments)]
pub fn compensation_rate(
    mode: CompensationMode,
    model: &PlantModel,
    reference: &ReferenceSample,
    z1_hat: &Vector,
    z2_hat: &Vector,
    z1_hat_dot: &Vector,
    z2_hat_dot: &Vector,
    t: f64,
) -> Vector {
    let (xd, vd, ad) = (&reference.position, &reference.velocity, &reference.acceleration);
    let along_ref = |h: &dyn crate::model::KnownDynamics| {
        let j = h.jacobians_or_fd(xd, vd, t);
        &j.first * vd + &j.second * ad
    };
    match mode {
        CompensationMode::None => Vector::zeros(xd.len()),
        CompensationMode::ReferenceBased => along_ref(model.h1()) + along_ref(model.h2()),
        CompensationMode::EstimateBased => {
            let j = model.h1().jacobians_or_fd(z1_hat, z2_hat, t);
            &j.first * z1_hat_dot + &j.second * z2_hat_dot + along_ref(model.h2())
        }
    }
}

pub fn feedback(
    gains: &ControllerGains,
    model: &PlantModel,
    reference: &ReferenceSample,
    z1_hat: &Vector,
    z2_hat: &Vector,
    z3_hat: &Vector,
    t: f64,
) -> Result<ControlOutput> {
    let n = gains.dim();
    check_dim("plant", n, model.dim())?;
    check_dim("reference", n, reference.position.len())?;
    for (ctx, z) in [
        ("z1 estimate", z1_hat),
        ("z2 estimate", z2_hat),
        ("z3 estimate", z3_hat),
    ] {
        check_dim(ctx, n, z.len())?;
    }
    Ok(feedback_unchecked(gains, model, reference, z1_hat, z2_hat, z3_hat, t))
}

pub(crate) fn feedback_unchecked(
    gains: &ControllerGains,
    model: &PlantModel,
    reference: &ReferenceSample,
    z1_hat: &Vector,
    z2_hat: &Vector,
    z3_hat: &Vector,
    t: f64,
) -> ControlOutput {
    let h_u = compensation(gains.compensation_mode, model, reference, z1_hat, z2_hat, t);
    let mut rhs = gains.kp.component_mul(&(&reference.position - z1_hat))
        + gains.kd.component_mul(&(&reference.velocity - z2_hat))
        - &h_u
        + &reference.acceleration;
    if gains.rejection_enabled {
        rhs -= z3_hat;
    }
    ControlOutput {
        v: model.input_inverse() * rhs,
        h_u,
    }
}

/// Analytic control rate in scaled coordinates (valid with rejection on):
///
/// ```text
/// v' = B^-1 (w^3 (k^3 Kc_bar Hc_bar e_bar
///        + (k Kc_bar W1_bar Delta3(k) + W2_bar Delta3(k) Ho_bar) z_bar) - h_u' + xd''')
/// ```
pub fn control_derivative_analytic(
    sys: &ScaledSystem,
    e_bar: &Vector,
    z_bar: &Vector,
    p: ScalingParams,
    hu_dot: &Vector,
    xd_jerk: &Vector,
    b_inv: &Matrix,
) -> Result<Vector> {
    let n = sys.dim();
    check_dim("scaled tracking error", 2 * n, e_bar.len())?;
    check_dim("scaled observation error", 3 * n, z_bar.len())?;
    check_dim("compensation rate", n, hu_dot.len())?;
    check_dim("reference jerk", n, xd_jerk.len())?;
    check_dim("inverse input matrix", n, b_inv.nrows())?;
    let (w, k) = (p.omega(), p.kappa());
    let d3k = delta_unchecked(3, k, n);
    let ce = (sys.kc() * sys.hc()).scale(k * k * k);
    let cz = (sys.kc() * sys.w1() * &d3k).scale(k) + sys.w2() * &d3k * sys.ho();
    let inner = (ce * e_bar + cz * z_bar).scale(w * w * w) - hu_dot + xd_jerk;
    Ok(b_inv * inner)
}
