//! Term-by-term evaluation of `V'` along a recorded trajectory.

use serde::Serialize;

use crate::control::CompensationMode;
use crate::error::{AdrcError, Result};
use crate::linalg::set_block;
use crate::model::{DisturbanceJacobians, SplitJacobians};
use crate::observer::c1;
use crate::scaling::{scale_errors_unchecked, scaled_error_derivatives, ScalingParams};
use crate::sim::{InputModel, Sample, Scenario};
use crate::stability::certificate::Certifier;
use crate::{Matrix, Vector};

/// `V' = Y1 + Y2 + Y31 + Y32 + Y4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VdotTerms {
    pub y1: f64,
    pub y2: f64,
    pub y31: f64,
    pub y32: f64,
    pub y4: f64,
}

impl VdotTerms {
    pub fn total(&self) -> f64 {
        self.y1 + self.y2 + self.y31 + self.y32 + self.y4
    }
}

/// Partials entering the auxiliary matrices: `h = h1 + h2` at the plant
/// state, the estimate-evaluated part of `h_u` at `(z1^, z2^)`, the
/// reference-evaluated part at `(x_d, x_d')`, and `q`.
#[derive(Debug, Clone)]
pub struct ChainRuleJacobians {
    pub h: SplitJacobians,
    pub estimate: SplitJacobians,
    pub reference: SplitJacobians,
    pub q: DisturbanceJacobians,
}

/// `(h' - h_u', h_u', q')` expanded through the auxiliary matrices.
#[derive(Debug, Clone)]
pub struct ChainRuleRates {
    pub h_minus_hu: Vector,
    pub hu: Vector,
    pub q: Vector,
}

fn hcat(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks[0].nrows();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        set_block(&mut m, 0, c, b);
        c += b.ncols();
    }
    m
}

/// `z_bar_dot` only needs its first two blocks; the third is multiplied by zeros.
#[allow(clippy::too_many_arguments)]
pub fn chain_rule_rates(
    j: &ChainRuleJacobians,
    p: ScalingParams,
    xd_dot: &Vector,
    xd_ddot: &Vector,
    e_bar_dot: &Vector,
    z_bar_dot: &Vector,
    u_tilde: &Vector,
    t_inv: &Matrix,
) -> ChainRuleRates {
    let n = xd_dot.len();
    let (w, kw) = (p.omega(), p.controller_bandwidth());
    let (h, e, r, q) = (&j.h, &j.estimate, &j.reference, &j.q);
    let zero = Matrix::zeros(n, n);
    let xd = Vector::from_iterator(2 * n, xd_dot.iter().chain(xd_ddot.iter()).copied());

    let w_h1 = hcat(&[&(&h.first - &r.first - &e.first), &(&h.second - &r.second - &e.second)]);
    let w_h2 = hcat(&[&(&h.first - &e.first), &(&h.second - &e.second).scale(kw)]);
    let w_h3 = hcat(&[&e.first, &e.second.scale(w), &zero]);
    let w_h4 = hcat(&[&(&r.first + &e.first), &(&r.second + &e.second)]);
    let w_h5 = hcat(&[&e.first, &e.second.scale(kw)]);
    let w_q1 = hcat(&[&q.position, &q.velocity]);
    let w_q2 = hcat(&[&q.position, &q.velocity.scale(kw)]);

    ChainRuleRates {
        h_minus_hu: &w_h1 * &xd - &w_h2 * e_bar_dot + &w_h3 * z_bar_dot,
        hu: &w_h4 * &xd - &w_h5 * e_bar_dot - &w_h3 * z_bar_dot,
        q: &w_q1 * &xd - &w_q2 * e_bar_dot + &q.input * (t_inv * u_tilde) + &q.time,
    }
}

/// The five terms at one state. `rates` come from [`chain_rule_rates`].
pub fn vdot_terms(
    cert: &Certifier,
    p: ScalingParams,
    e_bar: &Vector,
    z_bar: &Vector,
    u_tilde: &Vector,
    xd_jerk: &Vector,
    rates: &ChainRuleRates,
) -> VdotTerms {
    let n = cert.system().dim();
    let w = p.omega();
    let mut zeta = Vector::zeros(6 * n);
    zeta.rows_mut(0, 2 * n).copy_from(e_bar);
    zeta.rows_mut(2 * n, 3 * n).copy_from(z_bar);
    zeta.rows_mut(5 * n, n).copy_from(u_tilde);
    let b_inv = cert
        .input_matrix()
        .clone()
        .try_inverse()
        .expect("input matrix checked invertible");
    let poc = &cert.pair().po * c1(n);
    let zp = z_bar.transpose() * &poc / (w * w);
    VdotTerms {
        y1: -0.5 * w * zeta.dot(&(cert.qy1(p) * &zeta)),
        y2: u_tilde.dot(&(&b_inv * xd_jerk)),
        y31: (&zp * &rates.h_minus_hu)[0],
        y32: -u_tilde.dot(&(&b_inv * &rates.hu)),
        y4: (&zp * &rates.q)[0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VdotCheck {
    /// `max |V'_numeric - sum Y| / (1 + |V'_numeric|)` over interior samples.
    pub max_residual_ratio: f64,
    pub max_abs_residual: f64,
    pub samples: usize,
}

/// Compares a five-point central difference of `V` over uniformly spaced
/// recorded samples with the evaluated decomposition. Needs the
/// first-order lag input model and a small recording interval.
pub fn vdot_decomposition_check(
    sc: &Scenario,
    samples: &[Sample],
    cert: &Certifier,
    p: ScalingParams,
) -> Result<VdotCheck> {
    if sc.input_model != InputModel::FirstOrderLag {
        return Err(AdrcError::Config {
            path: "input_model".into(),
            message: "the V' decomposition assumes the first-order input lag".into(),
        });
    }
    if !sc.controller.rejection_enabled {
        return Err(AdrcError::Config {
            path: "rejection_enabled".into(),
            message: "the V' decomposition assumes disturbance rejection".into(),
        });
    }
    if samples.len() < 5 {
        return Err(AdrcError::Empty("recorded samples"));
    }
    let n = sc.dim();
    let model = &sc.model;
    let value = |s: &Sample| {
        let (eb, zb) = scale_errors_unchecked(&s.e, &s.z_tilde, p);
        cert.pair().value(&eb, &zb, &s.u_tilde)
    };
    let zero_split = || SplitJacobians {
        first: Matrix::zeros(n, n),
        second: Matrix::zeros(n, n),
    };
    let mut max_ratio = 0.0f64;
    let mut max_abs = 0.0f64;
    for win in samples.windows(5) {
        let s = &win[2];
        let dt = (win[4].t - win[0].t) / 4.0;
        let numeric = (value(&win[0]) - 8.0 * value(&win[1]) + 8.0 * value(&win[3]) - value(&win[4])) / (12.0 * dt);
        let r = sc.reference.sample(s.t);
        let (z1, z2) = (s.z_hat.rows(0, n).into_owned(), s.z_hat.rows(n, n).into_owned());
        let sum = |a: SplitJacobians, b: SplitJacobians| SplitJacobians {
            first: a.first + b.first,
            second: a.second + b.second,
        };
        let h = sum(
            model.h1().jacobians_or_fd(&s.x1, &s.x2, s.t),
            model.h2().jacobians_or_fd(&s.x1, &s.x2, s.t),
        );
        let (estimate, reference) = match sc.controller.compensation_mode {
            CompensationMode::None => (zero_split(), zero_split()),
            CompensationMode::ReferenceBased => (
                zero_split(),
                sum(
                    model.h1().jacobians_or_fd(&r.position, &r.velocity, s.t),
                    model.h2().jacobians_or_fd(&r.position, &r.velocity, s.t),
                ),
            ),
            CompensationMode::EstimateBased => (
                model.h1().jacobians_or_fd(&z1, &z2, s.t),
                model.h2().jacobians_or_fd(&r.position, &r.velocity, s.t),
            ),
        };
        let j = ChainRuleJacobians {
            h,
            estimate,
            reference,
            q: model.disturbance().jacobians_or_fd(&s.x1, &s.x2, &s.u, s.t),
        };
        let (eb, zb) = scale_errors_unchecked(&s.e, &s.z_tilde, p);
        let (eb_dot, zb_dot) = scaled_error_derivatives(
            cert.system(),
            &eb,
            &zb,
            &s.u_tilde,
            &Vector::zeros(n),
            p,
            model.input_matrix(),
        )?;
        let rates = chain_rule_rates(
            &j,
            p,
            &r.velocity,
            &r.acceleration,
            &eb_dot,
            &zb_dot,
            &s.u_tilde,
            cert.time_constant_inverse(),
        );
        let terms = vdot_terms(cert, p, &eb, &zb, &s.u_tilde, &r.jerk, &rates);
        let diff = (numeric - terms.total()).abs();
        max_abs = max_abs.max(diff);
        max_ratio = max_ratio.max(diff / (1.0 + numeric.abs()));
    }
    Ok(VdotCheck {
        max_residual_ratio: max_ratio,
        max_abs_residual: max_abs,
        samples: samples.len() - 4,
    })
}
