use serde::Serialize;

use crate::control::CompensationMode;
use crate::error::{check_dim, Result};
use crate::linalg::{definiteness, set_block, spectral_norm};
use crate::model::{DisturbanceBounds, TrajectoryBounds};
use crate::observer::{c0, c1};
use crate::scaling::{c2, delta_unchecked, ScaledSystem, ScalingParams};
use crate::stability::lyapunov::LyapunovPair;
use crate::{Matrix, Vector};

/// `coefficient * |zeta| + quadratic * |zeta|^2` bound on one term of `V'`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundPair {
    pub linear: f64,
    pub quadratic: f64,
}

/// Bounds on the four perturbation terms of `V'`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerturbationBounds {
    pub y2: BoundPair,
    pub y31: BoundPair,
    pub y32: BoundPair,
    pub y4: BoundPair,
}

impl PerturbationBounds {
    pub fn linear_sum(&self) -> f64 {
        self.y2.linear + self.y31.linear + self.y32.linear + self.y4.linear
    }

    pub fn quadratic_sum(&self) -> f64 {
        self.y2.quadratic + self.y31.quadratic + self.y32.quadratic + self.y4.quadratic
    }
}

/// Bounds on the partials of the compensation term, split by argument.
///
/// `h_u = c_est(z1^, z2^) + c_ref(xd, xd')`; `est_*` bound the partials of
/// `c_est` and `ref_*` those of `c_ref` with respect to their first (`a`)
/// and second (`b`) argument.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CompensationBounds {
    pub est_a: f64,
    pub est_b: f64,
    pub ref_a: f64,
    pub ref_b: f64,
}

impl CompensationBounds {
    pub fn new(mode: CompensationMode, d: &DisturbanceBounds) -> Self {
        match mode {
            CompensationMode::None => Self::default(),
            CompensationMode::ReferenceBased => Self {
                est_a: 0.0,
                est_b: 0.0,
                ref_a: d.h1_position + d.h2_position,
                ref_b: d.h1_velocity + d.h2_velocity,
            },
            CompensationMode::EstimateBased => Self {
                est_a: d.h1_position,
                est_b: d.h1_velocity,
                ref_a: d.h2_position,
                ref_b: d.h2_velocity,
            },
        }
    }
}

/// Values of the measures as printed in the source derivation: the
/// auxiliary matrices take `h1` as the estimate-evaluated part regardless
/// of mode, and the two lines of `Gamma_V` are summed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedMeasures {
    pub lambda_v: f64,
    pub gamma_v: f64,
    pub y31: BoundPair,
    pub y32: BoundPair,
    pub y4: BoundPair,
    /// `|W_h2b|` with `[2 h1a + h2a, kw (2 h1b + h2b)]`
    pub w_h2b_norm: f64,
    /// The `Y31` linear coefficient recomputed with `W_h2b`'s column
    /// bounds instead of the uniform factor 2; differs from `y31.linear`
    /// whenever `h2` bounds are nonzero.
    pub y31_linear_w_h2b_variant: f64,
}

/// Everything the certificate reports at one `(omega, kappa)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCertificate {
    pub omega: f64,
    pub kappa: f64,
    #[serde(serialize_with = "ser_rows")]
    pub qy1: Matrix,
    pub lambda_min_qy1: f64,
    pub lambda_max_qy1: f64,
    pub qy1_positive_definite: bool,
    pub lambda_v: f64,
    pub gamma_v: f64,
    /// `Gamma_V / Lambda_V`, infinite when `Lambda_V <= 0`
    #[serde(serialize_with = "ser_finite")]
    pub error_bound: f64,
    /// Radius of the smallest `V` level set containing the ball of radius
    /// `error_bound`, measured in `|zeta|`.
    #[serde(serialize_with = "ser_finite")]
    pub level_set_bound: f64,
    pub bounds: PerturbationBounds,
    pub printed: PrintedMeasures,
}

impl PointCertificate {
    /// `Q_Y1 > 0` and `Lambda_V > 0`.
    pub fn certified(&self) -> bool {
        self.qy1_positive_definite && self.lambda_v > 0.0
    }
}

pub(crate) fn ser_finite<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

pub(crate) fn ser_rows<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    crate::linalg::to_rows(m).serialize(s)
}

/// Lyapunov certificate for one plant/gain/weight configuration, evaluated
/// at any `(omega, kappa)`.
#[derive(Debug, Clone)]
pub struct Certifier {
    sys: ScaledSystem,
    pair: LyapunovPair,
    b: Matrix,
    b_inv: Matrix,
    t_inv: Matrix,
    disturbance: DisturbanceBounds,
    trajectory: TrajectoryBounds,
    mode: CompensationMode,
    // omega/kappa independent norms
    n_b: f64,
    n_b_inv: f64,
    n_t_inv: f64,
    n_po_c1: f64,
    n_hc: f64,
    n_ho: f64,
    n_w1: f64,
}

impl Certifier {
    pub fn new(
        sys: ScaledSystem,
        pair: LyapunovPair,
        b: Matrix,
        time_constants: &Vector,
        disturbance: DisturbanceBounds,
        trajectory: TrajectoryBounds,
        mode: CompensationMode,
    ) -> Result<Self> {
        let n = sys.dim();
        check_dim("input matrix", n, b.nrows())?;
        check_dim("time constants", n, time_constants.len())?;
        disturbance.validate()?;
        let b_inv = b
            .clone()
            .try_inverse()
            .ok_or(crate::AdrcError::SingularInput { ratio: 0.0 })?;
        let t_inv = Matrix::from_diagonal(&time_constants.map(|t| 1.0 / t));
        Ok(Self {
            n_b: spectral_norm(&b),
            n_b_inv: spectral_norm(&b_inv),
            n_t_inv: spectral_norm(&t_inv),
            n_po_c1: spectral_norm(&(&pair.po * c1(n))),
            n_hc: spectral_norm(sys.hc()),
            n_ho: spectral_norm(sys.ho()),
            n_w1: spectral_norm(sys.w1()),
            sys,
            pair,
            b,
            b_inv,
            t_inv,
            disturbance,
            trajectory,
            mode,
        })
    }

    pub fn system(&self) -> &ScaledSystem {
        &self.sys
    }

    pub fn pair(&self) -> &LyapunovPair {
        &self.pair
    }

    pub fn input_matrix(&self) -> &Matrix {
        &self.b
    }

    pub fn time_constant_inverse(&self) -> &Matrix {
        &self.t_inv
    }

    pub fn mode(&self) -> CompensationMode {
        self.mode
    }

    pub fn disturbance(&self) -> &DisturbanceBounds {
        &self.disturbance
    }

    pub fn trajectory(&self) -> &TrajectoryBounds {
        &self.trajectory
    }

    /// Same certificate with different input time constants.
    pub fn with_time_constants(&self, time_constants: &Vector) -> Result<Self> {
        Self::new(
            self.sys.clone(),
            self.pair.clone(),
            self.b.clone(),
            time_constants,
            self.disturbance,
            self.trajectory,
            self.mode,
        )
    }

    /// `M = k Kc_bar W1_bar Delta3(k) + W2_bar Delta3(k) Ho_bar`.
    fn m_matrix(&self, kappa: f64) -> Matrix {
        let d3k = delta_unchecked(3, kappa, self.sys.dim());
        (self.sys.kc() * self.sys.w1() * &d3k).scale(kappa) + self.sys.w2() * &d3k * self.sys.ho()
    }

    /// Symmetric `6n x 6n` matrix with `Y1 = -omega zeta^T Q_Y1 zeta / 2`.
    pub fn qy1(&self, p: ScalingParams) -> Matrix {
        let n = self.sys.dim();
        let (w, k) = (p.omega(), p.kappa());
        let pc = &self.pair.pc;
        let po = &self.pair.po;
        let pcw1 = pc * self.sys.w1() * delta_unchecked(3, k, n);
        let q12 = pcw1.scale(-1.0 / k);
        let q13 = (pc * c2(n) * &self.b).scale(-1.0 / (k * w * w))
            - (&self.b_inv * self.sys.kc() * self.sys.hc())
                .transpose()
                .scale(k * k * k * w * w);
        let q23 =
            (po * c0(n) * &self.b).scale(-1.0 / (w * w)) - (&self.b_inv * self.m_matrix(k)).transpose().scale(w * w);

        let mut q = Matrix::zeros(6 * n, 6 * n);
        set_block(&mut q, 0, 0, &self.pair.qc.scale(k));
        set_block(&mut q, 0, 2 * n, &q12);
        set_block(&mut q, 2 * n, 0, &q12.transpose());
        set_block(&mut q, 0, 5 * n, &q13);
        set_block(&mut q, 5 * n, 0, &q13.transpose());
        set_block(&mut q, 2 * n, 2 * n, &self.pair.qo);
        set_block(&mut q, 2 * n, 5 * n, &q23);
        set_block(&mut q, 5 * n, 2 * n, &q23.transpose());
        set_block(&mut q, 5 * n, 5 * n, &self.t_inv.scale(2.0 / w));
        q
    }

    /// Factors bounding `|e_bar'|` and `|z_bar'|` (without the `z3'` part,
    /// which the auxiliary matrices never see) by `|zeta|`.
    fn rate_factors(&self, p: ScalingParams) -> (f64, f64) {
        let n = self.sys.dim();
        let (w, k) = (p.omega(), p.kappa());
        let kw = k * w;
        let w1d = spectral_norm(&(self.sys.w1() * delta_unchecked(3, k, n)));
        let fe = kw * self.n_hc + w / k * w1d + self.n_b / kw;
        let fz = w * self.n_ho + self.n_b / w;
        (fe, fz)
    }

    /// Sound bounds derived from the chain-rule expansions of `h' - h_u'`,
    /// `h_u'` and `q'` with spectral norms.
    pub fn perturbation_bounds(&self, p: ScalingParams) -> PerturbationBounds {
        let (w, k) = (p.omega(), p.kappa());
        let kw = k * w;
        let d = &self.disturbance;
        let x = &self.trajectory;
        let c = CompensationBounds::new(self.mode, d);
        let (fe, fz) = self.rate_factors(p);
        let (ha, hb) = (d.h1_position + d.h2_position, d.h1_velocity + d.h2_velocity);
        let hyp = |a: f64, b: f64| a.hypot(b);

        let w_h1 = (ha + c.ref_a + c.est_a, hb + c.ref_b + c.est_b);
        let w_h2b = hyp(ha + c.est_a, kw * (hb + c.est_b));
        let w_h3b = hyp(c.est_a, w * c.est_b);
        let w_h4 = (c.ref_a + c.est_a, c.ref_b + c.est_b);
        let w_h5b = hyp(c.est_a, kw * c.est_b);
        let w_q2b = hyp(d.q_position, kw * d.q_velocity);
        let po = self.n_po_c1 / (w * w);

        PerturbationBounds {
            y2: BoundPair {
                linear: self.n_b_inv * x.jerk,
                quadratic: 0.0,
            },
            y31: BoundPair {
                linear: po * (w_h1.0 * x.velocity + w_h1.1 * x.acceleration),
                quadratic: po * (w_h2b * fe + w_h3b * fz),
            },
            y32: BoundPair {
                linear: self.n_b_inv * (w_h4.0 * x.velocity + w_h4.1 * x.acceleration),
                quadratic: self.n_b_inv * (w_h5b * fe + w_h3b * fz),
            },
            y4: BoundPair {
                linear: po * (d.q_position * x.velocity + d.q_velocity * x.acceleration + d.q_time),
                quadratic: po * (w_q2b * fe + self.n_t_inv * d.q_input),
            },
        }
    }

    /// Measures and bounds exactly as printed in the source derivation.
    pub fn printed_measures(&self, p: ScalingParams, lambda_min: f64) -> PrintedMeasures {
        let (w, k) = (p.omega(), p.kappa());
        let kw = k * w;
        let d = &self.disturbance;
        let x = &self.trajectory;
        let (h1a, h1b, h2a, h2b) = (d.h1_position, d.h1_velocity, d.h2_position, d.h2_velocity);
        let w_h2b = (2.0 * h1a + h2a).hypot(kw * (2.0 * h1b + h2b));
        let w_h3b = h1a.hypot(w * h1b);
        let w_h5b = h1a.hypot(kw * h1b);
        let w_q2b = d.q_position.hypot(kw * d.q_velocity);
        let poc = self.n_po_c1;
        let hcw1 = self.n_hc + self.n_w1;
        let (nb, nbi, nti) = (self.n_b, self.n_b_inv, self.n_t_inv);

        let y31 = BoundPair {
            linear: poc / (w * w) * ((2.0 * h1a + 2.0 * h2a) * x.velocity + (2.0 * h1b + 2.0 * h2b) * x.acceleration),
            quadratic: poc * (k / w * w_h2b * hcw1 + w_h2b * nb / (w * w * w * k))
                + poc * (w_h3b * self.n_ho / w + nb * h1b / (w * w)),
        };
        let y31_variant = poc / (w * w) * ((2.0 * h1a + h2a) * x.velocity + (2.0 * h1b + h2b) * x.acceleration);
        let q_line = d.q_position * x.velocity
            + d.q_velocity * x.acceleration
            + nb * d.q_velocity
            + nti * d.q_input
            + poc * d.q_time;
        let y32 = BoundPair {
            linear: poc / (w * w) * q_line,
            quadratic: k / w * poc * w_q2b * hcw1,
        };
        let y4 = BoundPair {
            linear: poc / (w * w) * (d.q_position * x.velocity + d.q_velocity * x.acceleration),
            quadratic: poc * w_q2b / w * (self.n_hc + self.n_ho + nb / (w * w))
                + poc / (w * w) * (nti * d.q_input + d.q_time),
        };
        let lambda_v = 0.5 * w * lambda_min
            - kw * nbi * w_h5b * hcw1
            - w * nbi * w_h3b * self.n_ho
            - 2.0 * h1b
            - w_h3b * self.n_ho / w
            - k / w * poc * (w_h2b + w_q2b) * hcw1
            - nb * h1b / (w * w)
            - w_h2b * nb / (w * w * w * k);
        let gamma_v = nbi * ((h2a + h1a) * x.velocity + (h2b + h1b) * x.acceleration) + poc / (w * w) * q_line;
        PrintedMeasures {
            lambda_v,
            gamma_v,
            y31,
            y32,
            y4,
            w_h2b_norm: w_h2b,
            y31_linear_w_h2b_variant: y31_variant,
        }
    }

    /// `(Lambda_V, Gamma_V)` from the derived bounds.
    pub fn lyapunov_measures(&self, p: ScalingParams) -> (f64, f64) {
        let lam = definiteness(&self.qy1(p)).lambda_min;
        let b = self.perturbation_bounds(p);
        (0.5 * p.omega() * lam - b.quadratic_sum(), b.linear_sum())
    }

    pub fn evaluate(&self, p: ScalingParams) -> PointCertificate {
        let qy1 = self.qy1(p);
        let def = definiteness(&qy1);
        let bounds = self.perturbation_bounds(p);
        let lambda_v = 0.5 * p.omega() * def.lambda_min - bounds.quadratic_sum();
        let gamma_v = bounds.linear_sum();
        let error_bound = if lambda_v > 0.0 {
            gamma_v / lambda_v
        } else {
            f64::INFINITY
        };
        let (vmin, vmax) = self.pair.value_extremes();
        PointCertificate {
            omega: p.omega(),
            kappa: p.kappa(),
            lambda_min_qy1: def.lambda_min,
            lambda_max_qy1: def.lambda_max,
            qy1_positive_definite: def.positive_definite,
            lambda_v,
            gamma_v,
            error_bound,
            level_set_bound: error_bound * (vmax / vmin).sqrt(),
            bounds,
            printed: self.printed_measures(p, def.lambda_min),
            qy1,
        }
    }
}
