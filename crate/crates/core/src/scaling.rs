//! Bandwidth scaling.
//!
//! Gains are parameterised by the observer bandwidth `omega` and the relative
//! controller bandwidth `kappa`:
//!
//! ```text
//! Kp = (kappa omega)^2 Kp_bar     Kd = kappa omega Kd_bar
//! K1 = omega K1_bar   K2 = omega^2 K2_bar   K3 = omega^3 K3_bar
//! ```
//!
//! and errors are scaled as `e_bar = [e1; e2 / (kappa omega)]`,
//! `z_bar = [z~1; z~2 / omega; z~3 / omega^2]`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_positive, AdrcError, Result};
use crate::linalg::{identity, max_abs, set_block};
use crate::observer::{build_ho, c0, c1, ObserverGains};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    omega: f64,
    kappa: f64,
}

impl ScalingParams {
    pub fn new(omega: f64, kappa: f64) -> Result<Self> {
        check_positive("observer bandwidth omega", omega)?;
        check_positive("relative bandwidth kappa", kappa)?;
        Ok(Self { omega, kappa })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Controller bandwidth `kappa * omega`.
    pub fn controller_bandwidth(&self) -> f64 {
        self.kappa * self.omega
    }
}

/// `Delta_m(alpha) = diag(alpha^(m-1) I, ..., alpha I, I)` with `n x n` blocks.
pub fn delta(m: usize, alpha: f64, n: usize) -> Result<Matrix> {
    check_positive("delta argument", alpha)?;
    Ok(delta_unchecked(m, alpha, n))
}

pub(crate) fn delta_unchecked(m: usize, alpha: f64, n: usize) -> Matrix {
    let d = Vector::from_fn(m * n, |i, _| alpha.powi((m - 1 - i / n) as i32));
    Matrix::from_diagonal(&d)
}

/// `H_c = [0 I; -Kp -Kd]`.
pub fn build_hc(kp: &Vector, kd: &Vector) -> Matrix {
    let n = kp.len();
    let mut h = Matrix::zeros(2 * n, 2 * n);
    set_block(&mut h, 0, n, &identity(n));
    set_block(&mut h, n, 0, &Matrix::from_diagonal(&(-kp)));
    set_block(&mut h, n, n, &Matrix::from_diagonal(&(-kd)));
    h
}

/// `W1 = [0 0 0; -Kp -Kd -I]`.
pub fn build_w1(kp: &Vector, kd: &Vector) -> Matrix {
    let n = kp.len();
    let mut w = Matrix::zeros(2 * n, 3 * n);
    set_block(&mut w, n, 0, &Matrix::from_diagonal(&(-kp)));
    set_block(&mut w, n, n, &Matrix::from_diagonal(&(-kd)));
    set_block(&mut w, n, 2 * n, &(-identity(n)));
    w
}

/// `W2 = [Kp Kd I]`.
pub fn build_w2(kp: &Vector, kd: &Vector) -> Matrix {
    let n = kp.len();
    let mut w = Matrix::zeros(n, 3 * n);
    set_block(&mut w, 0, 0, &Matrix::from_diagonal(kp));
    set_block(&mut w, 0, n, &Matrix::from_diagonal(kd));
    set_block(&mut w, 0, 2 * n, &identity(n));
    w
}

/// `Kc = [Kp Kd]`.
pub fn build_kc(kp: &Vector, kd: &Vector) -> Matrix {
    let n = kp.len();
    let mut k = Matrix::zeros(n, 2 * n);
    set_block(&mut k, 0, 0, &Matrix::from_diagonal(kp));
    set_block(&mut k, 0, n, &Matrix::from_diagonal(kd));
    k
}

/// `C2 = [0; I]`.
pub fn c2(n: usize) -> Matrix {
    let mut c = Matrix::zeros(2 * n, n);
    set_block(&mut c, n, 0, &identity(n));
    c
}

/// Per-axis gain diagonals, either scaled (bar) or raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
}

impl GainSet {
    /// Same scalar gains on each of `n` axes.
    pub fn uniform(n: usize, kp: f64, kd: f64, k1: f64, k2: f64, k3: f64) -> Self {
        Self {
            kp: vec![kp; n],
            kd: vec![kd; n],
            k1: vec![k1; n],
            k2: vec![k2; n],
            k3: vec![k3; n],
        }
    }

    /// Unit-bandwidth gains with triple observer pole and double controller pole at -1.
    pub fn unit_bandwidth(n: usize) -> Self {
        Self::uniform(n, 1.0, 2.0, 3.0, 3.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.kp.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(AdrcError::Empty("gain set"));
        }
        for (what, g) in [
            ("Kp", &self.kp),
            ("Kd", &self.kd),
            ("K1", &self.k1),
            ("K2", &self.k2),
            ("K3", &self.k3),
        ] {
            check_dim(what, n, g.len())?;
            for (index, &value) in g.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(AdrcError::InvalidGain { what, index, value });
                }
            }
        }
        Ok(())
    }

    fn map(&self, fp: f64, fd: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let s = |v: &[f64], f: f64| v.iter().map(|x| x * f).collect();
        Self {
            kp: s(&self.kp, fp),
            kd: s(&self.kd, fd),
            k1: s(&self.k1, f1),
            k2: s(&self.k2, f2),
            k3: s(&self.k3, f3),
        }
    }

    /// Treats `self` as scaled gains and returns raw gains.
    pub fn unscale(&self, p: ScalingParams) -> Self {
        let (w, c) = (p.omega, p.controller_bandwidth());
        self.map(c * c, c, w, w * w, w * w * w)
    }

    /// Treats `self` as raw gains and returns scaled gains.
    pub fn scale(&self, p: ScalingParams) -> Self {
        let (w, c) = (p.omega, p.controller_bandwidth());
        self.map(1.0 / (c * c), 1.0 / c, 1.0 / w, 1.0 / (w * w), 1.0 / (w * w * w))
    }

    pub fn kp_vec(&self) -> Vector {
        Vector::from_column_slice(&self.kp)
    }

    pub fn kd_vec(&self) -> Vector {
        Vector::from_column_slice(&self.kd)
    }

    pub fn observer(&self) -> Result<ObserverGains> {
        ObserverGains::new(
            Vector::from_column_slice(&self.k1),
            Vector::from_column_slice(&self.k2),
            Vector::from_column_slice(&self.k3),
        )
    }
}

/// Scaled closed-loop matrices for one set of scaled gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSystem {
    n: usize,
    gains: GainSet,
    kc: Matrix,
    ko: Matrix,
    hc: Matrix,
    ho: Matrix,
    w1: Matrix,
    w2: Matrix,
}

impl ScaledSystem {
    /// Builds the scaled matrices. `H_c` and `H_o` must be Hurwitz.
    pub fn new(scaled: GainSet) -> Result<Self> {
        scaled.validate()?;
        let n = scaled.dim();
        let (kp, kd) = (scaled.kp_vec(), scaled.kd_vec());
        let obs = scaled.observer()?;
        let hc = build_hc(&kp, &kd);
        let (re, im) = crate::linalg::rightmost_eigenvalue(&hc);
        if re.is_nan() || re >= -1e-9 {
            return Err(AdrcError::NotHurwitz {
                what: "controller matrix H_c",
                re,
                im,
            });
        }
        let mut ko = Matrix::zeros(3 * n, n);
        set_block(&mut ko, 0, 0, &Matrix::from_diagonal(obs.k1()));
        set_block(&mut ko, n, 0, &Matrix::from_diagonal(obs.k2()));
        set_block(&mut ko, 2 * n, 0, &Matrix::from_diagonal(obs.k3()));
        Ok(Self {
            n,
            kc: build_kc(&kp, &kd),
            ko,
            hc,
            ho: obs.build_ho(),
            w1: build_w1(&kp, &kd),
            w2: build_w2(&kp, &kd),
            gains: scaled,
        })
    }

    /// Scales raw gains at `p` and builds the system.
    pub fn from_raw(raw: &GainSet, p: ScalingParams) -> Result<Self> {
        raw.validate()?;
        Self::new(raw.scale(p))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gains(&self) -> &GainSet {
        &self.gains
    }

    pub fn kc(&self) -> &Matrix {
        &self.kc
    }

    pub fn ko(&self) -> &Matrix {
        &self.ko
    }

    pub fn hc(&self) -> &Matrix {
        &self.hc
    }

    pub fn ho(&self) -> &Matrix {
        &self.ho
    }

    pub fn w1(&self) -> &Matrix {
        &self.w1
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    /// Unscaled matrices `(Kc, Hc, Ho, W1, W2)` at `p`.
    pub fn raw_matrices(&self, p: ScalingParams) -> RawMatrices {
        let raw = self.gains.unscale(p);
        let (kp, kd) = (raw.kp_vec(), raw.kd_vec());
        RawMatrices {
            kc: build_kc(&kp, &kd),
            hc: build_hc(&kp, &kd),
            ho: build_ho(
                &Vector::from_column_slice(&raw.k1),
                &Vector::from_column_slice(&raw.k2),
                &Vector::from_column_slice(&raw.k3),
            ),
            w1: build_w1(&kp, &kd),
            w2: build_w2(&kp, &kd),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrices {
    pub kc: Matrix,
    pub hc: Matrix,
    pub ho: Matrix,
    pub w1: Matrix,
    pub w2: Matrix,
}

/// Max-norm residuals of the five scaling identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `Delta2(kw) Hc Delta2(kw)^-1 - kw Hc_bar`
    pub hc_similarity: f64,
    /// `Delta3(w) Ho Delta3(w)^-1 - w Ho_bar`
    pub ho_similarity: f64,
    /// `Delta2(kw) W1 - W1`
    pub w1_invariance: f64,
    /// `W1 Delta3(w)^-1 - W1_bar Delta3(k)`
    pub w1_scaling: f64,
    /// `W2 - W2_bar Delta3(kw)`
    pub w2_scaling: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.hc_similarity,
            self.ho_similarity,
            self.w1_invariance,
            self.w1_scaling,
            self.w2_scaling,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Residuals are relative to the largest entry of the unscaled matrix
/// involved, so that large bandwidths do not inflate round-off.
pub fn verify_scaling_identities(sys: &ScaledSystem, p: ScalingParams) -> IdentityResiduals {
    let n = sys.n;
    let (w, k, kw) = (p.omega, p.kappa, p.controller_bandwidth());
    let raw = sys.raw_matrices(p);
    let d2 = delta_unchecked(2, kw, n);
    let d2i = delta_unchecked(2, 1.0 / kw, n);
    let d3w = delta_unchecked(3, w, n);
    let d3wi = delta_unchecked(3, 1.0 / w, n);
    let d3k = delta_unchecked(3, k, n);
    let d3kw = delta_unchecked(3, kw, n);
    let rel = |diff: Matrix, scale: &Matrix| max_abs(&diff) / max_abs(scale).max(1.0);

    let hc_lhs = &d2 * &raw.hc * &d2i;
    let ho_lhs = &d3w * &raw.ho * &d3wi;
    IdentityResiduals {
        hc_similarity: rel(&hc_lhs - sys.hc.scale(kw), &hc_lhs),
        ho_similarity: rel(&ho_lhs - sys.ho.scale(w), &ho_lhs),
        w1_invariance: rel(&d2 * &raw.w1 - &raw.w1, &raw.w1),
        w1_scaling: rel(&raw.w1 * &d3wi - &sys.w1 * &d3k, &raw.w1),
        w2_scaling: rel(&raw.w2 - &sys.w2 * &d3kw, &raw.w2),
    }
}

/// `(e_bar, z_bar)` from unscaled tracking error `e` and observation error `z~`.
pub fn scale_errors(e: &Vector, z_tilde: &Vector, p: ScalingParams) -> Result<(Vector, Vector)> {
    let n = e.len() / 2;
    check_dim("tracking error", 2 * n, e.len())?;
    check_dim("observation error", 3 * n, z_tilde.len())?;
    Ok(scale_errors_unchecked(e, z_tilde, p))
}

pub(crate) fn scale_errors_unchecked(e: &Vector, z_tilde: &Vector, p: ScalingParams) -> (Vector, Vector) {
    let n = e.len() / 2;
    let (w, kw) = (p.omega, p.controller_bandwidth());
    let mut eb = e.clone();
    eb.rows_mut(n, n).scale_mut(1.0 / kw);
    let mut zb = z_tilde.clone();
    zb.rows_mut(n, n).scale_mut(1.0 / w);
    zb.rows_mut(2 * n, n).scale_mut(1.0 / (w * w));
    (eb, zb)
}

/// Inverse of [`scale_errors`].
pub fn unscale_errors(e_bar: &Vector, z_bar: &Vector, p: ScalingParams) -> (Vector, Vector) {
    let inv = ScalingParams {
        omega: 1.0 / p.omega,
        kappa: 1.0 / p.kappa,
    };
    scale_errors_unchecked(e_bar, z_bar, inv)
}

/// Scaled error dynamics
///
/// ```text
/// e_bar' = kw Hc_bar e_bar + w/k W1_bar Delta3(k) z_bar + (kw)^-1 C2 B u~
/// z_bar' = w Ho_bar z_bar + w^-1 C0 B u~ + w^-2 C1 z3'
/// ```
///
/// with `u~ = v - u`.
pub fn scaled_error_derivatives(
    sys: &ScaledSystem,
    e_bar: &Vector,
    z_bar: &Vector,
    u_tilde: &Vector,
    z3_dot: &Vector,
    p: ScalingParams,
    b: &Matrix,
) -> Result<(Vector, Vector)> {
    let n = sys.n;
    check_dim("scaled tracking error", 2 * n, e_bar.len())?;
    check_dim("scaled observation error", 3 * n, z_bar.len())?;
    check_dim("input error", n, u_tilde.len())?;
    check_dim("disturbance rate", n, z3_dot.len())?;
    check_dim("input matrix", n, b.nrows())?;
    let (w, k, kw) = (p.omega, p.kappa, p.controller_bandwidth());
    let bu = b * u_tilde;
    let e_dot = sys.hc.scale(kw) * e_bar
        + (&sys.w1 * delta_unchecked(3, k, n) * z_bar).scale(w / k)
        + (c2(n) * &bu).scale(1.0 / kw);
    let z_dot = sys.ho.scale(w) * z_bar + (c0(n) * &bu).scale(1.0 / w) + (c1(n) * z3_dot).scale(1.0 / (w * w));
    Ok((e_dot, z_dot))
}
