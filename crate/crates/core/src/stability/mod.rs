//! Lyapunov certificate: `Q_Y1`, perturbation bounds, `Lambda_V`,
//! `Gamma_V`, feasible bandwidth sets and the `V'` decomposition.

mod certificate;
mod feasible;
mod lyapunov;
mod vdot;

use serde::Serialize;

pub use certificate::{
    BoundPair, Certifier, CompensationBounds, PerturbationBounds, PointCertificate, PrintedMeasures,
};
pub use feasible::{feasible_set, FeasibleSet, Interval, SearchGrid, SweepAxis, SweepPoint};
pub use lyapunov::{lyapunov_residual, lyapunov_residual_dual, solve_lyapunov, solve_lyapunov_dual, LyapunovPair};
pub use vdot::{
    chain_rule_rates, vdot_decomposition_check, vdot_terms, ChainRuleJacobians, ChainRuleRates, VdotCheck, VdotTerms,
};

use crate::error::Result;
use crate::scaling::ScalingParams;
use crate::Matrix;
pub(crate) use certificate::{ser_finite, ser_rows};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditions {
    /// `Q_Y1` positive definite
    pub c1: bool,
    /// `Lambda_V > 0`
    pub c2: bool,
}

/// Residuals of the two Lyapunov equations in both orientations:
/// `H^T P + P H + Q` for the pair in use and `P H^T + H P + Q` for the
/// solution of the transposed problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovResiduals {
    pub controller: f64,
    pub observer: f64,
    pub controller_dual: f64,
    pub observer_dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub omega: f64,
    pub kappa: f64,
    #[serde(serialize_with = "ser_rows")]
    pub qy1: Matrix,
    pub lambda_min_qy1: f64,
    pub lambda_v: f64,
    pub gamma_v: f64,
    pub conditions: Conditions,
    #[serde(serialize_with = "ser_finite")]
    pub error_bound: f64,
    #[serde(serialize_with = "ser_finite")]
    pub level_set_bound: f64,
    pub omega_feasible: Vec<Interval>,
    pub kappa_feasible: Vec<Interval>,
    pub bounds: PerturbationBounds,
    pub printed: PrintedMeasures,
    pub lyapunov_residuals: LyapunovResiduals,
    pub certified: bool,
    /// Per-point rows of the omega sweep at the configured kappa.
    #[serde(skip)]
    pub omega_sweep: Vec<SweepPoint>,
}

/// Full report at `p`, with `Omega_v` searched at `p.kappa` and `K_v` at `p.omega`.
pub fn certify(
    cert: &Certifier,
    p: ScalingParams,
    omega_grid: &SearchGrid,
    kappa_grid: &SearchGrid,
) -> Result<StabilityReport> {
    let point = cert.evaluate(p);
    let omegas = feasible_set(cert, SweepAxis::Omega, p.kappa(), omega_grid)?;
    let kappas = feasible_set(cert, SweepAxis::Kappa, p.omega(), kappa_grid)?;
    let sys = cert.system();
    let pair = cert.pair();
    let pc_dual = solve_lyapunov_dual(sys.hc(), &pair.qc)?;
    let po_dual = solve_lyapunov_dual(sys.ho(), &pair.qo)?;
    let residuals = LyapunovResiduals {
        controller: lyapunov_residual(sys.hc(), &pair.pc, &pair.qc),
        observer: lyapunov_residual(sys.ho(), &pair.po, &pair.qo),
        controller_dual: lyapunov_residual_dual(sys.hc(), &pc_dual, &pair.qc),
        observer_dual: lyapunov_residual_dual(sys.ho(), &po_dual, &pair.qo),
    };
    Ok(StabilityReport {
        omega: point.omega,
        kappa: point.kappa,
        lambda_min_qy1: point.lambda_min_qy1,
        lambda_v: point.lambda_v,
        gamma_v: point.gamma_v,
        conditions: Conditions {
            c1: point.qy1_positive_definite,
            c2: point.lambda_v > 0.0,
        },
        error_bound: point.error_bound,
        level_set_bound: point.level_set_bound,
        omega_feasible: omegas.intervals,
        kappa_feasible: kappas.intervals,
        bounds: point.bounds,
        printed: point.printed,
        lyapunov_residuals: residuals,
        certified: point.certified(),
        qy1: point.qy1,
        omega_sweep: omegas.sweep,
    })
}
