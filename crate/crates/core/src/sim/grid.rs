use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AxisValues, ScenarioConfig};
use crate::error::{AdrcError, Result};
use crate::sim::scenario::run_scenario;
use crate::stability::ser_finite;

/// One cell of a time-constant / bandwidth / rejection sweep. Certificate
/// columns are filled for rejection-on cells only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub time_constant: f64,
    pub omega: f64,
    pub rejection: bool,
    pub ise: f64,
    pub isc: f64,
    pub diverged: bool,
    pub steps: usize,
    pub sup_zeta_bar: Option<f64>,
    pub lambda_min_qy1: Option<f64>,
    pub lambda_v: Option<f64>,
    pub gamma_v: Option<f64>,
    #[serde(serialize_with = "ser_finite_opt")]
    pub error_bound: Option<f64>,
    pub certified: Option<bool>,
    /// Numeric failure of this cell, if any.
    pub error: Option<String>,
}

fn ser_finite_opt<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_finite(x, s),
        None => s.serialize_none(),
    }
}

fn cell_config(base: &ScenarioConfig, t: f64, omega: f64, rejection: bool) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    c.plant.time_constants = AxisValues::Uniform(t);
    c.gains.set_omega(omega)?;
    c.rejection_enabled = rejection;
    c.grid = None;
    Ok(c)
}

/// Runs every cell of `base.grid` in parallel; rows come back in
/// `time_constants` x `omegas` x `rejection` order. Configuration errors
/// abort the whole grid, numeric failures are recorded per row.
pub fn run_grid(base: &ScenarioConfig) -> Result<Vec<GridRow>> {
    let spec = base.grid.as_ref().ok_or(AdrcError::Config {
        path: "grid".into(),
        message: "missing grid section".into(),
    })?;
    for (path, len) in [
        ("grid.time_constants", spec.time_constants.len()),
        ("grid.omegas", spec.omegas.len()),
        ("grid.rejection", spec.rejection.len()),
    ] {
        if len == 0 {
            return Err(AdrcError::Config {
                path: path.into(),
                message: "must not be empty".into(),
            });
        }
    }
    let mut cells = Vec::new();
    for &t in &spec.time_constants {
        for &w in &spec.omegas {
            for &r in &spec.rejection {
                cells.push(cell_config(base, t, w, r).map(|c| (t, w, r, c)));
            }
        }
    }
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    // validate all cells before spending time on any of them
    for (_, _, _, c) in &cells {
        c.build()?;
    }
    Ok(cells
        .par_iter()
        .map(|(t, w, r, c)| {
            let mut row = GridRow {
                time_constant: *t,
                omega: *w,
                rejection: *r,
                ise: f64::NAN,
                isc: f64::NAN,
                diverged: false,
                steps: 0,
                sup_zeta_bar: None,
                lambda_min_qy1: None,
                lambda_v: None,
                gamma_v: None,
                error_bound: None,
                certified: None,
                error: None,
            };
            if *r {
                match c.certifier() {
                    Ok((cert, p)) => {
                        let pc = cert.evaluate(p);
                        row.lambda_min_qy1 = Some(pc.lambda_min_qy1);
                        row.lambda_v = Some(pc.lambda_v);
                        row.gamma_v = Some(pc.gamma_v);
                        row.error_bound = Some(pc.error_bound);
                        row.certified = Some(pc.certified());
                    }
                    Err(e) => row.error = Some(e.to_string()),
                }
            }
            let run = c.build().and_then(|b| run_scenario(&b.scenario));
            match run {
                Ok(res) => {
                    let m = res.metrics;
                    row.ise = m.ise;
                    row.isc = m.isc;
                    row.diverged = m.diverged;
                    row.steps = m.steps;
                    row.sup_zeta_bar = m.steady_state_sup_zeta_bar;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect())
}
