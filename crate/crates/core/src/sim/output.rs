//! CSV writers. Floats use `{:.16e}` so reruns compare byte for byte.

use std::fmt::Write;

use crate::sim::grid::GridRow;
use crate::sim::scenario::Sample;
use crate::stability::SweepPoint;

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn timeseries_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n).map(|i| format!("e1_{i}")));
    cols.extend((0..n).map(|i| format!("e2_{i}")));
    cols.extend((0..3 * n).map(|j| format!("z_tilde_{j}")));
    cols.extend((0..n).map(|i| format!("u_{i}")));
    cols.extend((0..n).map(|i| format!("v_{i}")));
    cols.join(",")
}

pub fn timeseries_csv(n: usize, samples: &[Sample]) -> String {
    let mut out = timeseries_header(n);
    out.push('\n');
    for s in samples {
        let row: Vec<String> = std::iter::once(s.t)
            .chain(s.e.iter().copied())
            .chain(s.z_tilde.iter().copied())
            .chain(s.u.iter().copied())
            .chain(s.v.iter().copied())
            .map(fmt_f64)
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub const GRID_HEADER: &str = "time_constant,omega,rejection,ise,isc,diverged,steps,sup_zeta_bar,lambda_min_qy1,lambda_v,gamma_v,error_bound,certified,error";

pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for r in rows {
        let cells = [
            fmt_f64(r.time_constant),
            fmt_f64(r.omega),
            r.rejection.to_string(),
            fmt_f64(r.ise),
            fmt_f64(r.isc),
            r.diverged.to_string(),
            r.steps.to_string(),
            opt(r.sup_zeta_bar, fmt_f64),
            opt(r.lambda_min_qy1, fmt_f64),
            opt(r.lambda_v, fmt_f64),
            opt(r.gamma_v, fmt_f64),
            opt(r.error_bound, fmt_f64),
            opt(r.certified, |b| b.to_string()),
            r.error
                .as_deref()
                .map(|e| format!("\"{}\"", e.replace('"', "\"\"")))
                .unwrap_or_default(),
        ];
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub const OMEGA_SWEEP_HEADER: &str = "omega,kappa,lambda_min_qy1,qy1_positive_definite,lambda_v,gamma_v,error_bound";

pub fn omega_sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = format!("{OMEGA_SWEEP_HEADER}\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.omega),
            fmt_f64(p.kappa),
            fmt_f64(p.lambda_min_qy1),
            p.qy1_positive_definite,
            fmt_f64(p.lambda_v),
            fmt_f64(p.gamma_v),
            fmt_f64(p.error_bound)
        );
    }
    out
}
