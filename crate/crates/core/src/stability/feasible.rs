use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AdrcError, Result};
use crate::linalg::definiteness;
use crate::scaling::ScalingParams;
use crate::stability::certificate::{ser_finite, Certifier};

/// Logarithmic search grid with bisection refinement at each sign change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub bisection_iterations: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            points: 200,
            bisection_iterations: 20,
        }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(AdrcError::Empty("search grid"));
        }
        crate::error::check_positive("search grid minimum", self.min)?;
        crate::error::check_positive("search grid maximum", self.max)?;
        if self.max < self.min {
            return Err(AdrcError::InvalidBound {
                what: "search grid maximum below minimum",
                value: self.max,
            });
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

/// Closed interval of the searched parameter. An endpoint flagged
/// `*_at_grid_edge` coincides with the grid limit, so the true set may
/// extend beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_at_grid_edge: bool,
    pub upper_at_grid_edge: bool,
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub kappa: f64,
    pub lambda_min_qy1: f64,
    pub qy1_positive_definite: bool,
    pub lambda_v: f64,
    pub gamma_v: f64,
    #[serde(serialize_with = "ser_finite")]
    pub error_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleSet {
    pub intervals: Vec<Interval>,
    pub sweep: Vec<SweepPoint>,
}

impl FeasibleSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Largest upper endpoint over all intervals.
    pub fn upper_endpoint(&self) -> Option<f64> {
        self.intervals.iter().map(|i| i.upper).reduce(f64::max)
    }

    pub fn lower_endpoint(&self) -> Option<f64> {
        self.intervals.iter().map(|i| i.lower).reduce(f64::min)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.lower <= x && x <= i.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Omega,
    Kappa,
}

fn params(axis: SweepAxis, x: f64, fixed: f64) -> ScalingParams {
    match axis {
        SweepAxis::Omega => ScalingParams::new(x, fixed),
        SweepAxis::Kappa => ScalingParams::new(fixed, x),
    }
    .expect("grid values validated positive")
}

fn qy1_pd(c: &Certifier, p: ScalingParams) -> bool {
    definiteness(&c.qy1(p)).positive_definite
}

/// Bisects the boundary between `inside` (PD) and `outside` in log space.
fn refine(c: &Certifier, axis: SweepAxis, fixed: f64, mut inside: f64, mut outside: f64, iters: usize) -> f64 {
    for _ in 0..iters {
        let mid = (inside.ln() + outside.ln()).mul_add(0.5, 0.0).exp();
        if qy1_pd(c, params(axis, mid, fixed)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Sweeps `omega` (at fixed `kappa`) or `kappa` (at fixed `omega`) and
/// returns the maximal intervals on which `Q_Y1` is positive definite.
pub fn feasible_set(c: &Certifier, axis: SweepAxis, fixed: f64, grid: &SearchGrid) -> Result<FeasibleSet> {
    grid.validate()?;
    crate::error::check_positive("fixed scaling parameter", fixed)?;
    let xs = grid.values();
    let sweep: Vec<SweepPoint> = xs
        .par_iter()
        .map(|&x| {
            let cert = c.evaluate(params(axis, x, fixed));
            SweepPoint {
                omega: cert.omega,
                kappa: cert.kappa,
                lambda_min_qy1: cert.lambda_min_qy1,
                qy1_positive_definite: cert.qy1_positive_definite,
                lambda_v: cert.lambda_v,
                gamma_v: cert.gamma_v,
                error_bound: cert.error_bound,
            }
        })
        .collect();
    let pd: Vec<bool> = sweep.iter().map(|s| s.qy1_positive_definite).collect();

    let mut runs = Vec::new();
    let mut i = 0;
    while i < pd.len() {
        if pd[i] {
            let start = i;
            while i + 1 < pd.len() && pd[i + 1] {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }
    let last = xs.len() - 1;
    let intervals = runs
        .par_iter()
        .map(|&(s, e)| {
            let lower = if s == 0 {
                xs[0]
            } else {
                refine(c, axis, fixed, xs[s], xs[s - 1], grid.bisection_iterations)
            };
            let upper = if e == last {
                xs[last]
            } else {
                refine(c, axis, fixed, xs[e], xs[e + 1], grid.bisection_iterations)
            };
            Interval {
                lower,
                upper,
                lower_at_grid_edge: s == 0,
                upper_at_grid_edge: e == last,
            }
        })
        .collect();
    Ok(FeasibleSet { intervals, sweep })
}
