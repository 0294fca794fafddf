//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::time::{Duration, Instant};

use adrc_core::config::{ScenarioConfig, TelescopeConfig};
use adrc_core::control::CompensationMode;
use adrc_core::linalg::symmetric_extremes;
use adrc_core::scaling::{verify_scaling_identities, GainSet, ScaledSystem, ScalingParams};
use adrc_core::sim::{control_rate_check, run_grid, run_scenario, run_telescope, GridRow};
use adrc_core::stability::{certify, solve_lyapunov, solve_lyapunov_dual, vdot_decomposition_check, SearchGrid};
use adrc_core::Matrix;
use rand::{Rng, SeedableRng};

const BANDWIDTH_GRID: &str = include_str!("../../cli/examples/bandwidth_grid.json");
const STABILITY_T01: &str = include_str!("../../cli/examples/stability_T01.json");
const STABILITY_T1: &str = include_str!("../../cli/examples/stability_T1.json");
const TELESCOPE_500: &str = include_str!("../../cli/examples/telescope_500vs.json");
const TELESCOPE_50: &str = include_str!("../../cli/examples/telescope_50vs.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn unit_bandwidth() -> ScaledSystem {
    ScaledSystem::new(GainSet::unit_bandwidth(1)).unwrap()
}

fn scaling_identities() -> Outcome {
    let start = Instant::now();
    let sys = unit_bandwidth();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = 10f64.powf(rng.random_range(-2.0..2.0));
        let k = 10f64.powf(rng.random_range(-2.0..1.0));
        worst = worst.max(verify_scaling_identities(&sys, ScalingParams::new(w, k).unwrap()).max());
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-9 && within(t, 1.0),
        format!("max residual {worst:.3e}, {t:.2?}"),
    )
}

fn lyapunov_solver() -> Outcome {
    let start = Instant::now();
    let sys = unit_bandwidth();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, h) in [("Hc", sys.hc()), ("Ho", sys.ho())] {
        let m = h.nrows();
        let q = Matrix::identity(m, m);
        // printed orientation P H^T + H P + Q = 0
        let p = solve_lyapunov_dual(h, &q).unwrap();
        let r = inf_norm(&(&p * h.transpose() + h * &p + &q));
        let lmin = symmetric_extremes(&p).0;
        // orientation used by the certificate, H^T P + P H + Q = 0
        let ps = solve_lyapunov(h, &q).unwrap();
        let rs = inf_norm(&(h.transpose() * &ps + &ps * h + &q));
        let lmins = symmetric_extremes(&ps).0;
        ok &= r < 1e-10 && lmin > 0.0 && rs < 1e-10 && lmins > 0.0;
        detail.push(format!(
            "{name}: residual {r:.1e}/{rs:.1e}, lambda_min {lmin:.3}/{lmins:.3}"
        ));
    }
    let t = start.elapsed();
    outcome(ok && within(t, 1.0), format!("{}, {t:.2?}", detail.join("; ")))
}

fn control_rate() -> Outcome {
    let start = Instant::now();
    let mut cfg = ScenarioConfig::from_json(STABILITY_T01).unwrap();
    cfg.duration = 2.0;
    cfg.record_stride = 1;
    let sc = cfg.build().unwrap().scenario;
    let res = run_scenario(&sc).unwrap();
    let check = control_rate_check(&sc, &res.samples).unwrap();
    let t = start.elapsed();
    outcome(
        !res.metrics.diverged && check.max_relative_deviation < 1e-3 && within(t, 10.0),
        format!(
            "max relative deviation {:.3e} over {} samples, {t:.2?}",
            check.max_relative_deviation, check.samples
        ),
    )
}

fn friction_plant(mode: &str) -> ScenarioConfig {
    let text = format!(
        r#"{{
        "plant": {{
            "input_matrix": [[1.0]],
            "time_constants": 0.1,
            "h1": {{"type": "tanh_friction", "coefficient": -0.5, "steepness": 10.0}},
            "disturbance": {{"type": "sine", "amplitude": 0.2, "angular_frequency": 3.0}}
        }},
        "gains": {{"form": "scaled", "kp": 1.0, "kd": 2.0, "k1": 3.0, "k2": 3.0, "k3": 1.0, "omega": 4.0, "kappa": 0.01}},
        "trajectory": {{"type": "sine", "amplitude": 1.0, "angular_frequency": 10.0}},
        "compensation_mode": "{mode}",
        "duration": 2.0,
        "step": 1e-4,
        "record_stride": 1
    }}"#
    );
    ScenarioConfig::from_json(&text).unwrap()
}

fn vdot_decomposition() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for mode in ["none", "reference_based", "estimate_based"] {
        let cfg = friction_plant(mode);
        let sc = cfg.build().unwrap().scenario;
        let (cert, p) = cfg.certifier().unwrap();
        let res = run_scenario(&sc).unwrap();
        let check = vdot_decomposition_check(&sc, &res.samples, &cert, p).unwrap();
        worst = worst.max(check.max_residual_ratio);
        detail.push(format!("{mode} {:.2e}", check.max_residual_ratio));
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-3 && within(t, 30.0),
        format!("max |V'num - sum Y| / (1 + |V'|): {}, {t:.2?}", detail.join(", ")),
    )
}

fn cell(rows: &[GridRow], t: f64, w: f64, on: bool) -> &GridRow {
    rows.iter()
        .find(|r| r.time_constant == t && r.omega == w && r.rejection == on)
        .expect("grid cell")
}

fn bounded(r: &GridRow) -> bool {
    r.error.is_none() && !r.diverged && r.ise.is_finite()
}

fn grid_reproduction(rows: &[GridRow], elapsed: Duration) -> Outcome {
    let complete = rows.len() == 12 && rows.iter().all(|r| r.error.is_none());
    let a = rows.iter().filter(|r| r.omega == 0.1 || r.omega == 1.0).all(bounded);
    let on = cell(rows, 1.0, 4.0, true);
    let off = cell(rows, 1.0, 4.0, false);
    let b = bounded(off) && (on.diverged || on.ise > 100.0 * off.ise);
    let ise = |w| cell(rows, 0.1, w, true).ise;
    let c = ise(4.0) < ise(1.0) && ise(1.0) < ise(0.1);
    outcome(
        complete && a && b && c && within(elapsed, 300.0),
        format!(
            "complete {complete}; (a) {a}; (b) {b}: T=1 w=4 on ISE {:.4e} diverged {}, off ISE {:.4e}; \
             (c) {c}: T=0.1 on ISE {:.4e} > {:.4e} > {:.4e}; {elapsed:.2?}",
            on.ise,
            on.diverged,
            off.ise,
            ise(0.1),
            ise(1.0),
            ise(4.0)
        ),
    )
}

fn bound_soundness(rows: &[GridRow]) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for r in rows.iter().filter(|r| r.certified == Some(true) && bounded(r)) {
        let (Some(sup), Some(bound)) = (r.sup_zeta_bar, r.error_bound) else {
            violations.push(format!("T={} w={}: missing values", r.time_constant, r.omega));
            continue;
        };
        checked += 1;
        if sup > bound {
            violations.push(format!("T={} w={}: {sup:.3e} > {bound:.3e}", r.time_constant, r.omega));
        }
    }
    outcome(
        violations.is_empty() && checked > 0,
        format!(
            "{checked} certified cells checked, {} violations {violations:?}",
            violations.len()
        ),
    )
}

fn feasible_monotonicity() -> Outcome {
    let start = Instant::now();
    let upper = |text: &str| {
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let (cert, p) = cfg.certifier().unwrap();
        let grid = SearchGrid::default();
        let report = certify(&cert, p, &grid, &grid).unwrap();
        let iv = report.omega_feasible.clone();
        (iv.iter().map(|i| i.upper).reduce(f64::max), iv)
    };
    let (u01, iv01) = upper(STABILITY_T01);
    let (u1, iv1) = upper(STABILITY_T1);
    let t = start.elapsed();
    let pass = matches!((u01, u1), (Some(a), Some(b)) if b < a) && within(t, 60.0);
    let fmt = |iv: &[adrc_core::stability::Interval]| {
        iv.iter()
            .map(|i| format!("[{:.4}, {:.4}]", i.lower, i.upper))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        pass,
        format!("Omega_v T=0.1: {}; T=1: {}; {t:.2?}", fmt(&iv01), fmt(&iv1)),
    )
}

fn eso_convergence() -> Outcome {
    let cfg = ScenarioConfig::from_json(
        r#"{
        "plant": {"input_matrix": [[1.0]], "time_constants": 0.1,
                  "disturbance": {"type": "constant", "value": 0.7}},
        "gains": {"form": "scaled", "kp": 1.0, "kd": 2.0, "k1": 3.0, "k2": 3.0, "k3": 1.0, "omega": 10.0, "kappa": 0.01},
        "trajectory": {"type": "sine", "amplitude": 1.0, "angular_frequency": 10.0},
        "input_model": {"type": "direct"},
        "duration": 5.0,
        "step": 1e-4,
        "record_stride": 10
    }"#,
    )
    .unwrap();
    let res = run_scenario(&cfg.build().unwrap().scenario).unwrap();
    let last_above = res
        .samples
        .iter()
        .rev()
        .find(|s| s.z_tilde.norm() >= 1e-6)
        .map_or(0.0, |s| s.t);
    let end = res.samples.last().unwrap();
    let z3_err = (end.z_hat[2] - 0.7).abs();
    outcome(
        last_above < 3.0 && z3_err < 1e-6,
        format!("|z~| < 1e-6 from t = {last_above:.3} s on, final |z3^ - z3| = {z3_err:.2e}"),
    )
}

fn telescope() -> Outcome {
    let start = Instant::now();
    let run_all = |text: &str| {
        let cfg = TelescopeConfig::from_json(text).unwrap();
        cfg.setups()
            .unwrap()
            .iter()
            .map(|s| (s.compensation_mode, run_telescope(s).unwrap().metrics))
            .collect::<Vec<_>>()
    };
    let fast = run_all(TELESCOPE_500);
    let slow = run_all(TELESCOPE_50);
    let get =
        |runs: &[(CompensationMode, adrc_core::sim::Metrics)], m| runs.iter().find(|r| r.0 == m).unwrap().1.clone();
    let (none, refb) = (
        get(&fast, CompensationMode::None),
        get(&fast, CompensationMode::ReferenceBased),
    );
    let part1 = (0..2).all(|i| refb.ise_per_axis[i] < none.ise_per_axis[i]);
    let (sref, sest) = (
        get(&slow, CompensationMode::ReferenceBased),
        get(&slow, CompensationMode::EstimateBased),
    );
    let part2 = (0..2).all(|i| sest.ise_per_axis[i] > sref.ise_per_axis[i]);
    let finite = fast.iter().chain(&slow).all(|r| !r.1.diverged);
    let t = start.elapsed();
    outcome(
        part1 && part2 && finite && within(t, 300.0),
        format!(
            "500 v_s ISE none {:.4e}/{:.4e} vs reference {:.4e}/{:.4e}; \
             50 v_s ISE estimate {:.4e}/{:.4e} vs reference {:.4e}/{:.4e}; {t:.2?}",
            none.ise_per_axis[0],
            none.ise_per_axis[1],
            refb.ise_per_axis[0],
            refb.ise_per_axis[1],
            sest.ise_per_axis[0],
            sest.ise_per_axis[1],
            sref.ise_per_axis[0],
            sref.ise_per_axis[1]
        ),
    )
}

fn determinism_and_convergence(rows: &[GridRow]) -> Outcome {
    let base = ScenarioConfig::from_json(BANDWIDTH_GRID).unwrap();
    let rerun = run_grid(&base).unwrap();
    let identical = rows.len() == rerun.len()
        && rows
            .iter()
            .zip(&rerun)
            .all(|(a, b)| a.ise.to_bits() == b.ise.to_bits() && a.isc.to_bits() == b.isc.to_bits());

    let mut single = ScenarioConfig::from_json(STABILITY_T01).unwrap();
    single.record_stride = 1;
    let sc = single.build().unwrap().scenario;
    let (r1, r2) = (run_scenario(&sc).unwrap(), run_scenario(&sc).unwrap());
    let series_identical = r1.samples.len() == r2.samples.len()
        && r1.samples.iter().zip(&r2.samples).all(|(a, b)| {
            a.e.iter().zip(b.e.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
                && a.v.iter().zip(b.v.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
        });

    let mut halved = base.clone();
    halved.step /= 2.0;
    let fine = run_grid(&halved).unwrap();
    let mut worst = 0.0f64;
    let mut stable = 0;
    for (a, b) in rows.iter().zip(&fine) {
        if bounded(a) && bounded(b) {
            stable += 1;
            worst = worst.max((a.ise - b.ise).abs() / a.ise.abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        identical && series_identical && stable > 0 && worst < 1e-3,
        format!(
            "grid rerun identical {identical}, series identical {series_identical}; \
             step halving max relative ISE change {worst:.2e} over {stable} stable cells"
        ),
    )
}

fn main() {
    let base = ScenarioConfig::from_json(BANDWIDTH_GRID).unwrap();
    let start = Instant::now();
    let rows = run_grid(&base).unwrap();
    let grid_time = start.elapsed();

    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "scaling identities", scaling_identities()),
        (2, "Lyapunov solver", lyapunov_solver()),
        (3, "control rate analytic vs numeric", control_rate()),
        (4, "V' decomposition", vdot_decomposition()),
        (5, "grid reproduction", grid_reproduction(&rows, grid_time)),
        (6, "ultimate bound soundness", bound_soundness(&rows)),
        (7, "feasible-set monotonicity", feasible_monotonicity()),
        (8, "observer convergence", eso_convergence()),
        (9, "telescope compensation", telescope()),
        (
            10,
            "determinism and step convergence",
            determinism_and_convergence(&rows),
        ),
    ];
    let mut failed = 0;
    for (n, name, o) in &results {
        println!(
            "criterion {n:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
