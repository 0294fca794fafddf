//! Closed-loop simulation, parameter grids and CSV output.

pub mod grid;
pub mod integrator;
pub mod output;
pub mod scenario;
pub mod telescope;

pub use grid::{run_grid, GridRow};
pub use scenario::{
    analytic_control_rate, control_rate_check, run_scenario, ControlRateCheck, InputModel, Metrics, Sample, Scenario,
    ScenarioResult, DIVERGENCE_THRESHOLD,
};
pub use telescope::{
    run_telescope, saturate, telescope_gains, CurrentLoopConfig, TelescopeSetup, FRICTION_STEEPNESS, SIDEREAL_RATE,
    TELESCOPE_INPUT_GAINS, TORQUE_CONSTANT,
};
