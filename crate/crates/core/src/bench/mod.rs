//! Experiment drivers behind the command-line tool: convergence tables,
//! size sweeps, the direct-regression baseline, horizon scans, and the
//! CSV / manifest / plot-script outputs.

mod config;
mod experiments;
mod report;
mod run;

pub use config::{
    load_config, BaselineConfig, ConvergenceConfig, FamilyConfig, LoadedConfig, OracleConfig,
    ProblemConfig, RunConfig, SizeSweepConfig, SolveConfig, SurrogateTraining, TrainCommandConfig,
    TstarConfig, Truth,
};
pub use experiments::{
    baseline_direct, bias_only_fit, convergence_study, flow_architecture, horizon_monitor,
    matched_width, operator_data, sample_family, size_sweep, train_command, train_surrogate,
    truth_values, tstar_scan, BaselineReport, BaselineRow, ConvergenceReport, ConvergenceRow,
    OperatorData, SizeSweepReport, SizeSweepRow, TrainedSurrogate, TstarReport,
};
pub use report::{fit_loglog_slope, write_atomic, Manifest, Table, SLOPE_ERROR_FLOOR};
pub use run::{run_command, Command, RunOutcome};
