//! Parameter sweeps over random networks and self-checking demonstrations.

pub mod demo;
pub mod sweep;

pub use demo::{run_demo, DemoKind, DemoOutcome};
pub use sweep::{
    aggregate, cell_seed, linear_grid, run_sweep, social_convergence_time, uniform_line,
    write_aggregate_csv, write_results_csv, AggregateRow, GraphModel, InitRange, SweepResult,
    SweepRow, SweepSpec, AGGREGATE_HEADER, DEFAULT_BUDGET, RESULTS_HEADER,
};
