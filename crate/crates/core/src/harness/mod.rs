//! The outer attack loop, experiment configuration, parameter sweeps and
//! standalone training tasks.

mod attack;
mod config;
mod seeds;
mod sweep;
mod task;

pub use attack::{
    make_instance, model_factory, run_attack, run_attack_with, AttackReport, EpochSummary,
    Frozen, Instance, Learner, Outcome, StopReason,
};
pub use config::{
    BudgetConfig, DataConfig, EncodingConfig, ExperimentConfig, LweConfig, SecretKind, SweepAxes,
    TaskConfig,
};
pub use seeds::{substream, Stream};
pub use sweep::{read_sweep_csv, run_sweep, run_sweep_with, sweep_cells, write_sweep_csv, SweepRow};
pub use task::{run_task, run_task_observed, Metric, TaskKind, TaskReport, TaskStop};
