//! Monte-Carlo experiments over the cell-free ISAC designs: configuration,
//! per-realization runs, sweeps and CSV output. The `cfisac` binary wraps them.

pub mod config;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, GammaMode, Strategy};
pub use run::{run_realization, run_realization_with_streams, Realization, StrategyRecord};
pub use sweep::{sweep_power_ratio, sweep_streams_ues, sweep_target_distance, SweepKind, SweepRow, SweepTable};
