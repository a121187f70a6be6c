//! File formats, experiment configuration, sweeps and reports for the swarm
//! update simulator. The simulation itself lives in `swarmupdate-core`.

pub mod config;
pub mod files;
pub mod report;
pub mod results;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig, Overrides};
pub use results::{cell_means, read_rows, write_means, write_rows, CellMean, SchemaError};
pub use sweep::{run_sweep, SweepError};
