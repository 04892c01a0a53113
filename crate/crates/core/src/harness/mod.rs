//! Sweep configuration, grid expansion, deterministic parallel execution,
//! aggregation, and file emission.
//!
//! A sweep config is a restricted indentation-based key/value format (see
//! [`config`]) expanding to a cartesian grid of cells. Every cell's random
//! stream derives from a stable 64-bit hash of its canonical identity
//! string, so results never depend on execution order, parallelism degree,
//! or the presence of other grid values. Cells flush their results to
//! individual files as they finish; an interrupted sweep resumes by skipping
//! completed cells.

pub mod aggregate;
pub mod chart;
pub mod config;
pub mod emit;
pub mod oracle;
pub mod sweep;

pub use aggregate::{aggregate, AggregateRow};
pub use chart::plot_metric;
pub use config::{Cell, SweepConfig, Task, Value};
pub use emit::{emit, load_aggregate_csv, OutputFormat};
pub use sweep::{execute_sweep, load_cells, CellResult, SweepOutcome};
