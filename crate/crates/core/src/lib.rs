//! Self-consuming generative training loops and the measurements that tell
//! whether they collapse.
//!
//! A *loop* starts from real data, fits a model, samples synthetic data from
//! the fit, and repeats. Three data workflows are supported:
//!
//! * **Replace** — each generation trains only on the previous generation's
//!   synthetic output,
//! * **Accumulate** — each generation trains on the original real data plus
//!   all synthetic data produced so far,
//! * **Accumulate-Subsample** — the pool accumulates, but every generation
//!   trains on a fixed-size uniform subsample of it.
//!
//! Three task-settings plug into the loop driver in [`engine`]: multivariate
//! Gaussian fitting ([`gaussian`]), Gaussian-kernel density estimation
//! ([`kde`]), and linear regression ([`linreg`]). The [`gaussian`] and
//! [`kde`] modules also carry the closed-form predictions these processes
//! are validated against. [`mixture`] measures test loss over real/synthetic
//! training mixtures and runs the associated regression analysis on top of
//! the small OLS/F-test kernel in [`stats`]. [`harness`] expands sweep
//! configurations into grid cells, executes them deterministically in
//! parallel, and aggregates results to CSV/JSON/SVG.
//!
//! All randomness flows through [`rng::RngStream`], a splittable counter-based
//! stream: a (seed, stream id) pair fully determines every draw, independent
//! of thread schedule.

pub mod data;
pub mod datagen;
pub mod engine;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod kde;
pub mod linalg;
pub mod linreg;
pub mod mixture;
pub mod rng;
pub mod stats;

pub use data::{Dataset, MetricRecord, MetricSeries, Origin, Workflow};
pub use error::{Error, Result};
pub use rng::RngStream;
