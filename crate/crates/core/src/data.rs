//! Shared domain types: datasets with provenance tags, training workflows,
//! and per-run metric series.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Provenance of a sample row: real data, or synthetic data produced at a
/// given model-fitting generation (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    Real,
    Synthetic { generation: u32 },
}

/// An ordered set of `dim`-dimensional sample vectors, each tagged with its
/// origin. All entries are finite; rows are stored flat in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    data: Vec<f64>,
    origin: Vec<Origin>,
}

impl Dataset {
    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1, "dim must be positive");
        Self {
            dim,
            data: Vec::new(),
            origin: Vec::new(),
        }
    }

    /// Build from a flat row-major buffer; `origin` carries one tag per row.
    pub fn from_flat(dim: usize, data: Vec<f64>, origin: Vec<Origin>) -> Result<Self> {
        assert!(dim >= 1, "dim must be positive");
        if data.len() != origin.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: origin.len() * dim,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRow { row: bad / dim });
        }
        Ok(Self { dim, data, origin })
    }

    pub fn from_rows(dim: usize, rows: &[&[f64]], origin: Origin) -> Result<Self> {
        let mut ds = Self::empty(dim);
        for row in rows {
            ds.push_row(row, origin)?;
        }
        Ok(ds)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.data.chunks_exact(self.dim)
    }

    pub fn origin(&self, i: usize) -> Origin {
        self.origin[i]
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origin
    }

    pub fn push_row(&mut self, row: &[f64], origin: Origin) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRow { row: self.len() });
        }
        self.data.extend_from_slice(row);
        self.origin.push(origin);
        Ok(())
    }

    /// Append all rows of `other`, keeping their origin tags.
    pub fn extend_from(&mut self, other: &Dataset) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        self.data.extend_from_slice(&other.data);
        self.origin.extend_from_slice(&other.origin);
        Ok(())
    }

    /// New dataset holding the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut origin = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            origin.push(self.origin[i]);
        }
        Dataset {
            dim: self.dim,
            data,
            origin,
        }
    }

    /// New dataset holding the last `count` rows.
    pub fn tail(&self, count: usize) -> Dataset {
        assert!(count <= self.len());
        let start = self.len() - count;
        Dataset {
            dim: self.dim,
            data: self.data[start * self.dim..].to_vec(),
            origin: self.origin[start..].to_vec(),
        }
    }

    pub fn count_real(&self) -> usize {
        self.origin.iter().filter(|o| matches!(o, Origin::Real)).count()
    }

    pub fn count_synthetic(&self) -> usize {
        self.len() - self.count_real()
    }
}

/// How training data evolve across model-fitting iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Workflow {
    /// Train each generation only on the previous generation's synthetic
    /// output; real data are used at the first iteration only.
    Replace,
    /// Train each generation on all real and synthetic data so far.
    Accumulate,
    /// Data accumulate, but each generation trains on a fixed-size uniform
    /// without-replacement subsample of the pool.
    AccumulateSubsample { subsample_size: usize },
}

impl Workflow {
    /// Canonical spelling, as used in sweep configs and output files.
    pub fn name(&self) -> &'static str {
        match self {
            Workflow::Replace => "Replace",
            Workflow::Accumulate => "Accumulate",
            Workflow::AccumulateSubsample { .. } => "Accumulate-Subsample",
        }
    }

    pub const ALLOWED_NAMES: [&'static str; 3] = ["Accumulate", "Accumulate-Subsample", "Replace"];

    /// Parse the canonical spelling. `Accumulate-Subsample` gets
    /// `subsample_size` equal to the per-iteration sample count, the
    /// fixed-compute convention.
    pub fn parse(name: &str, n_per_iteration: usize) -> Result<Self> {
        match name {
            "Replace" => Ok(Workflow::Replace),
            "Accumulate" => Ok(Workflow::Accumulate),
            "Accumulate-Subsample" => Ok(Workflow::AccumulateSubsample {
                subsample_size: n_per_iteration,
            }),
            other => Err(Error::UnknownValue {
                key: "setting".into(),
                got: other.into(),
                allowed: Self::ALLOWED_NAMES.join(", "),
            }),
        }
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One recorded scalar: (iteration, metric name, value).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub iteration: u32,
    pub metric: String,
    pub value: f64,
}

/// Per-(task, setting, seed) series of named scalar metrics. Iterations
/// within a metric are strictly increasing; NaN is never stored and +inf is
/// accepted only for divergence-prone metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub task: String,
    pub setting: String,
    pub seed: u64,
    records: Vec<MetricRecord>,
    last_iteration: HashMap<String, u32>,
}

/// Metrics that may legitimately diverge to +inf (losses and squared errors).
fn divergence_prone(name: &str) -> bool {
    name == "nll" || name == "w2_sq" || name.contains("squared_error") || name.contains("test_error")
}

impl MetricSeries {
    pub fn new(task: &str, setting: &str, seed: u64) -> Self {
        Self {
            task: task.to_string(),
            setting: setting.to_string(),
            seed,
            records: Vec::new(),
            last_iteration: HashMap::new(),
        }
    }

    pub fn push(&mut self, iteration: u32, metric: &str, value: f64) -> Result<()> {
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(Error::InvalidMetric {
                name: metric.to_string(),
                value,
            });
        }
        if value == f64::INFINITY && !divergence_prone(metric) {
            return Err(Error::InvalidMetric {
                name: metric.to_string(),
                value,
            });
        }
        if let Some(&last) = self.last_iteration.get(metric) {
            if iteration <= last {
                return Err(Error::NonIncreasingIteration {
                    name: metric.to_string(),
                    last,
                    got: iteration,
                });
            }
        }
        self.last_iteration.insert(metric.to_string(), iteration);
        self.records.push(MetricRecord {
            iteration,
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    /// Value of `metric` at `iteration`, if recorded.
    pub fn get(&self, iteration: u32, metric: &str) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.iteration == iteration && r.metric == metric)
            .map(|r| r.value)
    }

    /// All (iteration, value) pairs for `metric`, in recording order.
    pub fn metric_values(&self, metric: &str) -> Vec<(u32, f64)> {
        self.records
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.iteration, r.value))
            .collect()
    }
}
