//! Generic self-consuming loop driver.
//!
//! One run owns a data pool seeded with the real data. At iteration t the
//! workflow selects a training view (Replace: the most recent synthetic
//! batch; Accumulate: the whole pool; Accumulate-Subsample: a uniform
//! without-replacement subsample), the adapter fits a model, n fresh
//! synthetic rows tagged with generation t are appended, and the adapter's
//! metrics are recorded. Iteration 1 always trains on the original real
//! data, so the first model is identical across workflows.
//!
//! The pool accumulates under every workflow — only the training view
//! differs — so its cardinality after iteration t is exactly n(t+1).
//!
//! Per-iteration randomness comes from substreams of the run's stream keyed
//! by (label, iteration); the subsample draw and the sampling draw never
//! share a stream, so workflows stay comparable under one seed.

use std::collections::BTreeSet;

use rand::Rng;

use crate::data::{Dataset, MetricSeries, Workflow};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Loop shape: workflow, per-iteration sample count n, horizon, seed.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopConfig {
    pub workflow: Workflow,
    pub n_per_iteration: usize,
    pub num_iterations: u32,
    pub seed: u64,
}

/// The training set handed to [`TaskAdapter::fit`]. `Grown` guarantees the
/// rows before `new_from` are exactly the previous fit's training set in the
/// same order, which lets adapters reuse sufficient statistics.
pub enum TrainView<'a> {
    Fresh(&'a Dataset),
    Grown { data: &'a Dataset, new_from: usize },
}

impl<'a> TrainView<'a> {
    pub fn data(&self) -> &'a Dataset {
        match self {
            TrainView::Fresh(d) => d,
            TrainView::Grown { data, .. } => data,
        }
    }
}

/// A task-setting plugged into the loop: fit a model, sample synthetic rows
/// from it, and report evaluation metrics. Methods take `&mut self` so
/// adapters can carry incremental state across iterations; the engine calls
/// fit/sample/evaluate exactly once per iteration, in that order.
pub trait TaskAdapter {
    type Model;

    fn task_name(&self) -> &'static str;

    fn fit(&mut self, view: TrainView<'_>) -> Result<Self::Model>;

    /// Draw `count` synthetic rows; rows must carry
    /// `Origin::Synthetic { generation }` and match the training dimension.
    fn sample(&mut self, model: &Self::Model, count: usize, stream: RngStream, generation: u32) -> Dataset;

    fn evaluate(&mut self, model: &Self::Model, test: &Dataset) -> Vec<(String, f64)>;
}

/// Uniform without-replacement sample of `k` indices from `0..len`, returned
/// sorted ascending (Floyd's algorithm).
pub fn sample_without_replacement(len: usize, k: usize, stream: RngStream) -> Vec<usize> {
    assert!(k <= len);
    let mut rng = stream.rng();
    let mut chosen = BTreeSet::new();
    for j in (len - k)..len {
        let t = rng.random_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Run the fit → sample → record loop for `config.num_iterations` iterations.
pub fn run_loop<A: TaskAdapter>(
    config: &LoopConfig,
    adapter: &mut A,
    real_data: &Dataset,
    test_data: &Dataset,
) -> Result<MetricSeries> {
    let n = config.n_per_iteration;
    assert!(n >= 2, "n_per_iteration must be at least 2");
    assert!(config.num_iterations >= 1);
    let min_real = match config.workflow {
        Workflow::Replace | Workflow::AccumulateSubsample { .. } => n,
        Workflow::Accumulate => 2,
    };
    if real_data.len() < min_real {
        return Err(Error::TooFewSamples {
            required: min_real,
            got: real_data.len(),
        });
    }
    if test_data.is_empty() {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }

    let base = RngStream::new(config.seed);
    let mut pool = real_data.clone();
    let mut series = MetricSeries::new(adapter.task_name(), config.workflow.name(), config.seed);
    let mut prev_fit_len = 0usize;

    for t in 1..=config.num_iterations {
        let model = match config.workflow {
            Workflow::Accumulate => {
                let view = if t == 1 {
                    TrainView::Fresh(&pool)
                } else {
                    TrainView::Grown {
                        data: &pool,
                        new_from: prev_fit_len,
                    }
                };
                let m = adapter.fit(view)?;
                prev_fit_len = pool.len();
                m
            }
            Workflow::Replace => {
                // Iteration 1 trains on the real data; afterwards on the n
                // most recent synthetic rows (the generation t-1 batch).
                let train = pool.tail(if t == 1 { pool.len() } else { n });
                adapter.fit(TrainView::Fresh(&train))?
            }
            Workflow::AccumulateSubsample { subsample_size } => {
                if subsample_size > pool.len() {
                    return Err(Error::PoolExhausted {
                        requested: subsample_size,
                        available: pool.len(),
                    });
                }
                let idx =
                    sample_without_replacement(pool.len(), subsample_size, base.substream_indexed("subsample", u64::from(t)));
                let train = pool.subset(&idx);
                adapter.fit(TrainView::Fresh(&train))?
            }
        };

        let batch = adapter.sample(&model, n, base.substream_indexed("sample", u64::from(t)), t);
        debug_assert_eq!(batch.dim(), pool.dim());
        debug_assert_eq!(batch.len(), n);
        pool.extend_from(&batch)?;

        for (name, value) in adapter.evaluate(&model, test_data) {
            series.push(t, &name, value)?;
        }
    }
    Ok(series)
}
