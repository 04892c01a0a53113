//! Deterministic parallel sweep execution with per-cell result files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{MetricSeries, Workflow};
use crate::datagen::{generate_gaussian_real, generate_linreg_data, ToyDatasetSpec};
use crate::engine::{run_loop, LoopConfig};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianLoopTask, GaussianParams};
use crate::kde::{run_kde_setting, BandwidthSchedule};
use crate::linreg::{LinRegLoopTask, LinRegTask};
use crate::mixture::{run_mixture_cell, MixtureSetting};
use crate::rng::{fnv1a64, RngStream};

use super::config::{Cell, SweepConfig, Task};

/// One executed (or reloaded) grid cell.
#[derive(Clone, Debug)]
pub struct CellResult {
    /// Canonical `key=value;` identity, including task/seed/setting.
    pub canonical: String,
    /// Canonical params excluding seed/setting.
    pub params: String,
    pub series: MetricSeries,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub results: Vec<CellResult>,
    pub executed: usize,
    pub skipped: usize,
    /// (canonical cell, error message) for cells that failed; the sweep
    /// keeps going.
    pub failures: Vec<(String, String)>,
}

fn cell_file(out_dir: &Path, canonical: &str) -> PathBuf {
    out_dir.join("cells").join(format!("{:016x}.csv", fnv1a64(canonical.as_bytes())))
}

/// Stable result order, reconstructible from cell files alone:
/// (task, params, setting, seed).
fn sort_results(results: &mut [CellResult]) {
    results.sort_by(|a, b| {
        (&a.series.task, &a.params, &a.series.setting, a.series.seed).cmp(&(
            &b.series.task,
            &b.params,
            &b.series.setting,
            b.series.seed,
        ))
    });
}

/// The stream every per-cell draw derives from: a stable hash of the cell's
/// canonical identity. Adding grid values elsewhere cannot perturb it.
pub fn cell_stream(canonical: &str) -> RngStream {
    RngStream::with_stream(fnv1a64(canonical.as_bytes()), 0)
}

/// Execute every cell of the sweep exactly once, `parallelism`-wide.
/// With `resume`, cells whose result file already exists are reloaded
/// instead of recomputed. Also writes the merged sorted `results.csv`
/// (byte-identical across parallelism degrees).
pub fn execute_sweep(
    config: &SweepConfig,
    out_dir: &Path,
    parallelism: usize,
    resume: bool,
) -> Result<SweepOutcome> {
    assert!(parallelism >= 1);
    fs::create_dir_all(out_dir.join("cells"))?;
    let cells = config.cells();
    if cells.is_empty() {
        return Err(Error::EmptyGrid("parameters".into()));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool construction");

    struct Done {
        canonical: String,
        params: String,
        outcome: std::result::Result<(MetricSeries, bool), String>,
    }

    let task = config.task;
    let done: Vec<Done> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let canonical = cell.canonical(task);
                let params = cell.params_string();
                let path = cell_file(out_dir, &canonical);
                if resume && path.exists() {
                    match load_cell_file(&path) {
                        Ok(series) => {
                            return Done {
                                canonical,
                                params,
                                outcome: Ok((series, true)),
                            }
                        }
                        Err(e) => {
                            return Done {
                                canonical,
                                params,
                                outcome: Err(format!("reload failed: {e}")),
                            }
                        }
                    }
                }
                match run_cell(task, cell) {
                    Ok(series) => {
                        if let Err(e) = write_cell_file(&path, &canonical, &params, &series) {
                            return Done {
                                canonical,
                                params,
                                outcome: Err(format!("write failed: {e}")),
                            };
                        }
                        Done {
                            canonical,
                            params,
                            outcome: Ok((series, false)),
                        }
                    }
                    Err(e) => {
                        let msg = e.to_string();
                        let _ = fs::write(path.with_extension("error"), &msg);
                        Done {
                            canonical,
                            params,
                            outcome: Err(msg),
                        }
                    }
                }
            })
            .collect()
    });

    let mut results = Vec::with_capacity(done.len());
    let mut executed = 0;
    let mut skipped = 0;
    let mut failures = Vec::new();
    for d in done {
        match d.outcome {
            Ok((series, was_skipped)) => {
                if was_skipped {
                    skipped += 1;
                } else {
                    executed += 1;
                }
                results.push(CellResult {
                    canonical: d.canonical,
                    params: d.params,
                    series,
                });
            }
            Err(msg) => failures.push((d.canonical, msg)),
        }
    }
    sort_results(&mut results);

    write_merged_csv(&out_dir.join("results.csv"), &results)?;

    Ok(SweepOutcome {
        results,
        executed,
        skipped,
        failures,
    })
}

/// Run a single grid cell.
pub fn run_cell(task: Task, cell: &Cell) -> Result<MetricSeries> {
    let canonical = cell.canonical(task);
    let stream = cell_stream(&canonical);
    match task {
        Task::Gaussians => {
            let d = cell.u64("data_dim")? as usize;
            let n = cell.u64("num_samples_per_iteration")? as usize;
            let iterations = cell.u64("num_iterations")? as u32;
            let sigma_sq = cell.f64("sigma_squared")?;
            let workflow = Workflow::parse(cell.str("setting")?, n)?;
            let truth = GaussianParams::isotropic(d, sigma_sq);
            let real = generate_gaussian_real(&vec![0.0; d], sigma_sq, n.max(2), stream.substream("real"))?;
            let test = generate_gaussian_real(&vec![0.0; d], sigma_sq, 2, stream.substream("test"))?;
            let cfg = LoopConfig {
                workflow,
                n_per_iteration: n,
                num_iterations: iterations,
                seed: stream.seed(),
            };
            let mut adapter = GaussianLoopTask::new(truth);
            let mut series = run_loop(&cfg, &mut adapter, &real, &test)?;
            series.seed = cell.u64("seed")?;
            Ok(series)
        }
        Task::Kdes => {
            let n = cell.u64("num_samples_per_iteration")? as usize;
            let iterations = cell.u64("num_iterations")? as u32;
            let h = cell.f64("kernel_bandwidth")?;
            let noise = cell.get("noise").and_then(|v| v.as_f64());
            let spec = ToyDatasetSpec::from_name(cell.str("dataset_name")?, n, noise)?;
            let workflow = Workflow::parse(cell.str("setting")?, n)?;
            let cfg = LoopConfig {
                workflow,
                n_per_iteration: n,
                num_iterations: iterations,
                seed: stream.seed(),
            };
            let mut series = run_kde_setting(&cfg, BandwidthSchedule::Fixed(h), &spec, stream)?;
            series.seed = cell.u64("seed")?;
            Ok(series)
        }
        Task::LinearRegressions => {
            let d = cell.u64("data_dim")? as usize;
            let n = cell.u64("num_samples_per_iteration")? as usize;
            let iterations = cell.u64("num_iterations")? as u32;
            let sigma_sq = cell.f64("sigma_squared")?;
            let workflow = Workflow::parse(cell.str("setting")?, n)?;
            let task_def = LinRegTask::canonical(d, sigma_sq);
            let (rx, ry) = generate_linreg_data(&task_def, n.max(2), stream.substream("real"));
            let real = LinRegLoopTask::augment(&rx, &ry, crate::data::Origin::Real);
            let (tx, ty) = generate_linreg_data(&task_def, 2, stream.substream("test"));
            let test = LinRegLoopTask::augment(&tx, &ty, crate::data::Origin::Real);
            let cfg = LoopConfig {
                workflow,
                n_per_iteration: n,
                num_iterations: iterations,
                seed: stream.seed(),
            };
            let mut adapter = LinRegLoopTask::new(task_def);
            let mut series = run_loop(&cfg, &mut adapter, &real, &test)?;
            series.seed = cell.u64("seed")?;
            Ok(series)
        }
        Task::Mixture => {
            let setting_name = cell.str("mixture_setting")?;
            let sigma_sq = cell.get("sigma_squared").and_then(|v| v.as_f64()).unwrap_or(1.0);
            let setting = match setting_name {
                "gaussian" => MixtureSetting::Gaussian { sigma0_sq: sigma_sq },
                "linreg" => MixtureSetting::LinReg {
                    dim: cell.get("data_dim").and_then(|v| v.as_u64()).unwrap_or(1) as usize,
                    sigma_sq,
                },
                other => {
                    return Err(Error::UnknownValue {
                        key: "mixture_setting".into(),
                        got: other.into(),
                        allowed: "gaussian, linreg".into(),
                    })
                }
            };
            let n_real = cell.u64("n_real")? as usize;
            let n_syn = cell.u64("n_syn")? as usize;
            let seed = cell.u64("seed")?;
            let source_size = cell.get("source_size").and_then(|v| v.as_u64()).unwrap_or(100) as usize;
            let test_size = cell.get("test_size").and_then(|v| v.as_u64()).unwrap_or(2000) as usize;
            // The base stream deliberately excludes n_real/n_syn/seed so
            // that cells within one seed share real data and nest their
            // synthetic pools, exactly as the in-process grid runner does.
            let base_id = format!(
                "task=mixture;mixture_setting={setting_name};sigma_squared={sigma_sq};source_size={source_size};test_size={test_size};"
            );
            let base = RngStream::with_stream(fnv1a64(base_id.as_bytes()), 0);
            let mix_cell = run_mixture_cell(&setting, source_size, test_size, n_real, n_syn, seed, base)?;
            let mut series = MetricSeries::new("mixture", setting_name, seed);
            series.push(0, "test_loss", mix_cell.test_loss)?;
            Ok(series)
        }
    }
}

const CELL_HEADER: &str = "task,setting,seed,cell_params,iteration,metric,value";

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub(crate) fn parse_value(s: &str) -> Result<f64> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|_| Error::Parse {
        line: 0,
        col: 0,
        msg: format!("bad float `{s}`"),
    })
}

fn write_cell_file(path: &Path, _canonical: &str, params: &str, series: &MetricSeries) -> Result<()> {
    let mut body = String::with_capacity(series.records().len() * 48 + 64);
    body.push_str(CELL_HEADER);
    body.push('\n');
    for r in series.records() {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            series.task,
            series.setting,
            series.seed,
            params,
            r.iteration,
            r.metric,
            fmt_value(r.value)
        ));
    }
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, body)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_cell_file(path: &Path) -> Result<MetricSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CELL_HEADER {
        return Err(Error::Parse {
            line: 1,
            col: 1,
            msg: format!("unexpected cell header in {}", path.display()),
        });
    }
    let mut series: Option<MetricSeries> = None;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: i + 2,
                col: 1,
                msg: format!("expected 7 fields in {}", path.display()),
            });
        }
        let seed: u64 = fields[2].parse().map_err(|_| Error::Parse {
            line: i + 2,
            col: 1,
            msg: "bad seed".into(),
        })?;
        let s = series.get_or_insert_with(|| MetricSeries::new(fields[0], fields[1], seed));
        let iteration: u32 = fields[4].parse().map_err(|_| Error::Parse {
            line: i + 2,
            col: 1,
            msg: "bad iteration".into(),
        })?;
        s.push(iteration, fields[5], parse_value(fields[6])?)?;
    }
    series.ok_or(Error::Parse {
        line: 1,
        col: 1,
        msg: format!("empty cell file {}", path.display()),
    })
}

/// Reload every completed cell file from a sweep output directory.
pub fn load_cells(out_dir: &Path) -> Result<Vec<CellResult>> {
    let mut results = Vec::new();
    let dir = out_dir.join("cells");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    for path in paths {
        let series = load_cell_file(&path)?;
        let params = {
            // Row 2, field 4 carries the params string.
            let text = fs::read_to_string(&path)?;
            text.lines()
                .nth(1)
                .and_then(|l| l.split(',').nth(3))
                .unwrap_or_default()
                .to_string()
        };
        let canonical = format!(
            "task={};setting={};seed={};{}",
            series.task, series.setting, series.seed, params
        );
        results.push(CellResult {
            canonical,
            params,
            series,
        });
    }
    sort_results(&mut results);
    Ok(results)
}

/// Merged per-row dump of every cell, sorted, single header. Byte-identical
/// across parallelism degrees by construction.
fn write_merged_csv(path: &Path, results: &[CellResult]) -> Result<()> {
    let mut rows: Vec<String> = Vec::new();
    for r in results {
        for rec in r.series.records() {
            rows.push(format!(
                "{},{},{},{},{},{},{}",
                r.series.task,
                r.series.setting,
                r.series.seed,
                r.params,
                rec.iteration,
                rec.metric,
                fmt_value(rec.value)
            ));
        }
    }
    rows.sort();
    let mut body = String::with_capacity(rows.len() * 48 + 64);
    body.push_str(CELL_HEADER);
    body.push('\n');
    for row in rows {
        body.push_str(&row);
        body.push('\n');
    }
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, body)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
