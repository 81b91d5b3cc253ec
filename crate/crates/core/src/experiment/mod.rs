//! Replication harness for the diversity x cost grid.
//!
//! Each cell of the grid solves its threshold once, runs `replications`
//! independent markets on streams keyed by `(seed, cell, replication)` and
//! folds them into an [`AggregateRecord`]. Replications run on a rayon pool
//! but are collected and reduced in replication order, so the output does not
//! depend on the number of workers.

mod io;
pub mod stats;

pub use io::{
    load_config_document, read_aggregate_csv, read_positions_csv, write_agents_csv,
    write_aggregate_csv, write_positions_csv, AgentCsvWriter, RunMetadata, RunStatus,
    AGENTS_HEADER, AGGREGATE_HEADER, POSITIONS_HEADER, RIBBON_DEFINITION,
};

use std::cmp::Ordering;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_market, run_random_baseline, MarketResult};
use crate::error::{Error, Result};
use crate::model::MarketConfig;
use crate::scalar::Scalar;
pub use crate::streams::{derive_streams, StreamFamily};

/// Diversity values 0, 0.1, ..., 1.
pub fn default_diversity_grid<S: Scalar>() -> Vec<S> {
    (0..=10).map(|i| S::of(i as f64 / 10.0)).collect()
}

/// Costs 1/2^2, ..., 1/2^8.
pub fn default_cost_grid<S: Scalar>() -> Vec<S> {
    (2..=8).map(|k| S::of(0.5f64.powi(k))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig<S = f64> {
    pub diversity_grid: Vec<S>,
    pub cost_grid: Vec<S>,
    pub replications: usize,
    pub n_agents: usize,
    pub n_alternatives: usize,
    pub master_seed: u64,
    pub include_baseline: bool,
    #[serde(default)]
    pub objective_mean: S,
    #[serde(default)]
    pub subjective_mean: S,
}

impl<S: Scalar> Default for SweepConfig<S> {
    fn default() -> Self {
        Self {
            diversity_grid: default_diversity_grid(),
            cost_grid: default_cost_grid(),
            replications: 1000,
            n_agents: 1000,
            n_alternatives: 100,
            master_seed: 0,
            include_baseline: false,
            objective_mean: S::zero(),
            subjective_mean: S::zero(),
        }
    }
}

impl<S: Scalar> SweepConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.diversity_grid.is_empty() {
            return Err(Error::config("diversity_grid", "must not be empty"));
        }
        if self.cost_grid.is_empty() {
            return Err(Error::config("cost_grid", "must not be empty"));
        }
        if let Some(d) = self
            .diversity_grid
            .iter()
            .find(|d| !(**d >= S::zero() && **d <= S::one()))
        {
            return Err(Error::config(
                "diversity_grid",
                format!("values must lie in [0, 1], got {d}"),
            ));
        }
        if let Some(c) = self
            .cost_grid
            .iter()
            .find(|c| !(c.is_finite() && **c > S::zero()))
        {
            return Err(Error::config(
                "cost_grid",
                format!("costs must be finite and positive, got {c}"),
            ));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.n_agents == 0 {
            return Err(Error::config("n_agents", "must be at least 1"));
        }
        if self.n_alternatives == 0 {
            return Err(Error::config("n_alternatives", "must be at least 1"));
        }
        Ok(())
    }

    /// Market configuration of grid cell `(diversity_index, cost_index)`.
    pub fn market_config(&self, diversity_index: usize, cost_index: usize) -> Result<MarketConfig<S>> {
        let diversity = self.diversity_grid[diversity_index];
        let cost = self.cost_grid[cost_index];
        MarketConfig::new(self.n_alternatives, self.n_agents, diversity, cost)
            .and_then(|c| c.with_means(self.objective_mean, self.subjective_mean))
            .map_err(|e| cell_error(diversity, cost, e))
    }

    /// Grid cells as `(diversity_index, cost_index)`, ordered by
    /// `(diversity, cost)` value.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells: Vec<(usize, usize)> = (0..self.diversity_grid.len())
            .flat_map(|d| (0..self.cost_grid.len()).map(move |c| (d, c)))
            .collect();
        cells.sort_by(|&(d1, c1), &(d2, c2)| {
            total_order(self.diversity_grid[d1], self.diversity_grid[d2])
                .then(total_order(self.cost_grid[c1], self.cost_grid[c2]))
                .then((d1, c1).cmp(&(d2, c2)))
        });
        cells
    }
}

fn total_order<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

fn cell_error<S: Scalar>(diversity: S, cost: S, source: Error) -> Error {
    Error::Cell {
        diversity: diversity.to_f64().unwrap_or(f64::NAN),
        cost: cost.to_f64().unwrap_or(f64::NAN),
        source: Box::new(source),
    }
}

/// Per-replication averages over the agents of one market.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary<S = f64> {
    pub mean_gross: S,
    pub mean_net: S,
    pub mean_total_cost: S,
    pub mean_samples: S,
    /// Path quality of the last agent to decide.
    pub final_path_quality: S,
}

impl<S: Scalar> ReplicationSummary<S> {
    pub fn from_result(result: &MarketResult<S>) -> Self {
        let cost = result.config.search_cost();
        let n = S::of_count(result.outcomes.len());
        let mut gross = S::zero();
        let mut net = S::zero();
        let mut total_cost = S::zero();
        let mut samples = 0usize;
        for o in &result.outcomes {
            gross = gross + o.gross_utility;
            net = net + o.net_utility;
            total_cost = total_cost + S::of_count(o.samples) * cost;
            samples += o.samples;
        }
        Self {
            mean_gross: gross / n,
            mean_net: net / n,
            mean_total_cost: total_cost / n,
            mean_samples: S::of_count(samples) / n,
            final_path_quality: result
                .path_quality_trace
                .last()
                .copied()
                .unwrap_or_else(S::zero),
        }
    }
}

/// One row of `aggregate.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord<S = f64> {
    pub diversity: S,
    pub cost: S,
    pub threshold: S,
    pub mean_gross: S,
    pub mean_net: S,
    pub mean_total_cost: S,
    /// Sample standard deviation over replications of the per-replication
    /// mean net utility.
    pub sd_net_across_reps: S,
    pub mean_samples: S,
    pub mean_final_path_quality: S,
    pub n_replications: usize,
    /// Random-search control row.
    pub baseline: bool,
}

impl<S: Scalar> AggregateRecord<S> {
    pub fn from_replications(
        config: &MarketConfig<S>,
        replications: &[ReplicationSummary<S>],
        baseline: bool,
    ) -> Self {
        let mean_of = |f: fn(&ReplicationSummary<S>) -> S| {
            stats::mean(replications.iter().map(f)).unwrap_or_else(S::nan)
        };
        let nets: Vec<S> = replications.iter().map(|r| r.mean_net).collect();
        Self {
            diversity: config.diversity(),
            cost: config.search_cost(),
            threshold: config.threshold(),
            mean_gross: mean_of(|r| r.mean_gross),
            mean_net: mean_of(|r| r.mean_net),
            mean_total_cost: mean_of(|r| r.mean_total_cost),
            sd_net_across_reps: stats::sample_sd(&nets),
            mean_samples: mean_of(|r| r.mean_samples),
            mean_final_path_quality: mean_of(|r| r.final_path_quality),
            n_replications: replications.len(),
            baseline,
        }
    }

    /// `sd_net_across_reps / sqrt(n_replications)`.
    pub fn standard_error_net(&self) -> S {
        self.sd_net_across_reps / S::of_count(self.n_replications).sqrt()
    }

    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        total_order(self.diversity, other.diversity)
            .then(total_order(self.cost, other.cost))
            .then(self.baseline.cmp(&other.baseline))
    }
}

/// Means at one decision position across replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionMeans<S = f64> {
    /// 1-based decision order.
    pub agent_position: usize,
    pub mean_gross: S,
    pub mean_net: S,
    pub mean_samples: S,
    pub mean_path_quality: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionProfile<S = f64> {
    pub diversity: S,
    pub cost: S,
    pub positions: Vec<PositionMeans<S>>,
}

/// Across-replication means at each agent position. All results must come
/// from the same market configuration.
pub fn position_profile<S: Scalar>(results: &[MarketResult<S>]) -> Result<PositionProfile<S>> {
    let first = results
        .first()
        .ok_or_else(|| Error::MismatchedCells("no results to profile".into()))?;
    if let Some(other) = results.iter().find(|r| r.config != first.config) {
        return Err(Error::MismatchedCells(format!(
            "(diversity={}, cost={}, agents={}) vs (diversity={}, cost={}, agents={})",
            first.config.diversity(),
            first.config.search_cost(),
            first.config.n_agents(),
            other.config.diversity(),
            other.config.search_cost(),
            other.config.n_agents(),
        )));
    }
    let n_agents = first.outcomes.len();
    let reps = S::of_count(results.len());
    let mut gross = vec![S::zero(); n_agents];
    let mut net = vec![S::zero(); n_agents];
    let mut samples = vec![S::zero(); n_agents];
    let mut quality = vec![S::zero(); n_agents];
    for result in results {
        for (m, (o, q)) in result
            .outcomes
            .iter()
            .zip(&result.path_quality_trace)
            .enumerate()
        {
            gross[m] = gross[m] + o.gross_utility;
            net[m] = net[m] + o.net_utility;
            samples[m] = samples[m] + S::of_count(o.samples);
            quality[m] = quality[m] + *q;
        }
    }
    let positions = (0..n_agents)
        .map(|m| PositionMeans {
            agent_position: m + 1,
            mean_gross: gross[m] / reps,
            mean_net: net[m] / reps,
            mean_samples: samples[m] / reps,
            mean_path_quality: quality[m] / reps,
        })
        .collect();
    Ok(PositionProfile {
        diversity: first.config.diversity(),
        cost: first.config.search_cost(),
        positions,
    })
}

/// All replications of one grid cell, handed to the sweep's cell callback.
#[derive(Debug)]
pub struct CellRun<S = f64> {
    pub diversity_index: usize,
    pub cost_index: usize,
    pub baseline: bool,
    pub results: Vec<MarketResult<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput<S = f64> {
    /// Sorted by `(diversity, cost, baseline)`.
    pub records: Vec<AggregateRecord<S>>,
    /// Popularity-search cells only, in the same order.
    pub positions: Vec<PositionProfile<S>>,
}

/// Runs the sweep on the global rayon pool.
pub fn run_sweep<S: Scalar>(sweep: &SweepConfig<S>) -> Result<SweepOutput<S>> {
    run_sweep_with(sweep, None, |_| Ok(()))
}

/// Runs the sweep on `workers` threads (the global pool when `None`),
/// passing every cell's raw results to `on_cell` in `(diversity, cost)` order
/// with the baseline cell after its popularity cell.
pub fn run_sweep_with<S, F>(
    sweep: &SweepConfig<S>,
    workers: Option<usize>,
    mut on_cell: F,
) -> Result<SweepOutput<S>>
where
    S: Scalar,
    F: FnMut(&CellRun<S>) -> Result<()>,
{
    sweep.validate()?;
    let pool = workers
        .map(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::config("threads", e.to_string()))
        })
        .transpose()?;
    sweep_cells(sweep, pool.as_ref(), &mut on_cell)
}

fn sweep_cells<S, F>(
    sweep: &SweepConfig<S>,
    pool: Option<&rayon::ThreadPool>,
    on_cell: &mut F,
) -> Result<SweepOutput<S>>
where
    S: Scalar,
    F: FnMut(&CellRun<S>) -> Result<()>,
{
    let mut records = Vec::new();
    let mut positions = Vec::new();
    let variants: &[bool] = if sweep.include_baseline {
        &[false, true]
    } else {
        &[false]
    };

    for (d, c) in sweep.cells() {
        let config = sweep.market_config(d, c)?;
        for &baseline in variants {
            let replicate = || -> Vec<MarketResult<S>> {
                (0..sweep.replications)
                    .into_par_iter()
                    .map(|rep| {
                        let streams = derive_streams(sweep.master_seed, d, c, rep);
                        if baseline {
                            run_random_baseline(&config, &streams.baseline())
                        } else {
                            run_market(&config, &streams)
                        }
                    })
                    .collect()
            };
            let results = match pool {
                Some(pool) => pool.install(replicate),
                None => replicate(),
            };
            let summaries: Vec<ReplicationSummary<S>> =
                results.iter().map(ReplicationSummary::from_result).collect();
            records.push(AggregateRecord::from_replications(&config, &summaries, baseline));
            if !baseline {
                positions.push(position_profile(&results)?);
            }
            let cell = CellRun {
                diversity_index: d,
                cost_index: c,
                baseline,
                results,
            };
            on_cell(&cell).map_err(|e| cell_error(config.diversity(), config.search_cost(), e))?;
        }
    }
    records.sort_by(|a, b| a.sort_key_cmp(b));
    Ok(SweepOutput { records, positions })
}

/// Which optional files a sweep writes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputOptions {
    pub positions: bool,
    pub per_agent: bool,
}

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const POSITIONS_FILE: &str = "positions.csv";
pub const AGENTS_FILE: &str = "agents.csv";
pub const RUN_FILE: &str = "run.json";

/// Runs the sweep and persists it under `out_dir`.
///
/// Data files are written with a `.partial` suffix and renamed once the whole
/// sweep has succeeded; on failure the partial files stay behind and
/// `run.json` records the failed status.
pub fn execute_sweep<S: Scalar>(
    sweep: &SweepConfig<S>,
    options: OutputOptions,
    workers: Option<usize>,
    out_dir: &Path,
    mut progress: impl FnMut(&CellRun<S>),
) -> Result<SweepOutput<S>> {
    sweep.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let started = Instant::now();

    let mut agents = if options.per_agent {
        Some(AgentCsvWriter::create(&partial(out_dir, AGENTS_FILE))?)
    } else {
        None
    };

    let outcome = run_sweep_with(sweep, workers, |cell| {
        progress(cell);
        if let (Some(writer), false) = (agents.as_mut(), cell.baseline) {
            for (rep, result) in cell.results.iter().enumerate() {
                writer.write_result(rep, result)?;
            }
        }
        Ok(())
    })
    .and_then(|output| {
        if let Some(writer) = agents.take() {
            writer.finish()?;
        }
        write_aggregate_csv(&output.records, &partial(out_dir, AGGREGATE_FILE))?;
        if options.positions {
            write_positions_csv(&output.positions, &partial(out_dir, POSITIONS_FILE))?;
        }
        Ok(output)
    })
    .and_then(|output| {
        let mut files = vec![AGGREGATE_FILE];
        if options.positions {
            files.push(POSITIONS_FILE);
        }
        if options.per_agent {
            files.push(AGENTS_FILE);
        }
        for name in files {
            let from = partial(out_dir, name);
            let to = out_dir.join(name);
            std::fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
        Ok(output)
    });

    let status = match &outcome {
        Ok(_) => RunStatus::Complete,
        Err(e) => RunStatus::Failed(e.to_string()),
    };
    let metadata = RunMetadata::new("sweep", sweep.master_seed, sweep.clone(), options, status)
        .with_wall_time(started.elapsed().as_secs_f64());
    let written = metadata.write(&out_dir.join(RUN_FILE));
    let output = outcome?;
    written?;
    Ok(output)
}

fn partial(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.partial"))
}
