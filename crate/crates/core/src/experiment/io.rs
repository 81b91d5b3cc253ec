//! CSV and JSON persistence.
//!
//! Floats are written with `Display`, which emits the shortest decimal that
//! parses back to the same value, so files re-read bit-exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AggregateRecord, OutputOptions, PositionMeans, PositionProfile};
use crate::engine::MarketResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const AGGREGATE_HEADER: &str = "diversity,cost,threshold,mean_gross,mean_net,mean_total_cost,sd_net_across_reps,mean_samples,mean_final_path_quality,n_replications,baseline";
pub const POSITIONS_HEADER: &str =
    "diversity,cost,agent_position,mean_gross,mean_net,mean_samples,mean_path_quality";
pub const AGENTS_HEADER: &str =
    "diversity,cost,replication,agent_position,chosen_index,samples,gross,net";

pub const RIBBON_DEFINITION: &str = "ribbon = mean_net +/- sd_net_across_reps, where sd_net_across_reps is the sample standard deviation (n-1 denominator) over replications of each replication's mean net utility across all agents";
const AGGREGATION_NOTE: &str = "mean_* columns average over all agents within a replication, then over replications; positions.csv holds the per-position means";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut writer: BufWriter<File>) -> Result<()> {
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_aggregate_csv<S: Scalar>(records: &[AggregateRecord<S>], path: &Path) -> Result<()> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.sort_key_cmp(b));
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{AGGREGATE_HEADER}").map_err(io)?;
    for r in &sorted {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.diversity,
            r.cost,
            r.threshold,
            r.mean_gross,
            r.mean_net,
            r.mean_total_cost,
            r.sd_net_across_reps,
            r.mean_samples,
            r.mean_final_path_quality,
            r.n_replications,
            u8::from(r.baseline)
        )
        .map_err(io)?;
    }
    finish(path, w)
}

pub fn write_positions_csv<S: Scalar>(profiles: &[PositionProfile<S>], path: &Path) -> Result<()> {
    let mut sorted: Vec<&PositionProfile<S>> = profiles.iter().collect();
    sorted.sort_by(|a, b| {
        super::total_order(a.diversity, b.diversity).then(super::total_order(a.cost, b.cost))
    });
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{POSITIONS_HEADER}").map_err(io)?;
    for profile in sorted {
        for p in &profile.positions {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                profile.diversity,
                profile.cost,
                p.agent_position,
                p.mean_gross,
                p.mean_net,
                p.mean_samples,
                p.mean_path_quality
            )
            .map_err(io)?;
        }
    }
    finish(path, w)
}

/// Streams `agents.csv` rows one replication at a time.
pub struct AgentCsvWriter {
    path: PathBuf,
    writer: BufWriter<File>,
}

impl AgentCsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = create(path)?;
        writeln!(writer, "{AGENTS_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn write_result<S: Scalar>(&mut self, replication: usize, result: &MarketResult<S>) -> Result<()> {
        let d = result.config.diversity();
        let c = result.config.search_cost();
        for (m, o) in result.outcomes.iter().enumerate() {
            writeln!(
                self.writer,
                "{d},{c},{replication},{},{},{},{},{}",
                m + 1,
                o.chosen_index,
                o.samples,
                o.gross_utility,
                o.net_utility
            )
            .map_err(|e| Error::io(&self.path, e))?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        finish(&self.path, self.writer)
    }
}

/// Writes `results[i]` as replication `i`.
pub fn write_agents_csv<S: Scalar>(results: &[MarketResult<S>], path: &Path) -> Result<()> {
    let mut writer = AgentCsvWriter::create(path)?;
    for (rep, result) in results.iter().enumerate() {
        writer.write_result(rep, result)?;
    }
    writer.finish()
}

/// Column lookup over a CSV with a header row. Unknown columns are ignored.
struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    fn read(path: &Path, required: &str) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| parse_error(path, "empty file"))?;
        let columns: HashMap<String, usize> = header
            .trim_end()
            .split(',')
            .enumerate()
            .map(|(i, name)| (name.to_string(), i))
            .collect();
        for name in required.split(',') {
            if !columns.contains_key(name) {
                return Err(parse_error(path, &format!("missing column `{name}`")));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.trim_end().split(',').map(str::to_string).collect();
            if fields.len() != columns.len() {
                return Err(parse_error(
                    path,
                    &format!("line {}: expected {} fields, got {}", i + 2, columns.len(), fields.len()),
                ));
            }
            rows.push((i + 2, fields));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn get<T: std::str::FromStr>(&self, line: usize, row: &[String], column: &str) -> Result<T> {
        let raw = &row[self.columns[column]];
        raw.parse().map_err(|_| {
            parse_error(
                &self.path,
                &format!("line {line}: cannot parse `{raw}` in column `{column}`"),
            )
        })
    }
}

fn parse_error(path: &Path, reason: &str) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

pub fn read_aggregate_csv<S: Scalar>(path: &Path) -> Result<Vec<AggregateRecord<S>>> {
    let table = Table::read(path, AGGREGATE_HEADER)?;
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let line = *line;
            let baseline: u8 = table.get(line, row, "baseline")?;
            Ok(AggregateRecord {
                diversity: table.get(line, row, "diversity")?,
                cost: table.get(line, row, "cost")?,
                threshold: table.get(line, row, "threshold")?,
                mean_gross: table.get(line, row, "mean_gross")?,
                mean_net: table.get(line, row, "mean_net")?,
                mean_total_cost: table.get(line, row, "mean_total_cost")?,
                sd_net_across_reps: table.get(line, row, "sd_net_across_reps")?,
                mean_samples: table.get(line, row, "mean_samples")?,
                mean_final_path_quality: table.get(line, row, "mean_final_path_quality")?,
                n_replications: table.get(line, row, "n_replications")?,
                baseline: match baseline {
                    0 => false,
                    1 => true,
                    _ => return Err(parse_error(path, &format!("line {line}: baseline must be 0 or 1"))),
                },
            })
        })
        .collect()
}

/// Groups rows back into one profile per `(diversity, cost)`, in file order.
pub fn read_positions_csv<S: Scalar>(path: &Path) -> Result<Vec<PositionProfile<S>>> {
    let table = Table::read(path, POSITIONS_HEADER)?;
    let mut profiles: Vec<PositionProfile<S>> = Vec::new();
    for (line, row) in &table.rows {
        let line = *line;
        let diversity: S = table.get(line, row, "diversity")?;
        let cost: S = table.get(line, row, "cost")?;
        let means = PositionMeans {
            agent_position: table.get(line, row, "agent_position")?,
            mean_gross: table.get(line, row, "mean_gross")?,
            mean_net: table.get(line, row, "mean_net")?,
            mean_samples: table.get(line, row, "mean_samples")?,
            mean_path_quality: table.get(line, row, "mean_path_quality")?,
        };
        match profiles.last_mut() {
            Some(p) if p.diversity == diversity && p.cost == cost => p.positions.push(means),
            _ => profiles.push(PositionProfile {
                diversity,
                cost,
                positions: vec![means],
            }),
        }
    }
    Ok(profiles)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "error", rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed(String),
}

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata<C> {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub master_seed: u64,
    pub config: C,
    pub outputs: OutputOptions,
    pub ribbon: String,
    pub aggregation: String,
    pub wall_time_seconds: f64,
}

impl<C: Serialize> RunMetadata<C> {
    pub fn new(command: &str, master_seed: u64, config: C, outputs: OutputOptions, status: RunStatus) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            status,
            master_seed,
            config,
            outputs,
            ribbon: RIBBON_DEFINITION.to_string(),
            aggregation: AGGREGATION_NOTE.to_string(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time_seconds = seconds;
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        finish(path, w)
    }
}

/// Loads a flat key-value configuration document as JSON values.
///
/// `.json` files are read as JSON; a `run.json` written by this crate yields
/// its `config` object. Anything else is parsed as TOML.
pub fn load_config_document(path: &Path) -> Result<serde_json::Map<String, serde_json::Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
    let value: serde_json::Value = if is_json {
        serde_json::from_str(&text).map_err(|e| parse_error(path, &e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| parse_error(path, &e.to_string()))?
    };
    let mut map = match value {
        serde_json::Value::Object(map) => map,
        _ => return Err(parse_error(path, "expected a key-value document")),
    };
    if map.contains_key("artifact") {
        if let Some(serde_json::Value::Object(config)) = map.remove("config") {
            return Ok(config);
        }
    }
    Ok(map)
}
