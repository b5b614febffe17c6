//! Batch runs and log post-processing.

use anyhow::Context;
use singavoid_core::config::MetricsCompare;
use singavoid_core::log_io::{read_csv, read_jsonl, write_csv, write_jsonl};
use singavoid_core::metrics::{compute_report, MetricsReport};
use singavoid_core::{run_scenario, LogRecord, RunOutput, ScenarioConfig, Session};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

pub const LOG_JSONL: &str = "log.jsonl";
pub const LOG_CSV: &str = "log.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CONFIG_JSON: &str = "config.json";

/// Runs the scenario to completion. With `realtime` each tick waits for its
/// wall-clock slot; the records are the same either way.
pub fn simulate(cfg: &ScenarioConfig, realtime: bool) -> anyhow::Result<RunOutput> {
    if !realtime {
        return Ok(run_scenario(cfg)?);
    }
    let mut session = Session::new(cfg.clone())?;
    let period = Duration::from_secs_f64(cfg.control_period);
    let start = Instant::now();
    let mut records = Vec::with_capacity(cfg.tick_count() as usize);
    while !session.is_finished() {
        let due = start + period * session.tick() as u32;
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait);
        }
        records.push(session.step()?);
    }
    Ok(RunOutput {
        metrics: compute_report(&records, cfg.metrics_compare),
        fault: session.fault().map(str::to_string),
        records,
    })
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

/// Writes log, metrics and the resolved configuration into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ScenarioConfig, out: &RunOutput) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let paths: Vec<PathBuf> = [LOG_JSONL, LOG_CSV, METRICS_JSON, CONFIG_JSON].iter().map(|f| dir.join(f)).collect();
    write_jsonl(create(&paths[0])?, &out.records)?;
    write_csv(create(&paths[1])?, &out.records)?;
    let mut m = create(&paths[2])?;
    serde_json::to_writer_pretty(&mut m, &out.metrics)?;
    writeln!(m)?;
    m.flush()?;
    let mut c = create(&paths[3])?;
    writeln!(c, "{}", cfg.to_json_string())?;
    c.flush()?;
    Ok(paths)
}

/// Reads a stored log; `.csv` files as CSV, anything else as JSONL.
pub fn read_log(path: &Path) -> anyhow::Result<Vec<LogRecord>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let records = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_csv(BufReader::new(file))
    } else {
        read_jsonl(BufReader::new(file))
    };
    records.with_context(|| format!("cannot read log {}", path.display()))
}

pub fn recompute_metrics(path: &Path, compare: MetricsCompare) -> anyhow::Result<MetricsReport> {
    Ok(compute_report(&read_log(path)?, compare))
}
