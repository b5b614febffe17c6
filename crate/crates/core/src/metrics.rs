//! Deviation and control-effort metrics over avoidance episodes.
//!
//! All averages are flat: every sample of every episode counts once, per
//! actuator, and the four actuator means are then averaged. Metrics over no
//! samples are `None`, never zero.

use crate::config::MetricsCompare;
use crate::runner::{Event, LogRecord};
use serde::{Deserialize, Serialize};

/// Inclusive range of record indices during which avoidance was active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub start: usize,
    pub end: usize,
}

impl Episode {
    pub fn samples(&self) -> usize {
        self.end + 1 - self.start
    }
}

/// Splits the log at avoidance enter/exit events. The exit record itself is
/// outside the episode; an episode still open at the end of the log runs to
/// the last record.
pub fn episodes(records: &[LogRecord]) -> Vec<Episode> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    for (k, r) in records.iter().enumerate() {
        if r.has(Event::AvoidanceExit) {
            if let Some(s) = open.take() {
                if k > s {
                    out.push(Episode { start: s, end: k - 1 });
                }
            }
        }
        if r.has(Event::AvoidanceEnter) && open.is_none() {
            open = Some(k);
        }
    }
    if let Some(s) = open {
        if !records.is_empty() {
            out.push(Episode {
                start: s,
                end: records.len() - 1,
            });
        }
    }
    out
}

fn compared(r: &LogRecord, compare: MetricsCompare) -> [f64; 4] {
    match compare {
        MetricsCompare::Desired => r.q_d.0,
        MetricsCompare::Measured => r.q_c.0,
    }
}

fn mean_over_actuators(sums: [f64; 4], counts: [usize; 4]) -> Option<f64> {
    let means: Vec<f64> = (0..4).filter(|&i| counts[i] > 0).map(|i| sums[i] / counts[i] as f64).collect();
    (means.len() == 4).then(|| means.iter().sum::<f64>() / 4.0)
}

/// Mean absolute deviation `|q_a - q_x|` in millimetres.
pub fn mae(records: &[LogRecord], eps: &[Episode], compare: MetricsCompare) -> Option<f64> {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for e in eps {
        for r in &records[e.start..=e.end] {
            let q = compared(r, compare);
            for i in 0..4 {
                sums[i] += (r.q_a[i] - q[i]).abs();
                counts[i] += 1;
            }
        }
    }
    mean_over_actuators(sums, counts).map(|m| m * 1000.0)
}

/// Mean absolute percentage deviation relative to `|q_a|`. Samples with
/// `|q_a| < 1e-9` are skipped.
pub fn mape(records: &[LogRecord], eps: &[Episode], compare: MetricsCompare) -> Option<f64> {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for e in eps {
        for r in &records[e.start..=e.end] {
            let q = compared(r, compare);
            for i in 0..4 {
                if r.q_a[i].abs() < 1e-9 {
                    log::warn!("tick {}: |q_a[{i}]| too small for a percentage, sample skipped", r.tick);
                    continue;
                }
                sums[i] += (r.q_a[i] - q[i]).abs() / r.q_a[i].abs();
                counts[i] += 1;
            }
        }
    }
    mean_over_actuators(sums, counts).map(|m| m * 100.0)
}

/// Mean absolute tick-to-tick change of the control action, within episodes.
pub fn avr(records: &[LogRecord], eps: &[Episode]) -> Option<f64> {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    for e in eps {
        for w in records[e.start..=e.end].windows(2) {
            for i in 0..4 {
                sums[i] += (w[1].u[i] - w[0].u[i]).abs();
                counts[i] += 1;
            }
        }
    }
    mean_over_actuators(sums, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub compare: MetricsCompare,
    pub episodes: Vec<Episode>,
    /// `[first tick, last tick]` per episode.
    pub episode_ticks: Vec<[u64; 2]>,
    pub mae_mm: Option<f64>,
    pub mape_percent: Option<f64>,
    pub avr: Option<f64>,
    pub breach_count: usize,
    pub fault: bool,
    pub ticks: usize,
    pub min_omega_c: Option<f64>,
    pub max_abs_dt: i64,
}

pub fn compute_report(records: &[LogRecord], compare: MetricsCompare) -> MetricsReport {
    let eps = episodes(records);
    let min_omega_c = records
        .iter()
        .map(|r| r.min_omega_c)
        .filter(|v| v.is_finite())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    MetricsReport {
        compare,
        episode_ticks: eps.iter().map(|e| [records[e.start].tick, records[e.end].tick]).collect(),
        mae_mm: mae(records, &eps, compare),
        mape_percent: mape(records, &eps, compare),
        avr: avr(records, &eps),
        breach_count: records.iter().filter(|r| r.has(Event::Breach)).count(),
        fault: records.iter().any(|r| r.has(Event::Fault)),
        ticks: records.len(),
        min_omega_c,
        max_abs_dt: records.iter().flat_map(|r| r.dt.iter().map(|d| d.abs())).max().unwrap_or(0),
        episodes: eps,
    }
}
