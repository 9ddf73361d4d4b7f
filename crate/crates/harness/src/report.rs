//! Run reports, their aggregates and the CSV files they are written to.
//!
//! Numbers are written in Rust's shortest round-trip form, so parsing a CSV
//! and re-aggregating with [`Aggregate::from_rows`] reproduces the summary
//! exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use xrsim_core::netsim::measure::{write_measurement_csv, write_trace_csv, NetMeasurement};
use xrsim_core::netsim::TraceEvent;
use xrsim_core::rl::StepLog;
use xrsim_core::session::IntervalRecord;

pub const INTERVALS_HEADER: &str = "interval,t_start_ms,level,prev_level,bitrate_bps,available_bps,frames_total,frames_decodable,latency_ms,loss_rate,resolution_level,framerate_effective,stall_ratio,clamped";
pub const QOE_HEADER: &str = "t_ms,mqi,iqi,pqi,qoe,reward";
pub const TRAIN_LOG_HEADER: &str = "step,agent_id,epsilon,reward,td_error_mean,critic_loss";

/// The per-interval quantities the aggregates are built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub qoe: f64,
    pub reward: f64,
    pub frames_total: u64,
    pub frames_decodable: u64,
    pub loss_rate: f64,
    pub latency_ms: f64,
}

impl From<&IntervalRecord> for AggregateRow {
    fn from(r: &IntervalRecord) -> Self {
        AggregateRow {
            qoe: r.qoe,
            reward: r.reward,
            frames_total: r.frames_total,
            frames_decodable: r.frames_decodable,
            loss_rate: r.kpi.loss_rate,
            latency_ms: r.latency_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub intervals: usize,
    pub mean_qoe: f64,
    pub mean_reward: f64,
    /// Decodable frames over all frames due in the run; 0 when none were due.
    pub decodable_ratio: f64,
    /// Mean of the per-interval loss rates.
    pub loss_rate: f64,
    /// Nearest-rank 95th percentile of the per-interval latencies.
    pub p95_latency_ms: f64,
}

impl Aggregate {
    pub fn from_rows(rows: &[AggregateRow]) -> Aggregate {
        let n = rows.len();
        let mean = |f: fn(&AggregateRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let total: u64 = rows.iter().map(|r| r.frames_total).sum();
        let decodable: u64 = rows.iter().map(|r| r.frames_decodable).sum();
        let mut lat: Vec<f64> = rows.iter().map(|r| r.latency_ms).collect();
        lat.sort_by(f64::total_cmp);
        let p95 = if n == 0 {
            0.0
        } else {
            lat[(0.95 * n as f64).ceil() as usize - 1]
        };
        Aggregate {
            intervals: n,
            mean_qoe: mean(|r| r.qoe),
            mean_reward: mean(|r| r.reward),
            decodable_ratio: if total == 0 {
                0.0
            } else {
                decodable as f64 / total as f64
            },
            loss_rate: mean(|r| r.loss_rate),
            p95_latency_ms: p95,
        }
    }
}

/// Result of one scenario run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub policy: String,
    pub seed: u64,
    pub config_hash: String,
    pub records: Vec<IntervalRecord>,
    pub trace: Vec<TraceEvent>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(
        policy: String,
        seed: u64,
        config_hash: String,
        records: Vec<IntervalRecord>,
        trace: Vec<TraceEvent>,
    ) -> Self {
        let rows: Vec<AggregateRow> = records.iter().map(AggregateRow::from).collect();
        RunReport {
            aggregate: Aggregate::from_rows(&rows),
            policy,
            seed,
            config_hash,
            records,
            trace,
        }
    }

    pub fn summary(&self) -> String {
        let a = &self.aggregate;
        let mut s = String::new();
        let _ = writeln!(s, "policy: {}", self.policy);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "config_hash: {}", self.config_hash);
        let _ = writeln!(s, "intervals: {}", a.intervals);
        let _ = writeln!(s, "mean_qoe: {}", a.mean_qoe);
        let _ = writeln!(s, "mean_reward: {}", a.mean_reward);
        let _ = writeln!(s, "decodable_ratio: {}", a.decodable_ratio);
        let _ = writeln!(s, "loss_rate: {}", a.loss_rate);
        let _ = writeln!(s, "p95_latency_ms: {}", a.p95_latency_ms);
        s
    }

    /// Writes `intervals.csv`, `qoe.csv`, `measurements.csv`, `summary.txt`
    /// and, when recorded, `trace.csv`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        write_file(&dir.join("intervals.csv"), |w| {
            write_intervals_csv(w, &self.records)
        })?;
        write_file(&dir.join("qoe.csv"), |w| write_qoe_csv(w, &self.records))?;
        let measurements: Vec<NetMeasurement> = self
            .records
            .iter()
            .flat_map(|r| [r.endhost, r.innetwork])
            .collect();
        write_file(&dir.join("measurements.csv"), |w| {
            write_measurement_csv(w, &measurements)
        })?;
        if !self.trace.is_empty() {
            write_file(&dir.join("trace.csv"), |w| write_trace_csv(w, &self.trace))?;
        }
        fs::write(dir.join("summary.txt"), self.summary())
    }
}

pub fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    body(&mut w)?;
    w.flush()
}

pub fn write_intervals_csv<W: Write>(w: &mut W, records: &[IntervalRecord]) -> io::Result<()> {
    writeln!(w, "{INTERVALS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.t_start,
            r.level,
            r.prev_level,
            r.bitrate_bps,
            r.available_bps,
            r.frames_total,
            r.frames_decodable,
            r.latency_ms,
            r.kpi.loss_rate,
            r.kpi.delivered_resolution_level,
            r.kpi.framerate_effective,
            r.kpi.stall_ratio,
            r.clamped
        )?;
    }
    Ok(())
}

pub fn write_qoe_csv<W: Write>(w: &mut W, records: &[IntervalRecord]) -> io::Result<()> {
    writeln!(w, "{QOE_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t_start, r.indexes.mqi, r.indexes.iqi, r.indexes.pqi, r.qoe, r.reward
        )?;
    }
    Ok(())
}

pub fn write_train_log_csv<W: Write>(w: &mut W, logs: &[StepLog]) -> io::Result<()> {
    for l in logs {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            l.step, l.agent_id, l.epsilon, l.reward, l.td_error_mean, l.critic_loss
        )?;
    }
    Ok(())
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
