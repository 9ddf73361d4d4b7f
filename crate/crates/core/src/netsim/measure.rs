//! Event traces and per-interval network measurements.
//!
//! Two vantage points are modeled. `EndHost` is the receiving application:
//! it sees deliveries and infers losses. `InNetwork` is a telemetry probe at
//! the bottleneck egress: it sees departures and queue drops, and its latency
//! excludes propagation and jitter after the bottleneck.
//!
//! Only XR downlink frame packets enter a measurement.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::time::SimTime;
use crate::traffic::{Direction, Eye, Flow, FrameType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Vantage {
    EndHost,
    InNetwork,
}

impl Vantage {
    pub fn as_str(self) -> &'static str {
        match self {
            Vantage::EndHost => "endhost",
            Vantage::InNetwork => "innetwork",
        }
    }
}

impl fmt::Display for Vantage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Vantage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "endhost" => Ok(Vantage::EndHost),
            "innetwork" => Ok(Vantage::InNetwork),
            other => Err(Error::domain(
                "vantage",
                format!("unknown vantage '{other}'"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Enqueue,
    Drop,
    /// Serialization finished at the link egress.
    Depart,
    Deliver,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Enqueue => "enqueue",
            TraceKind::Drop => "drop",
            TraceKind::Depart => "depart",
            TraceKind::Deliver => "deliver",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub time: SimTime,
    pub kind: TraceKind,
    pub direction: Direction,
    pub flow: Flow,
    pub frame_id: u64,
    pub eye: Eye,
    pub frame_type: FrameType,
    /// Wire bytes.
    pub bytes: u32,
    /// Occupancy of the queue this event happened at, after the event.
    pub queue_occupancy_bytes: u64,
    pub created_at: SimTime,
}

impl TraceEvent {
    fn is_xr_downlink(&self) -> bool {
        self.flow == Flow::Downlink && self.direction == Direction::Down
    }
}

/// Writes the trace as CSV:
/// `time_ms,event,flow,frame_id,frame_type,bytes,queue_occupancy_bytes`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TraceEvent]) -> io::Result<()> {
    writeln!(
        w,
        "time_ms,event,flow,frame_id,frame_type,bytes,queue_occupancy_bytes"
    )?;
    for e in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.time,
            e.kind.as_str(),
            e.flow.as_str(),
            e.frame_id,
            e.frame_type.as_str(),
            e.bytes,
            e.queue_occupancy_bytes
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetMeasurement {
    pub t_start: SimTime,
    pub interval_ms: f64,
    /// XR bits per second seen at the vantage point.
    pub throughput_bps: f64,
    /// Mean one-way latency; absent when nothing was observed.
    pub latency_ms: Option<f64>,
    /// Mean absolute difference of consecutive latencies; absent below two samples.
    pub jitter_ms: Option<f64>,
    pub loss_rate: f64,
    pub vantage: Vantage,
}

impl NetMeasurement {
    pub fn empty(t_start: SimTime, interval_ms: f64, vantage: Vantage) -> Self {
        NetMeasurement {
            t_start,
            interval_ms,
            throughput_bps: 0.0,
            latency_ms: None,
            jitter_ms: None,
            loss_rate: 0.0,
            vantage,
        }
    }
}

/// Streaming accumulator for one vantage point over one interval.
#[derive(Clone, Debug, Default)]
pub struct IntervalStats {
    bits: f64,
    observed: u64,
    lost: u64,
    latency_sum_ms: f64,
    jitter_sum_ms: f64,
    last_latency_ms: Option<f64>,
}

impl IntervalStats {
    pub fn observe(&mut self, bytes: u32, latency_ms: f64) {
        self.bits += bytes as f64 * 8.0;
        self.observed += 1;
        self.latency_sum_ms += latency_ms;
        if let Some(prev) = self.last_latency_ms {
            self.jitter_sum_ms += (latency_ms - prev).abs();
        }
        self.last_latency_ms = Some(latency_ms);
    }

    pub fn lose(&mut self) {
        self.lost += 1;
    }

    pub fn finish(&self, t_start: SimTime, interval_ms: f64, vantage: Vantage) -> NetMeasurement {
        let total = self.observed + self.lost;
        NetMeasurement {
            t_start,
            interval_ms,
            throughput_bps: if interval_ms > 0.0 {
                self.bits / (interval_ms / 1_000.0)
            } else {
                0.0
            },
            latency_ms: (self.observed > 0).then(|| self.latency_sum_ms / self.observed as f64),
            jitter_ms: (self.observed > 1).then(|| self.jitter_sum_ms / (self.observed - 1) as f64),
            loss_rate: if total > 0 {
                self.lost as f64 / total as f64
            } else {
                0.0
            },
            vantage,
        }
    }
}

/// Measurement over `[t_start, t_start + interval_ms)` computed from a trace.
///
/// Trace events are expected in time order, as the engine records them.
pub fn measure_interval(
    trace: &[TraceEvent],
    t_start: SimTime,
    interval_ms: f64,
    vantage: Vantage,
) -> NetMeasurement {
    let t_end = t_start + SimTime::from_ms_f64(interval_ms);
    let mut stats = IntervalStats::default();
    for e in trace
        .iter()
        .filter(|e| e.time >= t_start && e.time < t_end && e.is_xr_downlink())
    {
        match (vantage, e.kind) {
            (Vantage::EndHost, TraceKind::Deliver) | (Vantage::InNetwork, TraceKind::Depart) => {
                stats.observe(e.bytes, (e.time - e.created_at).as_ms())
            }
            (_, TraceKind::Drop) => stats.lose(),
            _ => {}
        }
    }
    stats.finish(t_start, interval_ms, vantage)
}

/// Writes measurements as CSV:
/// `t_start_ms,vantage,throughput_bps,latency_ms,jitter_ms,loss_rate`.
/// Absent values are written as empty fields.
pub fn write_measurement_csv<W: Write>(mut w: W, rows: &[NetMeasurement]) -> io::Result<()> {
    writeln!(
        w,
        "t_start_ms,vantage,throughput_bps,latency_ms,jitter_ms,loss_rate"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for m in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.t_start,
            m.vantage,
            m.throughput_bps,
            opt(m.latency_ms),
            opt(m.jitter_ms),
            m.loss_rate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t_us: u64, kind: TraceKind, created_us: u64) -> TraceEvent {
        TraceEvent {
            time: SimTime(t_us),
            kind,
            direction: Direction::Down,
            flow: Flow::Downlink,
            frame_id: 0,
            eye: Eye::Left,
            frame_type: FrameType::P,
            bytes: 1_000,
            queue_occupancy_bytes: 0,
            created_at: SimTime(created_us),
        }
    }

    #[test]
    fn ten_sent_nine_delivered() {
        let mut trace: Vec<_> = (0..9)
            .map(|i| ev(1_000 + i, TraceKind::Deliver, 0))
            .collect();
        trace.push(ev(500, TraceKind::Drop, 0));
        trace.sort_by_key(|e| e.time);
        let m = measure_interval(&trace, SimTime::ZERO, 1_000.0, Vantage::EndHost);
        assert!((m.loss_rate - 0.1).abs() < 1e-12);
        assert_eq!(m.throughput_bps, 9.0 * 8_000.0);
    }

    #[test]
    fn empty_interval() {
        let m = measure_interval(&[], SimTime::ZERO, 1_000.0, Vantage::InNetwork);
        assert_eq!(m.throughput_bps, 0.0);
        assert_eq!(m.loss_rate, 0.0);
        assert_eq!(m.latency_ms, None);
        assert_eq!(m.jitter_ms, None);
    }

    #[test]
    fn jitter_is_mean_abs_delta() {
        let trace = vec![
            ev(1_000, TraceKind::Deliver, 0),
            ev(3_000, TraceKind::Deliver, 0),
            ev(4_000, TraceKind::Deliver, 2_000),
        ];
        let m = measure_interval(&trace, SimTime::ZERO, 10.0, Vantage::EndHost);
        // latencies 1, 3, 2 ms
        assert_eq!(m.latency_ms, Some(2.0));
        assert_eq!(m.jitter_ms, Some(1.5));
    }

    #[test]
    fn interval_is_half_open() {
        let trace = vec![
            ev(0, TraceKind::Deliver, 0),
            ev(1_000_000, TraceKind::Deliver, 0),
        ];
        let m = measure_interval(&trace, SimTime::ZERO, 1_000.0, Vantage::EndHost);
        assert_eq!(m.throughput_bps, 8_000.0);
    }

    #[test]
    fn csv_leaves_absent_fields_empty() {
        let mut buf = Vec::new();
        write_measurement_csv(
            &mut buf,
            &[NetMeasurement::empty(
                SimTime::ZERO,
                1000.0,
                Vantage::EndHost,
            )],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0.000,endhost,0,,,0");
    }
}
