//! Discrete-event network between the XR cloud and the headset.
//!
//! Topology: cloud -> bottleneck queue + downlink -> headset, plus a reverse
//! uplink path for pose and sync packets. Cross-traffic microbursts share the
//! downlink bottleneck. One [`Simulation`] is single-threaded and fully
//! determined by its [`SimConfig`].

pub mod aqm;
pub mod decode;
pub mod event;
pub mod link;
pub mod measure;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::time::SimTime;
use crate::traffic::{
    sync_packet_at, Direction, DownlinkSource, Eye, Flow, FramePacket, FrameType, FrameWeights,
    GopPattern, UplinkSize, UplinkSource, DEFAULT_HEADER_BYTES, DEFAULT_MTU_PAYLOAD,
    DEFAULT_POSE_RATE_HZ, DEFAULT_SYNC_BYTES,
};

pub use aqm::{AqmOutcome, BottleneckQueue, Discipline, QueueConfig, Queued};
pub use decode::{decodable_flags, decodable_set, FrameRecord, FrameTracker};
pub use event::EventQueue;
pub use link::{link_transmit, CapacitySchedule, JitterModel, Link};
pub use measure::{
    measure_interval, IntervalStats, NetMeasurement, TraceEvent, TraceKind, Vantage,
};

use link::JitterState;

/// Cross-traffic packet size on the wire.
pub const CROSS_PACKET_BYTES: u32 = 1_500;

/// A simulated packet in the network.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub meta: FramePacket,
    pub wire_bytes: u32,
}

impl Queued for Packet {
    fn size_bytes(&self) -> u32 {
        self.wire_bytes
    }

    fn frame_class(&self) -> FrameType {
        match self.meta.flow {
            Flow::Downlink => self.meta.frame_type,
            _ => FrameType::NA,
        }
    }
}

/// Cross traffic at `rate_bps` over `[start, start + duration_ms)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Microburst {
    pub start: SimTime,
    pub duration_ms: f64,
    pub rate_bps: f64,
}

impl Microburst {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(Error::domain("microburst.duration_ms", "must be > 0"));
        }
        if !(self.rate_bps.is_finite() && self.rate_bps >= 0.0) {
            return Err(Error::domain("microburst.rate_bps", "must be >= 0"));
        }
        Ok(())
    }

    pub fn end(&self) -> SimTime {
        self.start + SimTime::from_ms_f64(self.duration_ms)
    }

    /// Arrival time of the `index`-th packet, if inside the burst.
    fn arrival(&self, index: u64, packet_bytes: u32) -> Option<SimTime> {
        if self.rate_bps <= 0.0 {
            return None;
        }
        let offset =
            (index as f64 * packet_bytes as f64 * 8.0 / self.rate_bps * 1e6).floor() as u64;
        let t = self.start + SimTime(offset);
        (t < self.end()).then_some(t)
    }

    /// Cross-traffic bits offered inside `[t0, t1)`.
    pub fn bits_between(&self, t0: SimTime, t1: SimTime, packet_bytes: u32) -> f64 {
        let mut bits = 0.0;
        let mut i = 0;
        while let Some(t) = self.arrival(i, packet_bytes) {
            if t >= t1 {
                break;
            }
            if t >= t0 {
                bits += packet_bytes as f64 * 8.0;
            }
            i += 1;
        }
        bits
    }
}

/// Arrival times of the cross-traffic packets of one burst.
pub fn inject_microburst(
    start: SimTime,
    duration_ms: f64,
    rate_bps: f64,
    packet_bytes: u32,
) -> Result<Vec<SimTime>> {
    let burst = Microburst {
        start,
        duration_ms,
        rate_bps,
    };
    burst.validate()?;
    if packet_bytes == 0 {
        return Err(Error::domain("packet_bytes", "must be > 0"));
    }
    Ok((0..)
        .map_while(|i| burst.arrival(i, packet_bytes))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceConfig {
    pub pattern: GopPattern,
    pub fps: f64,
    pub eyes: u32,
    pub weights: FrameWeights,
    pub mtu_payload: u32,
    pub header_bytes: u32,
    pub size_noise: f64,
    pub pose_rate_hz: f64,
    pub uplink_size: UplinkSize,
    pub sync_bytes: u32,
    pub sync_downlink: bool,
    pub sync_uplink: bool,
}

impl SourceConfig {
    pub fn new(pattern: GopPattern, fps: f64, eyes: u32) -> Self {
        SourceConfig {
            pattern,
            fps,
            eyes,
            weights: FrameWeights::default(),
            mtu_payload: DEFAULT_MTU_PAYLOAD,
            header_bytes: DEFAULT_HEADER_BYTES,
            size_noise: 0.0,
            pose_rate_hz: DEFAULT_POSE_RATE_HZ,
            uplink_size: UplinkSize::Uniform { min: 16, max: 400 },
            sync_bytes: DEFAULT_SYNC_BYTES,
            sync_downlink: true,
            sync_uplink: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub downlink: Link,
    pub uplink: Link,
    pub queue: QueueConfig,
    pub uplink_queue_bytes: u64,
    pub microbursts: Vec<Microburst>,
    pub cross_packet_bytes: u32,
}

impl NetworkConfig {
    pub fn simple(capacity_bps: f64, propagation_ms: f64, queue: QueueConfig) -> Self {
        NetworkConfig {
            downlink: Link::constant(capacity_bps, propagation_ms),
            uplink: Link::constant(capacity_bps, propagation_ms),
            queue,
            uplink_queue_bytes: 1 << 20,
            microbursts: Vec::new(),
            cross_packet_bytes: CROSS_PACKET_BYTES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.downlink.validate()?;
        self.uplink.validate()?;
        self.queue.validate()?;
        if self.uplink_queue_bytes == 0 {
            return Err(Error::domain("uplink_queue_bytes", "must be > 0"));
        }
        if self.cross_packet_bytes == 0 {
            return Err(Error::domain("cross_packet_bytes", "must be > 0"));
        }
        self.microbursts.iter().try_for_each(Microburst::validate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub source: Option<SourceConfig>,
    pub network: NetworkConfig,
    pub seed: u64,
    /// Per-eye target bitrate until changed.
    pub initial_bitrate: f64,
    /// Sources emit nothing at or after this time.
    pub source_horizon: Option<SimTime>,
    pub record_trace: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkId {
    Down,
    Up,
}

impl LinkId {
    fn direction(self) -> Direction {
        match self {
            LinkId::Down => Direction::Down,
            LinkId::Up => Direction::Up,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Event {
    FrameTick,
    PoseTick,
    CrossArrival { burst: usize, index: u64 },
    Arrival(LinkId, Packet),
    ServiceDone(LinkId),
    Deliver(LinkId, Packet),
}

struct LinkState {
    link: Link,
    queue: BottleneckQueue<Packet>,
    in_service: Option<Packet>,
    jitter: JitterState,
    rng: ChaCha8Rng,
}

impl LinkState {
    fn new(link: Link, queue: QueueConfig, seed: u64) -> Result<Self> {
        Ok(LinkState {
            jitter: JitterState::new(link.jitter),
            link,
            queue: BottleneckQueue::new(queue)?,
            in_service: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

/// Packet accounting per flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl FlowCounters {
    pub fn in_flight(&self) -> u64 {
        self.generated - self.delivered - self.dropped
    }
}

/// Number of flows tracked in [`Simulation::counters`].
pub const FLOWS: [Flow; 4] = [Flow::Downlink, Flow::Uplink, Flow::Sync, Flow::Cross];

fn flow_index(f: Flow) -> usize {
    match f {
        Flow::Downlink => 0,
        Flow::Uplink => 1,
        Flow::Sync => 2,
        Flow::Cross => 3,
    }
}

pub struct Simulation {
    config: SimConfig,
    events: EventQueue<Event>,
    down: LinkState,
    up: LinkState,
    downlink_src: Option<DownlinkSource>,
    uplink_src: Option<UplinkSource>,
    target_bitrate: f64,
    next_packet_id: u64,
    trace: Option<Vec<TraceEvent>>,
    frames: FrameTracker,
    counters: [FlowCounters; 4],
    pending_deliveries: u64,
    endhost: IntervalStats,
    innetwork: IntervalStats,
    xr_generated_bits: f64,
}

/// Independent seed for one random stream of a run.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.network.validate()?;
        let seed = config.seed;
        let down = LinkState::new(
            config.network.downlink.clone(),
            config.network.queue.clone(),
            sub_seed(seed, 1),
        )?;
        let up = LinkState::new(
            config.network.uplink.clone(),
            QueueConfig::drop_tail(config.network.uplink_queue_bytes),
            sub_seed(seed, 2),
        )?;
        let mut events = EventQueue::new();
        let (downlink_src, uplink_src, gop_len) = match &config.source {
            Some(s) => {
                let dl = DownlinkSource::new(
                    s.pattern.clone(),
                    s.fps,
                    s.eyes,
                    s.weights,
                    s.mtu_payload,
                    s.size_noise,
                    sub_seed(seed, 3),
                )?;
                let ul = UplinkSource::new(s.pose_rate_hz, s.uplink_size, sub_seed(seed, 4))?;
                (Some(dl), Some(ul), s.pattern.gop_length())
            }
            None => (None, None, 1),
        };
        let horizon_ok = |t: SimTime| config.source_horizon.is_none_or(|h| t < h);
        if downlink_src.is_some() && horizon_ok(SimTime::ZERO) {
            events.push(SimTime::ZERO, Event::FrameTick)?;
            events.push(SimTime::ZERO, Event::PoseTick)?;
        }
        for (i, b) in config.network.microbursts.iter().enumerate() {
            if let Some(t) = b.arrival(0, config.network.cross_packet_bytes) {
                events.push(t, Event::CrossArrival { burst: i, index: 0 })?;
            }
        }
        if !(config.initial_bitrate.is_finite() && config.initial_bitrate >= 0.0) {
            return Err(Error::domain("initial_bitrate", "must be >= 0"));
        }
        Ok(Simulation {
            trace: config.record_trace.then(Vec::new),
            target_bitrate: config.initial_bitrate,
            config,
            events,
            down,
            up,
            downlink_src,
            uplink_src,
            next_packet_id: 0,
            frames: FrameTracker::new(gop_len),
            counters: [FlowCounters::default(); 4],
            pending_deliveries: 0,
            endhost: IntervalStats::default(),
            innetwork: IntervalStats::default(),
            xr_generated_bits: 0.0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.events.now()
    }

    pub fn target_bitrate(&self) -> f64 {
        self.target_bitrate
    }

    /// Per-eye bitrate applied from the next frame tick on.
    pub fn set_target_bitrate(&mut self, bps: f64) {
        self.target_bitrate = bps.max(0.0);
    }

    /// Stops sources from emitting at or after `t`.
    pub fn stop_sources_at(&mut self, t: SimTime) {
        self.config.source_horizon = Some(t);
    }

    /// Processes every event at or before `t_end`; the clock ends at `t_end`.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<()> {
        if t_end < self.now() {
            return Err(Error::PastEvent {
                now_us: self.now().as_us(),
                at_us: t_end.as_us(),
            });
        }
        while let Some((t, e)) = self.events.pop_until(t_end) {
            self.handle(t, e)?;
        }
        self.events.advance_clock(t_end);
        Ok(())
    }

    /// Processes every event strictly before `t_end`; the clock ends at `t_end`.
    pub fn advance_to(&mut self, t_end: SimTime) -> Result<()> {
        if t_end < self.now() {
            return Err(Error::PastEvent {
                now_us: self.now().as_us(),
                at_us: t_end.as_us(),
            });
        }
        while let Some((t, e)) = self.events.pop_before(t_end) {
            self.handle(t, e)?;
        }
        self.events.advance_clock(t_end);
        Ok(())
    }

    /// Stops the sources at the current clock and runs until nothing is pending.
    pub fn drain(&mut self) -> Result<()> {
        let now = self.now();
        self.stop_sources_at(now);
        while let Some((t, e)) = self.events.pop_until(SimTime(u64::MAX)) {
            self.handle(t, e)?;
        }
        Ok(())
    }

    /// Offers `pkt` to a link at time `t`.
    pub fn inject(
        &mut self,
        t: SimTime,
        link: LinkId,
        pkt: FramePacket,
        wire_bytes: u32,
    ) -> Result<()> {
        let p = self.new_packet(pkt, wire_bytes);
        self.events.push(t, Event::Arrival(link, p))
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn frames(&self) -> &FrameTracker {
        &self.frames
    }

    pub fn counters(&self, flow: Flow) -> FlowCounters {
        self.counters[flow_index(flow)]
    }

    /// Packets queued, in service or propagating, counted from the network
    /// state rather than from the flow counters.
    pub fn packets_in_network(&self) -> u64 {
        (self.down.queue.len() + self.up.queue.len()) as u64
            + self.down.in_service.is_some() as u64
            + self.up.in_service.is_some() as u64
            + self.pending_deliveries
    }

    pub fn queue_occupancy_bytes(&self) -> u64 {
        self.down.queue.occupancy_bytes()
    }

    pub fn downlink_busy(&self) -> bool {
        self.down.in_service.is_some()
    }

    /// XR downlink payload+header bits generated so far.
    pub fn xr_generated_bits(&self) -> f64 {
        self.xr_generated_bits
    }

    /// Closes the current measurement interval at both vantage points.
    pub fn finish_interval(
        &mut self,
        t_start: SimTime,
        interval_ms: f64,
    ) -> (NetMeasurement, NetMeasurement) {
        let e = self.endhost.finish(t_start, interval_ms, Vantage::EndHost);
        let n = self
            .innetwork
            .finish(t_start, interval_ms, Vantage::InNetwork);
        self.endhost = IntervalStats::default();
        self.innetwork = IntervalStats::default();
        (e, n)
    }

    /// Downlink capacity left over by cross traffic during `[t0, t1)`, in bits/s.
    pub fn available_capacity(&self, t0: SimTime, t1: SimTime) -> f64 {
        let cap = self.config.network.downlink.capacity.mean_rate(t0, t1);
        let secs = (t1 - t0).as_secs();
        if secs <= 0.0 {
            return cap;
        }
        let cross: f64 = self
            .config
            .network
            .microbursts
            .iter()
            .map(|b| b.bits_between(t0, t1, self.config.network.cross_packet_bytes))
            .sum();
        (cap - cross / secs).max(0.0)
    }

    fn new_packet(&mut self, meta: FramePacket, wire_bytes: u32) -> Packet {
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        self.counters[flow_index(meta.flow)].generated += 1;
        Packet {
            id,
            meta,
            wire_bytes,
        }
    }

    fn link_mut(&mut self, id: LinkId) -> &mut LinkState {
        match id {
            LinkId::Down => &mut self.down,
            LinkId::Up => &mut self.up,
        }
    }

    fn record(&mut self, t: SimTime, kind: TraceKind, link: LinkId, p: &Packet) {
        if let Some(trace) = self.trace.as_mut() {
            let occ = match link {
                LinkId::Down => self.down.queue.occupancy_bytes(),
                LinkId::Up => self.up.queue.occupancy_bytes(),
            };
            trace.push(TraceEvent {
                time: t,
                kind,
                direction: link.direction(),
                flow: p.meta.flow,
                frame_id: p.meta.frame_id,
                eye: p.meta.eye,
                frame_type: p.meta.frame_type,
                bytes: p.wire_bytes,
                queue_occupancy_bytes: occ,
                created_at: p.meta.created_at,
            });
        }
    }

    fn is_xr_down(link: LinkId, p: &Packet) -> bool {
        link == LinkId::Down && p.meta.flow == Flow::Downlink
    }

    fn on_drop(&mut self, t: SimTime, link: LinkId, p: Packet) {
        self.counters[flow_index(p.meta.flow)].dropped += 1;
        self.record(t, TraceKind::Drop, link, &p);
        if Self::is_xr_down(link, &p) {
            self.frames.on_dropped(p.meta.eye, p.meta.frame_id);
            self.endhost.lose();
            self.innetwork.lose();
        }
    }

    fn arrive(&mut self, t: SimTime, link: LinkId, p: Packet) {
        let outcome = self.link_mut(link).queue.enqueue(p);
        match outcome {
            AqmOutcome::Enqueued { evicted } => {
                for v in evicted {
                    self.on_drop(t, link, v);
                }
                self.record(t, TraceKind::Enqueue, link, &p);
                if self.link_mut(link).in_service.is_none() {
                    self.start_service(t, link);
                }
            }
            AqmOutcome::Dropped {
                victim, evicted, ..
            } => {
                for v in evicted {
                    self.on_drop(t, link, v);
                }
                self.on_drop(t, link, victim);
            }
        }
    }

    fn start_service(&mut self, t: SimTime, link: LinkId) {
        let state = self.link_mut(link);
        let Some(p) = state.queue.dequeue() else {
            return;
        };
        let done = t + state.link.serialization(p.wire_bytes, t);
        state.in_service = Some(p);
        self.events
            .push(done, Event::ServiceDone(link))
            .expect("service completes in the future");
    }

    fn service_done(&mut self, t: SimTime, link: LinkId) -> Result<()> {
        let state = self.link_mut(link);
        let p = state
            .in_service
            .take()
            .ok_or_else(|| Error::domain("link", "service completion on an idle link"))?;
        let jitter_ms = state.jitter.sample_ms(&mut state.rng);
        let flight_ms = (state.link.propagation_ms + jitter_ms).max(0.0);
        let deliver_at = t + SimTime::from_ms_f64(flight_ms);
        self.record(t, TraceKind::Depart, link, &p);
        if Self::is_xr_down(link, &p) {
            self.innetwork
                .observe(p.wire_bytes, (t - p.meta.created_at).as_ms());
        }
        self.pending_deliveries += 1;
        self.events.push(deliver_at, Event::Deliver(link, p))?;
        self.start_service(t, link);
        Ok(())
    }

    fn deliver(&mut self, t: SimTime, link: LinkId, p: Packet) {
        self.pending_deliveries -= 1;
        self.counters[flow_index(p.meta.flow)].delivered += 1;
        self.record(t, TraceKind::Deliver, link, &p);
        if Self::is_xr_down(link, &p) {
            self.frames
                .on_delivered(p.meta.eye, p.meta.frame_id, t.as_us());
            self.endhost
                .observe(p.wire_bytes, (t - p.meta.created_at).as_ms());
        }
    }

    fn horizon_allows(&self, t: SimTime) -> bool {
        self.config.source_horizon.is_none_or(|h| t < h)
    }

    fn frame_tick(&mut self, t: SimTime) -> Result<()> {
        let Some(src) = self.downlink_src.as_mut() else {
            return Ok(());
        };
        let (frames, packets) = src.next_frames(self.target_bitrate);
        let next = src.next_time();
        let tick = frames.first().map_or(0, |f| f.frame_id);
        let source = self.config.source.as_ref().expect("source present").clone();
        for f in &frames {
            let total = packets
                .iter()
                .filter(|p| p.eye == f.eye && p.frame_id == f.frame_id)
                .count() as u32;
            self.frames.register(FrameRecord {
                frame_id: f.frame_id,
                eye: f.eye,
                frame_type: f.frame_type,
                gop_index: f.gop_index,
                gop_pos: f.gop_pos,
                created_at_us: f.time.as_us(),
                total,
                delivered: 0,
                dropped: 0,
                last_delivery_us: 0,
            });
        }
        if source.sync_downlink {
            let s = sync_packet_at(t, tick, source.sync_bytes, Direction::Down);
            let p = self.new_packet(s, source.sync_bytes + source.header_bytes);
            self.arrive(t, LinkId::Down, p);
        }
        for pkt in packets {
            let wire = pkt.payload_bytes + source.header_bytes;
            self.xr_generated_bits += wire as f64 * 8.0;
            let p = self.new_packet(pkt, wire);
            self.arrive(t, LinkId::Down, p);
        }
        if source.sync_uplink {
            let s = sync_packet_at(t, tick, source.sync_bytes, Direction::Up);
            let p = self.new_packet(s, source.sync_bytes + source.header_bytes);
            self.arrive(t, LinkId::Up, p);
        }
        if self.horizon_allows(next) {
            self.events.push(next, Event::FrameTick)?;
        }
        Ok(())
    }

    fn pose_tick(&mut self, t: SimTime) -> Result<()> {
        let header = self.config.source.as_ref().map_or(0, |s| s.header_bytes);
        let Some(src) = self.uplink_src.as_mut() else {
            return Ok(());
        };
        let pkt = src.next_packet();
        let next = src.next_time();
        let p = self.new_packet(pkt, pkt.payload_bytes + header);
        self.arrive(t, LinkId::Up, p);
        if self.horizon_allows(next) {
            self.events.push(next, Event::PoseTick)?;
        }
        Ok(())
    }

    fn cross_arrival(&mut self, t: SimTime, burst: usize, index: u64) -> Result<()> {
        let b = self.config.network.microbursts[burst];
        let bytes = self.config.network.cross_packet_bytes;
        let meta = FramePacket {
            flow: Flow::Cross,
            direction: Direction::Down,
            frame_id: burst as u64,
            eye: Eye::NA,
            frame_type: FrameType::NA,
            seq: index as u32,
            total: 1,
            payload_bytes: bytes,
            created_at: t,
        };
        let p = self.new_packet(meta, bytes);
        self.arrive(t, LinkId::Down, p);
        if let Some(next) = b.arrival(index + 1, bytes) {
            self.events.push(
                next,
                Event::CrossArrival {
                    burst,
                    index: index + 1,
                },
            )?;
        }
        Ok(())
    }

    fn handle(&mut self, t: SimTime, e: Event) -> Result<()> {
        match e {
            Event::FrameTick => self.frame_tick(t),
            Event::PoseTick => self.pose_tick(t),
            Event::CrossArrival { burst, index } => self.cross_arrival(t, burst, index),
            Event::Arrival(link, p) => {
                self.arrive(t, link, p);
                Ok(())
            }
            Event::ServiceDone(link) => self.service_done(t, link),
            Event::Deliver(link, p) => {
                self.deliver(t, link, p);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare(capacity: f64, prop: f64) -> Simulation {
        Simulation::new(SimConfig {
            source: None,
            network: NetworkConfig::simple(capacity, prop, QueueConfig::drop_tail(100_000)),
            seed: 1,
            initial_bitrate: 0.0,
            source_horizon: None,
            record_trace: true,
        })
        .unwrap()
    }

    fn pkt(t: SimTime, id: u64) -> FramePacket {
        FramePacket {
            flow: Flow::Downlink,
            direction: Direction::Down,
            frame_id: id,
            eye: Eye::Left,
            frame_type: FrameType::P,
            seq: 0,
            total: 1,
            payload_bytes: 1_460,
            created_at: t,
        }
    }

    #[test]
    fn no_sources_empty_trace() {
        let mut sim = bare(10e6, 1.0);
        sim.run_until(SimTime::from_ms(1_000)).unwrap();
        assert!(sim.trace().is_empty());
        assert_eq!(sim.now(), SimTime::from_ms(1_000));
    }

    #[test]
    fn single_packet_idle_link() {
        let mut sim = bare(12e6, 5.0);
        let t = SimTime::from_ms(10);
        sim.inject(t, LinkId::Down, pkt(t, 0), 1_500).unwrap();
        sim.run_until(SimTime::from_ms(100)).unwrap();
        let deliver = sim
            .trace()
            .iter()
            .find(|e| e.kind == TraceKind::Deliver)
            .unwrap();
        assert_eq!(deliver.time, SimTime::from_ms(16));
    }

    #[test]
    fn equal_time_events_keep_insertion_order() {
        let mut sim = bare(12e6, 0.0);
        let t = SimTime::from_ms(1);
        for id in 0..3 {
            sim.inject(t, LinkId::Down, pkt(t, id), 1_500).unwrap();
        }
        sim.run_until(SimTime::from_ms(100)).unwrap();
        let enq: Vec<u64> = sim
            .trace()
            .iter()
            .filter(|e| e.kind == TraceKind::Enqueue)
            .map(|e| e.frame_id)
            .collect();
        assert_eq!(enq, vec![0, 1, 2]);
    }

    #[test]
    fn run_until_rejects_the_past() {
        let mut sim = bare(12e6, 0.0);
        sim.run_until(SimTime::from_ms(10)).unwrap();
        assert!(sim.run_until(SimTime::from_ms(5)).is_err());
        assert!(sim
            .inject(SimTime::from_ms(5), LinkId::Down, pkt(SimTime::ZERO, 0), 10)
            .is_err());
    }

    #[test]
    fn zero_rate_microburst_is_empty() {
        assert!(inject_microburst(SimTime::ZERO, 10.0, 0.0, 1_500)
            .unwrap()
            .is_empty());
        assert!(inject_microburst(SimTime::ZERO, 0.0, 1e6, 1_500).is_err());
        // 12 Mb/s of 1500 B packets: one per ms
        let a = inject_microburst(SimTime::from_ms(5), 10.0, 12e6, 1_500).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a[1], SimTime::from_ms(6));
    }
}
