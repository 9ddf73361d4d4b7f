//! XR traffic: per-eye downlink frame bursts tagged with I/P/B type,
//! periodic synchronization packets and small high-rate uplink pose packets.
//!
//! Frame sizes are modeled from the target bitrate and per-type weights; no
//! payload is encoded. All generators are deterministic given their seed.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::time::{grid_time, SimTime};

/// Simulated per-packet header overhead in bytes.
pub const DEFAULT_HEADER_BYTES: u32 = 40;
/// Conventional Ethernet MTU minus the simulated header.
pub const DEFAULT_MTU_PAYLOAD: u32 = 1_500 - DEFAULT_HEADER_BYTES;
pub const DEFAULT_SYNC_BYTES: u32 = 8;
pub const DEFAULT_POSE_RATE_HZ: f64 = 500.0;
pub const MIN_UPLINK_BYTES: u32 = 16;
pub const MAX_UPLINK_BYTES: u32 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameType {
    I,
    P,
    B,
    /// Not a video frame (pose, sync, cross traffic).
    NA,
}

impl FrameType {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::I => "I",
            FrameType::P => "P",
            FrameType::B => "B",
            FrameType::NA => "NA",
        }
    }

    /// I and P frames serve as references for other frames.
    pub fn is_anchor(self) -> bool {
        matches!(self, FrameType::I | FrameType::P)
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" => Ok(FrameType::I),
            "P" | "p" => Ok(FrameType::P),
            "B" | "b" => Ok(FrameType::B),
            "NA" => Ok(FrameType::NA),
            other => Err(Error::domain(
                "frame_type",
                format!("unknown frame type '{other}'"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Eye {
    Left,
    Right,
    NA,
}

impl Eye {
    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "L",
            Eye::Right => "R",
            Eye::NA => "NA",
        }
    }

    /// Eyes rendered for a display with `eyes` views.
    pub fn views(eyes: u32) -> &'static [Eye] {
        if eyes >= 2 {
            &[Eye::Left, Eye::Right]
        } else {
            &[Eye::Left]
        }
    }

    pub fn index(self) -> usize {
        match self {
            Eye::Right => 1,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flow {
    Downlink,
    Uplink,
    Sync,
    /// Competing traffic injected at the bottleneck; never generated here.
    Cross,
}

impl Flow {
    pub fn as_str(self) -> &'static str {
        match self {
            Flow::Downlink => "downlink",
            Flow::Uplink => "uplink",
            Flow::Sync => "sync",
            Flow::Cross => "cross",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Cloud to headset.
    Down,
    /// Headset to cloud.
    Up,
}

/// One simulated packet as generated by a source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FramePacket {
    pub flow: Flow,
    pub direction: Direction,
    pub frame_id: u64,
    pub eye: Eye,
    pub frame_type: FrameType,
    pub seq: u32,
    pub total: u32,
    pub payload_bytes: u32,
    pub created_at: SimTime,
}

/// Closed group of pictures: one I frame first, every B bracketed by anchors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GopPattern {
    sequence: Vec<FrameType>,
}

impl GopPattern {
    pub fn new(sequence: Vec<FrameType>) -> Result<Self> {
        validate_gop(&sequence)?;
        Ok(GopPattern { sequence })
    }

    pub fn sequence(&self) -> &[FrameType] {
        &self.sequence
    }

    pub fn gop_length(&self) -> usize {
        self.sequence.len()
    }

    pub fn frame_type_at(&self, index: u64) -> FrameType {
        self.sequence[(index % self.sequence.len() as u64) as usize]
    }
}

impl FromStr for GopPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let sequence = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_string().parse::<FrameType>())
            .collect::<Result<Vec<_>>>()?;
        GopPattern::new(sequence)
    }
}

impl fmt::Display for GopPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.sequence {
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

fn validate_gop(seq: &[FrameType]) -> Result<()> {
    let err = |reason: &str| Err(Error::domain("gop_pattern", reason.to_string()));
    if seq.first() != Some(&FrameType::I) {
        return err("must start with an I frame");
    }
    if seq.iter().filter(|t| **t == FrameType::I).count() != 1 {
        return err("must contain exactly one I frame");
    }
    if seq.contains(&FrameType::NA) {
        return err("NA is not a video frame type");
    }
    if seq.last() == Some(&FrameType::B) {
        return err("trailing B frames have no following anchor inside the GOP");
    }
    Ok(())
}

/// Relative frame sizes per type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameWeights {
    pub i: f64,
    pub p: f64,
    pub b: f64,
}

impl Default for FrameWeights {
    fn default() -> Self {
        FrameWeights {
            i: 4.0,
            p: 2.0,
            b: 1.0,
        }
    }
}

impl FrameWeights {
    pub fn uniform() -> Self {
        FrameWeights {
            i: 1.0,
            p: 1.0,
            b: 1.0,
        }
    }

    pub fn get(&self, t: FrameType) -> f64 {
        match t {
            FrameType::I => self.i,
            FrameType::P => self.p,
            FrameType::B => self.b,
            FrameType::NA => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.i >= self.p && self.p >= self.b && self.b > 0.0) || !self.i.is_finite() {
            return Err(Error::domain(
                "frame_weights",
                format!(
                    "need w_I >= w_P >= w_B > 0, got ({}, {}, {})",
                    self.i, self.p, self.b
                ),
            ));
        }
        Ok(())
    }
}

/// Per-eye frame sizes for a target bitrate.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSizeModel {
    /// Per-eye bitrate in bits per second.
    pub target_bitrate: f64,
    pub fps: f64,
    pub weights: FrameWeights,
    pub pattern: GopPattern,
}

impl FrameSizeModel {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::domain(
                "fps",
                format!("must be > 0, got {}", self.fps),
            ));
        }
        if !(self.target_bitrate.is_finite() && self.target_bitrate >= 0.0) {
            return Err(Error::domain(
                "target_bitrate",
                format!("must be >= 0, got {}", self.target_bitrate),
            ));
        }
        Ok(())
    }

    /// Mean bytes per frame, `target_bitrate / (8 * fps)`.
    pub fn mean_frame_bytes(&self) -> f64 {
        self.target_bitrate / (8.0 * self.fps)
    }

    fn weight_sum(&self) -> f64 {
        self.pattern
            .sequence()
            .iter()
            .map(|t| self.weights.get(*t))
            .sum()
    }
}

/// Bytes for one frame of type `t`:
/// `mean * w_t * gop_length / sum(w over the GOP)`, rounded to the nearest byte.
pub fn frame_bytes(model: &FrameSizeModel, t: FrameType) -> Result<u64> {
    model.validate()?;
    if t == FrameType::NA {
        return Err(Error::domain("frame_type", "NA frames have no size"));
    }
    let exact = model.mean_frame_bytes() * model.weights.get(t) * model.pattern.gop_length() as f64
        / model.weight_sum();
    Ok(exact.round() as u64)
}

/// Header fields shared by every packet of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameHeader {
    pub flow: Flow,
    pub direction: Direction,
    pub frame_id: u64,
    pub eye: Eye,
    pub frame_type: FrameType,
    pub created_at: SimTime,
}

/// Splits a frame into MTU-sized packets that all leave at the same instant.
pub fn packetize_frame(
    frame_bytes: u64,
    mtu_payload: u32,
    header: FrameHeader,
) -> Result<Vec<FramePacket>> {
    if mtu_payload == 0 {
        return Err(Error::domain("mtu_payload", "must be > 0"));
    }
    let total = frame_bytes.div_ceil(mtu_payload as u64);
    let total_u32 = u32::try_from(total)
        .map_err(|_| Error::domain("frame_bytes", "frame needs more than u32::MAX packets"))?;
    let mut packets = Vec::with_capacity(total as usize);
    let mut remaining = frame_bytes;
    for seq in 0..total_u32 {
        let payload = remaining.min(mtu_payload as u64) as u32;
        remaining -= payload as u64;
        packets.push(FramePacket {
            flow: header.flow,
            direction: header.direction,
            frame_id: header.frame_id,
            eye: header.eye,
            frame_type: header.frame_type,
            seq,
            total: total_u32,
            payload_bytes: payload,
            created_at: header.created_at,
        });
    }
    Ok(packets)
}

/// One per-eye frame on the render grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScheduledFrame {
    pub time: SimTime,
    pub frame_id: u64,
    pub eye: Eye,
    pub frame_type: FrameType,
    /// Index of the GOP this frame belongs to.
    pub gop_index: u64,
    /// Position inside the GOP.
    pub gop_pos: usize,
}

/// Number of render ticks strictly before `duration_s`.
pub fn tick_count(rate_hz: f64, duration_s: f64) -> u64 {
    let horizon = SimTime::from_secs_f64(duration_s);
    let mut n = (duration_s * rate_hz).ceil().max(0.0) as u64;
    while n > 0 && grid_time(n - 1, rate_hz) >= horizon {
        n -= 1;
    }
    while grid_time(n, rate_hz) < horizon {
        n += 1;
    }
    n
}

/// Frame schedule for `duration_s` seconds: one entry per eye per tick,
/// ordered by time then eye.
pub fn build_gop_schedule(
    pattern: &GopPattern,
    fps: f64,
    duration_s: f64,
    eyes: u32,
) -> Result<Vec<ScheduledFrame>> {
    validate_gop(pattern.sequence())?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::domain("fps", format!("must be > 0, got {fps}")));
    }
    let ticks = tick_count(fps, duration_s);
    let gop_len = pattern.gop_length() as u64;
    let mut out = Vec::with_capacity((ticks * eyes.max(1) as u64) as usize);
    for tick in 0..ticks {
        for &eye in Eye::views(eyes) {
            out.push(ScheduledFrame {
                time: grid_time(tick, fps),
                frame_id: tick,
                eye,
                frame_type: pattern.frame_type_at(tick),
                gop_index: tick / gop_len,
                gop_pos: (tick % gop_len) as usize,
            });
        }
    }
    Ok(out)
}

/// Packets for a scheduled frame.
pub fn packetize_scheduled(
    frame: &ScheduledFrame,
    model: &FrameSizeModel,
    mtu_payload: u32,
) -> Result<Vec<FramePacket>> {
    let bytes = frame_bytes(model, frame.frame_type)?;
    packetize_frame(
        bytes,
        mtu_payload,
        FrameHeader {
            flow: Flow::Downlink,
            direction: Direction::Down,
            frame_id: frame.frame_id,
            eye: frame.eye,
            frame_type: frame.frame_type,
            created_at: frame.time,
        },
    )
}

/// All downlink packets due at `t`: one burst per eye.
pub fn downlink_burst_at(
    t: SimTime,
    schedule: &[ScheduledFrame],
    model: &FrameSizeModel,
    mtu_payload: u32,
) -> Result<Vec<Vec<FramePacket>>> {
    let frames: Vec<&ScheduledFrame> = schedule.iter().filter(|f| f.time == t).collect();
    if frames.is_empty() {
        return Err(Error::domain(
            "t",
            format!("{t} ms is not on the frame grid"),
        ));
    }
    frames
        .into_iter()
        .map(|f| packetize_scheduled(f, model, mtu_payload))
        .collect()
}

/// Synchronization packet for frame tick `frame_id`.
pub fn sync_packet_at(t: SimTime, frame_id: u64, bytes: u32, direction: Direction) -> FramePacket {
    FramePacket {
        flow: Flow::Sync,
        direction,
        frame_id,
        eye: Eye::NA,
        frame_type: FrameType::NA,
        seq: 0,
        total: 1,
        payload_bytes: bytes,
        created_at: t,
    }
}

/// Sync packets over `duration_s`, one per frame interval.
pub fn sync_schedule(
    fps: f64,
    duration_s: f64,
    bytes: u32,
    direction: Direction,
) -> Result<Vec<FramePacket>> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::domain("fps", format!("must be > 0, got {fps}")));
    }
    Ok((0..tick_count(fps, duration_s))
        .map(|i| sync_packet_at(grid_time(i, fps), i, bytes, direction))
        .collect())
}

/// Headset pose: 6 degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseSample {
    /// Metres.
    pub position: [f32; 3],
    /// Yaw, pitch, roll in radians.
    pub orientation: [f32; 3],
    pub timestamp_ms: u32,
}

impl PoseSample {
    pub const WIRE_BYTES: usize = 16;

    /// Compact wire form: positions in millimetres and angles in 1e-4 rad as
    /// `i16`, then a `u32` millisecond timestamp, all little-endian.
    pub fn to_bytes(&self) -> [u8; Self::WIRE_BYTES] {
        let mut out = [0u8; Self::WIRE_BYTES];
        for (i, p) in self.position.iter().enumerate() {
            let q = (p * 1_000.0)
                .round()
                .clamp(i16::MIN as f32, i16::MAX as f32) as i16;
            out[2 * i..2 * i + 2].copy_from_slice(&q.to_le_bytes());
        }
        for (i, a) in self.orientation.iter().enumerate() {
            let q = (a * 10_000.0)
                .round()
                .clamp(i16::MIN as f32, i16::MAX as f32) as i16;
            out[6 + 2 * i..8 + 2 * i].copy_from_slice(&q.to_le_bytes());
        }
        out[12..16].copy_from_slice(&self.timestamp_ms.to_le_bytes());
        out
    }

    pub fn from_bytes(b: &[u8; Self::WIRE_BYTES]) -> Self {
        let rd = |i: usize| i16::from_le_bytes([b[i], b[i + 1]]) as f32;
        PoseSample {
            position: [rd(0) / 1_000.0, rd(2) / 1_000.0, rd(4) / 1_000.0],
            orientation: [rd(6) / 10_000.0, rd(8) / 10_000.0, rd(10) / 10_000.0],
            timestamp_ms: u32::from_le_bytes([b[12], b[13], b[14], b[15]]),
        }
    }
}

/// Uplink payload size model, bounded to [16, 400] bytes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UplinkSize {
    Constant(u32),
    Uniform { min: u32, max: u32 },
}

impl UplinkSize {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: u32| (MIN_UPLINK_BYTES..=MAX_UPLINK_BYTES).contains(&v);
        let valid = match *self {
            UplinkSize::Constant(v) => ok(v),
            UplinkSize::Uniform { min, max } => ok(min) && ok(max) && min <= max,
        };
        if valid {
            Ok(())
        } else {
            Err(Error::domain(
                "uplink_bytes",
                format!("{self:?} outside [{MIN_UPLINK_BYTES}, {MAX_UPLINK_BYTES}] bytes"),
            ))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        match *self {
            UplinkSize::Constant(v) => v,
            UplinkSize::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

/// Builds one uplink packet carrying `pose` plus controller payload.
pub fn uplink_packet_at(
    t: SimTime,
    index: u64,
    pose_rate_hz: f64,
    size: UplinkSize,
    rng: &mut impl Rng,
) -> Result<FramePacket> {
    if !(pose_rate_hz.is_finite() && pose_rate_hz > 0.0) {
        return Err(Error::domain(
            "pose_rate_hz",
            format!("must be > 0, got {pose_rate_hz}"),
        ));
    }
    size.validate()?;
    Ok(FramePacket {
        flow: Flow::Uplink,
        direction: Direction::Up,
        frame_id: index,
        eye: Eye::NA,
        frame_type: FrameType::NA,
        seq: 0,
        total: 1,
        payload_bytes: size.sample(rng),
        created_at: t,
    })
}

/// Stateful uplink generator: pose random walk plus sized packets on a fixed grid.
#[derive(Clone, Debug)]
pub struct UplinkSource {
    rate_hz: f64,
    size: UplinkSize,
    next_index: u64,
    pose: PoseSample,
    rng: ChaCha8Rng,
}

impl UplinkSource {
    pub fn new(rate_hz: f64, size: UplinkSize, seed: u64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::domain(
                "pose_rate_hz",
                format!("must be > 0, got {rate_hz}"),
            ));
        }
        size.validate()?;
        Ok(UplinkSource {
            rate_hz,
            size,
            next_index: 0,
            pose: PoseSample {
                position: [0.0, 1.6, 0.0],
                orientation: [0.0; 3],
                timestamp_ms: 0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_time(&self) -> SimTime {
        grid_time(self.next_index, self.rate_hz)
    }

    pub fn pose(&self) -> PoseSample {
        self.pose
    }

    /// Emits the next packet and advances the pose.
    pub fn next_packet(&mut self) -> FramePacket {
        let t = self.next_time();
        for p in &mut self.pose.position {
            *p += self.rng.random_range(-0.001f32..=0.001);
        }
        for a in &mut self.pose.orientation {
            *a = (*a + self.rng.random_range(-0.002f32..=0.002)).clamp(-3.1, 3.1);
        }
        self.pose.timestamp_ms = (t.as_us() / 1_000) as u32;
        let pkt = uplink_packet_at(t, self.next_index, self.rate_hz, self.size, &mut self.rng)
            .expect("validated at construction");
        self.next_index += 1;
        pkt
    }
}

/// Stateful downlink generator: one burst per eye per frame tick, sized from
/// the bitrate in force at that tick.
#[derive(Clone, Debug)]
pub struct DownlinkSource {
    pattern: GopPattern,
    fps: f64,
    eyes: u32,
    weights: FrameWeights,
    mtu_payload: u32,
    /// Multiplicative frame-size noise amplitude; 0 disables it.
    size_noise: f64,
    rng: ChaCha8Rng,
    next_tick: u64,
}

impl DownlinkSource {
    pub fn new(
        pattern: GopPattern,
        fps: f64,
        eyes: u32,
        weights: FrameWeights,
        mtu_payload: u32,
        size_noise: f64,
        seed: u64,
    ) -> Result<Self> {
        weights.validate()?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::domain("fps", format!("must be > 0, got {fps}")));
        }
        if !matches!(eyes, 1 | 2) {
            return Err(Error::domain(
                "eyes",
                format!("must be one of {{1, 2}}, got {eyes}"),
            ));
        }
        if mtu_payload == 0 {
            return Err(Error::domain("mtu_payload", "must be > 0"));
        }
        if !(0.0..1.0).contains(&size_noise) {
            return Err(Error::domain("size_noise", "must be in [0, 1)"));
        }
        Ok(DownlinkSource {
            pattern,
            fps,
            eyes,
            weights,
            mtu_payload,
            size_noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_tick: 0,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn eyes(&self) -> u32 {
        self.eyes
    }

    pub fn pattern(&self) -> &GopPattern {
        &self.pattern
    }

    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }

    pub fn next_time(&self) -> SimTime {
        grid_time(self.next_tick, self.fps)
    }

    /// Emits the frames of the next tick at a per-eye `target_bitrate`.
    pub fn next_frames(&mut self, target_bitrate: f64) -> (Vec<ScheduledFrame>, Vec<FramePacket>) {
        let tick = self.next_tick;
        self.next_tick += 1;
        let gop_len = self.pattern.gop_length() as u64;
        let model = FrameSizeModel {
            target_bitrate,
            fps: self.fps,
            weights: self.weights,
            pattern: self.pattern.clone(),
        };
        let mut frames = Vec::with_capacity(self.eyes as usize);
        let mut packets = Vec::new();
        for &eye in Eye::views(self.eyes) {
            let frame = ScheduledFrame {
                time: grid_time(tick, self.fps),
                frame_id: tick,
                eye,
                frame_type: self.pattern.frame_type_at(tick),
                gop_index: tick / gop_len,
                gop_pos: (tick % gop_len) as usize,
            };
            let mut bytes =
                frame_bytes(&model, frame.frame_type).expect("validated at construction");
            if self.size_noise > 0.0 {
                let f = 1.0 + self.rng.random_range(-self.size_noise..=self.size_noise);
                bytes = (bytes as f64 * f).round() as u64;
            }
            let header = FrameHeader {
                flow: Flow::Downlink,
                direction: Direction::Down,
                frame_id: tick,
                eye,
                frame_type: frame.frame_type,
                created_at: frame.time,
            };
            packets.extend(packetize_frame(bytes, self.mtu_payload, header).expect("mtu > 0"));
            frames.push(frame);
        }
        (frames, packets)
    }
}

/// Writes packets as CSV: `time_ms,flow,frame_id,eye,frame_type,seq,total,bytes`.
pub fn write_packet_csv<W: Write>(mut w: W, packets: &[FramePacket]) -> io::Result<()> {
    writeln!(w, "time_ms,flow,frame_id,eye,frame_type,seq,total,bytes")?;
    for p in packets {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.created_at,
            p.flow.as_str(),
            p.frame_id,
            p.eye.as_str(),
            p.frame_type.as_str(),
            p.seq,
            p.total,
            p.payload_bytes
        )?;
    }
    Ok(())
}
