//! Decoder dependency model: which frames of a GOP can be reconstructed.
//!
//! I frames stand alone. A P frame references the nearest preceding I or P.
//! A B frame references the nearest preceding and nearest following I or P;
//! a B after the last anchor of the GOP references the next GOP's I frame.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::traffic::{Eye, FrameType};

/// Reference frames (positions in the GOP) of each frame.
///
/// `None` inside the inner vector stands for the next GOP's I frame.
pub fn references(types: &[FrameType]) -> Vec<Vec<Option<usize>>> {
    let mut refs = vec![Vec::new(); types.len()];
    let mut prev_anchor: Option<usize> = None;
    for (i, t) in types.iter().enumerate() {
        match t {
            FrameType::I | FrameType::NA => {}
            FrameType::P => refs[i].extend(prev_anchor.map(Some)),
            FrameType::B => {
                refs[i].extend(prev_anchor.map(Some));
                let next = types[i + 1..]
                    .iter()
                    .position(|t| t.is_anchor())
                    .map(|k| i + 1 + k);
                refs[i].push(next);
            }
        }
        if t.is_anchor() {
            prev_anchor = Some(i);
        }
    }
    refs
}

fn check_gop(types: &[FrameType], complete: &[bool]) -> Result<()> {
    if types.len() != complete.len() {
        return Err(Error::domain(
            "delivered",
            format!(
                "{} flags for a GOP of {} frames",
                complete.len(),
                types.len()
            ),
        ));
    }
    if types.first() != Some(&FrameType::I)
        || types.iter().filter(|t| **t == FrameType::I).count() != 1
    {
        return Err(Error::domain(
            "gop",
            "must start with the GOP's only I frame",
        ));
    }
    if types.contains(&FrameType::NA) {
        return Err(Error::domain("gop", "NA is not a video frame type"));
    }
    Ok(())
}

/// Per-frame decodability for one GOP.
///
/// `complete[i]` says whether every packet of frame `i` arrived;
/// `next_gop_i_decodable` resolves references of trailing B frames.
pub fn decodable_flags(
    types: &[FrameType],
    complete: &[bool],
    next_gop_i_decodable: bool,
) -> Result<Vec<bool>> {
    check_gop(types, complete)?;
    let refs = references(types);
    let mut ok = vec![false; types.len()];
    // anchors first, in order: their references always precede them
    for i in 0..types.len() {
        if types[i].is_anchor() {
            ok[i] = complete[i]
                && refs[i]
                    .iter()
                    .all(|r| r.map_or(next_gop_i_decodable, |j| ok[j]));
        }
    }
    for i in 0..types.len() {
        if types[i] == FrameType::B {
            ok[i] = complete[i]
                && refs[i]
                    .iter()
                    .all(|r| r.map_or(next_gop_i_decodable, |j| ok[j]));
        }
    }
    Ok(ok)
}

/// Positions of decodable frames within the GOP.
pub fn decodable_set(
    types: &[FrameType],
    complete: &[bool],
    next_gop_i_decodable: bool,
) -> Result<BTreeSet<usize>> {
    Ok(decodable_flags(types, complete, next_gop_i_decodable)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, d)| d.then_some(i))
        .collect())
}

/// Decodability lookup by frame position.
pub fn is_decodable(
    types: &[FrameType],
    complete: &[bool],
    next_gop_i_decodable: bool,
    frame: usize,
) -> Result<bool> {
    if frame >= types.len() {
        return Err(Error::domain(
            "frame_id",
            format!("unknown frame {frame} in a GOP of {}", types.len()),
        ));
    }
    Ok(decodable_flags(types, complete, next_gop_i_decodable)?[frame])
}

/// Delivery bookkeeping for one generated frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub eye: Eye,
    pub frame_type: FrameType,
    pub gop_index: u64,
    pub gop_pos: usize,
    pub created_at_us: u64,
    pub total: u32,
    pub delivered: u32,
    pub dropped: u32,
    pub last_delivery_us: u64,
}

impl FrameRecord {
    pub fn is_complete(&self) -> bool {
        self.delivered == self.total
    }

    pub fn is_resolved(&self) -> bool {
        self.delivered + self.dropped == self.total
    }
}

/// Tracks every downlink frame of a run, per eye, indexed by frame id.
#[derive(Clone, Debug, Default)]
pub struct FrameTracker {
    eyes: [Vec<FrameRecord>; 2],
    gop_length: usize,
}

impl FrameTracker {
    pub fn new(gop_length: usize) -> Self {
        FrameTracker {
            eyes: [Vec::new(), Vec::new()],
            gop_length,
        }
    }

    pub fn register(&mut self, rec: FrameRecord) {
        let v = &mut self.eyes[rec.eye.index()];
        debug_assert_eq!(v.len() as u64, rec.frame_id);
        v.push(rec);
    }

    fn get_mut(&mut self, eye: Eye, frame_id: u64) -> Option<&mut FrameRecord> {
        self.eyes[eye.index()].get_mut(frame_id as usize)
    }

    pub fn on_delivered(&mut self, eye: Eye, frame_id: u64, at_us: u64) {
        if let Some(r) = self.get_mut(eye, frame_id) {
            r.delivered += 1;
            r.last_delivery_us = r.last_delivery_us.max(at_us);
        }
    }

    pub fn on_dropped(&mut self, eye: Eye, frame_id: u64) {
        if let Some(r) = self.get_mut(eye, frame_id) {
            r.dropped += 1;
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &FrameRecord> {
        self.eyes.iter().flatten()
    }

    pub fn frame_count(&self) -> usize {
        self.eyes.iter().map(Vec::len).sum()
    }

    /// Frames of both eyes created in `[from_us, to_us)` and how many of them
    /// were decodable from packets that arrived within `deadline_us` of the
    /// frame's creation. Frames still in flight count as not decodable.
    pub fn window_decodability(&self, from_us: u64, to_us: u64, deadline_us: u64) -> (u64, u64) {
        let gop = self.gop_length.max(1);
        let (mut total, mut ok) = (0, 0);
        for frames in &self.eyes {
            let lo = frames.partition_point(|r| r.created_at_us < from_us);
            let hi = frames.partition_point(|r| r.created_at_us < to_us);
            if lo >= hi {
                continue;
            }
            let mut start = lo / gop * gop;
            while start < hi {
                let chunk = &frames[start..(start + gop).min(frames.len())];
                let types: Vec<FrameType> = chunk.iter().map(|r| r.frame_type).collect();
                let on_time: Vec<bool> = chunk
                    .iter()
                    .map(|r| r.is_complete() && r.last_delivery_us <= r.created_at_us + deadline_us)
                    .collect();
                let flags = decodable_flags(&types, &on_time, false)
                    .unwrap_or_else(|_| vec![false; chunk.len()]);
                for (i, d) in flags.into_iter().enumerate() {
                    let idx = start + i;
                    if idx >= lo && idx < hi {
                        total += 1;
                        ok += d as u64;
                    }
                }
                start += gop;
            }
        }
        (total, ok)
    }

    /// Decodability of every registered frame, as `(record, decodable)`.
    ///
    /// Frames never generated (the tail of a truncated GOP) count as missing.
    pub fn evaluate(&self) -> Vec<(FrameRecord, bool)> {
        let mut out = Vec::with_capacity(self.frame_count());
        for frames in &self.eyes {
            for gop in frames.chunks(self.gop_length.max(1)) {
                let types: Vec<FrameType> = gop.iter().map(|r| r.frame_type).collect();
                let complete: Vec<bool> = gop.iter().map(FrameRecord::is_complete).collect();
                let flags = decodable_flags(&types, &complete, false)
                    .unwrap_or_else(|_| vec![false; gop.len()]);
                out.extend(gop.iter().copied().zip(flags));
            }
        }
        out
    }
}
