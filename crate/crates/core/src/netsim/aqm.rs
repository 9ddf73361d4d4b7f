//! Bottleneck queue with drop-tail and frame-aware disciplines.
//!
//! Frame-aware dropping ranks video frame classes by how droppable they are
//! (default `[P, B, I]`, most droppable first). Once occupancy would cross
//! the activation threshold, the most droppable class present (queued or
//! arriving) loses a packet; on a class tie the arrival goes. The least
//! droppable class is never dropped while a packet of another video class
//! could be evicted instead, and it alone may use the space between the
//! threshold and the hard capacity.
//!
//! Packets without a frame class (sync, cross traffic) are admitted up to
//! the threshold. By default they rank below every video class, so they are
//! the first eviction victims; with `unmarked_droppable` off they are never
//! evicted.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::traffic::FrameType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Discipline {
    DropTail,
    FrameAware,
}

impl Discipline {
    pub fn as_str(self) -> &'static str {
        match self {
            Discipline::DropTail => "droptail",
            Discipline::FrameAware => "frameaware",
        }
    }
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Discipline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "droptail" => Ok(Discipline::DropTail),
            "frameaware" => Ok(Discipline::FrameAware),
            other => Err(Error::domain(
                "discipline",
                format!("unknown discipline '{other}' (expected droptail or frameaware)"),
            )),
        }
    }
}

/// Anything the queue can hold.
pub trait Queued {
    fn size_bytes(&self) -> u32;
    /// Video frame class, or `FrameType::NA` for everything else.
    fn frame_class(&self) -> FrameType;
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueConfig {
    pub capacity_bytes: u64,
    pub discipline: Discipline,
    /// Video classes, most droppable first. Must be a permutation of {I, P, B}.
    pub drop_priority: [FrameType; 3],
    /// Occupancy at which frame-aware dropping activates.
    pub threshold_bytes: u64,
    /// Whether frame-aware dropping may evict already-queued packets.
    pub evict_queued: bool,
    /// Whether packets without a frame class rank below every video class,
    /// so frame-aware dropping evicts them first.
    pub unmarked_droppable: bool,
}

impl QueueConfig {
    pub const DEFAULT_PRIORITY: [FrameType; 3] = [FrameType::P, FrameType::B, FrameType::I];

    pub fn drop_tail(capacity_bytes: u64) -> Self {
        QueueConfig {
            capacity_bytes,
            discipline: Discipline::DropTail,
            drop_priority: Self::DEFAULT_PRIORITY,
            threshold_bytes: capacity_bytes,
            evict_queued: true,
            unmarked_droppable: true,
        }
    }

    /// Frame-aware queue with the threshold at 80% of capacity.
    pub fn frame_aware(capacity_bytes: u64) -> Self {
        QueueConfig {
            capacity_bytes,
            discipline: Discipline::FrameAware,
            drop_priority: Self::DEFAULT_PRIORITY,
            threshold_bytes: capacity_bytes * 4 / 5,
            evict_queued: true,
            unmarked_droppable: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_bytes == 0 {
            return Err(Error::domain("queue_capacity_bytes", "must be > 0"));
        }
        if self.threshold_bytes > self.capacity_bytes {
            return Err(Error::domain(
                "queue_threshold_bytes",
                format!(
                    "{} exceeds capacity {}",
                    self.threshold_bytes, self.capacity_bytes
                ),
            ));
        }
        let mut seen = self.drop_priority.to_vec();
        seen.sort();
        if seen != [FrameType::I, FrameType::P, FrameType::B] {
            return Err(Error::domain(
                "drop_priority",
                format!(
                    "must be a permutation of I, P, B, got {:?}",
                    self.drop_priority
                ),
            ));
        }
        Ok(())
    }

    /// 0 = most droppable; `None` for classless packets.
    pub fn rank(&self, class: FrameType) -> Option<usize> {
        self.drop_priority.iter().position(|c| *c == class)
    }

    fn protected_class(&self) -> FrameType {
        self.drop_priority[2]
    }
}

/// Result of offering a packet to the queue.
#[derive(Debug, PartialEq)]
pub enum AqmOutcome<P> {
    /// Arrival admitted; `evicted` were removed from the queue to make room.
    Enqueued { evicted: Vec<P> },
    /// Arrival dropped.
    Dropped {
        victim: P,
        evicted: Vec<P>,
        oversize: bool,
    },
}

#[derive(Clone, Debug)]
pub struct BottleneckQueue<P> {
    config: QueueConfig,
    occupancy: u64,
    packets: VecDeque<P>,
}

impl<P: Queued> BottleneckQueue<P> {
    pub fn new(config: QueueConfig) -> Result<Self> {
        config.validate()?;
        Ok(BottleneckQueue {
            config,
            occupancy: 0,
            packets: VecDeque::new(),
        })
    }

    pub fn config(&self) -> &QueueConfig {
        &self.config
    }

    pub fn occupancy_bytes(&self) -> u64 {
        self.occupancy
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &P> {
        self.packets.iter()
    }

    pub fn dequeue(&mut self) -> Option<P> {
        let p = self.packets.pop_front()?;
        self.occupancy -= p.size_bytes() as u64;
        Some(p)
    }

    pub fn enqueue(&mut self, pkt: P) -> AqmOutcome<P> {
        let bytes = pkt.size_bytes() as u64;
        if bytes > self.config.capacity_bytes {
            return AqmOutcome::Dropped {
                victim: pkt,
                evicted: Vec::new(),
                oversize: true,
            };
        }
        match self.config.discipline {
            Discipline::DropTail => {
                if self.occupancy + bytes > self.config.capacity_bytes {
                    AqmOutcome::Dropped {
                        victim: pkt,
                        evicted: Vec::new(),
                        oversize: false,
                    }
                } else {
                    self.push(pkt);
                    AqmOutcome::Enqueued {
                        evicted: Vec::new(),
                    }
                }
            }
            Discipline::FrameAware => self.enqueue_frame_aware(pkt),
        }
    }

    fn push(&mut self, pkt: P) {
        self.occupancy += pkt.size_bytes() as u64;
        self.packets.push_back(pkt);
    }

    fn enqueue_frame_aware(&mut self, pkt: P) -> AqmOutcome<P> {
        let bytes = pkt.size_bytes() as u64;
        let class = pkt.frame_class();
        let threshold = self.config.threshold_bytes;
        let Some(arrival_rank) = self.config.rank(class) else {
            if self.occupancy + bytes > threshold {
                return AqmOutcome::Dropped {
                    victim: pkt,
                    evicted: Vec::new(),
                    oversize: false,
                };
            }
            self.push(pkt);
            return AqmOutcome::Enqueued {
                evicted: Vec::new(),
            };
        };
        let hard_limit = if class == self.config.protected_class() {
            self.config.capacity_bytes
        } else {
            threshold
        };

        // while over the threshold, the newest packet of the most droppable
        // class below the arrival's goes
        let mut evicted = Vec::new();
        if self.config.evict_queued {
            let unmarked = self.config.unmarked_droppable.then_some(FrameType::NA);
            let classes = unmarked
                .into_iter()
                .chain(self.config.drop_priority[..arrival_rank].iter().copied());
            for victim_class in classes {
                while self.occupancy + bytes > threshold {
                    let Some(idx) = self
                        .packets
                        .iter()
                        .rposition(|p| p.frame_class() == victim_class)
                    else {
                        break;
                    };
                    let victim = self.packets.remove(idx).expect("index in range");
                    self.occupancy -= victim.size_bytes() as u64;
                    evicted.push(victim);
                }
            }
        }
        if self.occupancy + bytes > hard_limit {
            return AqmOutcome::Dropped {
                victim: pkt,
                evicted,
                oversize: false,
            };
        }
        self.push(pkt);
        AqmOutcome::Enqueued { evicted }
    }
}
