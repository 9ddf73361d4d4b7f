//! Bottleneck link model: time-varying capacity, propagation delay, jitter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::time::SimTime;

/// Piecewise-constant capacity in bits per second.
///
/// Segments are `(duration, bps)`; when `cyclic` the sequence repeats forever,
/// otherwise the last segment's rate holds after the schedule ends.
#[derive(Clone, Debug, PartialEq)]
pub struct CapacitySchedule {
    segments: Vec<(SimTime, f64)>,
    cyclic: bool,
    /// Phase shift applied before lookup.
    offset: SimTime,
    period: SimTime,
}

impl CapacitySchedule {
    pub fn constant(bps: f64) -> Self {
        CapacitySchedule {
            segments: vec![(SimTime(1), bps)],
            cyclic: true,
            offset: SimTime::ZERO,
            period: SimTime(1),
        }
    }

    pub fn new(segments: Vec<(SimTime, f64)>, cyclic: bool) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain(
                "capacity",
                "schedule needs at least one segment",
            ));
        }
        for (d, bps) in &segments {
            if !(bps.is_finite() && *bps > 0.0) {
                return Err(Error::domain("capacity", format!("must be > 0, got {bps}")));
            }
            if d.as_us() == 0 {
                return Err(Error::domain("capacity", "segment duration must be > 0"));
            }
        }
        let period = SimTime(segments.iter().map(|(d, _)| d.as_us()).sum());
        Ok(CapacitySchedule {
            segments,
            cyclic,
            offset: SimTime::ZERO,
            period,
        })
    }

    pub fn with_offset(mut self, offset: SimTime) -> Self {
        self.offset = offset;
        self
    }

    pub fn segments(&self) -> &[(SimTime, f64)] {
        &self.segments
    }

    pub fn period(&self) -> SimTime {
        self.period
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    pub fn is_constant(&self) -> bool {
        self.segments.iter().all(|(_, r)| *r == self.segments[0].1)
    }

    pub fn max_rate(&self) -> f64 {
        self.segments.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    /// Returns the rate in force at `t` and when it next changes.
    pub fn segment_at(&self, t: SimTime) -> (f64, Option<SimTime>) {
        let shifted = t.as_us() + self.offset.as_us();
        let (pos, base) = if self.cyclic {
            (
                shifted % self.period.as_us(),
                shifted - shifted % self.period.as_us(),
            )
        } else if shifted >= self.period.as_us() {
            return (self.segments.last().expect("non-empty").1, None);
        } else {
            (shifted, 0)
        };
        let mut acc = 0u64;
        for (d, rate) in &self.segments {
            acc += d.as_us();
            if pos < acc {
                let end = (base + acc).saturating_sub(self.offset.as_us());
                let next = if self.segments.len() == 1 && self.cyclic {
                    None
                } else {
                    Some(SimTime(end))
                };
                return (*rate, next);
            }
        }
        unreachable!("position inside period")
    }

    pub fn rate_at(&self, t: SimTime) -> f64 {
        self.segment_at(t).0
    }

    /// Time-averaged rate over `[t0, t1)`.
    pub fn mean_rate(&self, t0: SimTime, t1: SimTime) -> f64 {
        if t1 <= t0 {
            return self.rate_at(t0);
        }
        let mut t = t0;
        let mut bits = 0.0;
        while t < t1 {
            let (rate, next) = self.segment_at(t);
            let end = next.map_or(t1, |n| n.min(t1));
            let end = if end <= t { t1 } else { end };
            bits += rate * (end - t).as_secs();
            t = end;
        }
        bits / (t1 - t0).as_secs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JitterModel {
    None,
    /// Independent uniform offset in `[-ms, +ms]`.
    Uniform {
        ms: f64,
    },
    /// Bounded random walk: each packet moves the offset by up to `step_ms`,
    /// clamped to `[-bound_ms, +bound_ms]`.
    RandomWalk {
        step_ms: f64,
        bound_ms: f64,
    },
}

impl JitterModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JitterModel::None => true,
            JitterModel::Uniform { ms } => ms.is_finite() && ms >= 0.0,
            JitterModel::RandomWalk { step_ms, bound_ms } => {
                step_ms.is_finite() && bound_ms.is_finite() && step_ms >= 0.0 && bound_ms >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(
                "jitter",
                format!("invalid jitter model {self:?}"),
            ))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub capacity: CapacitySchedule,
    pub propagation_ms: f64,
    pub jitter: JitterModel,
}

impl Link {
    pub fn constant(capacity_bps: f64, propagation_ms: f64) -> Self {
        Link {
            capacity: CapacitySchedule::constant(capacity_bps),
            propagation_ms,
            jitter: JitterModel::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.propagation_ms.is_finite() && self.propagation_ms >= 0.0) {
            return Err(Error::domain("propagation_ms", "must be >= 0"));
        }
        self.jitter.validate()
    }

    /// Serialization time of `bytes` at the rate in force at `start`.
    pub fn serialization(&self, bytes: u32, start: SimTime) -> SimTime {
        let rate = self.capacity.rate_at(start);
        SimTime((bytes as f64 * 8.0 / rate * 1e6).round() as u64)
    }
}

/// Per-link jitter state.
#[derive(Clone, Debug)]
pub struct JitterState {
    model: JitterModel,
    walk_ms: f64,
}

impl JitterState {
    pub fn new(model: JitterModel) -> Self {
        JitterState {
            model,
            walk_ms: 0.0,
        }
    }

    pub fn sample_ms(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        match self.model {
            JitterModel::None => 0.0,
            JitterModel::Uniform { ms } if ms > 0.0 => rng.random_range(-ms..=ms),
            JitterModel::Uniform { .. } => 0.0,
            JitterModel::RandomWalk { step_ms, bound_ms } => {
                if step_ms > 0.0 {
                    self.walk_ms = (self.walk_ms + rng.random_range(-step_ms..=step_ms))
                        .clamp(-bound_ms, bound_ms);
                }
                self.walk_ms
            }
        }
    }
}

/// Delivery time: service start + serialization + propagation + jitter.
///
/// Jitter never pulls delivery before the end of serialization.
pub fn link_transmit(
    link: &Link,
    bytes: u32,
    service_start: SimTime,
    jitter_ms: f64,
) -> (SimTime, SimTime) {
    let depart = service_start + link.serialization(bytes, service_start);
    let flight_ms = (link.propagation_ms + jitter_ms).max(0.0);
    (depart, depart + SimTime::from_ms_f64(flight_ms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn transmit_examples() {
        let link = Link::constant(12e6, 5.0);
        let (depart, deliver) = link_transmit(&link, 1_500, SimTime::from_ms(100), 0.0);
        assert_eq!(depart, SimTime::from_ms(101));
        assert_eq!(deliver, SimTime::from_ms(106));
        let (depart, deliver) = link_transmit(&link, 0, SimTime::ZERO, 0.0);
        assert_eq!(depart, SimTime::ZERO);
        assert_eq!(deliver, SimTime::from_ms(5));
    }

    #[test]
    fn uniform_jitter_reproducible() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut j = JitterState::new(JitterModel::Uniform { ms: 1.0 });
            (0..100).map(|_| j.sample_ms(&mut rng)).collect::<Vec<_>>()
        };
        let a = draw();
        assert_eq!(a, draw());
        assert!(a.iter().all(|x| x.abs() <= 1.0));
        assert!(a.iter().any(|x| *x != 0.0));
    }

    #[test]
    fn random_walk_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut j = JitterState::new(JitterModel::RandomWalk {
            step_ms: 0.5,
            bound_ms: 2.0,
        });
        for _ in 0..10_000 {
            assert!(j.sample_ms(&mut rng).abs() <= 2.0);
        }
    }

    #[test]
    fn alternating_schedule() {
        let s = CapacitySchedule::new(
            vec![
                (SimTime::from_ms(10_000), 20e6),
                (SimTime::from_ms(10_000), 60e6),
            ],
            true,
        )
        .unwrap();
        assert_eq!(s.rate_at(SimTime::ZERO), 20e6);
        assert_eq!(s.rate_at(SimTime::from_ms(9_999)), 20e6);
        assert_eq!(s.rate_at(SimTime::from_ms(10_000)), 60e6);
        assert_eq!(s.rate_at(SimTime::from_ms(25_000)), 20e6);
        assert_eq!(s.mean_rate(SimTime::ZERO, SimTime::from_ms(20_000)), 40e6);
        assert_eq!(
            s.mean_rate(SimTime::from_ms(9_500), SimTime::from_ms(10_500)),
            40e6
        );
        let shifted = s.clone().with_offset(SimTime::from_ms(10_000));
        assert_eq!(shifted.rate_at(SimTime::ZERO), 60e6);
        assert_eq!(
            shifted.segment_at(SimTime::ZERO).1,
            Some(SimTime::from_ms(10_000))
        );
        assert_eq!(
            CapacitySchedule::constant(5e6).mean_rate(SimTime::ZERO, SimTime::from_ms(3)),
            5e6
        );
    }

    #[test]
    fn one_shot_schedule_holds_last_rate() {
        let s = CapacitySchedule::new(
            vec![(SimTime::from_ms(5), 1e6), (SimTime::from_ms(5), 2e6)],
            false,
        )
        .unwrap();
        assert_eq!(s.rate_at(SimTime::from_ms(100)), 2e6);
        assert!(CapacitySchedule::new(vec![], true).is_err());
        assert!(CapacitySchedule::new(vec![(SimTime(1), 0.0)], true).is_err());
    }
}
