//! Streaming sessions: the simulator driven one measurement interval at a
//! time by a bitrate controller, with per-interval KPIs, QoE and reward.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netsim::measure::{NetMeasurement, Vantage};
use crate::netsim::{sub_seed, SimConfig, Simulation};
use crate::qoe::{
    kpi_to_indexes, qoe_score, step_reward, FactorTree, IndexWeights, Indexes, KpiSample,
    RewardParams,
};
use crate::rl::state::{state_dim, NormBounds, StateBuilder};
use crate::rl::train::{Environment, Transition};
use crate::rl::{argmax, PolicyNet};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub sim: SimConfig,
    /// Per-eye bitrate of each level, ascending.
    pub ladder: Vec<f64>,
    pub interval_ms: f64,
    /// A frame counts as displayed only if it is decodable from packets
    /// that arrived within this long of its creation.
    pub playout_deadline_ms: f64,
    /// Where the controller's measurements come from.
    pub vantage: Vantage,
    pub tree: FactorTree,
    pub index_weights: IndexWeights,
    pub reward: RewardParams,
    pub initial_level: usize,
    /// Scale of agent observations.
    pub norm: NormBounds,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sim.source.is_none() {
            return Err(Error::domain("source", "a session needs an XR source"));
        }
        if self.ladder.is_empty() {
            return Err(Error::domain("ladder", "must not be empty"));
        }
        if self.ladder.iter().any(|b| !(b.is_finite() && *b > 0.0))
            || self.ladder.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::domain(
                "ladder",
                "bitrates must be positive and strictly ascending",
            ));
        }
        if self.reward.quality_map.len() != self.ladder.len() {
            return Err(Error::DimensionMismatch {
                expected: self.ladder.len(),
                got: self.reward.quality_map.len(),
            });
        }
        if !(self.interval_ms >= 1.0 && self.interval_ms.is_finite()) {
            return Err(Error::domain("interval_ms", "must be >= 1"));
        }
        if !(self.playout_deadline_ms > 0.0 && self.playout_deadline_ms < self.interval_ms) {
            return Err(Error::domain(
                "playout_deadline_ms",
                "must be in (0, interval_ms)",
            ));
        }
        if self.initial_level >= self.ladder.len() {
            return Err(Error::domain("initial_level", "outside the ladder"));
        }
        self.sim.network.validate()?;
        self.tree.validate()?;
        self.index_weights.validate()?;
        self.norm.validate()?;
        self.reward.validate()
    }

    pub fn eyes(&self) -> u32 {
        self.sim.source.as_ref().map_or(1, |s| s.eyes)
    }

    pub fn fps(&self) -> f64 {
        self.sim.source.as_ref().map_or(0.0, |s| s.fps)
    }

    /// Observation scale derived from the ladder and the reward deadline.
    pub fn default_norm(ladder: &[f64], eyes: u32, deadline_ms: f64) -> NormBounds {
        let top = ladder.last().copied().unwrap_or(1.0);
        NormBounds {
            throughput_bps: top * eyes as f64 * 1.25,
            latency_ms: deadline_ms,
            jitter_ms: deadline_ms / 10.0,
        }
    }

    fn interval_us(&self) -> u64 {
        SimTime::from_ms_f64(self.interval_ms).as_us()
    }
}

/// Everything observed about one measurement interval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalRecord {
    pub index: u64,
    pub t_start: SimTime,
    pub level: usize,
    pub prev_level: usize,
    /// Per-eye target bitrate during the interval.
    pub bitrate_bps: f64,
    /// Downlink capacity not used by cross traffic during the interval.
    pub available_bps: f64,
    pub endhost: NetMeasurement,
    pub innetwork: NetMeasurement,
    /// Frames whose playout deadline fell in this interval.
    pub frames_total: u64,
    pub frames_decodable: u64,
    /// Latency used for the KPI and the reward.
    pub latency_ms: f64,
    pub kpi: KpiSample,
    pub indexes: Indexes,
    pub qoe: f64,
    pub reward: f64,
    /// KPIs clamped during normalization.
    pub clamped: usize,
}

impl IntervalRecord {
    pub fn measurement(&self, vantage: Vantage) -> &NetMeasurement {
        match vantage {
            Vantage::EndHost => &self.endhost,
            Vantage::InNetwork => &self.innetwork,
        }
    }
}

pub struct Session {
    config: SessionConfig,
    sim: Simulation,
    index: u64,
    level: usize,
    last_available_bps: f64,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        let mut sim_cfg = config.sim.clone();
        sim_cfg.initial_bitrate = config.ladder[config.initial_level];
        let sim = Simulation::new(sim_cfg)?;
        let interval = SimTime(config.interval_us());
        let last_available_bps = sim.available_capacity(SimTime::ZERO, interval);
        Ok(Session {
            level: config.initial_level,
            config,
            sim,
            index: 0,
            last_available_bps,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    pub fn simulation_mut(&mut self) -> &mut Simulation {
        &mut self.sim
    }

    pub fn intervals_done(&self) -> u64 {
        self.index
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Available capacity of the last finished interval (of the first
    /// interval before any has run).
    pub fn last_available_bps(&self) -> f64 {
        self.last_available_bps
    }

    /// Streams one interval at ladder `level`.
    pub fn step(&mut self, level: usize) -> Result<IntervalRecord> {
        let c = &self.config;
        if level >= c.ladder.len() {
            return Err(Error::domain(
                "level",
                format!("{level} outside a ladder of {}", c.ladder.len()),
            ));
        }
        let iv = c.interval_us();
        let t0 = SimTime(self.index * iv);
        let t1 = SimTime((self.index + 1) * iv);
        self.sim.set_target_bitrate(c.ladder[level]);
        self.sim.advance_to(t1)?;
        let (endhost, innetwork) = self.sim.finish_interval(t0, c.interval_ms);
        let available_bps = self.sim.available_capacity(t0, t1);

        let d = SimTime::from_ms_f64(c.playout_deadline_ms).as_us();
        let from = t0.as_us().saturating_sub(d);
        let to = t1.as_us().saturating_sub(d);
        let (frames_total, frames_decodable) = self.sim.frames().window_decodability(from, to, d);

        let m = if c.vantage == Vantage::EndHost {
            &endhost
        } else {
            &innetwork
        };
        let latency_ms = m.latency_ms.unwrap_or(c.interval_ms);
        let ok_share = if frames_total > 0 {
            frames_decodable as f64 / frames_total as f64
        } else {
            1.0
        };
        let kpi = KpiSample {
            delivered_resolution_level: level as f64,
            framerate_effective: c.fps() * ok_share,
            end_to_end_latency_ms: latency_ms,
            loss_rate: m.loss_rate,
            stall_ratio: 1.0 - ok_share,
        };
        let (indexes, diag) = kpi_to_indexes(&kpi, &c.tree);
        let qoe = qoe_score(indexes, c.index_weights)?;
        let reward = step_reward(level, self.level, latency_ms, &c.reward);
        let rec = IntervalRecord {
            index: self.index,
            t_start: t0,
            level,
            prev_level: self.level,
            bitrate_bps: c.ladder[level],
            available_bps,
            endhost,
            innetwork,
            frames_total,
            frames_decodable,
            latency_ms,
            kpi,
            indexes,
            qoe,
            reward,
            clamped: diag.clamped.len(),
        };
        self.index += 1;
        self.level = level;
        self.last_available_bps = available_bps;
        Ok(rec)
    }
}

/// Highest level whose total bitrate over all eyes fits in `available_bps`;
/// the lowest level when none does.
pub fn oracle_level(ladder: &[f64], eyes: u32, available_bps: f64) -> usize {
    ladder
        .iter()
        .rposition(|b| b * eyes as f64 <= available_bps)
        .unwrap_or(0)
}

/// Bitrate controllers.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Fixed(usize),
    /// Knows the available capacity of the previous interval.
    Oracle,
    /// Greedy action of a trained network over a `history_k` window.
    Trained {
        net: PolicyNet,
        history_k: usize,
    },
}

impl Policy {
    pub fn name(&self) -> String {
        match self {
            Policy::Fixed(l) => format!("fixed{l}"),
            Policy::Oracle => "oracle".into(),
            Policy::Trained { .. } => "trained".into(),
        }
    }
}

/// Per-session controller state.
pub struct Controller {
    policy: Policy,
    state: Option<StateBuilder>,
}

impl Controller {
    pub fn new(policy: Policy, config: &SessionConfig) -> Result<Self> {
        let state = match &policy {
            Policy::Fixed(l) if *l >= config.ladder.len() => {
                return Err(Error::domain(
                    "level",
                    format!("{l} outside a ladder of {}", config.ladder.len()),
                ))
            }
            Policy::Trained { net, history_k } => {
                if net.actions() != config.ladder.len() || net.input_dim() != state_dim(*history_k)
                {
                    return Err(Error::domain(
                        "policy",
                        "network does not match the ladder or history length",
                    ));
                }
                let mut s = StateBuilder::new(*history_k, config.ladder.len(), config.norm)?;
                s.set_prev_action(config.initial_level);
                Some(s)
            }
            _ => None,
        };
        Ok(Controller { policy, state })
    }

    pub fn choose(&self, session: &Session) -> Result<usize> {
        Ok(match &self.policy {
            Policy::Fixed(l) => *l,
            Policy::Oracle => {
                let c = session.config();
                oracle_level(&c.ladder, c.eyes(), session.last_available_bps())
            }
            Policy::Trained { net, .. } => {
                let s = self.state.as_ref().expect("trained policy keeps a state");
                argmax(&net.forward(&s.vector())?.0)
            }
        })
    }

    pub fn observe(&mut self, rec: &IntervalRecord, vantage: Vantage) {
        if let Some(s) = self.state.as_mut() {
            s.push(rec.measurement(vantage));
            s.set_prev_action(rec.level);
        }
    }
}

/// Runs `intervals` intervals under `policy`.
pub fn run_session(
    session: &mut Session,
    policy: &Policy,
    intervals: u64,
) -> Result<Vec<IntervalRecord>> {
    let mut ctl = Controller::new(policy.clone(), session.config())?;
    let vantage = session.config().vantage;
    let mut out = Vec::with_capacity(intervals as usize);
    for _ in 0..intervals {
        let level = ctl.choose(session)?;
        let rec = session.step(level)?;
        ctl.observe(&rec, vantage);
        out.push(rec);
    }
    Ok(out)
}

/// Training environment: one step is one measurement interval; every
/// episode streams a fresh session with its own seed.
pub struct XrEnv {
    template: SessionConfig,
    history_k: usize,
    episode_steps: usize,
    randomize_phase: bool,
    base_seed: u64,
    episode: u64,
    t: usize,
    session: Session,
    state: StateBuilder,
}

impl XrEnv {
    pub fn new(
        template: SessionConfig,
        history_k: usize,
        episode_steps: usize,
        randomize_phase: bool,
        seed: u64,
    ) -> Result<Self> {
        if episode_steps == 0 {
            return Err(Error::domain("episode_steps", "must be >= 1"));
        }
        let state = StateBuilder::new(history_k, template.ladder.len(), template.norm)?;
        let session = Session::new(template.clone())?;
        let mut env = XrEnv {
            template,
            history_k,
            episode_steps,
            randomize_phase,
            base_seed: seed,
            episode: 0,
            t: 0,
            session,
            state,
        };
        env.start_episode()?;
        Ok(env)
    }

    /// Session configuration of episode `episode` for an environment seeded with `seed`.
    pub fn episode_config(
        template: &SessionConfig,
        seed: u64,
        episode: u64,
        randomize_phase: bool,
    ) -> SessionConfig {
        let mut c = template.clone();
        let s = sub_seed(seed, episode);
        c.sim.seed = s;
        if randomize_phase {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(s, 0x9a5e));
            let cap = &mut c.sim.network.downlink.capacity;
            let period = cap.period().as_us();
            if cap.is_cyclic() && period > 1 {
                let off = SimTime(rng.random_range(0..period));
                *cap = cap.clone().with_offset(off);
            }
        }
        c
    }

    fn start_episode(&mut self) -> Result<()> {
        let c = Self::episode_config(
            &self.template,
            self.base_seed,
            self.episode,
            self.randomize_phase,
        );
        self.session = Session::new(c)?;
        self.state.clear();
        self.state.set_prev_action(self.template.initial_level);
        self.t = 0;
        Ok(())
    }

    pub fn history_k(&self) -> usize {
        self.history_k
    }

    pub fn session(&self) -> &Session {
        &self.session
    }
}

impl Environment for XrEnv {
    fn state_dim(&self) -> usize {
        self.state.dim()
    }

    fn actions(&self) -> usize {
        self.template.ladder.len()
    }

    fn observe(&self) -> Vec<f64> {
        self.state.vector()
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let rec = self.session.step(action)?;
        self.state.push(rec.measurement(self.template.vantage));
        self.state.set_prev_action(action);
        self.t += 1;
        Ok(Transition {
            reward: rec.reward,
            terminal: false,
            truncated: self.t >= self.episode_steps,
        })
    }

    fn reset(&mut self) -> Result<()> {
        self.episode += 1;
        self.start_episode()
    }
}
