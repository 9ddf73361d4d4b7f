//! Synchronous multi-agent training: actors collect experience in parallel
//! with a frozen copy of the parameters, then one learner consumes every
//! agent's experience and every actor adopts the result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::{
    behavior_probability, select_action, ActorCritic, Experience, UpdateDiagnostics,
};
use super::net::PolicyNet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub reward: f64,
    /// The task ended; bootstrapping stops here.
    pub terminal: bool,
    /// The episode was cut off without reaching a terminal state.
    pub truncated: bool,
}

pub trait Environment: Send {
    fn state_dim(&self) -> usize;
    fn actions(&self) -> usize;
    fn observe(&self) -> Vec<f64>;
    fn step(&mut self, action: usize) -> Result<Transition>;
    /// Starts a new episode.
    fn reset(&mut self) -> Result<()>;
}

/// Linear decay from `start` to `end` over the first `anneal_steps` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule {
            start: eps,
            end: eps,
            anneal_steps: 0,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        let f = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * f
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub agents: usize,
    /// Steps each actor takes between parameter synchronizations.
    pub sync_period: usize,
    /// Experiences per gradient step; a round's experience is split in
    /// agent order into consecutive minibatches.
    pub minibatch: usize,
    /// Steps per agent.
    pub total_steps: u64,
    pub epsilon: EpsilonSchedule,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 {
            return Err(Error::domain("agents", "must be >= 1"));
        }
        if self.sync_period == 0 || self.minibatch == 0 {
            return Err(Error::domain(
                "sync_period",
                "periods and batch sizes must be >= 1",
            ));
        }
        let e = self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return Err(Error::domain("epsilon", "must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: u64,
    pub agent_id: usize,
    pub epsilon: f64,
    pub reward: f64,
    pub td_error_mean: f64,
    pub critic_loss: f64,
}

struct Actor<E> {
    id: usize,
    env: E,
    rng: ChaCha8Rng,
}

pub struct Trainer<E: Environment> {
    pub learner: ActorCritic,
    pub config: TrainConfig,
    actors: Vec<Actor<E>>,
    steps_done: u64,
    skipped_updates: u64,
}

struct Rollout {
    experiences: Vec<Experience>,
    epsilons: Vec<f64>,
}

fn rollout<E: Environment>(
    net: &PolicyNet,
    actor: &mut Actor<E>,
    first_step: u64,
    steps: usize,
    schedule: EpsilonSchedule,
) -> Result<Rollout> {
    let mut out = Rollout {
        experiences: Vec::with_capacity(steps),
        epsilons: Vec::with_capacity(steps),
    };
    for i in 0..steps {
        let eps = schedule.value(first_step + i as u64);
        let state = actor.env.observe();
        let (probs, _) = net.forward(&state)?;
        let action = select_action(&probs, eps, &mut actor.rng)?;
        let t = actor.env.step(action)?;
        let next_state = actor.env.observe();
        if t.terminal || t.truncated {
            actor.env.reset()?;
        }
        out.experiences.push(Experience {
            state,
            action,
            reward: t.reward,
            next_state,
            terminal: t.terminal,
            agent_id: actor.id,
            behavior_prob: behavior_probability(&probs, eps, action),
        });
        out.epsilons.push(eps);
    }
    Ok(out)
}

/// Seed of the exploration stream of agent `agent_id`.
pub fn actor_seed(seed: u64, agent_id: usize) -> u64 {
    crate::netsim::sub_seed(seed, 0xac70_0000 + agent_id as u64)
}

impl<E: Environment> Trainer<E> {
    /// `envs` supplies one environment per agent.
    pub fn new(learner: ActorCritic, config: TrainConfig, envs: Vec<E>) -> Result<Self> {
        config.validate()?;
        if envs.len() != config.agents {
            return Err(Error::DimensionMismatch {
                expected: config.agents,
                got: envs.len(),
            });
        }
        for env in &envs {
            if env.state_dim() != learner.net.input_dim() || env.actions() != learner.net.actions()
            {
                return Err(Error::domain(
                    "environment",
                    "state or action size does not match the network",
                ));
            }
        }
        let actors = envs
            .into_iter()
            .enumerate()
            .map(|(i, env)| Actor {
                id: i,
                env,
                rng: ChaCha8Rng::seed_from_u64(crate::netsim::sub_seed(
                    config.seed,
                    0xac70_0000 + i as u64,
                )),
            })
            .collect();
        Ok(Trainer {
            learner,
            config,
            actors,
            steps_done: 0,
            skipped_updates: 0,
        })
    }

    /// Steps already taken by each agent, e.g. when resuming.
    pub fn set_steps_done(&mut self, steps: u64) {
        self.steps_done = steps;
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    pub fn is_done(&self) -> bool {
        self.steps_done >= self.config.total_steps
    }

    /// One collect-and-learn round using up to `threads` worker threads.
    /// Results do not depend on `threads`.
    pub fn round(&mut self, threads: usize) -> Result<Vec<StepLog>> {
        let steps = (self.config.total_steps - self.steps_done).min(self.config.sync_period as u64)
            as usize;
        if steps == 0 {
            return Ok(Vec::new());
        }
        let first = self.steps_done;
        let schedule = self.config.epsilon;
        let net = &self.learner.net;
        let rollouts: Vec<Result<Rollout>> = if threads <= 1 || self.actors.len() == 1 {
            self.actors
                .iter_mut()
                .map(|a| rollout(net, a, first, steps, schedule))
                .collect()
        } else {
            let per = self.actors.len().div_ceil(threads);
            std::thread::scope(|s| {
                let handles: Vec<_> = self
                    .actors
                    .chunks_mut(per)
                    .map(|chunk| {
                        s.spawn(move || {
                            chunk
                                .iter_mut()
                                .map(|a| rollout(net, a, first, steps, schedule))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("actor thread panicked"))
                    .collect()
            })
        };
        let rollouts = rollouts.into_iter().collect::<Result<Vec<_>>>()?;

        let all: Vec<Experience> = rollouts
            .iter()
            .flat_map(|r| r.experiences.iter().cloned())
            .collect();
        let mut diags: Vec<UpdateDiagnostics> = Vec::new();
        for batch in all.chunks(self.config.minibatch) {
            let d = self.learner.update(batch)?;
            self.skipped_updates += d.skipped as u64;
            diags.push(d);
        }
        let n = diags.len().max(1) as f64;
        let td = diags.iter().map(|d| d.td_error_mean).sum::<f64>() / n;
        let cl = diags.iter().map(|d| d.critic_loss).sum::<f64>() / n;

        let mut logs = Vec::with_capacity(all.len());
        for r in &rollouts {
            for (i, (e, eps)) in r.experiences.iter().zip(&r.epsilons).enumerate() {
                logs.push(StepLog {
                    step: first + i as u64,
                    agent_id: e.agent_id,
                    epsilon: *eps,
                    reward: e.reward,
                    td_error_mean: td,
                    critic_loss: cl,
                });
            }
        }
        self.steps_done += steps as u64;
        Ok(logs)
    }

    /// Runs rounds until every agent has taken `total_steps` steps.
    pub fn run(&mut self, threads: usize, mut on_log: impl FnMut(&[StepLog])) -> Result<()> {
        while !self.is_done() {
            let logs = self.round(threads)?;
            on_log(&logs);
        }
        Ok(())
    }
}

/// Runs `policy` greedily in `env` for `steps` steps and returns the rewards.
pub fn evaluate_greedy<E: Environment + ?Sized>(
    net: &PolicyNet,
    env: &mut E,
    steps: usize,
) -> Result<Vec<f64>> {
    let mut rewards = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (probs, _) = net.forward(&env.observe())?;
        let t = env.step(super::agent::argmax(&probs))?;
        rewards.push(t.reward);
        if t.terminal || t.truncated {
            env.reset()?;
        }
    }
    Ok(rewards)
}
