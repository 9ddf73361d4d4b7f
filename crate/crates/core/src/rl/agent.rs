//! Actor-critic learning on top of [`PolicyNet`].

use rand::Rng;

use super::net::{entropy, PolicyNet};
use super::optim::Adam;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub agent_id: usize,
    /// Probability the acting policy gave `action`; 1.0 when unknown.
    pub behavior_prob: f64,
}

/// Epsilon-greedy over the policy: with probability `epsilon` a uniformly
/// random action, otherwise the most probable one (lowest index on ties).
pub fn select_action<R: Rng + ?Sized>(probs: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(Error::domain("probs", "empty action distribution"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain(
            "epsilon",
            format!("{epsilon} outside [0, 1]"),
        ));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("action probabilities".into()));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..probs.len()));
    }
    Ok(argmax(probs))
}

/// Probability that [`select_action`] returns `action`.
pub fn behavior_probability(probs: &[f64], epsilon: f64, action: usize) -> f64 {
    let uniform = epsilon / probs.len() as f64;
    if action == argmax(probs) {
        uniform + 1.0 - epsilon
    } else {
        uniform
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// One-step TD error `r + gamma * V(s') - V(s)`; `V(s')` is 0 at terminals.
pub fn td_error(net: &PolicyNet, exp: &Experience, discount: f64) -> Result<f64> {
    Ok(td_target(net, exp, discount)? - net.value(&exp.state)?)
}

fn td_target(net: &PolicyNet, exp: &Experience, discount: f64) -> Result<f64> {
    let next = if exp.terminal {
        0.0
    } else {
        net.value(&exp.next_state)?
    };
    Ok(exp.reward + discount * next)
}

/// Mean squared error of the value head against fixed targets.
pub fn critic_loss(net: &PolicyNet, batch: &[Experience], targets: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (e, y) in batch.iter().zip(targets) {
        let d = y - net.value(&e.state)?;
        sum += d * d;
    }
    Ok(sum / batch.len().max(1) as f64)
}

pub fn critic_loss_gradient(
    net: &PolicyNet,
    batch: &[Experience],
    targets: &[f64],
) -> Result<Vec<f64>> {
    let n = batch.len().max(1) as f64;
    let mut g = vec![0.0; net.param_count()];
    let zeros = vec![0.0; net.actions()];
    for (e, y) in batch.iter().zip(targets) {
        let c = net.forward_cached(&e.state)?;
        net.backward(&c, &zeros, -2.0 * (y - c.value) / n, &mut g);
    }
    Ok(g)
}

/// Policy-gradient loss with fixed advantages:
/// `-mean(log pi(a|s) * adv) - entropy_coef * mean(H(pi(.|s)))`.
pub fn actor_loss(
    net: &PolicyNet,
    batch: &[Experience],
    advantages: &[f64],
    entropy_coef: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (e, adv) in batch.iter().zip(advantages) {
        let c = net.forward_cached(&e.state)?;
        sum += -c.probs[e.action].ln() * adv - entropy_coef * entropy(&c.probs);
    }
    Ok(sum / batch.len().max(1) as f64)
}

pub fn actor_loss_gradient(
    net: &PolicyNet,
    batch: &[Experience],
    advantages: &[f64],
    entropy_coef: f64,
) -> Result<Vec<f64>> {
    let n = batch.len().max(1) as f64;
    let mut g = vec![0.0; net.param_count()];
    for (e, adv) in batch.iter().zip(advantages) {
        let c = net.forward_cached(&e.state)?;
        let h = entropy(&c.probs);
        let d: Vec<f64> = c
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let pg = if j == e.action { p - 1.0 } else { p } * adv;
                let ent = if p > 0.0 {
                    entropy_coef * p * (p.ln() + h)
                } else {
                    0.0
                };
                (pg + ent) / n
            })
            .collect();
        net.backward(&c, &d, 0.0, &mut g);
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig {
    pub discount: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    /// Per-loss gradient norm clip; 0 disables.
    pub max_grad_norm: f64,
    /// Upper bound of the `pi(a|s) / behavior_prob` weight on each actor
    /// sample; 0 disables the weighting.
    pub importance_clip: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            discount: 0.9,
            actor_lr: 1e-3,
            critic_lr: 3e-3,
            entropy_coef: 0.0,
            max_grad_norm: 5.0,
            importance_clip: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::domain("discount", "must be in [0, 1)"));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::domain("learning_rate", "must be > 0"));
        }
        if !(self.entropy_coef >= 0.0 && self.max_grad_norm >= 0.0 && self.importance_clip >= 0.0) {
            return Err(Error::domain("entropy_coef", "coefficients must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub td_error_mean: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub entropy_mean: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
    /// Set when a non-finite gradient caused the update to be skipped.
    pub skipped: bool,
}

/// Policy network plus the optimizer state of both losses.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub net: PolicyNet,
    pub config: LearnerConfig,
    actor_opt: Adam,
    critic_opt: Adam,
}

fn clip(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

impl ActorCritic {
    pub fn new(net: PolicyNet, config: LearnerConfig) -> Result<Self> {
        config.validate()?;
        let n = net.param_count();
        Ok(ActorCritic {
            actor_opt: Adam::new(n, config.actor_lr),
            critic_opt: Adam::new(n, config.critic_lr),
            net,
            config,
        })
    }

    /// One gradient step on both losses; the TD targets are computed once
    /// from the current parameters and held fixed.
    pub fn update(&mut self, batch: &[Experience]) -> Result<UpdateDiagnostics> {
        if batch.is_empty() {
            return Ok(UpdateDiagnostics::default());
        }
        let net = &self.net;
        let mut targets = Vec::with_capacity(batch.len());
        let mut deltas = Vec::with_capacity(batch.len());
        let mut weighted = Vec::with_capacity(batch.len());
        let mut ent = 0.0;
        for e in batch {
            let c = net.forward_cached(&e.state)?;
            let y = td_target(net, e, self.config.discount)?;
            let clip = self.config.importance_clip;
            let w = if clip > 0.0 && e.behavior_prob > 0.0 {
                (c.probs[e.action] / e.behavior_prob).min(clip)
            } else {
                1.0
            };
            targets.push(y);
            deltas.push(y - c.value);
            weighted.push(w * (y - c.value));
            ent += entropy(&c.probs);
        }
        let n = batch.len() as f64;
        let mut diag = UpdateDiagnostics {
            td_error_mean: deltas.iter().sum::<f64>() / n,
            critic_loss: deltas.iter().map(|d| d * d).sum::<f64>() / n,
            actor_loss: actor_loss(net, batch, &weighted, self.config.entropy_coef)?,
            entropy_mean: ent / n,
            ..Default::default()
        };
        let mut ga = actor_loss_gradient(net, batch, &weighted, self.config.entropy_coef)?;
        let mut gc = critic_loss_gradient(net, batch, &targets)?;
        if ga.iter().chain(&gc).any(|x| !x.is_finite()) {
            diag.skipped = true;
            return Ok(diag);
        }
        diag.actor_grad_norm = clip(&mut ga, self.config.max_grad_norm);
        diag.critic_grad_norm = clip(&mut gc, self.config.max_grad_norm);
        let da = self.actor_opt.delta(&ga);
        let dc = self.critic_opt.delta(&gc);
        for ((p, a), c) in self.net.params_mut().iter_mut().zip(da).zip(dc) {
            *p += a + c;
        }
        Ok(diag)
    }
}

/// Applies one actor-critic update to `learner` using `batch`.
pub fn update_actor_critic(
    learner: &mut ActorCritic,
    batch: &[Experience],
) -> Result<UpdateDiagnostics> {
    learner.update(batch)
}
