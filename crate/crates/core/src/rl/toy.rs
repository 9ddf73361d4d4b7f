//! A three-state, two-action chain with a known optimal policy.
//!
//! State 0 pays a little for staying and nothing for moving on to 1; state 1
//! goes back (0) or forward to 2; state 2 pays 1.0 for resetting to 0 and
//! 0.2 for staying. For discounts close to 1 the best cycle is 0 -> 1 -> 2 -> 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{Environment, Transition};
use crate::error::{Error, Result};

pub const TOY_STATES: usize = 3;
pub const TOY_ACTIONS: usize = 2;

/// `(next_state, reward)` for every state and action.
pub const TOY_TRANSITIONS: [[(usize, f64); TOY_ACTIONS]; TOY_STATES] = [
    [(0, 0.1), (1, 0.0)],
    [(0, 0.0), (2, 0.0)],
    [(0, 1.0), (2, 0.2)],
];

#[derive(Clone, Debug)]
pub struct ToyChain {
    state: usize,
    t: usize,
    horizon: usize,
    rng: ChaCha8Rng,
}

impl ToyChain {
    pub fn new(horizon: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ToyChain {
            state: rng.random_range(0..TOY_STATES),
            t: 0,
            horizon: horizon.max(1),
            rng,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; TOY_STATES];
        v[state] = 1.0;
        v
    }
}

impl Environment for ToyChain {
    fn state_dim(&self) -> usize {
        TOY_STATES
    }

    fn actions(&self) -> usize {
        TOY_ACTIONS
    }

    fn observe(&self) -> Vec<f64> {
        Self::one_hot(self.state)
    }

    fn step(&mut self, action: usize) -> Result<Transition> {
        let (next, reward) = *TOY_TRANSITIONS[self.state]
            .get(action)
            .ok_or_else(|| Error::domain("action", format!("{action} out of range")))?;
        self.state = next;
        self.t += 1;
        Ok(Transition {
            reward,
            terminal: false,
            truncated: self.t >= self.horizon,
        })
    }

    fn reset(&mut self) -> Result<()> {
        self.state = self.rng.random_range(0..TOY_STATES);
        self.t = 0;
        Ok(())
    }
}
