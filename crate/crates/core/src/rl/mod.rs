//! Actor-critic bitrate adaptation: network, learner, multi-agent training.

pub mod agent;
pub mod checkpoint;
pub mod net;
pub mod optim;
pub mod state;
pub mod toy;
pub mod train;

pub use agent::{
    actor_loss, actor_loss_gradient, argmax, behavior_probability, critic_loss,
    critic_loss_gradient, select_action, td_error, update_actor_critic, ActorCritic, Experience,
    LearnerConfig, UpdateDiagnostics,
};
pub use checkpoint::Checkpoint;
pub use net::{entropy, softmax, PolicyNet};
pub use state::{state_dim, NormBounds, StateBuilder};
pub use train::{
    actor_seed, evaluate_greedy, Environment, EpsilonSchedule, StepLog, TrainConfig, Trainer,
    Transition,
};
