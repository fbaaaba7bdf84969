//! PPO and adaptive-entropy PPO, trained from scratch on CartPole.
//!
//! The adaptive variant scales the entropy bonus coefficient each update by
//! the agent's recent mean episode return, normalized by the maximum
//! achievable return. With a zero coefficient the two algorithms are
//! identical.
//!
//! Everything runs in `f64` on the CPU with no external ML framework: the
//! network, its gradients, the optimizer and the environment are all here.

pub mod adaptive;
pub mod env;
pub mod error;
pub mod loss;
pub mod numeric;
pub mod rollout;
pub mod sweep;
pub mod trainer;

pub use adaptive::{effective_entropy_coef, Mode, ReturnWindow};
pub use env::{CartPole, CartPoleState, Environment, PhysicsConstants, StepResult};
pub use error::{Error, Result};
pub use loss::{LossBreakdown, LossCoefficients, PolicySample, UpdateSchedule};
pub use numeric::{AdamState, GradientSet, NetworkConfig, NetworkOutput, ParameterSet};
pub use rollout::{EnvCursor, EpisodeStats, RolloutBuffer, Transition};
pub use sweep::{run_sweep, Format, RunResult, RunSpec, SweepSpec};
pub use trainer::{evaluate, train, EvalReport, TrainConfig, TrainFailure, TrainedRun, UpdateRecord};
