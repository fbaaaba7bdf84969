//! On-policy trajectory collection and advantage estimation.

use rand::Rng;

use crate::env::Environment;
use crate::error::{contract, Error, Result};
use crate::loss::{log_softmax, sample_categorical};
use crate::numeric::{forward, NetworkConfig, ParameterSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    /// log π(action | obs) under the collecting policy.
    pub log_prob: f64,
    /// V(obs) under the collecting policy.
    pub value: f64,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    /// V of the state reached at a step-limit cutoff, before the inline
    /// reset. Zero unless `truncated`.
    pub truncation_value: f64,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// A fixed-horizon slice of experience. Episodes are concatenated; the
/// environment resets inline whenever one finishes.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    /// V of the state after the last transition.
    pub bootstrap_value: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Value of the successor state of transition `t`, as used by GAE.
    fn next_value(&self, t: usize) -> f64 {
        let tr = &self.transitions[t];
        if tr.terminated {
            0.0
        } else if tr.truncated {
            tr.truncation_value
        } else if t + 1 == self.transitions.len() {
            self.bootstrap_value
        } else {
            self.transitions[t + 1].value
        }
    }
}

/// Undiscounted returns of the episodes that finished during one rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeStats {
    pub completed_returns: Vec<f64>,
}

impl EpisodeStats {
    pub fn count(&self) -> usize {
        self.completed_returns.len()
    }
}

/// Where the environment stands between rollouts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvCursor<S> {
    pub state: S,
    /// Return accumulated so far in the in-progress episode.
    pub running_return: f64,
}

impl<S> EnvCursor<S> {
    pub fn new(state: S) -> Self {
        Self {
            state,
            running_return: 0.0,
        }
    }
}

fn evaluate_one<E: Environment>(
    env: &E,
    params: &ParameterSet,
    config: &NetworkConfig,
    state: &E::State,
    obs: &mut Vec<f64>,
) -> Result<(Vec<f64>, f64)> {
    obs.clear();
    env.observe(state, obs);
    let (out, _) = forward(params, config, obs)?;
    if !out.is_finite() {
        return Err(Error::NonFinite(format!(
            "network output during rollout (obs {obs:?})"
        )));
    }
    Ok((out.logits(0).to_vec(), out.value(0)))
}

/// Runs the current stochastic policy for exactly `horizon` steps.
///
/// `env_rng` drives resets, `action_rng` drives action sampling.
pub fn collect_rollout<E, R1, R2>(
    env: &E,
    params: &ParameterSet,
    config: &NetworkConfig,
    cursor: EnvCursor<E::State>,
    horizon: usize,
    env_rng: &mut R1,
    action_rng: &mut R2,
) -> Result<(RolloutBuffer, EpisodeStats, EnvCursor<E::State>)>
where
    E: Environment,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    if horizon == 0 {
        return Err(contract("rollout horizon must be at least 1"));
    }
    if env.obs_dim() != config.obs_dim() || env.action_count() != config.action_count() {
        return Err(contract("network shape does not match environment"));
    }

    let EnvCursor {
        mut state,
        mut running_return,
    } = cursor;
    let mut transitions = Vec::with_capacity(horizon);
    let mut stats = EpisodeStats::default();
    let mut obs = Vec::with_capacity(config.obs_dim());

    for _ in 0..horizon {
        let (logits, value) = evaluate_one(env, params, config, &state, &mut obs)?;
        let log_probs = log_softmax(&logits);
        let action = sample_categorical(&log_probs, action_rng);
        let step = env.step(&state, action)?;
        running_return += step.reward;

        let truncation_value = if step.truncated && !step.terminated {
            evaluate_one(env, params, config, &step.next_state, &mut obs)?.1
        } else {
            0.0
        };
        let mut tr = Transition {
            obs: Vec::new(),
            action,
            log_prob: log_probs[action],
            value,
            reward: step.reward,
            terminated: step.terminated,
            truncated: step.truncated && !step.terminated,
            truncation_value,
        };
        env.observe(&state, &mut tr.obs);
        transitions.push(tr);

        if step.done() {
            stats.completed_returns.push(running_return);
            running_return = 0.0;
            state = env.reset(env_rng);
        } else {
            state = step.next_state;
        }
    }

    let (_, bootstrap_value) = evaluate_one(env, params, config, &state, &mut obs)?;
    let buffer = RolloutBuffer {
        transitions,
        bootstrap_value,
    };
    Ok((
        buffer,
        stats,
        EnvCursor {
            state,
            running_return,
        },
    ))
}

/// Generalized advantage estimates and value targets (`A_t + V(s_t)`).
///
/// Termination masks the successor value; truncation bootstraps from the
/// value of the cut-off state. Either one stops the backward accumulation.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&lambda) {
        return Err(contract(format!(
            "gamma and lambda must lie in [0, 1], got {gamma} and {lambda}"
        )));
    }
    let n = buffer.len();
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let tr = &buffer.transitions[t];
        let delta = tr.reward + gamma * buffer.next_value(t) - tr.value;
        let carry = if tr.done() {
            0.0
        } else {
            gamma * lambda * next_advantage
        };
        advantages[t] = delta + carry;
        next_advantage = advantages[t];
    }
    let targets = advantages
        .iter()
        .zip(&buffer.transitions)
        .map(|(a, tr)| a + tr.value)
        .collect();
    Ok((advantages, targets))
}

/// Mean completed-episode return, or `fallback` when no episode finished.
pub fn batch_mean_return(stats: &EpisodeStats, fallback: f64) -> f64 {
    if stats.completed_returns.is_empty() {
        fallback
    } else {
        stats.completed_returns.iter().sum::<f64>() / stats.count() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CartPole, StepResult};
    use crate::numeric::init_params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn transition(reward: f64, value: f64, terminated: bool, truncated: bool) -> Transition {
        Transition {
            obs: vec![0.0],
            action: 0,
            log_prob: -0.5,
            value,
            reward,
            terminated,
            truncated,
            truncation_value: 0.0,
        }
    }

    /// Terminates every `period` steps with reward 1.
    #[derive(Debug)]
    struct FixedLength {
        period: u32,
    }

    impl Environment for FixedLength {
        type State = u32;
        fn obs_dim(&self) -> usize {
            1
        }
        fn action_count(&self) -> usize {
            2
        }
        fn reset<R: Rng + ?Sized>(&self, _: &mut R) -> u32 {
            0
        }
        fn step(&self, state: &u32, _: usize) -> Result<StepResult<u32>> {
            let next = state + 1;
            Ok(StepResult {
                next_state: next,
                reward: 1.0,
                terminated: next == self.period,
                truncated: false,
            })
        }
        fn observe(&self, state: &u32, out: &mut Vec<f64>) {
            out.push(f64::from(*state));
        }
        fn max_return(&self) -> f64 {
            f64::from(self.period)
        }
    }

    #[test]
    fn single_terminal_step() {
        let buffer = RolloutBuffer {
            transitions: vec![transition(1.0, 0.0, true, false)],
            bootstrap_value: 123.0,
        };
        let (adv, targets) = compute_gae(&buffer, 0.99, 0.95).unwrap();
        assert_eq!(adv, vec![1.0]);
        assert_eq!(targets, vec![1.0]);
    }

    #[test]
    fn two_step_episode_matches_monte_carlo() {
        let buffer = RolloutBuffer {
            transitions: vec![
                transition(1.0, 0.5, false, false),
                transition(1.0, 0.5, true, false),
            ],
            bootstrap_value: 9.0,
        };
        let (adv, _) = compute_gae(&buffer, 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![2.0 - 0.5, 1.0 - 0.5]);
    }

    #[test]
    fn truncation_bootstraps_termination_does_not() {
        let mut cut = transition(1.0, 2.0, false, true);
        cut.truncation_value = 10.0;
        let buffer = RolloutBuffer {
            transitions: vec![cut, transition(1.0, 3.0, true, false)],
            bootstrap_value: 0.0,
        };
        let (adv, _) = compute_gae(&buffer, 0.5, 0.9).unwrap();
        assert_eq!(adv[0], 1.0 + 0.5 * 10.0 - 2.0);
        assert_eq!(adv[1], 1.0 - 3.0);
    }

    #[test]
    fn open_episode_uses_bootstrap() {
        let buffer = RolloutBuffer {
            transitions: vec![transition(1.0, 1.0, false, false)],
            bootstrap_value: 4.0,
        };
        let (adv, _) = compute_gae(&buffer, 0.5, 0.5).unwrap();
        assert_eq!(adv[0], 1.0 + 0.5 * 4.0 - 1.0);
    }

    #[test]
    fn invalid_discount_rejected() {
        let buffer = RolloutBuffer {
            transitions: vec![transition(1.0, 1.0, true, false)],
            bootstrap_value: 0.0,
        };
        assert!(compute_gae(&buffer, 1.5, 0.5).is_err());
        assert!(compute_gae(&buffer, 0.5, -0.1).is_err());
    }

    #[test]
    fn batch_mean_and_fallback() {
        let stats = EpisodeStats {
            completed_returns: vec![100.0, 200.0, 300.0],
        };
        assert_eq!(batch_mean_return(&stats, 0.0), 200.0);
        assert_eq!(batch_mean_return(&EpisodeStats::default(), 137.5), 137.5);
        let one = EpisodeStats {
            completed_returns: vec![500.0],
        };
        assert_eq!(batch_mean_return(&one, 0.0), 500.0);
    }

    #[test]
    fn stub_environment_returns() {
        let env = FixedLength { period: 5 };
        let config = NetworkConfig::new(1, vec![4], 2).unwrap();
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (buffer, stats, cursor) = collect_rollout(
            &env,
            &params,
            &config,
            EnvCursor::new(0),
            15,
            &mut rng.clone(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(buffer.len(), 15);
        assert_eq!(stats.completed_returns, vec![5.0, 5.0, 5.0]);
        assert_eq!(cursor, EnvCursor::new(0));
    }

    #[test]
    fn episodes_persist_across_rollouts() {
        let env = FixedLength { period: 5 };
        let config = NetworkConfig::new(1, vec![4], 2).unwrap();
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut env_rng = ChaCha8Rng::seed_from_u64(2);
        let (_, first, cursor) = collect_rollout(
            &env,
            &params,
            &config,
            EnvCursor::new(0),
            7,
            &mut env_rng,
            &mut rng,
        )
        .unwrap();
        assert_eq!(first.completed_returns, vec![5.0]);
        assert_eq!(cursor.running_return, 2.0);
        let (_, second, _) =
            collect_rollout(&env, &params, &config, cursor, 3, &mut env_rng, &mut rng).unwrap();
        assert_eq!(second.completed_returns, vec![5.0]);
    }

    #[test]
    fn cartpole_rollout_shape_and_determinism() {
        let env = CartPole::default();
        let config = NetworkConfig::cartpole();
        let params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(4));
        let run = || {
            let mut env_rng = ChaCha8Rng::seed_from_u64(5);
            let mut act_rng = ChaCha8Rng::seed_from_u64(6);
            let start = EnvCursor::new(env.reset(&mut env_rng));
            collect_rollout(&env, &params, &config, start, 256, &mut env_rng, &mut act_rng).unwrap()
        };
        let (buffer, stats, _) = run();
        assert_eq!(buffer.len(), 256);
        assert!(stats.count() >= 1);
        assert!(stats.completed_returns.iter().all(|r| (1.0..=500.0).contains(r)));
        assert!(buffer
            .transitions
            .iter()
            .all(|t| t.log_prob <= 0.0 && t.reward == 1.0));
        let (again, _, _) = run();
        assert_eq!(buffer, again);
    }

    #[test]
    fn horizon_zero_rejected() {
        let env = CartPole::default();
        let config = NetworkConfig::cartpole();
        let params = ParameterSet::zeros(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let start = EnvCursor::new(env.reset(&mut rng));
        let err = collect_rollout(&env, &params, &config, start, 0, &mut rng.clone(), &mut rng);
        assert!(err.is_err());
    }

    fn episode_buffer() -> impl Strategy<Value = RolloutBuffer> {
        // whole episodes that end in termination
        prop::collection::vec(prop::collection::vec((0.0f64..2.0, -5.0f64..5.0), 1..6), 1..5).prop_map(
            |episodes| {
                let mut transitions = Vec::new();
                for ep in episodes {
                    let last = ep.len() - 1;
                    for (i, (reward, value)) in ep.into_iter().enumerate() {
                        transitions.push(transition(reward, value, i == last, false));
                    }
                }
                RolloutBuffer {
                    transitions,
                    bootstrap_value: 0.0,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn undiscounted_gae_is_monte_carlo(buffer in episode_buffer()) {
            let (adv, targets) = compute_gae(&buffer, 1.0, 1.0).unwrap();
            let mut remaining = 0.0;
            for t in (0..buffer.len()).rev() {
                let tr = &buffer.transitions[t];
                if tr.terminated {
                    remaining = 0.0;
                }
                remaining += tr.reward;
                prop_assert!((adv[t] - (remaining - tr.value)).abs() <= 1e-12);
                prop_assert!((targets[t] - remaining).abs() <= 1e-12);
            }
        }

        #[test]
        fn lambda_zero_is_one_step_td(buffer in episode_buffer(), gamma in 0.0f64..=1.0) {
            let (adv, _) = compute_gae(&buffer, gamma, 0.0).unwrap();
            for (t, (tr, a)) in buffer.transitions.iter().zip(&adv).enumerate() {
                let delta = tr.reward + gamma * buffer.next_value(t) - tr.value;
                prop_assert_eq!(*a, delta);
            }
        }
    }
}
