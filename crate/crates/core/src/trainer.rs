//! End-to-end training runs and policy evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{effective_entropy_coef, Mode, ReturnWindow};
use crate::env::{CartPole, Environment};
use crate::error::{contract, Error, Result};
use crate::loss::{
    log_softmax, ppo_update, sample_categorical, LossBreakdown, LossCoefficients, UpdateSchedule,
};
use crate::numeric::{forward, init_params, AdamState, NetworkConfig, ParameterSet};
use crate::rollout::{batch_mean_return, collect_rollout, compute_gae, EnvCursor};

/// Offsets added to the master seed for each random stream.
pub mod seed_offset {
    pub const INIT: u64 = 0;
    pub const ENV: u64 = 1;
    pub const ACTION: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const EVAL: u64 = 4;
}

pub fn stream(seed: u64, offset: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(offset))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Entropy coefficient before any adaptive scaling.
    pub c2_base: f64,
    /// Return window length, in updates.
    pub tau: usize,
    pub total_env_steps: usize,
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_epsilon: f64,
    pub c1: f64,
    pub seed: u64,
    pub eval_episodes: usize,
    pub network: NetworkConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Standard,
            c2_base: 0.0,
            tau: 100,
            total_env_steps: 60_000,
            horizon: 256,
            // Tuned on CartPole: the shared trunk stalls when the value loss
            // carries full weight, and lambda 0.8 keeps the advantage signal
            // above the entropy pull once the adaptive coefficient grows.
            epochs: 10,
            minibatch_size: 64,
            lr: 1e-3,
            gamma: 0.99,
            lambda: 0.8,
            clip_epsilon: 0.2,
            c1: 0.05,
            seed: 0,
            eval_episodes: 20,
            network: NetworkConfig::cartpole(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(contract(msg));
        if self.horizon == 0 || self.total_env_steps < self.horizon {
            return fail(format!(
                "total_env_steps {} must cover at least one horizon of {}",
                self.total_env_steps, self.horizon
            ));
        }
        if self.minibatch_size == 0 || !self.horizon.is_multiple_of(self.minibatch_size) {
            return fail(format!(
                "minibatch_size {} must divide horizon {}",
                self.minibatch_size, self.horizon
            ));
        }
        if self.tau == 0 {
            return fail("tau must be at least 1".into());
        }
        if !(self.c2_base >= 0.0 && self.c2_base.is_finite()) {
            return fail(format!("entropy coefficient must be >= 0, got {}", self.c2_base));
        }
        if !(self.lr > 0.0 && self.clip_epsilon > 0.0 && self.c1 >= 0.0) {
            return fail("lr and clip_epsilon must be positive, c1 non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return fail("gamma and lambda must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Whole rollouts that fit in the step budget. A remainder shorter than
    /// one horizon is not collected (60,000 steps give 234 updates).
    pub fn update_count(&self) -> usize {
        self.total_env_steps / self.horizon
    }

    /// Environment steps actually consumed: `update_count() * horizon`.
    pub fn consumed_env_steps(&self) -> usize {
        self.update_count() * self.horizon
    }

    fn schedule(&self) -> UpdateSchedule {
        UpdateSchedule {
            epochs: self.epochs,
            minibatch_size: self.minibatch_size,
            lr: self.lr,
        }
    }
}

/// Metrics logged once per parameter update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub update: usize,
    pub env_steps: usize,
    pub batch_mean_return: f64,
    pub g_recent: f64,
    pub c2_effective: f64,
    pub loss: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRun {
    pub params: ParameterSet,
    pub records: Vec<UpdateRecord>,
}

/// A run that stopped early. Keeps whatever was logged before the failure.
#[derive(Debug, thiserror::Error)]
#[error("training stopped after {} updates: {source}", records.len())]
pub struct TrainFailure {
    pub records: Vec<UpdateRecord>,
    #[source]
    pub source: Error,
}

pub fn train(config: &TrainConfig) -> Result<TrainedRun, TrainFailure> {
    let mut records = Vec::with_capacity(config.update_count());
    match train_inner(config, &mut records) {
        Ok(params) => Ok(TrainedRun { params, records }),
        Err(source) => Err(TrainFailure { records, source }),
    }
}

fn train_inner(config: &TrainConfig, records: &mut Vec<UpdateRecord>) -> Result<ParameterSet> {
    config.validate()?;
    let env = CartPole::default();
    let net = &config.network;

    let mut params = init_params(net, &mut stream(config.seed, seed_offset::INIT));
    let mut env_rng = stream(config.seed, seed_offset::ENV);
    let mut action_rng = stream(config.seed, seed_offset::ACTION);
    let mut shuffle_rng = stream(config.seed, seed_offset::SHUFFLE);

    let mut adam = AdamState::new(params.len());
    let mut window = ReturnWindow::new(config.tau, env.max_return())?;
    let mut cursor = EnvCursor::new(env.reset(&mut env_rng));
    let mut last_batch_return = 0.0;

    for update in 0..config.update_count() {
        let (buffer, stats, next_cursor) = collect_rollout(
            &env,
            &params,
            net,
            cursor,
            config.horizon,
            &mut env_rng,
            &mut action_rng,
        )?;
        cursor = next_cursor;

        let batch_return = batch_mean_return(&stats, last_batch_return);
        last_batch_return = batch_return;
        window.push_batch_return(batch_return)?;
        let g_recent = window.g_recent();
        let c2_effective = effective_entropy_coef(config.mode, &window, config.c2_base)?;

        let (advantages, targets) = compute_gae(&buffer, config.gamma, config.lambda)?;
        let coeffs = LossCoefficients {
            c1: config.c1,
            c2_base: config.c2_base,
            clip_epsilon: config.clip_epsilon,
            c2_effective,
        };
        let (next_params, next_adam, loss) = ppo_update(
            &params,
            &adam,
            net,
            &buffer,
            &advantages,
            &targets,
            &coeffs,
            &config.schedule(),
            &mut shuffle_rng,
        )?;
        params = next_params;
        adam = next_adam;

        records.push(UpdateRecord {
            update,
            env_steps: (update + 1) * config.horizon,
            batch_mean_return: batch_return,
            g_recent,
            c2_effective,
            loss,
        });
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_return: f64,
    pub std: f64,
    pub per_episode_returns: Vec<f64>,
}

/// Plays `episodes` full CartPole episodes, sampling from the policy.
pub fn evaluate<R: Rng + ?Sized>(
    params: &ParameterSet,
    network: &NetworkConfig,
    episodes: usize,
    rng: &mut R,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(contract("evaluation needs at least one episode"));
    }
    let env = CartPole::default();
    let mut obs = Vec::with_capacity(env.obs_dim());
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        let mut total = 0.0;
        loop {
            obs.clear();
            env.observe(&state, &mut obs);
            let (out, _) = forward(params, network, &obs)?;
            if !out.is_finite() {
                return Err(Error::NonFinite("network output during evaluation".into()));
            }
            let action = sample_categorical(&log_softmax(out.logits(0)), rng);
            let step = env.step(&state, action)?;
            total += step.reward;
            if step.done() {
                break;
            }
            state = step.next_state;
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean_return = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|r| (r - mean_return).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalReport {
        mean_return,
        std,
        per_episode_returns: returns,
    })
}

pub const LOG_HEADER: &str =
    "update,env_steps,batch_mean_return,g_recent,c2_effective,loss_clip,loss_value,loss_entropy,loss_total";

pub fn write_update_log<W: Write>(mut out: W, records: &[UpdateRecord]) -> Result<()> {
    writeln!(out, "{LOG_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.update,
            r.env_steps,
            r.batch_mean_return,
            r.g_recent,
            r.c2_effective,
            r.loss.clip_term,
            r.loss.value_term,
            r.loss.entropy_term,
            r.loss.total
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_update_log(path: &Path, records: &[UpdateRecord]) -> Result<()> {
    write_update_log(BufWriter::new(File::create(path)?), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mode: Mode, c2_base: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            mode,
            c2_base,
            tau: 3,
            total_env_steps: 512,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn update_count_follows_step_budget() {
        let run = train(&short(Mode::Adaptive, 0.5, 1)).unwrap();
        assert_eq!(run.records.len(), 2);
        assert_eq!(run.records[0].env_steps, 256);
        assert_eq!(run.records[1].env_steps, 512);
    }

    #[test]
    fn partial_horizon_is_dropped() {
        let config = TrainConfig::default();
        assert_eq!(config.update_count(), 234);
        assert_eq!(config.consumed_env_steps(), 59_904);
        let run = train(&TrainConfig {
            total_env_steps: 700,
            ..short(Mode::Standard, 0.0, 0)
        })
        .unwrap();
        assert_eq!(run.records.len(), 2);
    }

    #[test]
    fn logged_coefficient_matches_mode() {
        let adaptive = train(&short(Mode::Adaptive, 0.5, 2)).unwrap();
        for r in &adaptive.records {
            assert_eq!(r.c2_effective, r.g_recent * 0.5);
            assert!((0.0..=1.0).contains(&r.g_recent));
        }
        let standard = train(&short(Mode::Standard, 0.5, 2)).unwrap();
        assert!(standard.records.iter().all(|r| r.c2_effective == 0.5));
    }

    #[test]
    fn invalid_config_fails_without_records() {
        let bad = TrainConfig {
            total_env_steps: 200,
            ..TrainConfig::default()
        };
        let err = train(&bad).unwrap_err();
        assert!(err.records.is_empty());
        assert!(matches!(err.source, Error::Contract(_)));
        let bad_mb = TrainConfig {
            minibatch_size: 100,
            ..TrainConfig::default()
        };
        assert!(bad_mb.validate().is_err());
        let bad_tau = TrainConfig {
            tau: 0,
            ..TrainConfig::default()
        };
        assert!(bad_tau.validate().is_err());
    }

    #[test]
    fn always_right_policy_falls() {
        // a network whose policy head strongly prefers action 1
        let config = NetworkConfig::cartpole();
        let mut params = ParameterSet::zeros(&config);
        let head = config.policy_head();
        let bias = head.offset + head.weight_len();
        params.as_mut_slice()[bias + 1] = 50.0;
        let report = evaluate(&params, &config, 5, &mut stream(0, seed_offset::EVAL)).unwrap();
        assert!(report.mean_return < 500.0);
        assert!(report.per_episode_returns.iter().all(|&r| r >= 1.0));
    }

    #[test]
    fn single_episode_report() {
        let config = NetworkConfig::cartpole();
        let params = ParameterSet::zeros(&config);
        let report = evaluate(&params, &config, 1, &mut stream(3, 0)).unwrap();
        assert_eq!(report.per_episode_returns.len(), 1);
        assert_eq!(report.mean_return, report.per_episode_returns[0]);
        assert_eq!(report.std, 0.0);
        assert!(evaluate(&params, &config, 0, &mut stream(3, 0)).is_err());
    }

    #[test]
    fn log_has_header_and_one_row_per_update() {
        let run = train(&short(Mode::Standard, 0.1, 4)).unwrap();
        let mut buf = Vec::new();
        write_update_log(&mut buf, &run.records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,256,"));
        assert_eq!(lines[2].split(',').count(), 9);
    }
}
