//! Clipped-surrogate PPO loss with an entropy bonus, its analytic output
//! partials, and the epoch/minibatch update loop.
//!
//! The optimizer minimizes
//!
//! ```text
//! total = -clip_term + c1 * value_term - c2_effective * entropy_term
//! ```
//!
//! where every term is a mean over the minibatch.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{contract, ensure_finite, Error, Result};
use crate::numeric::{adam_step, backprop, forward, AdamState, NetworkConfig, NetworkOutput, ParameterSet};
use crate::rollout::RolloutBuffer;

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Draws an index with probability `exp(log_probs[i])` by inverse CDF.
pub fn sample_categorical<R: Rng + ?Sized>(log_probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        cumulative += lp.exp();
        if u < cumulative {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Entropy of the softmax distribution over `logits`, in nats.
pub fn categorical_entropy(logits: &[f64]) -> f64 {
    let log_probs = log_softmax(logits);
    let h: f64 = -log_probs.iter().map(|lp| lp.exp() * lp).sum::<f64>();
    h.max(0.0)
}

pub fn action_log_prob(logits: &[f64], action: usize) -> Result<f64> {
    if action >= logits.len() {
        return Err(contract(format!(
            "action {action} out of range for {} logits",
            logits.len()
        )));
    }
    Ok(log_softmax(logits)[action])
}

/// `min(r * A, clip(r, 1 - eps, 1 + eps) * A)`
pub fn clipped_surrogate_objective(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    /// Value loss weight.
    pub c1: f64,
    /// Entropy coefficient as configured.
    pub c2_base: f64,
    pub clip_epsilon: f64,
    /// Entropy coefficient applied in this update.
    pub c2_effective: f64,
}

impl LossCoefficients {
    fn validate(&self) -> Result<()> {
        let ok = self.c1 >= 0.0
            && self.c2_base >= 0.0
            && self.c2_effective >= 0.0
            && self.clip_epsilon > 0.0
            && [self.c1, self.c2_base, self.c2_effective, self.clip_epsilon]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(contract(format!("invalid loss coefficients {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    /// Mean clipped surrogate objective, before negation.
    pub clip_term: f64,
    /// Mean `0.5 * (V - target)^2`.
    pub value_term: f64,
    /// Mean policy entropy.
    pub entropy_term: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn assemble(clip_term: f64, value_term: f64, entropy_term: f64, coeffs: &LossCoefficients) -> Self {
        Self {
            clip_term,
            value_term,
            entropy_term,
            total: -clip_term + coeffs.c1 * value_term - coeffs.c2_effective * entropy_term,
        }
    }

    fn mean(parts: &[LossBreakdown]) -> Self {
        let n = parts.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| parts.iter().map(f).sum::<f64>() / n;
        Self {
            clip_term: sum(|b| b.clip_term),
            value_term: sum(|b| b.value_term),
            entropy_term: sum(|b| b.entropy_term),
            total: sum(|b| b.total),
        }
    }
}

/// What the loss needs to know about one collected sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySample {
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

fn check_batch(outputs: &NetworkOutput, data: &[PolicySample], coeffs: &LossCoefficients) -> Result<()> {
    if data.is_empty() || outputs.batch_size() != data.len() {
        return Err(contract(format!(
            "loss needs matching non-empty batches, got {} outputs and {} samples",
            outputs.batch_size(),
            data.len()
        )));
    }
    coeffs.validate()?;
    if !outputs.is_finite() {
        return Err(Error::NonFinite("network outputs".into()));
    }
    for s in data {
        if s.action >= outputs.action_count() {
            return Err(contract(format!("action {} out of range", s.action)));
        }
        ensure_finite(&[s.old_log_prob, s.advantage, s.value_target], "loss inputs")?;
    }
    Ok(())
}

pub fn loss_breakdown(
    outputs: &NetworkOutput,
    data: &[PolicySample],
    coeffs: &LossCoefficients,
) -> Result<LossBreakdown> {
    check_batch(outputs, data, coeffs)?;
    let (mut clip, mut value, mut entropy) = (0.0, 0.0, 0.0);
    for (i, s) in data.iter().enumerate() {
        let logits = outputs.logits(i);
        let ratio = (log_softmax(logits)[s.action] - s.old_log_prob).exp();
        clip += clipped_surrogate_objective(ratio, s.advantage, coeffs.clip_epsilon);
        let err = outputs.value(i) - s.value_target;
        value += 0.5 * err * err;
        entropy += categorical_entropy(logits);
    }
    let n = data.len() as f64;
    let breakdown = LossBreakdown::assemble(clip / n, value / n, entropy / n, coeffs);
    if !breakdown.total.is_finite() {
        return Err(Error::NonFinite("loss total".into()));
    }
    Ok(breakdown)
}

/// Partials of [`LossBreakdown::total`] w.r.t. every sample's logits and
/// value, already divided by the batch size.
///
/// Returns `(d_logits, d_values)` with `d_logits` flattened row-major.
pub fn loss_output_gradients(
    outputs: &NetworkOutput,
    data: &[PolicySample],
    coeffs: &LossCoefficients,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_batch(outputs, data, coeffs)?;
    let n = data.len() as f64;
    let actions = outputs.action_count();
    let mut d_logits = Vec::with_capacity(data.len() * actions);
    let mut d_values = Vec::with_capacity(data.len());

    for (i, s) in data.iter().enumerate() {
        let log_probs = log_softmax(outputs.logits(i));
        let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
        let entropy = -probs.iter().zip(&log_probs).map(|(p, lp)| p * lp).sum::<f64>();

        let ratio = (log_probs[s.action] - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - coeffs.clip_epsilon, 1.0 + coeffs.clip_epsilon);
        // d(min)/d(log pi): the unclipped branch carries r * A, the clipped one is constant.
        let d_surrogate = if ratio * s.advantage <= clipped * s.advantage {
            ratio * s.advantage
        } else {
            0.0
        };

        for j in 0..actions {
            let indicator = if j == s.action { 1.0 } else { 0.0 };
            let d_log_prob = indicator - probs[j];
            let d_entropy = -probs[j] * (log_probs[j] + entropy);
            d_logits.push((-d_surrogate * d_log_prob - coeffs.c2_effective * d_entropy) / n);
        }
        d_values.push(coeffs.c1 * (outputs.value(i) - s.value_target) / n);
    }
    Ok((d_logits, d_values))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSchedule {
    pub epochs: usize,
    pub minibatch_size: usize,
    pub lr: f64,
}

/// Standardizes to mean 0 and (population) std 1.
pub fn normalize_advantages(advantages: &[f64]) -> Vec<f64> {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt() + 1e-8;
    advantages.iter().map(|a| (a - mean) / scale).collect()
}

/// Flattens buffer observations and pairs them with the loss inputs.
pub fn training_samples(
    buffer: &RolloutBuffer,
    advantages: &[f64],
    targets: &[f64],
) -> (Vec<f64>, Vec<PolicySample>) {
    let obs = buffer
        .transitions
        .iter()
        .flat_map(|t| t.obs.iter().copied())
        .collect();
    let samples = buffer
        .transitions
        .iter()
        .zip(advantages)
        .zip(targets)
        .map(|((t, &advantage), &value_target)| PolicySample {
            action: t.action,
            old_log_prob: t.log_prob,
            advantage,
            value_target,
        })
        .collect();
    (obs, samples)
}

/// Minibatch loss and gradient w.r.t. the parameters.
pub fn minibatch_gradient(
    params: &ParameterSet,
    config: &NetworkConfig,
    obs: &[f64],
    data: &[PolicySample],
    coeffs: &LossCoefficients,
) -> Result<(LossBreakdown, crate::numeric::GradientSet)> {
    let (outputs, trace) = forward(params, config, obs)?;
    let breakdown = loss_breakdown(&outputs, data, coeffs)?;
    let (d_logits, d_values) = loss_output_gradients(&outputs, data, coeffs)?;
    let grads = backprop(params, config, &trace, &d_logits, &d_values)?;
    Ok((breakdown, grads))
}

/// One PPO update: advantage normalization, then `epochs` shuffled passes of
/// minibatch Adam steps.
///
/// Returns the mean loss breakdown over the last epoch's minibatches, or the
/// full-buffer loss when `epochs == 0`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    params: &ParameterSet,
    adam: &AdamState,
    config: &NetworkConfig,
    buffer: &RolloutBuffer,
    advantages: &[f64],
    targets: &[f64],
    coeffs: &LossCoefficients,
    schedule: &UpdateSchedule,
    rng: &mut R,
) -> Result<(ParameterSet, AdamState, LossBreakdown)> {
    let n = buffer.len();
    if n == 0 || advantages.len() != n || targets.len() != n {
        return Err(contract(format!(
            "update inputs misaligned: {n} transitions, {} advantages, {} targets",
            advantages.len(),
            targets.len()
        )));
    }
    if schedule.minibatch_size == 0 || !n.is_multiple_of(schedule.minibatch_size) {
        return Err(contract(format!(
            "minibatch size {} must divide {n}",
            schedule.minibatch_size
        )));
    }

    let normalized = normalize_advantages(advantages);
    let (obs, samples) = training_samples(buffer, &normalized, targets);
    let obs_dim = config.obs_dim();

    if schedule.epochs == 0 {
        let (outputs, _) = forward(params, config, &obs)?;
        let summary = loss_breakdown(&outputs, &samples, coeffs)?;
        return Ok((params.clone(), adam.clone(), summary));
    }

    let mut params = params.clone();
    let mut adam = adam.clone();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut last_epoch = Vec::with_capacity(n / schedule.minibatch_size);
    let mut mb_obs = Vec::with_capacity(schedule.minibatch_size * obs_dim);
    let mut mb_data = Vec::with_capacity(schedule.minibatch_size);

    for epoch in 0..schedule.epochs {
        indices.shuffle(rng);
        last_epoch.clear();
        for chunk in indices.chunks(schedule.minibatch_size) {
            mb_obs.clear();
            mb_data.clear();
            for &i in chunk {
                mb_obs.extend_from_slice(&obs[i * obs_dim..(i + 1) * obs_dim]);
                mb_data.push(samples[i]);
            }
            let (breakdown, grads) =
                minibatch_gradient(&params, config, &mb_obs, &mb_data, coeffs).map_err(|e| match e {
                    Error::NonFinite(what) => Error::NonFinite(format!("{what} (epoch {epoch})")),
                    other => other,
                })?;
            let (next, next_adam) = adam_step(&params, &grads, &adam, schedule.lr)?;
            if !next.is_finite() {
                return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
            }
            params = next;
            adam = next_adam;
            last_epoch.push(breakdown);
        }
    }
    Ok((params, adam, LossBreakdown::mean(&last_epoch)))
}
